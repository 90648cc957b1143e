#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "pdeop/system.hpp"

namespace pdeop::bench {

enum class Method { Direct, Adjoint, Lmpc, Nmpc, Pdeop };

std::string to_string(Method m);
Method method_from_string(const std::string& name);

/// direct: voltage only; lmpc: heat only; nmpc: burgers only; adjoint, pdeop: all.
bool compatible(SystemKind system, Method method);

inline constexpr int kSchemaVersion = 1;

/// Key-value text config ("key = value" per line, '#' comments). Keys:
///   schema_version  must be 1 (required)
///   system          voltage | heat | burgers
///   method          direct | adjoint | lmpc | nmpc | pdeop
///   target          family name (sine, ramp, constant, parabola, zero) or a full
///                   profile such as "sine:1,0.2,0,6"
///   seed            integer
///   out             output directory for records and the ledger
///   artifacts       directory holding <system>/joint.ckpt for pdeop
///   horizon         N_p for receding-horizon methods
///   iterations      optimizer iteration cap (open-loop methods)
///   inner_iterations, nmpc_iterations   per-step caps in receding-horizon loops
///   gamma           effort weight override
///   grid.n, grid.steps, grid.final_time  grid overrides
///   label           free text carried into the record
struct ExperimentConfig {
    SystemKind system = SystemKind::Voltage;
    Method method = Method::Adjoint;
    std::string target = "sine";
    std::uint64_t seed = 0;
    std::filesystem::path out = "results";
    std::filesystem::path artifacts = "artifacts";
    int horizon = 10;
    int iterations = 100;
    int inner_iterations = 20;
    int nmpc_iterations = 50;
    std::optional<double> gamma;
    std::optional<int> grid_n;
    std::optional<int> grid_steps;
    std::optional<double> grid_final_time;
    std::string label;

    /// Throws ConfigError on an incompatible method/system or bad values.
    void validate() const;
    /// The system spec after overrides.
    SystemSpec system_spec() const;
    TargetProfile target_profile() const;
};

/// Parses and validates. Unknown keys, duplicates and missing schema_version are errors.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::filesystem::path& path);
/// Sorted "key = value" lines of every result-affecting field (out is excluded).
std::string canonical_text(const ExperimentConfig& cfg);
/// 16 hex digits of FNV-1a 64 over canonical_text.
std::string config_hash(const ExperimentConfig& cfg);
std::uint64_t fnv1a64(const std::string& bytes);

struct ResultRecord {
    std::string config_hash;
    std::string system;
    std::string method;
    std::string target;
    std::string label;
    std::uint64_t seed = 0;
    int horizon = 0;  // N_p for receding-horizon methods, 0 otherwise
    bool ok = true;
    std::string error;
    double mse = 0.0;
    double obj_total = 0.0;
    double obj_terminal = 0.0;
    double obj_running = 0.0;
    double obj_effort = 0.0;
    double wall_seconds = 0.0;
    long forward_solves = 0;
    long backward_solves = 0;
    long iterations = 0;
    std::string provenance;
    std::string timestamp;
    std::vector<double> x;
    std::vector<double> terminal;
    std::vector<double> target_values;
    std::vector<double> predicted_terminal;  // pdeop only
};

std::string to_json(const ResultRecord& r);
ResultRecord record_from_json(const std::string& text);

/// Build provenance: version plus the source revision when known.
std::string provenance();

/// Runs the method end to end. The wall time covers control synthesis only.
ResultRecord execute(const ExperimentConfig& cfg);

/// execute(), then writes <out>/records/<hash>.json and appends to <out>/ledger.csv.
ResultRecord run_experiment(const ExperimentConfig& cfg);

inline constexpr const char* kLedgerHeader =
    "timestamp,config_hash,system,method,target,mse,obj_terminal,obj_running,obj_effort,wall_s,"
    "forward_solves,backward_solves";

/// Appends one row under an exclusive file lock, writing the header for a new file.
void append_ledger(const std::filesystem::path& path, const ResultRecord& r);
std::string ledger_row(const ResultRecord& r);

struct LedgerRow {
    std::string timestamp;
    std::string config_hash;
    std::string system;
    std::string method;
    std::string target;
    double mse = 0.0;
    double obj_terminal = 0.0;
    double obj_running = 0.0;
    double obj_effort = 0.0;
    double wall_seconds = 0.0;
    long forward_solves = 0;
    long backward_solves = 0;
};

/// Parses a ledger; a wrong header or malformed row is a ConfigError.
std::vector<LedgerRow> read_ledger(const std::filesystem::path& path);

void write_record(const std::filesystem::path& path, const ResultRecord& r);

// ---------------------------------------------------------------------------
// Suites

/// Suite text: shared keys (same schema as ExperimentConfig, applied to every
/// run) followed by any number of "run = <system> <method> <target>" lines.
struct Suite {
    std::vector<ExperimentConfig> runs;
    std::filesystem::path out = "results";
};

Suite parse_suite(const std::string& text);
Suite load_suite(const std::filesystem::path& path);
/// Table-1 rows: (voltage: direct, adjoint, pdeop), (heat: lmpc, adjoint, pdeop),
/// (burgers: nmpc, adjoint, pdeop), all on the sine target.
Suite default_suite(const std::filesystem::path& out, const std::filesystem::path& artifacts);
/// default_suite plus the ramp/constant (voltage, heat) and parabola/zero (burgers) targets.
Suite full_suite(const std::filesystem::path& out, const std::filesystem::path& artifacts);

struct SuiteReport {
    std::vector<ResultRecord> records;  // in suite order; failed rows have ok = false
    std::filesystem::path table_csv;
    std::filesystem::path table_text;
    std::vector<std::filesystem::path> plots;
};

/// Runs every row in up to `jobs` forked workers; the parent is the only
/// ledger writer. Failures are recorded per row and the suite continues.
SuiteReport run_suite(const Suite& suite, int jobs = 1, bool plots = true);

/// Method x system table: system, target, method, wall_s, mse, forward, backward.
std::string table_csv(const std::vector<ResultRecord>& records);
std::string table_text(const std::vector<ResultRecord>& records);

// ---------------------------------------------------------------------------
// Plots (static SVG)

struct Series {
    std::string name;
    std::vector<double> x;
    std::vector<double> y;
    bool dashed = false;
};

std::string line_plot_svg(const std::string& title, const std::string& xlabel, const std::string& ylabel,
                          const std::vector<Series>& series);
/// Three panels: exact, predicted, |exact - predicted|; rows are time levels.
std::string heatmap_triptych_svg(const std::string& title, const Mat& exact, const Mat& predicted, double final_time,
                                 double length);

/// Terminal-profile overlays, one file per (system, target) group present in records.
std::vector<std::filesystem::path> write_overlay_plots(const std::filesystem::path& dir,
                                                       const std::vector<ResultRecord>& records);
/// Operator rollout vs the true solver on a held-out control, per available checkpoint.
std::vector<std::filesystem::path> write_operator_plots(const std::filesystem::path& dir,
                                                        const std::filesystem::path& artifacts,
                                                        const std::vector<SystemKind>& systems);

// ---------------------------------------------------------------------------
// Pipeline

struct PipelineOptions {
    std::filesystem::path artifacts = "artifacts";
    std::vector<SystemKind> systems{SystemKind::Voltage, SystemKind::Heat, SystemKind::Burgers};
    std::uint64_t seed = 0;
    bool force = false;
    int jobs = 1;
    /// Overrides for quick runs; 0 keeps the per-system default.
    int trajectories = 0;
    int operator_epochs = 0;
    int pdeop_epochs = 0;
    int tasks = 0;
    /// Stage selection; a disabled stage is skipped and its outputs are read from disk.
    bool run_dataset = true;
    bool run_operator = true;
    bool run_pdeop = true;
};

/// Default sizes per system (trajectories, epochs, lr, batch, tasks).
struct PipelineDefaults {
    int trajectories = 0;
    int operator_epochs = 0;
    double operator_lr = 0.0;
    int operator_batch = 0;
    int pdeop_epochs = 0;
    int tasks = 0;
    int pdeop_batch = 0;
    double pdeop_lr = 0.0;
    double pdeop_operator_lr = 0.0;
    int probe_period = 1;
};
PipelineDefaults pipeline_defaults(SystemKind kind);

struct StageReport {
    SystemKind system = SystemKind::Voltage;
    bool dataset_built = false;
    bool operator_trained = false;
    bool pdeop_trained = false;
    double dataset_seconds = 0.0;
    double operator_seconds = 0.0;
    double pdeop_seconds = 0.0;
};

/// Error raised by a pipeline stage; what() starts with "<system>/<stage>: ".
class StageError : public Error {
public:
    StageError(std::string stage, const std::string& what) : Error(stage + ": " + what), stage_(std::move(stage)) {}
    const std::string& stage() const noexcept { return stage_; }

private:
    std::string stage_;
};

/// dataset -> operator -> primal-dual training per system, writing
/// <artifacts>/<system>/{dataset/, operator.ckpt, controller.ckpt, joint.ckpt, *.csv}.
/// Existing artifacts are reused unless force is set. Stage errors carry the stage name.
std::vector<StageReport> generate_all(const PipelineOptions& opts);

std::filesystem::path artifact_dir(const std::filesystem::path& artifacts, SystemKind kind);

}  // namespace pdeop::bench
