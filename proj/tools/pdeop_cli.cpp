#include <cstdio>
#include <iostream>

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include "pdeop/bench.hpp"
#include "pdeop/io.hpp"
#include "pdeop/stochastic.hpp"

using namespace pdeop;

namespace {

std::vector<SystemKind> systems_from(const std::vector<std::string>& names) {
    std::vector<SystemKind> out;
    for (const auto& n : names) {
        if (n == "all") return {SystemKind::Voltage, SystemKind::Heat, SystemKind::Burgers};
        out.push_back(system_from_string(n));
    }
    return out;
}

struct PipelineFlags {
    std::vector<std::string> systems{"all"};
    std::string artifacts = "artifacts";
    std::uint64_t seed = 0;
    int jobs = 1;
    bool force = false;
    int trajectories = 0;
    int operator_epochs = 0;
    int pdeop_epochs = 0;
    int tasks = 0;
};

void add_pipeline_flags(CLI::App* app, PipelineFlags& f) {
    app->add_option("--system", f.systems, "voltage, heat, burgers or all")->delimiter(',');
    app->add_option("--out", f.artifacts, "artifact directory");
    app->add_option("--seed", f.seed, "base seed");
    app->add_option("--jobs", f.jobs, "worker threads for data generation")->check(CLI::PositiveNumber);
    app->add_flag("--force", f.force, "rebuild existing artifacts");
    app->add_option("--trajectories", f.trajectories, "dataset size override");
    app->add_option("--operator-epochs", f.operator_epochs, "operator epochs override");
    app->add_option("--pdeop-epochs", f.pdeop_epochs, "primal-dual epochs override");
    app->add_option("--tasks", f.tasks, "training task count override");
}

bench::PipelineOptions to_options(const PipelineFlags& f) {
    bench::PipelineOptions o;
    o.systems = systems_from(f.systems);
    o.artifacts = f.artifacts;
    o.seed = f.seed;
    o.jobs = f.jobs;
    o.force = f.force;
    o.trajectories = f.trajectories;
    o.operator_epochs = f.operator_epochs;
    o.pdeop_epochs = f.pdeop_epochs;
    o.tasks = f.tasks;
    return o;
}

void report(const std::vector<bench::StageReport>& reps) {
    for (const auto& r : reps)
        std::printf("%-8s dataset %s  operator %s  pdeop %s\n", to_string(r.system).c_str(),
                    r.dataset_built ? "built" : "kept", r.operator_trained ? "trained" : "kept",
                    r.pdeop_trained ? "trained" : "kept");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"PDE-constrained control laboratory"};
    app.require_subcommand(1);
    bool verbose = false;
    app.add_flag("-v,--verbose", verbose, "debug logging");

    // simulate
    auto* sim_cmd = app.add_subcommand("simulate", "roll out a system under a zero or random control");
    std::string sim_system = "heat";
    std::string sim_out = "simulate";
    std::uint64_t sim_seed = 0;
    bool sim_random = false;
    sim_cmd->add_option("--system", sim_system)->required();
    sim_cmd->add_option("--seed", sim_seed);
    sim_cmd->add_flag("--random", sim_random, "draw a GRF control instead of zero");
    sim_cmd->add_option("--out", sim_out);

    // pipeline stages
    PipelineFlags gen_f, op_f, pd_f, all_f;
    auto* gen_cmd = app.add_subcommand("gen-data", "generate training trajectories");
    add_pipeline_flags(gen_cmd, gen_f);
    auto* op_cmd = app.add_subcommand("train-operator", "supervised operator training");
    add_pipeline_flags(op_cmd, op_f);
    auto* pd_cmd = app.add_subcommand("train-pdeop", "primal-dual controller training");
    add_pipeline_flags(pd_cmd, pd_f);
    auto* all_cmd = app.add_subcommand("pipeline", "gen-data, train-operator and train-pdeop in order");
    add_pipeline_flags(all_cmd, all_f);

    // baseline
    auto* base_cmd = app.add_subcommand("baseline", "run one experiment");
    std::string base_config, base_system, base_method, base_target = "sine", base_out, base_artifacts;
    std::uint64_t base_seed = 0;
    base_cmd->add_option("--config", base_config, "experiment config file");
    base_cmd->add_option("--system", base_system);
    base_cmd->add_option("--method", base_method);
    base_cmd->add_option("--target", base_target);
    base_cmd->add_option("--seed", base_seed);
    base_cmd->add_option("--out", base_out, "result directory");
    base_cmd->add_option("--artifacts", base_artifacts, "checkpoint directory for pdeop");

    // bench
    auto* bench_cmd = app.add_subcommand("bench", "run a suite and emit the comparison table and plots");
    std::string bench_config, bench_out, bench_artifacts = "artifacts";
    int bench_jobs = 1;
    bool bench_full = false, bench_no_plots = false;
    bench_cmd->add_option("--config", bench_config, "suite file (default: the sine-target table)");
    bench_cmd->add_flag("--full", bench_full, "all targets instead of the sine-target table");
    bench_cmd->add_option("--jobs", bench_jobs, "parallel worker processes")->check(CLI::PositiveNumber);
    bench_cmd->add_option("--out", bench_out);
    bench_cmd->add_option("--artifacts", bench_artifacts);
    bench_cmd->add_flag("--no-plots", bench_no_plots);

    // plot
    auto* plot_cmd = app.add_subcommand("plot", "redraw plots from saved records");
    std::string plot_results = "results", plot_artifacts = "artifacts", plot_out;
    plot_cmd->add_option("--config", plot_results, "result directory holding records/");
    plot_cmd->add_option("--artifacts", plot_artifacts);
    plot_cmd->add_option("--out", plot_out, "plot directory (default <results>/plots)");

    CLI11_PARSE(app, argc, argv);
    spdlog::set_level(verbose ? spdlog::level::debug : spdlog::level::info);

    try {
        if (*sim_cmd) {
            const Simulator sim(default_system(system_from_string(sim_system)));
            Mat inputs = Mat::Zero(sim.grid().steps(), sim.spec().control_dim());
            if (sim_random) {
                stochastic::DatasetOptions d;
                d.count = 1;
                d.seed = sim_seed;
                d.bounds = sim.spec().bounds;
                d.kernel = stochastic::default_kernel(
                    sim.spec().static_control() ? sim.grid().length() : sim.grid().final_time(), d.bounds);
                const auto ds = sim.spec().static_control() ? stochastic::generate_static_control_dataset(sim, d)
                                                            : stochastic::generate_weight_trajectory_dataset(sim, d);
                inputs = ds.items.front().inputs;
            }
            const auto traj = sim.rollout(inputs);
            const auto path = std::filesystem::path(sim_out) / ("trajectory_" + sim_system + ".csv");
            io::write_trajectory_csv(path, traj);
            std::printf("wrote %s (terminal min %.4g max %.4g)\n", path.c_str(), traj.terminal().minCoeff(),
                        traj.terminal().maxCoeff());
            return 0;
        }
        if (*gen_cmd || *op_cmd || *pd_cmd || *all_cmd) {
            PipelineFlags& f = *gen_cmd ? gen_f : *op_cmd ? op_f : *pd_cmd ? pd_f : all_f;
            auto o = to_options(f);
            o.run_dataset = *gen_cmd || *all_cmd;
            o.run_operator = *op_cmd || *all_cmd;
            o.run_pdeop = *pd_cmd || *all_cmd;
            report(bench::generate_all(o));
            return 0;
        }
        if (*base_cmd) {
            bench::ExperimentConfig cfg;
            if (!base_config.empty()) {
                cfg = bench::load_config(base_config);
            } else {
                if (base_system.empty() || base_method.empty())
                    throw ConfigError("baseline needs --config or both --system and --method");
                cfg.system = system_from_string(base_system);
                cfg.method = bench::method_from_string(base_method);
                cfg.target = base_target;
                cfg.seed = base_seed;
            }
            if (!base_out.empty()) cfg.out = base_out;
            if (!base_artifacts.empty()) cfg.artifacts = base_artifacts;
            cfg.validate();
            const auto r = bench::run_experiment(cfg);
            std::printf("%s %s %s  mse %.6e  wall %.4f s  forward %ld  backward %ld  hash %s\n", r.system.c_str(),
                        r.method.c_str(), r.target.c_str(), r.mse, r.wall_seconds, r.forward_solves,
                        r.backward_solves, r.config_hash.c_str());
            return 0;
        }
        if (*bench_cmd) {
            bench::Suite suite;
            if (!bench_config.empty()) suite = bench::load_suite(bench_config);
            else if (bench_full) suite = bench::full_suite("results", bench_artifacts);
            else suite = bench::default_suite("results", bench_artifacts);
            if (!bench_out.empty()) {
                suite.out = bench_out;
                for (auto& c : suite.runs) c.out = bench_out;
            }
            const auto rep = bench::run_suite(suite, bench_jobs, !bench_no_plots);
            std::cout << bench::table_text(rep.records);
            std::printf("table: %s\n", rep.table_csv.c_str());
            for (const auto& p : rep.plots) std::printf("plot: %s\n", p.c_str());
            return 0;
        }
        if (*plot_cmd) {
            const std::filesystem::path results = plot_results;
            const std::filesystem::path dir = plot_out.empty() ? results / "plots" : std::filesystem::path(plot_out);
            std::vector<bench::ResultRecord> records;
            if (std::filesystem::exists(results / "records"))
                for (const auto& e : std::filesystem::directory_iterator(results / "records"))
                    if (e.path().extension() == ".json")
                        records.push_back(bench::record_from_json(io::read_text(e.path())));
            auto plots = bench::write_overlay_plots(dir, records);
            auto more = bench::write_operator_plots(dir, plot_artifacts,
                                                    {SystemKind::Voltage, SystemKind::Heat, SystemKind::Burgers});
            plots.insert(plots.end(), more.begin(), more.end());
            for (const auto& p : plots) std::printf("plot: %s\n", p.c_str());
            return 0;
        }
    } catch (const std::exception& e) {
        spdlog::error("{}", e.what());
        return 1;
    }
    return 0;
}
