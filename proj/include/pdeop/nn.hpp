#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "pdeop/stochastic.hpp"
#include "pdeop/system.hpp"
#include "pdeop/tape.hpp"

namespace pdeop::nn {

/// Multilayer perceptron; activation after every layer except the last.
class DenseNet {
public:
    DenseNet() = default;
    DenseNet(std::vector<int> sizes, Activation act, std::uint64_t seed, const std::string& prefix = "dense");

    Var forward(Tape& tape, Var x);
    Mat eval(const Mat& x) const;

    const std::vector<int>& sizes() const noexcept { return sizes_; }
    Activation activation() const noexcept { return act_; }
    int input_dim() const { return sizes_.front(); }
    int output_dim() const { return sizes_.back(); }
    std::vector<ParamBlock*> parameters();
    long parameter_count() const;
    /// Zeroes the final weight and bias.
    void zero_last_layer();

private:
    std::vector<int> sizes_;
    Activation act_ = Activation::Relu;
    std::vector<ParamBlock> weights_;
    std::vector<ParamBlock> biases_;
};

/// Stacked gated recurrent cell (GRU gates). Each layer keeps a batch x hidden state:
///   z = s(x Wz + h Uz + b), r = s(x Wr + h Ur + b'), n = tanh(x Wn + r (h Un + b'')),
///   h' = n + z (h - n).
class RecurrentCell {
public:
    RecurrentCell() = default;
    RecurrentCell(int input, int hidden, int layers, std::uint64_t seed, const std::string& prefix = "gru");

    /// One step for every layer; returns the new per-layer states (last = output).
    std::vector<Var> step(Tape& tape, Var x, const std::vector<Var>& state);
    std::vector<Mat> eval_step(const Mat& x, const std::vector<Mat>& state) const;
    std::vector<Mat> zero_state(Eigen::Index batch) const;

    int input_dim() const noexcept { return input_; }
    int hidden_dim() const noexcept { return hidden_; }
    int layers() const noexcept { return layers_; }
    std::vector<ParamBlock*> parameters();
    long parameter_count() const;

private:
    int input_ = 0;
    int hidden_ = 0;
    int layers_ = 0;
    // per layer: W (in x 3H), U (H x 3H), bx (1 x 3H), bh (1 x 3H)
    std::vector<ParamBlock> params_;
};

struct OperatorConfig {
    int n = 0;  // grid points (trunk queries, state length)
    int m = 0;  // control length per step
    std::vector<int> branch_hidden{128, 128, 128};
    std::vector<int> trunk_hidden{128, 128, 128};
    int features = 64;
    Activation activation = Activation::Relu;
    bool residual = true;
};

/// Discrete-time branch/trunk operator:
///   yhat_{k+1}(x_i) = [y_k(x_i)] + s * sum_j b_j(y_k, c_k) g_j(x_i)
/// with the bracket and s only in residual mode. Branch inputs are normalized
/// by fixed column statistics.
class OperatorNet {
public:
    OperatorNet() = default;
    OperatorNet(const OperatorConfig& cfg, const Vec& coordinates, std::uint64_t seed);

    Var step(Tape& tape, Var y, Var c);
    /// Tape-free step for a batch. Trunk features are cached on first use;
    /// prepare_inference() must be called after parameters change.
    Mat eval_step(const Mat& y, const Mat& c) const;
    /// Recompute trunk features for eval_step; call after changing parameters.
    void prepare_inference();

    /// Column statistics of (y, c) and RMS of y_{k+1} - y_k.
    void fit_normalization(const stochastic::OneStepBatch& data);

    const OperatorConfig& config() const noexcept { return cfg_; }
    const Vec& coordinates() const noexcept { return coords_; }
    DenseNet& branch() noexcept { return branch_; }
    DenseNet& trunk() noexcept { return trunk_; }
    const Mat& input_shift() const noexcept { return shift_; }
    const Mat& input_inv_scale() const noexcept { return inv_scale_; }
    double output_scale() const noexcept { return out_scale_; }
    void set_normalization(Mat shift, Mat inv_scale, double out_scale);
    Mat trunk_features() const;

    std::vector<ParamBlock*> parameters();
    long parameter_count() const;

private:
    OperatorConfig cfg_;
    Vec coords_;
    DenseNet branch_;
    DenseNet trunk_;
    Mat shift_;
    Mat inv_scale_;
    double out_scale_ = 1.0;
    mutable Mat trunk_cache_;
};

struct ControllerConfig {
    bool recurrent = false;
    int n = 0;  // state length
    int m = 0;  // output length: n for static fields, M for basis weights
    std::vector<int> hidden{128, 128};  // static net, or recurrent head hidden layers
    int recurrent_hidden = 128;
    int recurrent_layers = 2;
    Activation activation = Activation::Relu;
    BoxBounds bounds;
    bool squash = true;
};

/// Surrogate controller (y_k, y_target) -> c_k. Outputs pass through
/// lo + (hi - lo) * sigmoid(.) so bounds hold by construction.
class Controller {
public:
    Controller() = default;
    Controller(const ControllerConfig& cfg, std::uint64_t seed);

    bool recurrent() const noexcept { return cfg_.recurrent; }
    const ControllerConfig& config() const noexcept { return cfg_; }

    Var forward_static(Tape& tape, Var y, Var target);
    /// One recurrent step; `state` is threaded by the caller and updated in place.
    Var forward_recurrent(Tape& tape, Var y, Var target, std::vector<Var>& state);
    std::vector<Var> initial_state(Tape& tape, Eigen::Index batch) const;

    Mat eval_static(const Mat& y, const Mat& target) const;
    Mat eval_recurrent(const Mat& y, const Mat& target, std::vector<Mat>& state) const;

    DenseNet& head() noexcept { return head_; }
    RecurrentCell& cell() noexcept { return cell_; }
    std::vector<ParamBlock*> parameters();
    long parameter_count() const;

private:
    Var bound(Var raw) const;
    Mat bound(const Mat& raw) const;

    ControllerConfig cfg_;
    RecurrentCell cell_;
    DenseNet head_;  // the whole network in the static case
};

// ---------------------------------------------------------------------------
// Optimization

struct AdamWOptions {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.0;
    double clip_norm = 0.0;  // global gradient-norm clip, 0 = off
};

/// AdamW with decoupled weight decay; moments live in the optimizer.
class AdamW {
public:
    AdamW(std::vector<ParamBlock*> params, AdamWOptions opts);

    void zero_grad();
    /// Returns the (pre-clip) global gradient norm.
    double step(double lr);
    long steps() const noexcept { return t_; }

private:
    std::vector<ParamBlock*> params_;
    AdamWOptions opts_;
    std::vector<Mat> m_;
    std::vector<Mat> v_;
    long t_ = 0;
};

/// Cosine decay from base to floor_fraction * base over total steps.
double cosine_lr(double base, long step, long total, double floor_fraction = 0.02);

// ---------------------------------------------------------------------------
// Operator training

struct OperatorTrainOptions {
    int epochs = 100;
    double lr = 1e-3;
    int batch = 64;
    std::uint64_t seed = 0;
    double weight_decay = 1e-5;
    double clip_norm = 1.0;
    /// Samples used for the end-of-epoch train loss evaluation.
    int train_eval_samples = 4096;
    /// Std of Gaussian noise added to input states (targets unchanged), in
    /// units of the RMS one-step increment; 0 = off.
    double input_noise = 0.0;
};

struct OperatorEpoch {
    int epoch = 0;
    double train_loss = 0.0;
    double validation_loss = 0.0;
    double lr = 0.0;
};

struct OperatorTrainReport {
    std::vector<OperatorEpoch> history;
    double initial_train_loss = 0.0;
    double initial_validation_loss = 0.0;
    int best_epoch = -1;
    double best_validation_loss = 0.0;
    double wall_seconds = 0.0;
};

/// Mean squared one-step error over a batch (tape-free).
double one_step_mse(const OperatorNet& net, const stochastic::OneStepBatch& data);

/// Supervised one-step training; returns with the best-validation parameters loaded.
OperatorTrainReport train_operator(OperatorNet& net, const stochastic::OneStepBatch& train,
                                   const stochastic::OneStepBatch& validation, const OperatorTrainOptions& opts);
/// Uses the dataset's train/validation splits and fits normalization first.
OperatorTrainReport train_operator(OperatorNet& net, const stochastic::Dataset& data,
                                   const OperatorTrainOptions& opts);

/// Default architecture for a system (activation, sizes, residual mode).
OperatorConfig default_operator_config(const SystemSpec& spec);
ControllerConfig default_controller_config(const SystemSpec& spec);

// ---------------------------------------------------------------------------
// Closed loop and the primal-dual objective

using StepFn = std::function<Var(Tape&, Var y, Var c)>;

struct RolloutTape {
    std::vector<Var> states;    // yhat_0 .. yhat_N
    std::vector<Var> controls;  // c_0 .. c_{N-1}; a single entry for static controls
    bool static_control = false;
    int controller_calls = 0;
    int operator_calls = 0;
};

/// Alternates controller and operator steps from t_0 to T on the tape.
RolloutTape closed_loop_rollout(Tape& tape, Controller& controller, const StepFn& step, Var y0, Var target,
                                int steps);
RolloutTape closed_loop_rollout(Tape& tape, Controller& controller, OperatorNet& op, Var y0, Var target,
                                int steps);

/// Batch-mean objective with the objective_value() conventions.
Var objective_on_tape(Tape& tape, const RolloutTape& roll, Var target, const SpaceTimeGrid& grid,
                      const ObjectiveWeights& weights);

struct LagrangeState {
    Vec equality;    // lambda_h', one per relaxed equality group
    Vec inequality;  // lambda_g, one per inequality group
    double rho = 0.05;
};

/// Groups used by train_pdeop: equality = {dynamics, initial condition}, inequality = {bounds}.
LagrangeState default_lagrange_state(double initial = 1.0);

struct Violations {
    std::vector<Var> equality;    // scalar |h'| measures
    std::vector<Var> inequality;  // scalar max(0, g) measures
};

/// J + lambda_h'^T |h'| + lambda_g^T max(0, g).
Var pdeop_loss(Tape& tape, Var objective, const Violations& v, const LagrangeState& lambda);

/// lambda += rho * violation, elementwise. Negative or non-finite entries are a ContractError.
LagrangeState lagrange_update(const LagrangeState& state, const Vec& equality, const Vec& inequality);

/// Mean bound slack max(0, c - hi) + max(0, lo - c) over all controls.
Var bound_violation(Tape& tape, const RolloutTape& roll, const BoxBounds& bounds);

struct ControlTask {
    Vec y0;
    Vec target;
};

/// Targets drawn from the system's profile families with randomized parameters.
std::vector<ControlTask> sample_control_tasks(const SystemSpec& spec, int count, std::uint64_t seed);

struct PdeopOptions {
    int epochs = 60;
    int batch = 16;
    double lr = 1e-3;
    double operator_lr = 1e-4;
    bool joint = true;  // false freezes the operator after supervised init
    // Controller steps on J plus the initial and bound terms, the operator
    // only on the weighted dynamics residual (probe epochs).
    bool split_updates = false;
    int probe_period = 5;
    double weight_decay = 1e-5;
    double clip_norm = 1.0;
    double divergence = 1e6;
    std::uint64_t seed = 0;
};

struct PdeopEpoch {
    int epoch = 0;
    double loss = 0.0;
    double objective = 0.0;
    bool probed = false;
    double dynamics_violation = 0.0;  // mean |yhat_{k+1} - TrueStep(yhat_k, c_k)|, probed epochs
    double initial_violation = 0.0;
    double bound_violation = 0.0;
    Vec lambda_equality;
    Vec lambda_inequality;
};

struct PdeopHistory {
    std::vector<PdeopEpoch> epochs;
    bool aborted = false;
    std::string abort_reason;
    double wall_seconds = 0.0;
};

/// Primal-dual training. Each epoch: rollout -> loss -> AdamW step on the
/// controller (and the operator when joint) per minibatch; on probe epochs
/// (first, every probe_period, last) the dynamics residual against the true
/// solver enters the loss and the multipliers are updated from its measurement.
PdeopHistory train_pdeop(Controller& controller, OperatorNet& op, const Simulator& sim,
                         const std::vector<ControlTask>& tasks, LagrangeState& lambda, const PdeopOptions& opts);

// ---------------------------------------------------------------------------
// Inference

struct Synthesis {
    Mat inputs;            // per-step inputs the true solver consumes (steps x dim)
    Mat predicted_states;  // (steps + 1) x n from the operator
    double wall_seconds = 0.0;
};

/// Tape-free controller/operator loop from y0 (batch of one).
Synthesis synthesize(const Controller& controller, const OperatorNet& op, const Vec& y0, const Vec& target,
                     int steps);

// ---------------------------------------------------------------------------
// Gradient check

struct GradCheckResult {
    double max_rel_error = 0.0;  // ||g_tape - g_fd||_inf / ||g_fd||_inf over the checked coordinates
    int coordinates = 0;
};

/// Central differences on a random subset of parameter entries of the
/// scalar built by `loss` on a fresh tape.
GradCheckResult tape_gradient_check(const std::function<Var(Tape&)>& loss, const std::vector<ParamBlock*>& params,
                                    int coordinates = 64, std::uint64_t seed = 0, double h = 1e-6);

// ---------------------------------------------------------------------------
// Persistence

/// Binary: "PDOPCKPT", u32 version, u64 + architecture JSON, u32 block count,
/// blocks (u32 + name, u64 rows, u64 cols, f64 data), u64 + metadata JSON.
void save_operator(const std::filesystem::path& path, OperatorNet& net, const std::string& metadata_json = "{}");
OperatorNet load_operator(const std::filesystem::path& path, std::string* metadata_json = nullptr);
void save_controller(const std::filesystem::path& path, Controller& ctrl, const std::string& metadata_json = "{}");
Controller load_controller(const std::filesystem::path& path, std::string* metadata_json = nullptr);
/// Controller and operator together.
void save_joint(const std::filesystem::path& path, Controller& ctrl, OperatorNet& net,
                const std::string& metadata_json = "{}");
void load_joint(const std::filesystem::path& path, Controller& ctrl, OperatorNet& net,
                std::string* metadata_json = nullptr);

void write_operator_history_csv(const std::filesystem::path& path, const OperatorTrainReport& report);
void write_pdeop_history_csv(const std::filesystem::path& path, const PdeopHistory& history);

}  // namespace pdeop::nn
