#include <algorithm>
#include <chrono>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>

#include <spdlog/spdlog.h>

#include "pdeop/nn.hpp"

namespace pdeop::nn {

RolloutTape closed_loop_rollout(Tape& tape, Controller& controller, const StepFn& step, Var y0, Var target,
                                int steps) {
    if (steps < 1) throw ConfigError("closed-loop rollout needs at least one step");
    if (y0.rows() != target.rows() || y0.cols() != target.cols())
        throw DimensionError("initial state and target batches differ");
    RolloutTape r;
    r.static_control = !controller.recurrent();
    r.states.push_back(y0);
    std::vector<Var> hidden;
    if (controller.recurrent()) {
        hidden = controller.initial_state(tape, y0.rows());
    } else {
        r.controls.push_back(controller.forward_static(tape, y0, target));
        ++r.controller_calls;
    }
    for (int k = 0; k < steps; ++k) {
        Var c;
        if (controller.recurrent()) {
            c = controller.forward_recurrent(tape, r.states.back(), target, hidden);
            r.controls.push_back(c);
            ++r.controller_calls;
        } else {
            c = r.controls.front();
        }
        Var next = step(tape, r.states.back(), c);
        ++r.operator_calls;
        if (!next.value().allFinite())
            throw NumericalError("closed-loop state became non-finite at step " + std::to_string(k + 1));
        r.states.push_back(next);
    }
    return r;
}

RolloutTape closed_loop_rollout(Tape& tape, Controller& controller, OperatorNet& op, Var y0, Var target,
                                int steps) {
    return closed_loop_rollout(
        tape, controller, [&op](Tape& t, Var y, Var c) { return op.step(t, y, c); }, y0, target, steps);
}

Var objective_on_tape(Tape&, const RolloutTape& roll, Var target, const SpaceTimeGrid& grid,
                      const ObjectiveWeights& weights) {
    const int N = static_cast<int>(roll.states.size()) - 1;
    if (N != grid.steps()) throw DimensionError("rollout length does not match the time grid");
    const double inv_b = 1.0 / double(target.rows());
    const double dx = grid.dx(), dt = grid.dt();
    Var total = scale(sum_squares(sub(roll.states.back(), target)), dx * inv_b);
    if (weights.running > 0.0) {
        Var run = sum_squares(sub(roll.states[0], target));
        for (int k = 1; k < N; ++k) run = add(run, sum_squares(sub(roll.states[k], target)));
        total = add(total, scale(run, weights.running * dx * dt * inv_b));
    }
    if (weights.effort > 0.0) {
        Var eff = sum_squares(roll.controls[0]);
        for (std::size_t k = 1; k < roll.controls.size(); ++k) eff = add(eff, sum_squares(roll.controls[k]));
        total = add(total, scale(eff, weights.effort * (roll.static_control ? dx : dt) * inv_b));
    }
    return total;
}

LagrangeState default_lagrange_state(double initial) {
    LagrangeState s;
    s.equality = Vec::Constant(2, initial);
    s.inequality = Vec::Constant(1, initial);
    return s;
}

Var pdeop_loss(Tape&, Var objective, const Violations& v, const LagrangeState& lambda) {
    if (v.equality.size() != std::size_t(lambda.equality.size()) ||
        v.inequality.size() != std::size_t(lambda.inequality.size()))
        throw DimensionError("violation groups do not match multiplier vectors");
    Var loss = objective;
    for (std::size_t i = 0; i < v.equality.size(); ++i)
        loss = add(loss, scale(v.equality[i], lambda.equality[Eigen::Index(i)]));
    for (std::size_t i = 0; i < v.inequality.size(); ++i)
        loss = add(loss, scale(v.inequality[i], lambda.inequality[Eigen::Index(i)]));
    return loss;
}

LagrangeState lagrange_update(const LagrangeState& state, const Vec& equality, const Vec& inequality) {
    if (equality.size() != state.equality.size() || inequality.size() != state.inequality.size())
        throw DimensionError("violation vectors do not match multiplier vectors");
    if (!equality.allFinite() || !inequality.allFinite() || (equality.array() < 0.0).any() ||
        (inequality.array() < 0.0).any())
        throw ContractError("violation measures must be finite and non-negative");
    LagrangeState out = state;
    out.equality += state.rho * equality;
    out.inequality += state.rho * inequality;
    return out;
}

Var bound_violation(Tape&, const RolloutTape& roll, const BoxBounds& bounds) {
    Var acc;
    for (std::size_t k = 0; k < roll.controls.size(); ++k) {
        Var c = roll.controls[k];
        Var slack = add(hinge(add_scalar(c, -bounds.upper)), hinge(add_scalar(scale(c, -1.0), bounds.lower)));
        Var m = mean(slack);
        acc = k == 0 ? m : add(acc, m);
    }
    return scale(acc, 1.0 / double(roll.controls.size()));
}

std::vector<ControlTask> sample_control_tasks(const SystemSpec& spec, int count, std::uint64_t seed) {
    if (count < 0) throw ConfigError("task count must be non-negative");
    std::mt19937_64 rng(stochastic::mix_seed(seed, 0x7a5c));
    auto U = [&rng](double a, double b) { return std::uniform_real_distribution<double>(a, b)(rng); };
    std::vector<ControlTask> out;
    for (int i = 0; i < count; ++i) {
        TargetProfile p = TargetProfile::constant(0.0);
        const int family = i % 3;
        switch (spec.kind) {
            case SystemKind::Voltage:
                if (family == 0) p = TargetProfile::sine(U(0.8, 1.2), U(0.05, 0.3), 0.0, U(3.0, 8.0));
                else if (family == 1) p = TargetProfile::ramp(U(-1.0, 1.0), U(0.5, 1.2));
                else p = TargetProfile::constant(U(0.5, 1.5));
                break;
            case SystemKind::Heat:
                if (family == 0) p = TargetProfile::sine(U(0.4, 0.8), U(0.1, 0.4), 0.0, U(1.0, 3.0));
                else if (family == 1) p = TargetProfile::ramp(U(-0.5, 1.2), U(0.2, 0.8));
                else p = TargetProfile::constant(U(0.2, 1.2));
                break;
            case SystemKind::Burgers:
                if (family == 0) p = TargetProfile::sine(0.0, U(0.1, 1.0), 0.0, std::numbers::pi);
                else if (family == 1) p = TargetProfile::parabola(U(0.3, 3.0));
                else p = TargetProfile::constant(0.0);
                break;
        }
        out.push_back({spec.initial_state, p.evaluate(spec.grid)});
    }
    return out;
}

namespace {

// One true-solver step per row; a failed Burgers solve leaves the row's residual at zero.
Mat true_steps(const Simulator& sim, const Mat& y, const Mat& c, const Mat& fallback) {
    Mat out(y.rows(), y.cols());
    for (Eigen::Index b = 0; b < y.rows(); ++b) {
        try {
            out.row(b) = sim.step(y.row(b).transpose(), c.row(b).transpose()).transpose();
        } catch (const SolverError& e) {
            spdlog::warn("probe step failed ({}); residual for this sample dropped", e.what());
            out.row(b) = fallback.row(b);
        }
    }
    return out;
}

}  // namespace

PdeopHistory train_pdeop(Controller& controller, OperatorNet& op, const Simulator& sim,
                         const std::vector<ControlTask>& tasks, LagrangeState& lambda, const PdeopOptions& opts) {
    if (tasks.empty()) throw ConfigError("train_pdeop needs at least one task");
    if (opts.epochs < 1 || opts.batch < 1) throw ConfigError("bad PDE-OP training options");
    const auto& spec = sim.spec();
    const int n = spec.grid.n();
    const int N = spec.grid.steps();
    for (const auto& t : tasks)
        if (t.y0.size() != n || t.target.size() != n) throw DimensionError("task vectors do not match the grid");
    if (lambda.equality.size() != 2 || lambda.inequality.size() != 1)
        throw DimensionError("train_pdeop expects 2 equality and 1 inequality multipliers");

    const auto t0 = std::chrono::steady_clock::now();
    AdamW opt_c(controller.parameters(), {opts.lr, 0.9, 0.999, 1e-8, opts.weight_decay, opts.clip_norm});
    AdamW opt_o(op.parameters(), {opts.operator_lr, 0.9, 0.999, 1e-8, 0.0, opts.clip_norm});

    std::vector<std::size_t> order(tasks.size());
    std::iota(order.begin(), order.end(), std::size_t(0));
    std::mt19937_64 rng(stochastic::mix_seed(opts.seed, 0x9d0e));
    const long batches = long((tasks.size() + opts.batch - 1) / opts.batch);
    const long total = batches * opts.epochs;
    long it = 0;

    PdeopHistory hist;
    for (int epoch = 0; epoch < opts.epochs; ++epoch) {
        const bool probed = epoch == 0 || epoch == opts.epochs - 1 ||
                            (opts.probe_period > 0 && epoch % opts.probe_period == 0);
        std::shuffle(order.begin(), order.end(), rng);
        PdeopEpoch rec;
        rec.epoch = epoch;
        rec.probed = probed;
        double weight_sum = 0.0;
        for (long b = 0; b < batches; ++b) {
            const std::size_t lo = std::size_t(b) * opts.batch;
            const std::size_t hi = std::min(tasks.size(), lo + std::size_t(opts.batch));
            const Eigen::Index B = Eigen::Index(hi - lo);
            Mat Y0(B, n), T(B, n);
            for (std::size_t i = lo; i < hi; ++i) {
                Y0.row(Eigen::Index(i - lo)) = tasks[order[i]].y0.transpose();
                T.row(Eigen::Index(i - lo)) = tasks[order[i]].target.transpose();
            }
            Tape tape;
            Var y0 = tape.constant(Y0);
            Var tgt = tape.constant(T);
            RolloutTape roll = closed_loop_rollout(tape, controller, op, y0, tgt, N);
            Var J = objective_on_tape(tape, roll, tgt, spec.grid, spec.objective);

            Violations v;
            if (probed) {
                Var dyn;
                for (int k = 0; k < N; ++k) {
                    const Var c = controller.recurrent() ? roll.controls[k] : roll.controls[0];
                    const Mat ref = true_steps(sim, roll.states[k].value(), c.value(), roll.states[k + 1].value());
                    Var m = mean(abs(sub(roll.states[k + 1], tape.constant(ref))));
                    dyn = k == 0 ? m : add(dyn, m);
                }
                v.equality.push_back(scale(dyn, 1.0 / N));
            } else {
                v.equality.push_back(tape.constant(Mat::Zero(1, 1)));
            }
            v.equality.push_back(mean(abs(sub(roll.states[0], y0))));
            v.inequality.push_back(bound_violation(tape, roll, spec.bounds));
            Var loss = pdeop_loss(tape, J, v, lambda);

            const double lv = loss.scalar();
            if (!std::isfinite(lv) || lv > opts.divergence) {
                hist.aborted = true;
                hist.abort_reason = "loss " + std::to_string(lv) + " at epoch " + std::to_string(epoch) +
                                    ", batch " + std::to_string(b);
                hist.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
                op.prepare_inference();
                return hist;
            }
            const double f = cosine_lr(1.0, it++, total);
            opt_c.zero_grad();
            opt_o.zero_grad();
            if (!opts.split_updates) {
                tape.backward(loss);
                tape.accumulate_param_grads();
                opt_c.step(opts.lr * f);
                if (opts.joint) opt_o.step(opts.operator_lr * f);
            } else {
                // controller: everything but the dynamics term; operator: only the dynamics term
                Violations vc = v;
                vc.equality[0] = tape.constant(Mat::Zero(1, 1));
                tape.backward(pdeop_loss(tape, J, vc, lambda));
                tape.accumulate_param_grads();
                opt_c.step(opts.lr * f);
                if (opts.joint && probed) {
                    opt_o.zero_grad();
                    tape.backward(scale(v.equality[0], lambda.equality[0]));
                    tape.accumulate_param_grads();
                    opt_o.step(opts.operator_lr * f);
                }
            }

            const double w = double(B);
            weight_sum += w;
            rec.loss += w * lv;
            rec.objective += w * J.scalar();
            rec.dynamics_violation += w * v.equality[0].scalar();
            rec.initial_violation += w * v.equality[1].scalar();
            rec.bound_violation += w * v.inequality[0].scalar();
        }
        rec.loss /= weight_sum;
        rec.objective /= weight_sum;
        rec.dynamics_violation /= weight_sum;
        rec.initial_violation /= weight_sum;
        rec.bound_violation /= weight_sum;
        Vec eq(2), ineq(1);
        eq << (probed ? rec.dynamics_violation : 0.0), rec.initial_violation;
        ineq << rec.bound_violation;
        lambda = lagrange_update(lambda, eq, ineq);
        rec.lambda_equality = lambda.equality;
        rec.lambda_inequality = lambda.inequality;
        hist.epochs.push_back(rec);
        spdlog::debug("pdeop epoch {} loss {:.4e} J {:.4e} |h'| {:.3e}{}", epoch, rec.loss, rec.objective,
                      rec.dynamics_violation, probed ? " (probe)" : "");
    }
    op.prepare_inference();
    hist.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return hist;
}

Synthesis synthesize(const Controller& controller, const OperatorNet& op, const Vec& y0, const Vec& target,
                     int steps) {
    if (steps < 1) throw ConfigError("synthesis needs at least one step");
    const auto t0 = std::chrono::steady_clock::now();
    const int n = static_cast<int>(y0.size());
    const int m = controller.config().m;
    Synthesis s;
    s.inputs.resize(steps, m);
    s.predicted_states.resize(steps + 1, n);
    Mat y = y0.transpose();
    const Mat tgt = target.transpose();
    s.predicted_states.row(0) = y;
    if (!controller.recurrent()) {
        const Mat u = controller.eval_static(y, tgt);
        for (int k = 0; k < steps; ++k) {
            s.inputs.row(k) = u;
            y = op.eval_step(y, u);
            s.predicted_states.row(k + 1) = y;
        }
    } else {
        auto state = std::vector<Mat>(controller.config().recurrent_layers,
                                      Mat::Zero(1, controller.config().recurrent_hidden));
        for (int k = 0; k < steps; ++k) {
            const Mat c = controller.eval_recurrent(y, tgt, state);
            s.inputs.row(k) = c;
            y = op.eval_step(y, c);
            s.predicted_states.row(k + 1) = y;
        }
    }
    s.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (!s.predicted_states.allFinite()) throw NumericalError("synthesis produced non-finite states");
    return s;
}

GradCheckResult tape_gradient_check(const std::function<Var(Tape&)>& loss, const std::vector<ParamBlock*>& params,
                                    int coordinates, std::uint64_t seed, double h) {
    for (auto* p : params) p->zero_grad();
    {
        Tape tape;
        Var out = loss(tape);
        tape.backward(out);
        tape.accumulate_param_grads();
    }
    std::vector<std::pair<std::size_t, Eigen::Index>> all;
    for (std::size_t i = 0; i < params.size(); ++i)
        for (Eigen::Index j = 0; j < params[i]->value.size(); ++j) all.emplace_back(i, j);
    std::mt19937_64 rng(seed);
    std::shuffle(all.begin(), all.end(), rng);
    all.resize(std::min<std::size_t>(all.size(), std::size_t(std::max(coordinates, 0))));

    auto eval = [&]() {
        Tape tape;
        return loss(tape).scalar();
    };
    double diff = 0.0, ref = 0.0;
    for (auto [i, j] : all) {
        double& x = params[i]->value.data()[j];
        const double orig = x;
        x = orig + h;
        const double fp = eval();
        x = orig - h;
        const double fm = eval();
        x = orig;
        const double fd = (fp - fm) / (2.0 * h);
        const double g = params[i]->grad.data()[j];
        diff = std::max(diff, std::abs(g - fd));
        ref = std::max(ref, std::abs(fd));
    }
    GradCheckResult r;
    r.coordinates = static_cast<int>(all.size());
    r.max_rel_error = ref > 0.0 ? diff / ref : diff;
    return r;
}

}  // namespace pdeop::nn
