#include <chrono>
#include <map>

#include "pdeop/control.hpp"

namespace pdeop::control {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

Gradient horizon_gradient(const Simulator& sim, const Vec& y, const Mat& inputs, const Vec& target,
                          const MpcConfig& cfg, SolveCounter* counter) {
    return sim.linear() ? linear_horizon_gradient(sim, y, inputs, target, cfg, counter)
                        : burgers_horizon_gradient(sim, y, inputs, target, cfg, counter);
}

// Drops the first row and repeats the last to fill `rows`.
Mat shift_plan(const Mat& plan, int rows) {
    Mat next(rows, plan.cols());
    for (int i = 0; i < rows; ++i) next.row(i) = plan.row(std::min<Eigen::Index>(i + 1, plan.rows() - 1));
    return next;
}

ClosedLoopResult finish(const Simulator& sim, Mat applied, Mat states, const Vec& target, SolveCounter counter,
                        long inner, Clock::time_point t0) {
    ClosedLoopResult r{std::move(applied), StateTrajectory(std::move(states), sim.grid()), counter, inner, 0.0, 0.0};
    r.wall_seconds = seconds_since(t0);
    r.terminal_mse = terminal_mse(r.trajectory.terminal(), target);
    return r;
}

ClosedLoopResult receding(const Simulator& sim, const Vec& y0, const Vec& target, const MpcConfig& cfg,
                          int iterations) {
    const auto t0 = Clock::now();
    const int n_steps = sim.grid().steps();
    const int m = sim.spec().control_dim();
    cfg.validate(sim.grid().n(), m);
    SolveCounter counter;
    long inner = 0;
    Mat applied(n_steps, m);
    Mat states(n_steps + 1, sim.grid().n());
    states.row(0) = y0.transpose();
    Vec y = y0;
    Mat plan = Mat::Zero(std::min(cfg.horizon, n_steps), m);
    optim::QnOptions qn = cfg.qn;
    qn.max_iterations = iterations;
    for (int k = 0; k < n_steps; ++k) {
        const int h = std::min(cfg.horizon, n_steps - k);
        if (k > 0) plan = shift_plan(plan, h);
        auto fg = [&](const Vec& flat, Vec& grad) {
            auto r = horizon_gradient(sim, y, unflatten_inputs(flat, m), target, cfg, &counter);
            grad = std::move(r.gradient);
            return r.value;
        };
        auto res = optim::qn_minimize_box(fg, flatten_inputs(plan), optim::Box::uniform(h * m, cfg.bounds), qn);
        inner += res.iterations;
        plan = unflatten_inputs(res.x, m);
        applied.row(k) = plan.row(0);
        y = sim.step(y, plan.row(0).transpose());
        states.row(k + 1) = y.transpose();
    }
    return finish(sim, std::move(applied), std::move(states), target, counter, inner, t0);
}

// Prediction blocks S(i, j) = A^{i-1-j} B (i = 1..h, j < i) stacked as an (h n) x (h m) matrix.
Mat prediction_matrix(const pde::CnOperator& op, int h) {
    const int n = op.grid().n(), m = op.input_dim();
    Mat s = Mat::Zero(h * n, h * m);
    for (int i = 1; i <= h; ++i) {
        s.block((i - 1) * n, (i - 1) * m, n, m) = op.input_matrix();
        for (int j = 0; j < i - 1; ++j)
            s.block((i - 1) * n, j * m, n, m) = op.step_matrix() * s.block((i - 2) * n, j * m, n, m);
    }
    return s;
}

Vec stacked_state_weights(const MpcConfig& cfg, int h) {
    const auto n = cfg.terminal_weight.size();
    Vec w(h * n);
    for (int i = 1; i <= h; ++i) w.segment((i - 1) * n, n) = i == h ? cfg.terminal_weight : cfg.running_weight;
    return w;
}

Vec free_response_error(const pde::CnOperator& op, const Vec& y_start, int h, const Vec& target) {
    const int n = op.grid().n();
    Vec out(h * n);
    Vec y = y_start;
    const Vec zero = Vec::Zero(op.input_dim());
    for (int i = 1; i <= h; ++i) {
        y = op.step(y, zero);
        out.segment((i - 1) * n, n) = y - target;
    }
    return out;
}

}  // namespace

ClosedLoopResult adjoint_optimize_open_loop(const Simulator& sim, const Vec& target, const MpcConfig& cfg,
                                            int max_iterations) {
    const auto t0 = Clock::now();
    const int n_steps = sim.grid().steps();
    const int m = sim.spec().control_dim();
    cfg.validate(sim.grid().n(), m);
    SolveCounter counter;
    const Vec y0 = sim.spec().initial_state;
    auto fg = [&](const Vec& flat, Vec& grad) {
        auto r = horizon_gradient(sim, y0, unflatten_inputs(flat, m), target, cfg, &counter);
        grad = std::move(r.gradient);
        return r.value;
    };
    optim::QnOptions qn = cfg.qn;
    qn.max_iterations = max_iterations;
    auto res = optim::qn_minimize_box(fg, Vec::Zero(n_steps * m), optim::Box::uniform(n_steps * m, cfg.bounds), qn);
    Mat applied = unflatten_inputs(res.x, m);
    Mat states = sim.rollout(y0, applied).values();
    return finish(sim, std::move(applied), std::move(states), target, counter, res.iterations, t0);
}

ClosedLoopResult receding_horizon_adjoint(const Simulator& sim, const Vec& y0, const Vec& target,
                                          const MpcConfig& cfg) {
    return receding(sim, y0, target, cfg, cfg.inner_iterations);
}

ClosedLoopResult nmpc_control(const Simulator& sim, const Vec& y0, const Vec& target, const MpcConfig& cfg) {
    if (sim.linear()) throw ConfigError("NMPC is set up for the Burgers system");
    return receding(sim, y0, target, cfg, cfg.nmpc_iterations);
}

CondensedQp condense_horizon(const Simulator& sim, const Vec& y_start, int horizon, const Vec& target,
                             const MpcConfig& cfg) {
    const auto& op = sim.linear_operator();
    if (op.static_input()) throw ConfigError("LMPC needs a basis-input system");
    cfg.validate(sim.grid().n(), op.input_dim());
    const Mat s = prediction_matrix(op, horizon);
    const Vec w = stacked_state_weights(cfg, horizon);
    CondensedQp qp;
    qp.hessian = s.transpose() * w.asDiagonal() * s;
    qp.hessian.diagonal() += cfg.effort_weight.replicate(horizon, 1);
    qp.hessian = 0.5 * (qp.hessian + qp.hessian.transpose());
    qp.linear = s.transpose() * w.cwiseProduct(free_response_error(op, y_start, horizon, target));
    return qp;
}

ClosedLoopResult lmpc_control(const Simulator& sim, const Vec& y0, const Vec& target, const MpcConfig& cfg) {
    const auto t0 = Clock::now();
    const auto& op = sim.linear_operator();
    if (op.static_input()) throw ConfigError("LMPC needs a basis-input system");
    const int n_steps = sim.grid().steps();
    const int m = op.input_dim();
    cfg.validate(sim.grid().n(), m);

    // The Hessian depends only on the horizon length, so cache per length.
    struct Cached {
        Mat s;
        Vec w;
        Mat hessian;
        double scale;
    };
    std::map<int, Cached> cache;
    SolveCounter counter;
    long inner = 0;
    Mat applied(n_steps, m);
    Mat states(n_steps + 1, sim.grid().n());
    states.row(0) = y0.transpose();
    Vec y = y0;
    for (int k = 0; k < n_steps; ++k) {
        const int h = std::min(cfg.horizon, n_steps - k);
        auto it = cache.find(h);
        if (it == cache.end()) {
            Cached c;
            c.s = prediction_matrix(op, h);
            c.w = stacked_state_weights(cfg, h);
            c.hessian = c.s.transpose() * c.w.asDiagonal() * c.s;
            c.hessian.diagonal() += cfg.effort_weight.replicate(h, 1);
            c.hessian = 0.5 * (c.hessian + c.hessian.transpose());
            // the QP tolerance is absolute, so solve a unit-scale copy
            c.scale = 1.0 / std::max(c.hessian.cwiseAbs().maxCoeff(), 1e-300);
            it = cache.emplace(h, std::move(c)).first;
        }
        const auto& c = it->second;
        const Vec q = c.s.transpose() * c.w.cwiseProduct(free_response_error(op, y, h, target));
        auto sol = optim::solve_box_qp(c.scale * c.hessian, c.scale * q, optim::Box::uniform(h * m, cfg.bounds),
                                       cfg.qp);
        inner += sol.iterations;
        applied.row(k) = sol.x.head(m).transpose();
        y = op.step(y, sol.x.head(m));
        states.row(k + 1) = y.transpose();
    }
    return finish(sim, std::move(applied), std::move(states), target, counter, inner, t0);
}

}  // namespace pdeop::control
