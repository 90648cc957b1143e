#include <cmath>

#include "pdeop/control.hpp"

namespace pdeop::control {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

void MpcConfig::validate(int n, int m) const {
    if (horizon < 1) throw ConfigError("MPC horizon must be >= 1");
    if (terminal_weight.size() != n || running_weight.size() != n)
        throw DimensionError("state weight length does not match grid");
    if (effort_weight.size() != m) throw DimensionError("effort weight length does not match input dim");
    if ((terminal_weight.array() < 0).any() || (running_weight.array() < 0).any() ||
        (effort_weight.array() < 0).any())
        throw ConfigError("MPC weights must be non-negative");
    if (inner_iterations < 1 || nmpc_iterations < 1) throw ConfigError("iteration caps must be >= 1");
}

MpcConfig default_mpc_config(const SystemSpec& spec, int horizon) {
    const auto& g = spec.grid;
    MpcConfig c;
    c.horizon = horizon;
    c.terminal_weight = Vec::Constant(g.n(), g.dx());
    c.running_weight = Vec::Constant(g.n(), spec.objective.running * g.dx() * g.dt());
    c.effort_weight = Vec::Constant(spec.control_dim(), spec.objective.effort * g.dt());
    c.bounds = spec.bounds;
    return c;
}

namespace {

void check_horizon(const Simulator& sim, const Vec& y_start, const Mat& inputs, const Vec& target,
                   const MpcConfig& cfg) {
    if (sim.spec().static_control()) throw ConfigError("horizon routines need a basis-control system");
    const int n = sim.grid().n(), m = sim.spec().control_dim();
    cfg.validate(n, m);
    if (y_start.size() != n || target.size() != n) throw DimensionError("state/target length mismatch");
    if (inputs.cols() != m || inputs.rows() < 1) throw DimensionError("horizon inputs must be h x M, h >= 1");
}

std::vector<Vec> forward_states(const Simulator& sim, const Vec& y_start, const Mat& inputs) {
    std::vector<Vec> ys;
    ys.reserve(inputs.rows() + 1);
    ys.push_back(y_start);
    for (Eigen::Index i = 0; i < inputs.rows(); ++i) ys.push_back(sim.step(ys.back(), inputs.row(i).transpose()));
    return ys;
}

double horizon_value(const std::vector<Vec>& ys, const Mat& inputs, const Vec& target, const MpcConfig& cfg) {
    const auto h = inputs.rows();
    const Vec eh = ys[h] - target;
    double v = 0.5 * eh.dot(cfg.terminal_weight.cwiseProduct(eh));
    for (Eigen::Index i = 1; i < h; ++i) {
        const Vec e = ys[i] - target;
        v += 0.5 * e.dot(cfg.running_weight.cwiseProduct(e));
    }
    for (Eigen::Index i = 0; i < h; ++i)
        v += 0.5 * inputs.row(i).dot(cfg.effort_weight.transpose().cwiseProduct(inputs.row(i)));
    return v;
}

Vec flatten(const Mat& m) {
    Vec v(m.size());
    Eigen::Map<RowMat>(v.data(), m.rows(), m.cols()) = m;
    return v;
}

}  // namespace

Mat unflatten_inputs(const Vec& v, int m) {
    return Eigen::Map<const RowMat>(v.data(), v.size() / m, m);
}

Vec flatten_inputs(const Mat& m) { return flatten(m); }

double horizon_objective(const Simulator& sim, const Vec& y_start, const Mat& inputs, const Vec& target,
                         const MpcConfig& cfg, SolveCounter* counter) {
    check_horizon(sim, y_start, inputs, target, cfg);
    auto ys = forward_states(sim, y_start, inputs);
    if (counter) ++counter->forward;
    return horizon_value(ys, inputs, target, cfg);
}

Gradient linear_horizon_gradient(const Simulator& sim, const Vec& y_start, const Mat& inputs,
                                 const Vec& target, const MpcConfig& cfg, SolveCounter* counter) {
    check_horizon(sim, y_start, inputs, target, cfg);
    const auto& op = sim.linear_operator();
    const auto h = inputs.rows();
    auto ys = forward_states(sim, y_start, inputs);
    if (counter) ++counter->forward;

    Gradient g;
    g.value = horizon_value(ys, inputs, target, cfg);
    Mat grad(h, inputs.cols());
    Vec lambda = cfg.terminal_weight.cwiseProduct(ys[h] - target);
    for (Eigen::Index i = h - 1; i >= 0; --i) {
        grad.row(i) = (cfg.effort_weight.cwiseProduct(inputs.row(i).transpose()) +
                       op.input_matrix().transpose() * lambda).transpose();
        if (i > 0)
            lambda = op.step_matrix().transpose() * lambda + cfg.running_weight.cwiseProduct(ys[i] - target);
    }
    if (counter) ++counter->backward;
    g.gradient = flatten(grad);
    return g;
}

Gradient heat_adjoint_gradient(const Simulator& sim, const Mat& weights, const Vec& target,
                               const MpcConfig& cfg, SolveCounter* counter) {
    if (weights.rows() != sim.grid().steps()) throw DimensionError("weights must have one row per step");
    return linear_horizon_gradient(sim, sim.spec().initial_state, weights, target, cfg, counter);
}

Gradient burgers_horizon_gradient(const Simulator& sim, const Vec& y_start, const Mat& inputs,
                                  const Vec& target, const MpcConfig& cfg, SolveCounter* counter) {
    check_horizon(sim, y_start, inputs, target, cfg);
    if (sim.linear()) throw ConfigError("Burgers adjoint called on a linear system");
    const auto& grid = sim.grid();
    const auto& params = sim.spec().burgers;
    const int n = grid.n();
    const double dt = grid.dt();
    const auto h = inputs.rows();
    auto ys = forward_states(sim, y_start, inputs);
    if (counter) ++counter->forward;

    Gradient g;
    g.value = horizon_value(ys, inputs, target, cfg);
    // pinned rows carry no control, so project Phi onto the interior
    Mat phi = sim.basis_matrix();
    phi.row(0).setZero();
    phi.row(n - 1).setZero();

    Mat grad(h, inputs.cols());
    Vec rhs = cfg.terminal_weight.cwiseProduct(ys[h] - target);
    for (Eigen::Index i = h - 1; i >= 0; --i) {
        // new-state block uses J(y_{i+1}), old-state block uses J(y_i)
        const pde::Tridiagonal jac = pde::burgers_jacobian(ys[i + 1], params, grid);
        pde::Tridiagonal a = jac;
        a.lower *= -0.5 * dt;
        a.diag *= -0.5 * dt;
        a.upper *= -0.5 * dt;
        a.diag.array() += 1.0;
        const Vec q = a.transpose().solve(rhs);
        if (!q.allFinite()) throw NumericalError("Burgers adjoint solve produced non-finite values");
        grad.row(i) = (cfg.effort_weight.cwiseProduct(inputs.row(i).transpose()) + dt * phi.transpose() * q)
                          .transpose();
        if (i > 0) {
            pde::Tridiagonal b = pde::burgers_jacobian(ys[i], params, grid);
            b.lower *= -0.5 * dt;
            b.diag *= -0.5 * dt;
            b.upper *= -0.5 * dt;
            b.diag.array() -= 1.0;
            b.diag[0] = 0.0;
            b.diag[n - 1] = 0.0;
            rhs = cfg.running_weight.cwiseProduct(ys[i] - target) - b.transpose().multiply(q);
        }
    }
    if (counter) ++counter->backward;
    g.gradient = flatten(grad);
    return g;
}

Gradient burgers_adjoint_gradient(const Simulator& sim, const Mat& weights, const Vec& target,
                                  const MpcConfig& cfg, SolveCounter* counter) {
    if (weights.rows() != sim.grid().steps()) throw DimensionError("weights must have one row per step");
    return burgers_horizon_gradient(sim, sim.spec().initial_state, weights, target, cfg, counter);
}

}  // namespace pdeop::control
