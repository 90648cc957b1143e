#include <chrono>

#include "pdeop/control.hpp"

namespace pdeop::control {

namespace {

const pde::CnOperator& static_operator(const Simulator& sim) {
    const auto& op = sim.linear_operator();
    if (!op.static_input()) throw ConfigError("static-control routine needs a static-input system");
    return op;
}

Vec terminal_state(const pde::CnOperator& op, const Vec& y0, const Vec& u) {
    Vec y = y0;
    for (int k = 0; k < op.grid().steps(); ++k) y = op.step(y, u);
    return y;
}

}  // namespace

double static_objective(const Simulator& sim, const Vec& u, const Vec& target, double gamma,
                        SolveCounter* counter) {
    const auto& op = static_operator(sim);
    if (target.size() != sim.grid().n()) throw DimensionError("target length does not match grid");
    const double dx = sim.grid().dx();
    const Vec e = terminal_state(op, sim.spec().initial_state, u) - target;
    if (counter) ++counter->forward;
    return 0.5 * dx * e.squaredNorm() + 0.5 * gamma * dx * u.squaredNorm();
}

Gradient adjoint_gradient_static(const Simulator& sim, const Vec& u, const Vec& target, double gamma,
                                 SolveCounter* counter) {
    const auto& op = static_operator(sim);
    if (target.size() != sim.grid().n()) throw DimensionError("target length does not match grid");
    const double dx = sim.grid().dx();
    const Vec e = terminal_state(op, sim.spec().initial_state, u) - target;
    if (counter) ++counter->forward;

    Gradient g;
    g.value = 0.5 * dx * e.squaredNorm() + 0.5 * gamma * dx * u.squaredNorm();
    // u enters every step, so only the sum of lambda_1..lambda_N is needed
    Vec lambda = dx * e;
    Vec sum = Vec::Zero(lambda.size());
    for (int k = op.grid().steps() - 1; k >= 0; --k) {
        sum += lambda;
        if (k > 0) lambda = op.step_matrix().transpose() * lambda;
    }
    g.gradient = gamma * dx * u + op.input_matrix().transpose() * sum;
    if (counter) ++counter->backward;
    return g;
}

namespace {

StaticSolution finish(const Simulator& sim, const Vec& target, optim::QnResult res,
                      SolveCounter counter, std::chrono::steady_clock::time_point start) {
    StaticSolution s;
    s.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    s.u = res.x;
    s.objective = res.f;
    s.optimizer = std::move(res);
    s.counter = counter;
    const auto& op = static_operator(sim);
    s.terminal_mse = terminal_mse(terminal_state(op, sim.spec().initial_state, s.u), target);
    return s;
}

}  // namespace

StaticSolution direct_optimize_static(const Simulator& sim, const Vec& target, double gamma,
                                      const BoxBounds& bounds, const optim::QnOptions& opts,
                                      const optim::FdScheme& fd) {
    const auto start = std::chrono::steady_clock::now();
    const int n = sim.grid().n();
    SolveCounter counter;
    auto f = [&](const Vec& u) { return static_objective(sim, u, target, gamma, &counter); };
    auto fg = [&](const Vec& u, Vec& grad) {
        auto r = optim::fd_gradient(f, u, fd);
        grad = std::move(r.gradient);
        return fd.kind == optim::FdKind::Forward ? r.value : f(u);
    };
    auto res = optim::qn_minimize_box(fg, Vec::Zero(n), optim::Box::uniform(n, bounds), opts);
    return finish(sim, target, std::move(res), counter, start);
}

StaticSolution adjoint_optimize_static(const Simulator& sim, const Vec& target, double gamma,
                                       const BoxBounds& bounds, const optim::QnOptions& opts) {
    const auto start = std::chrono::steady_clock::now();
    const int n = sim.grid().n();
    SolveCounter counter;
    auto fg = [&](const Vec& u, Vec& grad) {
        auto r = adjoint_gradient_static(sim, u, target, gamma, &counter);
        grad = std::move(r.gradient);
        return r.value;
    };
    auto res = optim::qn_minimize_box(fg, Vec::Zero(n), optim::Box::uniform(n, bounds), opts);
    return finish(sim, target, std::move(res), counter, start);
}

}  // namespace pdeop::control
