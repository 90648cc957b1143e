#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "pdeop/control.hpp"

using namespace pdeop;
using namespace pdeop::control;

namespace {

SystemSpec small_voltage(int n = 41, int steps = 40) {
    auto s = default_system(SystemKind::Voltage);
    s.grid = SpaceTimeGrid(1.0, n, 5.0, steps);
    s.diffusion.reference = Vec::Ones(n);
    s.initial_state = Vec::Zero(n);
    return s;
}

SystemSpec small_heat(int n = 41, int steps = 40) {
    auto s = default_system(SystemKind::Heat);
    s.grid = SpaceTimeGrid(1.0, n, 1.0, steps);
    s.diffusion.reference = Vec::Zero(n);
    s.initial_state = Vec::Zero(n);
    return s;
}

SystemSpec small_burgers(int n = 17, int steps = 10) {
    auto s = default_system(SystemKind::Burgers);
    s.grid = SpaceTimeGrid(1.0, n, 1.0, steps);
    s.initial_state = Vec::Zero(n);
    return s;
}

MpcConfig cfg_with_running(const SystemSpec& s, int horizon) {
    auto c = default_mpc_config(s, horizon);
    // exercise every term of the horizon objective
    c.running_weight = Vec::Constant(s.grid.n(), 0.3 * s.grid.dx() * s.grid.dt());
    c.effort_weight = Vec::Constant(s.control_dim(), 0.01 * s.grid.dt());
    return c;
}

}  // namespace

TEST_CASE("static adjoint gradient") {
    Simulator sim(small_voltage());
    const Vec target = TargetProfile::sine(1.0, 0.2, 0.0, 6.0).evaluate(sim.grid());

    SUBCASE("zero at the uncontrolled terminal state") {
        Vec free_terminal = sim.rollout(Mat::Zero(40, 41)).terminal();
        auto g = adjoint_gradient_static(sim, Vec::Zero(41), free_terminal, 0.5);
        CHECK(g.gradient.cwiseAbs().maxCoeff() < 1e-10);
        CHECK(g.value == 0.0);
    }
    SUBCASE("matches central differences") {
        for (std::uint64_t s = 0; s < 5; ++s) {
            Vec u = oracle::random_uniform(41, 1, s, -1, 1);
            auto g = adjoint_gradient_static(sim, u, target, 1e-2);
            auto f = [&](const Vec& v) { return static_objective(sim, v, target, 1e-2); };
            CHECK(oracle::rel_inf(g.gradient, oracle::central_difference(f, u, 1e-5)) < 1e-5);
            CHECK(g.value == doctest::Approx(f(u)).epsilon(1e-14));
        }
    }
    SUBCASE("single step on three nodes by hand") {
        auto spec = small_voltage(3, 1);
        spec.grid = SpaceTimeGrid(1.0, 3, 0.5, 1);
        Simulator s3(spec);
        Vec u(3), tgt(3);
        u << 0.3, -0.2, 0.7;
        tgt << 0.9, 1.1, 1.0;
        const double dx = 0.5, dt = 0.5, d = 0.1, beta = 1.0, alpha = 2.0;
        Mat lap(3, 3);
        lap << -2, 2, 0, 1, -2, 1, 0, 2, -2;
        lap /= dx * dx;
        const Mat a = d * lap - beta * Mat::Identity(3, 3);
        const Mat left_inv = (Mat::Identity(3, 3) - 0.5 * dt * a).inverse();
        const Vec y1 = left_inv * (dt * alpha * u + dt * beta * Vec::Ones(3));
        const Vec expect = (dt * alpha * left_inv).transpose() * (dx * (y1 - tgt));
        auto g = adjoint_gradient_static(s3, u, tgt, 0.0);
        CHECK((g.gradient - expect).cwiseAbs().maxCoeff() < 1e-12);
    }
    SUBCASE("cost model: one forward and one backward sweep") {
        SolveCounter c;
        adjoint_gradient_static(sim, Vec::Zero(41), target, 0.1, &c);
        CHECK(c.forward == 1);
        CHECK(c.backward == 1);
        SolveCounter fd_count;
        auto f = [&](const Vec& v) { return static_objective(sim, v, target, 0.1, &fd_count); };
        auto r = optim::fd_gradient(f, Vec::Zero(41), {optim::FdKind::Forward, 1e-6});
        CHECK(fd_count.forward == 42);
        CHECK(fd_count.backward == 0);
        CHECK(r.evaluations == 42);
    }
    SUBCASE("matches the forward-difference gradient") {
        Vec u = oracle::random_uniform(41, 1, 99, -1, 1);
        auto g = adjoint_gradient_static(sim, u, target, 1e-2);
        auto f = [&](const Vec& v) { return static_objective(sim, v, target, 1e-2); };
        auto fd = optim::fd_gradient(f, u, {optim::FdKind::Central, 1e-6});
        CHECK(oracle::rel_inf(fd.gradient, g.gradient) < 1e-5);
    }
}

TEST_CASE("static optimizers on the voltage system") {
    Simulator sim(default_system(SystemKind::Voltage));
    const auto& spec = sim.spec();
    SUBCASE("heavy effort weight keeps u near zero") {
        auto r = direct_optimize_static(sim, TargetProfile::constant(1.0).evaluate(sim.grid()), 1e6, spec.bounds);
        CHECK(r.u.cwiseAbs().maxCoeff() < 1e-3);
    }
    SUBCASE("constant target") {
        const Vec tgt = default_target(SystemKind::Voltage, "constant").evaluate(sim.grid());
        auto a = adjoint_optimize_static(sim, tgt, spec.objective.effort, spec.bounds);
        auto d = direct_optimize_static(sim, tgt, spec.objective.effort, spec.bounds);
        CHECK(a.terminal_mse <= 1e-9);
        CHECK(d.terminal_mse <= 1e-9);
        CHECK(a.optimizer.x.maxCoeff() <= 1.0);
        // direct pays n + 1 rollouts per gradient
        CHECK(d.counter.forward >= 102 * (d.optimizer.iterations));
        CHECK(a.counter.backward == a.counter.forward);
    }
    SUBCASE("ramp and sine targets, and direct agrees with adjoint") {
        const Vec ramp = default_target(SystemKind::Voltage, "ramp").evaluate(sim.grid());
        CHECK(adjoint_optimize_static(sim, ramp, spec.objective.effort, spec.bounds).terminal_mse <= 8e-5);
        const Vec sine = default_target(SystemKind::Voltage, "sine").evaluate(sim.grid());
        auto a = adjoint_optimize_static(sim, sine, spec.objective.effort, spec.bounds);
        CHECK(a.terminal_mse <= 1.5e-2);
        // the minimizer is unique but weakly conditioned; both runs must be converged
        optim::QnOptions tight;
        tight.max_iterations = 1000;
        tight.ftol = 1e-11;
        tight.gtol = 1e-12;
        auto at = adjoint_optimize_static(sim, sine, spec.objective.effort, spec.bounds, tight);
        auto d = direct_optimize_static(sim, sine, spec.objective.effort, spec.bounds, tight);
        CHECK((at.u - d.u).lpNorm<Eigen::Infinity>() < 1e-3);
    }
}

TEST_CASE("heat adjoint gradient") {
    Simulator sim(small_heat());
    const auto cfg = cfg_with_running(sim.spec(), 10);
    SUBCASE("zero weights, zero target") {
        auto g = heat_adjoint_gradient(sim, Mat::Zero(40, 6), Vec::Zero(41), cfg);
        CHECK(g.gradient.cwiseAbs().maxCoeff() == 0.0);
    }
    SUBCASE("matches central differences over all weights") {
        const Vec tgt = TargetProfile::sine(0.6, 0.3, 0.0, 2.0).evaluate(sim.grid());
        for (std::uint64_t s = 0; s < 3; ++s) {
            Mat w = oracle::random_uniform(40, 6, s + 10, -1, 1);
            auto g = heat_adjoint_gradient(sim, w, tgt, cfg);
            auto f = [&](const Vec& flat) {
                return horizon_objective(sim, sim.spec().initial_state, unflatten_inputs(flat, 6), tgt, cfg);
            };
            CHECK(oracle::rel_inf(g.gradient, oracle::central_difference(f, flatten_inputs(w), 1e-5)) < 1e-5);
        }
    }
    SUBCASE("full-horizon value is half the global objective") {
        auto spec = sim.spec();
        spec.objective = ObjectiveWeights(0.7, 0.05);
        Simulator s2(spec);
        auto c = default_mpc_config(spec, 40);
        Mat w = oracle::random_uniform(40, 6, 3, -1, 1);
        const Vec tgt = TargetProfile::ramp(1.0, 0.5).evaluate(s2.grid());
        auto g = heat_adjoint_gradient(s2, w, tgt, c);
        auto traj = s2.rollout(w);
        auto obj = objective_value(traj, ControlField::make_weighted(w, spec.basis), tgt, spec.objective);
        // the global running sum also counts the fixed initial state
        const double y0_term = 0.7 * s2.grid().dx() * s2.grid().dt() * (spec.initial_state - tgt).squaredNorm();
        CHECK(g.value == doctest::Approx(0.5 * (obj.total - y0_term)).epsilon(1e-12));
    }
}

TEST_CASE("Burgers adjoint gradient") {
    Simulator sim(small_burgers());
    const auto cfg = cfg_with_running(sim.spec(), 10);
    SUBCASE("zero weights, zero target") {
        auto g = burgers_adjoint_gradient(sim, Mat::Zero(10, 4), Vec::Zero(17), cfg);
        CHECK(g.gradient.cwiseAbs().maxCoeff() == 0.0);
    }
    SUBCASE("matches central differences") {
        const Vec tgt = TargetProfile::parabola(2.0).evaluate(sim.grid());
        for (std::uint64_t s = 0; s < 5; ++s) {
            Mat w = oracle::random_uniform(10, 4, s + 20, -1, 1);
            SolveCounter c;
            auto g = burgers_adjoint_gradient(sim, w, tgt, cfg, &c);
            CHECK(c.forward == 1);
            CHECK(c.backward == 1);
            auto f = [&](const Vec& flat) {
                return horizon_objective(sim, sim.spec().initial_state, unflatten_inputs(flat, 4), tgt, cfg);
            };
            CHECK(oracle::rel_inf(g.gradient, oracle::central_difference(f, flatten_inputs(w), 1e-6)) < 1e-4);
        }
    }
    SUBCASE("horizon gradient from a nonzero state") {
        Vec y(17);
        for (int i = 0; i < 17; ++i) y[i] = 0.5 * std::sin(3.14159265358979 * sim.grid().x(i));
        y[0] = y[16] = 0.0;
        Mat w = oracle::random_uniform(4, 4, 31, -1, 1);
        const Vec tgt = Vec::Zero(17);
        auto g = burgers_horizon_gradient(sim, y, w, tgt, cfg);
        auto f = [&](const Vec& flat) { return horizon_objective(sim, y, unflatten_inputs(flat, 4), tgt, cfg); };
        CHECK(oracle::rel_inf(g.gradient, oracle::central_difference(f, flatten_inputs(w), 1e-6)) < 1e-4);
    }
}

TEST_CASE("LMPC") {
    Simulator sim(default_system(SystemKind::Heat));
    const auto cfg = default_mpc_config(sim.spec(), 10);
    const Vec y0 = sim.spec().initial_state;
    SUBCASE("equilibrium target needs no control") {
        auto r = lmpc_control(sim, y0, y0, cfg);
        CHECK(r.inputs.cwiseAbs().maxCoeff() <= 1e-6);
    }
    SUBCASE("constant and sine targets") {
        auto c = lmpc_control(sim, y0, default_target(SystemKind::Heat, "constant").evaluate(sim.grid()), cfg);
        CHECK(c.terminal_mse <= 1e-10);
        auto s = lmpc_control(sim, y0, default_target(SystemKind::Heat, "sine").evaluate(sim.grid()), cfg);
        CHECK(s.terminal_mse <= 7e-4);
        CHECK(s.inputs.cwiseAbs().maxCoeff() <= 1.0);
    }
    SUBCASE("full-horizon QP equals the open-loop adjoint optimum") {
        auto spec = small_heat(21, 12);
        Simulator small(spec);
        auto c = default_mpc_config(spec, 12);
        c.effort_weight = Vec::Constant(6, 1e-3);
        const Vec tgt = TargetProfile::sine(0.6, 0.3, 0.0, 2.0).evaluate(small.grid());
        auto qp = condense_horizon(small, spec.initial_state, 12, tgt, c);
        auto sol = optim::solve_box_qp(qp.hessian, qp.linear, optim::Box::uniform(72, c.bounds));
        c.qn.ftol = 1e-15;
        c.qn.gtol = 1e-12;
        auto open = adjoint_optimize_open_loop(small, tgt, c, 2000);
        CHECK((flatten_inputs(open.inputs) - sol.x).lpNorm<Eigen::Infinity>() < 1e-4);
        // condensed objective agrees with the rollout objective up to a constant
        const double base = horizon_objective(small, spec.initial_state, Mat::Zero(12, 6), tgt, c);
        Mat w = oracle::random_uniform(12, 6, 4, -1, 1);
        const Vec x = flatten_inputs(w);
        CHECK(horizon_objective(small, spec.initial_state, w, tgt, c) ==
              doctest::Approx(base + 0.5 * x.dot(qp.hessian * x) + qp.linear.dot(x)).epsilon(1e-10));
    }
    SUBCASE("receding-horizon adjoint on the sine target") {
        auto r = receding_horizon_adjoint(sim, y0, default_target(SystemKind::Heat, "sine").evaluate(sim.grid()), cfg);
        CHECK(r.terminal_mse <= 7e-4);
    }
}

TEST_CASE("NMPC") {
    Simulator sim(default_system(SystemKind::Burgers));
    const auto cfg = default_mpc_config(sim.spec(), 10);
    const Vec y0 = sim.spec().initial_state;
    SUBCASE("zero target from rest") {
        auto r = nmpc_control(sim, y0, Vec::Zero(sim.grid().n()), cfg);
        CHECK(r.inputs.cwiseAbs().maxCoeff() <= 1e-12);
    }
    SUBCASE("parabola and sine targets") {
        auto p = nmpc_control(sim, y0, default_target(SystemKind::Burgers, "parabola").evaluate(sim.grid()), cfg);
        CHECK(p.terminal_mse <= 1.2e-4);
        auto s = nmpc_control(sim, y0, default_target(SystemKind::Burgers, "sine").evaluate(sim.grid()), cfg);
        CHECK(s.terminal_mse <= 1.4e-4);
        CHECK(s.inputs.cwiseAbs().maxCoeff() <= 1.0);
    }
    SUBCASE("zero target via the adjoint loop") {
        auto r = receding_horizon_adjoint(sim, y0, Vec::Zero(sim.grid().n()), cfg);
        CHECK(r.terminal_mse <= 1e-8);
    }
    SUBCASE("rejected on linear systems") {
        Simulator heat(default_system(SystemKind::Heat));
        CHECK_THROWS_AS(nmpc_control(heat, Vec::Zero(41), Vec::Zero(41), default_mpc_config(heat.spec())),
                        ConfigError);
    }
}
