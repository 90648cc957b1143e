#include <doctest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <numbers>

#include "oracles.hpp"
#include "pdeop/io.hpp"
#include "pdeop/pde.hpp"
#include "pdeop/system.hpp"

using namespace pdeop;
using namespace pdeop::pde;

namespace {

ReactionDiffusionParams voltage_params(int n) {
    ReactionDiffusionParams p;
    p.diffusion = 0.1;
    p.leakage = 1.0;
    p.gain = 2.0;
    p.reference = Vec::Ones(n);
    return p;
}

Vec sine_profile(const SpaceTimeGrid& g, double amp = 1.0) {
    Vec y(g.n());
    for (int i = 0; i < g.n(); ++i) y[i] = amp * std::sin(std::numbers::pi * g.x(i));
    y[0] = y[g.n() - 1] = 0.0;
    return y;
}

}  // namespace

TEST_CASE("tridiagonal solve matches dense LU") {
    const int n = 9;
    Tridiagonal t(n);
    t.lower = oracle::random_matrix(n - 1, 1, 1);
    t.diag = oracle::random_matrix(n, 1, 2);
    t.upper = oracle::random_matrix(n - 1, 1, 3);
    Vec b = oracle::random_matrix(n, 1, 4);
    Vec x = t.solve(b);
    Vec ref = t.dense().partialPivLu().solve(b);
    CHECK((x - ref).cwiseAbs().maxCoeff() < 1e-10);
    CHECK((t.multiply(x) - b).cwiseAbs().maxCoeff() < 1e-10);
    CHECK((t.transpose().dense() - t.dense().transpose()).cwiseAbs().maxCoeff() == 0.0);
    Tridiagonal z(3);
    CHECK_THROWS_AS(z.solve(Vec::Ones(3)), NumericalError);
}

TEST_CASE("neumann_laplacian") {
    Mat l3 = neumann_laplacian(3, 1.0);
    Mat expect(3, 3);
    expect << -2, 2, 0, 1, -2, 1, 0, 2, -2;
    CHECK((l3 - expect).cwiseAbs().maxCoeff() == 0.0);

    Mat l = neumann_laplacian(41, 0.025);
    CHECK((l * Vec::Ones(41)).cwiseAbs().maxCoeff() < 1e-9);
    CHECK(l.rowwise().sum().cwiseAbs().maxCoeff() < 1e-9);

    // cos(pi x) is an eigenfunction of d2/dx2 with zero-flux ends
    double prev = 0.0;
    for (int n : {21, 41, 81}) {
        SpaceTimeGrid g(1.0, n, 1.0, 1);
        Vec c(n);
        for (int i = 0; i < n; ++i) c[i] = std::cos(std::numbers::pi * g.x(i));
        Vec r = neumann_laplacian(n, g.dx()) * c + std::numbers::pi * std::numbers::pi * c;
        const double err = r.segment(1, n - 2).cwiseAbs().maxCoeff();
        if (prev > 0.0) CHECK(std::log2(prev / err) > 1.9);
        prev = err;
    }
    CHECK_THROWS_AS(neumann_laplacian(2, 1.0), ConfigError);
}

TEST_CASE("CN operator construction") {
    SpaceTimeGrid g(1.0, 21, 1.0, 10);
    SUBCASE("free dynamics") {
        ReactionDiffusionParams p;
        p.diffusion = 0.0;
        p.leakage = 0.0;
        p.gain = 2.0;
        p.reference = Vec::Ones(21);
        CnOperator op(p, g, StaticInput{});
        CHECK((op.step_matrix() - Mat::Identity(21, 21)).cwiseAbs().maxCoeff() < 1e-14);
        CHECK((op.input_matrix() - g.dt() * 2.0 * Mat::Identity(21, 21)).cwiseAbs().maxCoeff() < 1e-14);
        CHECK(op.drift().cwiseAbs().maxCoeff() == 0.0);
    }
    SUBCASE("paper voltage coefficients are contractive") {
        SpaceTimeGrid gv(1.0, 101, 5.0, 101);
        CnOperator op(voltage_params(101), gv, StaticInput{});
        CHECK(oracle::spectral_radius(op.step_matrix()) < 1.0);
    }
    SUBCASE("reference profile is a fixed point at zero input") {
        CnOperator op(voltage_params(21), g, StaticInput{});
        Vec y = op.step(Vec::Ones(21), Vec::Zero(21));
        CHECK((y.array() - 1.0).abs().maxCoeff() < 1e-12);
    }
    SUBCASE("basis input matrix") {
        BasisSet b{BasisKind::Cosine, 3, 1.0};
        CnOperator op(voltage_params(21), g, b);
        CHECK(op.input_dim() == 3);
        CHECK_FALSE(op.static_input());
        Mat left = Mat::Identity(21, 21) - 0.5 * g.dt() * op.semi_discrete();
        Mat lhs = left * op.input_matrix();
        CHECK((lhs - g.dt() * 2.0 * evaluate_basis(b, g)).cwiseAbs().maxCoeff() < 1e-12);
    }
    SUBCASE("transposed solve") {
        CnOperator op(voltage_params(21), g, StaticInput{});
        Vec r = oracle::random_matrix(21, 1, 5);
        Vec z = op.solve_left_transposed(r);
        Mat left = Mat::Identity(21, 21) - 0.5 * g.dt() * op.semi_discrete();
        CHECK((left.transpose() * z - r).cwiseAbs().maxCoeff() < 1e-12);
    }
    SUBCASE("bad reference length") {
        ReactionDiffusionParams p = voltage_params(20);
        CHECK_THROWS_AS(CnOperator(p, g, StaticInput{}), DimensionError);
    }
}

TEST_CASE("linear rollouts") {
    SpaceTimeGrid g(1.0, 41, 5.0, 50);
    CnOperator op(voltage_params(41), g, StaticInput{});

    SUBCASE("equilibrium stays put") {
        auto t = rollout_linear(op, Vec::Ones(41), ControlField::make_static(Vec::Zero(41)));
        CHECK(t.values().rows() == 51);
        CHECK((t.values().array() - 1.0).abs().maxCoeff() < 1e-12);
    }
    SUBCASE("single step satisfies the CN relation") {
        Vec y0 = oracle::random_matrix(41, 1, 7);
        Vec u = oracle::random_matrix(41, 1, 8);
        auto t = rollout_linear(op, y0, ControlField::make_static(u));
        const Mat& a = op.semi_discrete();
        const Mat eye = Mat::Identity(41, 41);
        Vec lhs = (eye - 0.5 * g.dt() * a) * t.at(1);
        Vec rhs = (eye + 0.5 * g.dt() * a) * y0 + g.dt() * 2.0 * u + g.dt() * 1.0 * Vec::Ones(41);
        CHECK((lhs - rhs).cwiseAbs().maxCoeff() < 1e-10);
    }
    SUBCASE("affine in the control") {
        Vec y0 = Vec::Zero(41);
        Vec u1 = oracle::random_matrix(41, 1, 11), u2 = oracle::random_matrix(41, 1, 12);
        const double a = 0.4, b = -1.7;
        auto r = [&](const Vec& u) { return rollout_linear(op, y0, ControlField::make_static(u)).values(); };
        Mat drift = r(Vec::Zero(41));
        Mat lhs = r(a * u1 + b * u2);
        Mat rhs = a * r(u1) + b * r(u2) + (1.0 - a - b) * drift;
        CHECK((lhs - rhs).cwiseAbs().maxCoeff() < 1e-11);
    }
    SUBCASE("mean conserved without leakage") {
        ReactionDiffusionParams p = voltage_params(41);
        p.leakage = 0.0;
        CnOperator free_op(p, g, StaticInput{});
        Vec y0 = oracle::random_matrix(41, 1, 13);
        auto t = rollout_linear(free_op, y0, ControlField::make_static(Vec::Zero(41)));
        // zero-flux mass uses the trapezoid weights that make L^T w = 0
        Vec w = Vec::Ones(41);
        w[0] = w[40] = 0.5;
        for (int k = 0; k <= g.steps(); ++k) CHECK(w.dot(t.at(k)) == doctest::Approx(w.dot(y0)).epsilon(1e-12));
    }
    SUBCASE("weighted controls are step-averaged when N+1 rows are given") {
        BasisSet b{BasisKind::Cosine, 2, 1.0};
        CnOperator hop(voltage_params(41), g, b);
        Mat w = oracle::random_matrix(51, 2, 14);
        Mat in = step_inputs(hop, ControlField::make_weighted(w, b));
        CHECK((in.row(3) - 0.5 * (w.row(3) + w.row(4))).cwiseAbs().maxCoeff() < 1e-15);
        Mat left = step_inputs(hop, ControlField::make_weighted(w.topRows(50), b));
        CHECK((left - w.topRows(50)).cwiseAbs().maxCoeff() == 0.0);
        CHECK_THROWS_AS(step_inputs(hop, ControlField::make_weighted(w.topRows(20), b)), DimensionError);
        CHECK_THROWS_AS(step_inputs(hop, ControlField::make_static(Vec::Zero(41))), DimensionError);
    }
}

TEST_CASE("CN temporal order for the linear systems") {
    SUBCASE("voltage, static smooth control") {
        SpaceTimeGrid base(1.0, 41, 5.0, 10);
        Vec u(41);
        for (int i = 0; i < 41; ++i) u[i] = 0.5 * std::cos(std::numbers::pi * base.x(i));
        auto term = [&](int steps) {
            CnOperator op(voltage_params(41), base.with_steps(steps), StaticInput{});
            return rollout_linear(op, Vec::Zero(41), ControlField::make_static(u)).terminal();
        };
        CHECK(oracle::observed_order(term, 10) >= 1.9);
    }
    SUBCASE("heat, smooth time-varying weights") {
        BasisSet b{BasisKind::Cosine, 3, 1.0};
        ReactionDiffusionParams p;
        p.diffusion = 0.1;
        p.leakage = 0.5;
        p.gain = 2.0;
        p.reference = Vec::Zero(41);
        auto term = [&](int steps) {
            SpaceTimeGrid g(1.0, 41, 1.0, steps);
            CnOperator op(p, g, b);
            Mat w(steps + 1, 3);
            for (int k = 0; k <= steps; ++k) {
                const double t = g.t(k);
                w.row(k) << std::sin(3 * t), 0.5 * std::cos(2 * t), 0.2 * t;
            }
            Vec y0 = Vec::Zero(41);
            return rollout_linear(op, y0, ControlField::make_weighted(w, b)).terminal();
        };
        CHECK(oracle::observed_order(term, 8) >= 1.9);
    }
}

TEST_CASE("Burgers residual and Jacobian") {
    SpaceTimeGrid g(1.0, 21, 1.0, 10);
    BurgersParams p;
    CHECK(burgers_semidiscrete_residual(Vec::Zero(21), Vec::Zero(21), p, g).cwiseAbs().maxCoeff() == 0.0);
    Vec forcing = oracle::random_matrix(21, 1, 3);
    Vec f = burgers_semidiscrete_residual(Vec::Zero(21), forcing, p, g);
    CHECK((f.segment(1, 19) - forcing.segment(1, 19)).cwiseAbs().maxCoeff() == 0.0);
    CHECK(f[0] == 0.0);

    Vec y = oracle::random_matrix(21, 1, 4);
    y[0] = y[20] = 0.0;
    Mat jd = burgers_jacobian(y, p, g).dense();
    Mat fd(21, 21);
    const double h = 1e-6;
    for (int j = 0; j < 21; ++j) {
        Vec yp = y, ym = y;
        yp[j] += h;
        ym[j] -= h;
        fd.col(j) = (burgers_semidiscrete_residual(yp, forcing, p, g) -
                     burgers_semidiscrete_residual(ym, forcing, p, g)) / (2 * h);
    }
    CHECK((jd - fd).cwiseAbs().maxCoeff() / fd.cwiseAbs().maxCoeff() < 1e-6);

    // appendix structure: -D1 diag(y) + nu D2 on interior rows
    Mat d1 = Mat::Zero(21, 21), d2 = Mat::Zero(21, 21);
    for (int i = 1; i < 20; ++i) {
        d1(i, i - 1) = -1.0 / (2 * g.dx());
        d1(i, i + 1) = 1.0 / (2 * g.dx());
        d2(i, i - 1) = d2(i, i + 1) = 1.0 / (g.dx() * g.dx());
        d2(i, i) = -2.0 / (g.dx() * g.dx());
    }
    Mat structured = -d1 * y.asDiagonal().toDenseMatrix() + p.viscosity * d2;
    CHECK((jd - structured).cwiseAbs().maxCoeff() < 1e-10);
    BurgersParams bad;
    bad.viscosity = 0.0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("Burgers stepping") {
    BurgersParams p;
    SpaceTimeGrid g(1.0, 81, 4.0, 200);
    BasisSet b{BasisKind::Sine, 4, 1.0};

    SUBCASE("rest state") {
        CHECK(step_burgers(Vec::Zero(81), Vec::Zero(4), b, p, g).cwiseAbs().maxCoeff() == 0.0);
        auto t = rollout_burgers(Vec::Zero(81), Mat::Zero(200, 4), b, p, g);
        CHECK(t.values().cwiseAbs().maxCoeff() == 0.0);
    }
    SUBCASE("Newton converges to tolerance with pinned ends") {
        NewtonReport rep;
        Vec y0 = sine_profile(g);
        Vec y1 = step_burgers(y0, Vec::Constant(81, 0.3), p, g, {}, &rep);
        CHECK(rep.residual <= 1e-10);
        CHECK(rep.iterations <= 25);
        CHECK(y1[0] == 0.0);
        CHECK(y1[80] == 0.0);
    }
    SUBCASE("strong diffusion decays monotonically") {
        BurgersParams visc;
        visc.viscosity = 0.5;
        SpaceTimeGrid gd(1.0, 41, 0.5, 20);
        auto t = rollout_burgers(sine_profile(gd), Mat::Zero(20, 4), b, visc, gd);
        for (int k = 0; k < 20; ++k) CHECK(t.at(k + 1).norm() < t.at(k).norm());
        // compare to a fine-step reference
        auto fine = rollout_burgers(sine_profile(gd), Mat::Zero(20 * 64, 4), b, visc, gd.with_steps(20 * 64));
        CHECK((t.terminal() - fine.terminal()).cwiseAbs().maxCoeff() < 1e-3);
    }
    SUBCASE("energy does not grow without forcing") {
        BurgersParams low;
        low.viscosity = 1e-3;
        SpaceTimeGrid gl(1.0, 81, 1.0, 50);
        Vec y = sine_profile(gl);
        for (int k = 0; k < 50; ++k) {
            Vec next = step_burgers(y, Vec::Zero(81), low, gl);
            CHECK(0.5 * next.squaredNorm() <= 0.5 * y.squaredNorm() + 1e-9);
            y = next;
        }
    }
    SUBCASE("paper grid with random forcing agrees with a half-step reference") {
        Mat w = oracle::random_uniform(400, 4, 21, -1.0, 1.0);
        // piecewise constant forcing: the half-step run repeats each row twice
        Mat coarse(200, 4);
        for (int k = 0; k < 200; ++k) coarse.row(k) = w.row(2 * k);
        Mat fine(400, 4);
        for (int k = 0; k < 400; ++k) fine.row(k) = coarse.row(k / 2);
        auto a = rollout_burgers(Vec::Zero(81), coarse, b, p, g);
        auto r = rollout_burgers(Vec::Zero(81), fine, b, p, g.with_steps(400));
        CHECK((a.terminal() - r.terminal()).cwiseAbs().maxCoeff() < 1e-3);
    }
    SUBCASE("deterministic") {
        Mat w = oracle::random_uniform(200, 4, 3, -1.0, 1.0);
        auto a = rollout_burgers(Vec::Zero(81), w, b, p, g);
        auto c = rollout_burgers(Vec::Zero(81), w, b, p, g);
        CHECK(std::memcmp(a.values().data(), c.values().data(), sizeof(double) * a.values().size()) == 0);
    }
    SUBCASE("second-order in time for smooth data") {
        auto term = [&](int steps) {
            SpaceTimeGrid gg(1.0, 41, 1.0, steps);
            Mat w = Mat::Zero(steps, 4);
            w.col(0).setConstant(0.5);
            return rollout_burgers(sine_profile(gg), w, b, p, gg).terminal();
        };
        CHECK(oracle::observed_order(term, 10) >= 1.9);
    }
    SUBCASE("Newton failure reports its residual") {
        NewtonOptions tight;
        tight.max_iterations = 0;
        try {
            step_burgers(sine_profile(g), Vec::Zero(81), p, g, tight);
            FAIL("expected SolverError");
        } catch (const SolverError& e) {
            CHECK(e.last_residual() > 0.0);
        }
    }
}

TEST_CASE("simulator presets") {
    for (auto kind : {SystemKind::Voltage, SystemKind::Heat, SystemKind::Burgers}) {
        Simulator sim(default_system(kind));
        Mat in = Mat::Zero(sim.grid().steps(), sim.spec().control_dim());
        auto t = sim.rollout(in);
        CHECK(t.values().rows() == sim.grid().steps() + 1);
        CHECK(system_from_string(to_string(kind)) == kind);
    }
    Simulator heat(default_system(SystemKind::Heat));
    CHECK(heat.basis_matrix().cols() == 6);
    CHECK(heat.grid().n() == 41);
    Simulator burgers(default_system(SystemKind::Burgers));
    CHECK_THROWS_AS(burgers.linear_operator(), ConfigError);
    CHECK(default_target(SystemKind::Burgers, "sine").value(1.0) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK_THROWS_AS(default_target(SystemKind::Voltage, "parabola"), ConfigError);
}

TEST_CASE("tensor and CSV IO") {
    auto dir = std::filesystem::temp_directory_path() / "pdeop_io_test";
    std::filesystem::remove_all(dir);
    Mat m = oracle::random_matrix(4, 3, 1);
    io::write_tensor(dir / "m.tensor", io::Tensor::from_matrix(m));
    auto t = io::read_tensor(dir / "m.tensor");
    CHECK(t.dims.size() == 2);
    CHECK(t.dims[0] == 4);
    CHECK((t.to_matrix() - m).cwiseAbs().maxCoeff() == 0.0);
    CHECK(t.data[1] == m(0, 1));  // row-major

    io::write_text(dir / "bad.tensor", "NOTATENSOR");
    CHECK_THROWS_AS(io::read_tensor(dir / "bad.tensor"), Error);

    SpaceTimeGrid g(1.0, 3, 1.0, 1);
    io::write_trajectory_csv(dir / "t.csv", StateTrajectory(Mat::Ones(2, 3), g));
    std::ifstream in(dir / "t.csv");
    std::string header;
    std::getline(in, header);
    CHECK(header == "t,x,y");
    int rows = 0;
    for (std::string line; std::getline(in, line);) ++rows;
    CHECK(rows == 6);
    std::filesystem::remove_all(dir);
}
