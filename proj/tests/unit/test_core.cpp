#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "pdeop/core.hpp"

using namespace pdeop;

namespace {

Mat random_matrix(int r, int c, unsigned seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd;
    Mat m(r, c);
    for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j) m(i, j) = nd(rng);
    return m;
}

// Analytic L2 inner product of cos(j pi x) and cos(k pi x) on [0, 1].
double cosine_gram(int j, int k) {
    if (j != k) return 0.0;
    return j == 0 ? 1.0 : 0.5;
}

}  // namespace

TEST_CASE("grid accessors and validation") {
    SpaceTimeGrid g(1.0, 11, 2.0, 4);
    CHECK(g.dx() == doctest::Approx(0.1));
    CHECK(g.dt() == doctest::Approx(0.5));
    Vec x = g.coordinates();
    for (int i = 1; i < g.n(); ++i) CHECK(x[i] - x[i - 1] == doctest::Approx(0.1));
    CHECK_THROWS_AS(SpaceTimeGrid(1.0, 2, 1.0, 1), ConfigError);
    CHECK_THROWS_AS(SpaceTimeGrid(1.0, 5, 1.0, 0), ConfigError);
    CHECK_THROWS_AS(SpaceTimeGrid(-1.0, 5, 1.0, 1), ConfigError);
}

TEST_CASE("evaluate_basis") {
    SpaceTimeGrid g(1.0, 41, 1.0, 10);
    SUBCASE("cosine M=1 is the ones column") {
        Mat phi = evaluate_basis({BasisKind::Cosine, 1, 1.0}, g);
        CHECK(phi.rows() == 41);
        CHECK((phi.array() - 1.0).abs().maxCoeff() == 0.0);
    }
    SUBCASE("sine endpoints vanish") {
        Mat phi = evaluate_basis({BasisKind::Sine, 1, 1.0}, g);
        CHECK(std::abs(phi(0, 0)) < 1e-15);
        CHECK(std::abs(phi(40, 0)) < 1e-15);
    }
    SUBCASE("cosine M=6 Gram matrix") {
        Mat phi = evaluate_basis({BasisKind::Cosine, 6, 1.0}, g);
        // trapezoid weights integrate products of these cosines exactly on a uniform grid
        Vec w = Vec::Constant(g.n(), g.dx());
        w[0] *= 0.5;
        w[g.n() - 1] *= 0.5;
        Mat gram = phi.transpose() * w.asDiagonal() * phi;
        for (int j = 0; j < 6; ++j)
            for (int k = 0; k < 6; ++k) CHECK(std::abs(gram(j, k) - cosine_gram(j, k)) < 1e-10);
    }
    SUBCASE("dx-weighted Gram converges to the analytic diagonal") {
        // dx * I over all nodes differs from the exact trapezoid sum only by
        // half-weights at the two ends, so the error is first order in dx
        double prev = 0.0;
        for (int n : {21, 41, 81, 161}) {
            SpaceTimeGrid gg(1.0, n, 1.0, 1);
            Mat phi = evaluate_basis({BasisKind::Cosine, 4, 1.0}, gg);
            Mat gram = gg.dx() * phi.transpose() * phi;
            double err = 0.0;
            for (int j = 0; j < 4; ++j)
                for (int k = 0; k < 4; ++k) err = std::max(err, std::abs(gram(j, k) - cosine_gram(j, k)));
            CHECK(err <= gg.dx() + 1e-12);
            if (prev > 0.0) CHECK(prev / err > 1.9);
            prev = err;
        }
    }
    SUBCASE("fourier pairs alternate sin/cos") {
        Mat phi = evaluate_basis({BasisKind::FourierPairs, 4, 1.0}, g);
        const double x = g.x(7);
        const double pi = std::numbers::pi;
        CHECK(phi(7, 0) == doctest::Approx(std::sin(pi * x)));
        CHECK(phi(7, 1) == doctest::Approx(std::cos(pi * x)));
        CHECK(phi(7, 2) == doctest::Approx(std::sin(2 * pi * x)));
        CHECK(phi(7, 3) == doctest::Approx(std::cos(2 * pi * x)));
    }
    SUBCASE("domain mismatch is a configuration error") {
        CHECK_THROWS_AS(evaluate_basis({BasisKind::Cosine, 2, 2.0}, g), ConfigError);
        CHECK_THROWS_AS(evaluate_basis({BasisKind::Cosine, 0, 1.0}, g), ConfigError);
    }
}

TEST_CASE("reconstruct_control") {
    SpaceTimeGrid g(1.0, 21, 1.0, 1);
    Mat phi = evaluate_basis({BasisKind::Cosine, 5, 1.0}, g);
    CHECK(reconstruct_control(Vec::Zero(5), phi).cwiseAbs().maxCoeff() == 0.0);
    Vec e0 = Vec::Zero(5);
    e0[0] = 1.0;
    CHECK((reconstruct_control(e0, phi).array() - 1.0).abs().maxCoeff() < 1e-15);

    Vec c = random_matrix(5, 1, 3);
    Vec fast = reconstruct_control(c, phi);
    for (int i = 0; i < g.n(); ++i) {
        double s = 0.0;
        for (int j = 0; j < 5; ++j) s += c[j] * std::cos(j * std::numbers::pi * g.x(i));
        CHECK(std::abs(fast[i] - s) < 1e-12);
    }

    Vec c2 = random_matrix(5, 1, 4);
    const double a = 0.7, b = -1.3;
    Vec lhs = reconstruct_control(a * c + b * c2, phi);
    Vec rhs = a * reconstruct_control(c, phi) + b * reconstruct_control(c2, phi);
    CHECK((lhs - rhs).cwiseAbs().maxCoeff() < 1e-13);

    CHECK_THROWS_AS(reconstruct_control(Vec::Zero(4), phi), DimensionError);
}

TEST_CASE("control field and bounds") {
    CHECK_THROWS_AS(BoxBounds(1.0, -1.0), ConfigError);
    BoxBounds b(-1.0, 1.0);
    CHECK(b.clamp(3.0) == 1.0);
    CHECK(b.midpoint() == 0.0);
    auto u = ControlField::make_static(Vec::Constant(5, 0.5));
    CHECK(u.within(b));
    CHECK_FALSE(ControlField::make_static(Vec::Constant(5, 1.5)).within(b));
    CHECK_THROWS_AS(ControlField::make_weighted(Mat::Zero(3, 2), {BasisKind::Cosine, 3, 1.0}), DimensionError);
    Vec bad = Vec::Zero(3);
    bad[1] = std::nan("");
    CHECK_THROWS_AS(ControlField::make_static(bad), NumericalError);

    SpaceTimeGrid g(1.0, 11, 1.0, 2);
    Mat w = Mat::Zero(3, 2);
    w(1, 1) = 2.0;
    auto cf = ControlField::make_weighted(w, {BasisKind::Cosine, 2, 1.0});
    Vec f = cf.field_at(1, g);
    CHECK(f[0] == doctest::Approx(2.0));
    CHECK(f[10] == doctest::Approx(-2.0));
}

TEST_CASE("state trajectory invariants") {
    SpaceTimeGrid g(1.0, 5, 1.0, 3);
    Mat v = Mat::Zero(4, 5);
    v.row(0).setConstant(0.25);
    StateTrajectory t(v, g);
    CHECK(t.initial()[2] == 0.25);
    CHECK_THROWS_AS(StateTrajectory(Mat::Zero(3, 5), g), DimensionError);
    v(2, 2) = std::numeric_limits<double>::infinity();
    CHECK_THROWS_AS(StateTrajectory(v, g), NumericalError);
}

TEST_CASE("target profiles") {
    SpaceTimeGrid g(1.0, 11, 1.0, 1);
    CHECK(TargetProfile::parabola(2.0).value(0.5) == doctest::Approx(0.5));
    CHECK(TargetProfile::sine(1.0, 0.2, 0.0, 6.0).value(0.3) == doctest::Approx(1.0 + 0.2 * std::sin(1.8)));
    CHECK(TargetProfile::sine(1.0, 2.0, 0.5, 1.0).value(0.0) == doctest::Approx(2.0));
    CHECK(TargetProfile::ramp(1.0, 0.5).evaluate(g)[10] == doctest::Approx(1.5));
    CHECK(TargetProfile::constant(3.0).evaluate(g).size() == 11);

    auto t = TargetProfile::parse("sine:0,0.8,0,pi");
    CHECK(t.value(0.5) == doctest::Approx(0.8));
    auto round = TargetProfile::parse(TargetProfile::sine(1, 0.2, 0, 6).to_string());
    CHECK(round.value(0.37) == doctest::Approx(TargetProfile::sine(1, 0.2, 0, 6).value(0.37)));
    CHECK_THROWS_AS(TargetProfile::parse("ramp:1"), ConfigError);
    CHECK_THROWS_AS(TargetProfile::parse("wave:1"), ConfigError);
    CHECK_THROWS_AS(TargetProfile::parse("constant:abc"), ConfigError);
}

TEST_CASE("objective_value") {
    SpaceTimeGrid g(1.0, 11, 1.0, 4);
    const auto target = TargetProfile::constant(1.0);
    SUBCASE("zero when the trajectory tracks the target") {
        StateTrajectory traj(Mat::Ones(5, 11), g);
        auto r = objective_value(traj, ControlField::make_static(Vec::Zero(11)), target, {1.0, 1.0});
        CHECK(r.total == 0.0);
    }
    SUBCASE("unit terminal error integrates to about one") {
        StateTrajectory traj(Mat::Zero(5, 11), g);
        auto r = objective_value(traj, ControlField::make_static(Vec::Zero(11)), target, {0.0, 0.0});
        CHECK(r.terminal == doctest::Approx(g.dx() * g.n()));
        CHECK(std::abs(r.terminal - 1.0) <= 1.01 * g.dx());
    }
    SUBCASE("matches a refined quadrature of the piecewise-constant reconstruction") {
        Mat v = random_matrix(5, 11, 9);
        Mat w = random_matrix(5, 3, 10);
        StateTrajectory traj(v, g);
        auto ctl = ControlField::make_weighted(w, {BasisKind::Cosine, 3, 1.0});
        ObjectiveWeights ow(0.3, 0.07);
        auto r = objective_value(traj, ctl, target, ow);

        // each node owns the cell [x_i, x_i + dx), each step owns [t_k, t_k + dt)
        const int refine = 64;
        const double h = g.dx() / refine, tau = g.dt() / refine;
        double term = 0.0, run = 0.0, eff = 0.0;
        for (int i = 0; i < g.n(); ++i)
            for (int s = 0; s < refine; ++s) term += h * std::pow(v(4, i) - 1.0, 2);
        for (int k = 0; k < g.steps(); ++k)
            for (int q = 0; q < refine; ++q) {
                for (int i = 0; i < g.n(); ++i)
                    for (int s = 0; s < refine; ++s) run += tau * h * std::pow(v(k, i) - 1.0, 2);
                eff += tau * w.row(k).squaredNorm();
            }
        CHECK(std::abs(r.terminal - term) < 1e-8);
        CHECK(std::abs(r.running - run) < 1e-8);
        CHECK(std::abs(r.effort - eff) < 1e-8);
        CHECK(std::abs(r.total - (term + 0.3 * run + 0.07 * eff)) < 1e-8);
    }
    SUBCASE("non-negative on random inputs") {
        for (unsigned s = 0; s < 50; ++s) {
            StateTrajectory traj(random_matrix(5, 11, s), g);
            auto r = objective_value(traj, ControlField::make_static(random_matrix(11, 1, s + 100)),
                                     TargetProfile::ramp(0.3, 0.1), {0.5, 0.5});
            CHECK(r.total >= 0.0);
            CHECK(r.terminal > 0.0);
        }
    }
}

TEST_CASE("terminal_mse") {
    SpaceTimeGrid g(1.0, 11, 1.0, 2);
    auto target = TargetProfile::sine(1.0, 0.2, 0.0, 6.0);
    Mat v = Mat::Zero(3, 11);
    v.row(2) = target.evaluate(g).transpose();
    CHECK(terminal_mse(StateTrajectory(v, g), target) == 0.0);
    v.row(2).array() += 0.1;
    CHECK(terminal_mse(StateTrajectory(v, g), target) == doctest::Approx(0.01));
}
