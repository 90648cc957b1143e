#include <cmath>
#include <sstream>

#include "pdeop/pde.hpp"

namespace pdeop::pde {

void BurgersParams::validate() const {
    if (!(viscosity > 0.0) || !std::isfinite(viscosity)) throw ConfigError("viscosity must be positive");
}

Vec burgers_semidiscrete_residual(const Vec& y, const Vec& forcing, const BurgersParams& params,
                                  const SpaceTimeGrid& grid) {
    const int n = grid.n();
    if (y.size() != n || forcing.size() != n) throw DimensionError("Burgers residual: size mismatch");
    const double dx = grid.dx();
    const double conv = 1.0 / (4.0 * dx);
    const double diff = params.viscosity / (dx * dx);
    Vec f = Vec::Zero(n);
    for (int i = 1; i < n - 1; ++i) {
        f[i] = -conv * (y[i + 1] * y[i + 1] - y[i - 1] * y[i - 1]) +
               diff * (y[i + 1] - 2.0 * y[i] + y[i - 1]) + forcing[i];
    }
    return f;
}

Tridiagonal burgers_jacobian(const Vec& y, const BurgersParams& params, const SpaceTimeGrid& grid) {
    const int n = grid.n();
    const double dx = grid.dx();
    const double diff = params.viscosity / (dx * dx);
    Tridiagonal j(n);
    for (int i = 1; i < n - 1; ++i) {
        j.lower[i - 1] = y[i - 1] / (2.0 * dx) + diff;  // d f_i / d y_{i-1}
        j.diag[i] = -2.0 * diff;
        j.upper[i] = -y[i + 1] / (2.0 * dx) + diff;  // d f_i / d y_{i+1}
    }
    return j;
}

namespace {

// G(z) = z - y - dt/2 (f(z) + f(y)) on interior nodes, z on the endpoints.
Vec cn_residual(const Vec& z, const Vec& y, const Vec& f_old, const Vec& forcing,
                const BurgersParams& params, const SpaceTimeGrid& grid) {
    Vec r = z - y - 0.5 * grid.dt() * (burgers_semidiscrete_residual(z, forcing, params, grid) + f_old);
    r[0] = z[0];
    r[grid.n() - 1] = z[grid.n() - 1];
    return r;
}

}  // namespace

Vec step_burgers(const Vec& y, const Vec& forcing, const BurgersParams& params,
                 const SpaceTimeGrid& grid, const NewtonOptions& opts, NewtonReport* report) {
    const int n = grid.n();
    if (y.size() != n || forcing.size() != n) throw DimensionError("Burgers step: size mismatch");
    if (!y.allFinite() || !forcing.allFinite()) throw NumericalError("Burgers step: non-finite input");
    const double dt = grid.dt();
    const Vec f_old = burgers_semidiscrete_residual(y, forcing, params, grid);

    Vec z = y;
    z[0] = 0.0;
    z[n - 1] = 0.0;
    Vec r = cn_residual(z, y, f_old, forcing, params, grid);
    double rnorm = r.lpNorm<Eigen::Infinity>();
    int it = 0;
    while (rnorm > opts.tolerance) {
        if (it == opts.max_iterations || !std::isfinite(rnorm)) {
            std::ostringstream os;
            os << "Burgers Newton did not converge in " << it << " iterations (residual " << rnorm << ")";
            throw SolverError(os.str(), rnorm);
        }
        Tridiagonal jac = burgers_jacobian(z, params, grid);
        jac.lower *= -0.5 * dt;
        jac.diag *= -0.5 * dt;
        jac.upper *= -0.5 * dt;
        jac.diag.array() += 1.0;
        // endpoint rows are the identity (the Jacobian rows there are already zero)
        Vec delta = jac.solve(-r);

        double step = 1.0;
        Vec trial;
        Vec trial_r;
        double trial_norm = 0.0;
        for (int halving = 0; halving < 8; ++halving) {
            trial = z + step * delta;
            trial[0] = 0.0;
            trial[n - 1] = 0.0;
            trial_r = cn_residual(trial, y, f_old, forcing, params, grid);
            trial_norm = trial_r.lpNorm<Eigen::Infinity>();
            if (trial_norm < rnorm || !(step > 0.0)) break;
            step *= 0.5;
        }
        z = std::move(trial);
        r = std::move(trial_r);
        rnorm = trial_norm;
        ++it;
    }
    if (report) {
        report->iterations = it;
        report->residual = rnorm;
    }
    return z;
}

Vec step_burgers(const Vec& y, const Vec& weights, const BasisSet& basis, const BurgersParams& params,
                 const SpaceTimeGrid& grid, const NewtonOptions& opts) {
    return step_burgers(y, reconstruct_control(weights, evaluate_basis(basis, grid)), params, grid, opts);
}

StateTrajectory rollout_burgers(const Vec& y0, const Mat& weights, const BasisSet& basis,
                                const BurgersParams& params, const SpaceTimeGrid& grid,
                                const NewtonOptions& opts) {
    params.validate();
    if (y0.size() != grid.n()) throw DimensionError("initial state length does not match grid");
    if (weights.rows() < grid.steps() || weights.cols() != basis.modes)
        throw DimensionError("Burgers weights must be (steps or more) x modes");
    const Mat phi = evaluate_basis(basis, grid);
    Mat y(grid.steps() + 1, grid.n());
    y.row(0) = y0.transpose();
    Vec cur = y0;
    for (int k = 0; k < grid.steps(); ++k) {
        cur = step_burgers(cur, Vec(phi * weights.row(k).transpose()), params, grid, opts);
        y.row(k + 1) = cur.transpose();
    }
    return StateTrajectory(std::move(y), grid);
}

}  // namespace pdeop::pde
