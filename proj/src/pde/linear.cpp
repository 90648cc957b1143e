#include <cmath>

#include "pdeop/pde.hpp"

namespace pdeop::pde {

void ReactionDiffusionParams::validate(int n) const {
    if (!(diffusion >= 0.0)) throw ConfigError("diffusion must be non-negative");
    if (!std::isfinite(leakage) || !std::isfinite(gain)) throw ConfigError("non-finite parameters");
    if (reference.size() != n) throw DimensionError("reference profile length does not match grid");
    if (!reference.allFinite()) throw ConfigError("reference profile is not finite");
}

Mat neumann_laplacian(int n, double dx) {
    if (n < 3) throw ConfigError("Neumann Laplacian needs n >= 3");
    Mat lap = Mat::Zero(n, n);
    const double s = 1.0 / (dx * dx);
    lap(0, 0) = -2.0 * s;
    lap(0, 1) = 2.0 * s;
    for (int i = 1; i < n - 1; ++i) {
        lap(i, i - 1) = s;
        lap(i, i) = -2.0 * s;
        lap(i, i + 1) = s;
    }
    lap(n - 1, n - 2) = 2.0 * s;
    lap(n - 1, n - 1) = -2.0 * s;
    return lap;
}

CnOperator::CnOperator(const ReactionDiffusionParams& params, const SpaceTimeGrid& grid,
                       const InputKind& input)
    : grid_(grid) {
    const int n = grid.n();
    params.validate(n);
    const double dt = grid.dt();
    const Mat eye = Mat::Identity(n, n);
    a_ = params.diffusion * neumann_laplacian(n, grid.dx()) - params.leakage * eye;

    left_lu_.compute(eye - 0.5 * dt * a_);
    if (!(left_lu_.rcond() > 1e-14)) throw NumericalError("CN left matrix (I - dt/2 A) is singular");
    a_cn_ = left_lu_.solve(eye + 0.5 * dt * a_);

    if (const auto* basis = std::get_if<BasisSet>(&input)) {
        basis_ = *basis;
        b_ = left_lu_.solve(dt * params.gain * evaluate_basis(*basis, grid));
    } else {
        b_ = left_lu_.solve(dt * params.gain * eye);
    }
    d_ = left_lu_.solve(dt * params.leakage * params.reference);
}

Vec CnOperator::step(const Vec& y, const Vec& input) const {
    if (y.size() != grid_.n()) throw DimensionError("state length does not match grid");
    if (input.size() != b_.cols()) throw DimensionError("input length does not match operator");
    return a_cn_ * y + b_ * input + d_;
}

Vec CnOperator::solve_left_transposed(const Vec& rhs) const { return left_lu_.transpose().solve(rhs); }

CnOperator build_cn_operator(const ReactionDiffusionParams& params, const SpaceTimeGrid& grid,
                             const InputKind& input) {
    return CnOperator(params, grid, input);
}

Mat step_inputs(const CnOperator& op, const ControlField& control) {
    const int N = op.grid().steps();
    if (control.is_static()) {
        if (!op.static_input()) throw DimensionError("static control given to a basis-input operator");
        const Vec& u = control.as_static().u;
        if (u.size() != op.input_dim()) throw DimensionError("static control length mismatch");
        return u.transpose().replicate(N, 1);
    }
    if (op.static_input()) throw DimensionError("weighted control given to a static-input operator");
    const auto& w = control.as_weighted();
    if (w.weights.cols() != op.input_dim()) throw DimensionError("weight columns do not match basis");
    if (w.weights.rows() == N + 1)
        return 0.5 * (w.weights.topRows(N) + w.weights.bottomRows(N));
    if (w.weights.rows() == N) return w.weights;
    throw DimensionError("weighted control must have steps or steps+1 rows");
}

StateTrajectory rollout_linear_inputs(const CnOperator& op, const Vec& y0, const Mat& inputs) {
    const auto& g = op.grid();
    if (y0.size() != g.n()) throw DimensionError("initial state length does not match grid");
    if (inputs.rows() != g.steps() || inputs.cols() != op.input_dim())
        throw DimensionError("input matrix must be steps x input_dim");
    Mat y(g.steps() + 1, g.n());
    y.row(0) = y0.transpose();
    Vec cur = y0;
    for (int k = 0; k < g.steps(); ++k) {
        cur = op.step(cur, inputs.row(k).transpose());
        y.row(k + 1) = cur.transpose();
    }
    return StateTrajectory(std::move(y), g);
}

StateTrajectory rollout_linear(const CnOperator& op, const Vec& y0, const ControlField& control) {
    return rollout_linear_inputs(op, y0, step_inputs(op, control));
}

}  // namespace pdeop::pde
