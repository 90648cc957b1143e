#pragma once

#include <Eigen/LU>

#include <optional>
#include <variant>

#include "pdeop/core.hpp"
#include "pdeop/tridiagonal.hpp"

namespace pdeop::pde {

/// dy/dt = D y_xx - beta (y - y_ref) + alpha u with zero-flux boundaries.
struct ReactionDiffusionParams {
    double diffusion = 0.1;
    double leakage = 1.0;
    double gain = 2.0;
    Vec reference;  // y_ref on the grid

    void validate(int n) const;
};

/// dy/dt + y y_x = nu y_xx + u with homogeneous Dirichlet boundaries.
struct BurgersParams {
    double viscosity = 0.03;

    void validate() const;
};

enum class BoundaryKind { Neumann, Dirichlet };

struct StaticInput {};
/// Static controls enter node-wise (B is n x n); basis controls through Phi (B is n x M).
using InputKind = std::variant<StaticInput, BasisSet>;

/// Second-difference matrix with mirrored zero-flux boundary rows, scaled 1/dx^2.
Mat neumann_laplacian(int n, double dx);

/// Precomputed affine Crank-Nicolson map y_{k+1} = A_cn y_k + B in_k + d.
class CnOperator {
public:
    CnOperator(const ReactionDiffusionParams& params, const SpaceTimeGrid& grid, const InputKind& input);

    const SpaceTimeGrid& grid() const noexcept { return grid_; }
    BoundaryKind boundary() const noexcept { return BoundaryKind::Neumann; }
    const Mat& semi_discrete() const noexcept { return a_; }
    const Mat& step_matrix() const noexcept { return a_cn_; }
    const Mat& input_matrix() const noexcept { return b_; }
    const Vec& drift() const noexcept { return d_; }
    bool static_input() const noexcept { return !basis_.has_value(); }
    const std::optional<BasisSet>& basis() const noexcept { return basis_; }
    int input_dim() const noexcept { return static_cast<int>(b_.cols()); }

    /// One step with a per-step input (u for static, c_k for basis input).
    Vec step(const Vec& y, const Vec& input) const;

    /// Solves (I - dt/2 A)^T z = rhs with the stored factorization.
    Vec solve_left_transposed(const Vec& rhs) const;

private:
    SpaceTimeGrid grid_;
    std::optional<BasisSet> basis_;
    Mat a_;
    Eigen::PartialPivLU<Mat> left_lu_;
    Mat a_cn_;
    Mat b_;
    Vec d_;
};

CnOperator build_cn_operator(const ReactionDiffusionParams& params, const SpaceTimeGrid& grid,
                             const InputKind& input);

/// Per-step inputs (steps x input_dim) seen by the CN stepper. Weighted
/// controls with steps+1 rows are averaged over each step; with `steps` rows
/// the left value c(t_k) is used.
Mat step_inputs(const CnOperator& op, const ControlField& control);

StateTrajectory rollout_linear(const CnOperator& op, const Vec& y0, const ControlField& control);

/// Rolls out with explicit per-step inputs (steps x input_dim).
StateTrajectory rollout_linear_inputs(const CnOperator& op, const Vec& y0, const Mat& inputs);

// ---------------------------------------------------------------------------
// Viscous Burgers

/// Semi-discrete right-hand side with conservative central convection:
///   f_i = -(y_{i+1}^2 - y_{i-1}^2) / (4 dx) + nu (y_{i+1} - 2 y_i + y_{i-1}) / dx^2 + g_i
/// on interior nodes, and 0 on the pinned endpoints.
Vec burgers_semidiscrete_residual(const Vec& y, const Vec& forcing, const BurgersParams& params,
                                  const SpaceTimeGrid& grid);

/// Jacobian of the residual with respect to y: -D1 diag(y) + nu D2 (boundary rows zero).
Tridiagonal burgers_jacobian(const Vec& y, const BurgersParams& params, const SpaceTimeGrid& grid);

struct NewtonOptions {
    double tolerance = 1e-10;
    int max_iterations = 25;
};

struct NewtonReport {
    int iterations = 0;
    double residual = 0.0;
};

/// Implicit CN step solved by Newton with the analytic Jacobian. Forcing is
/// Phi * weights held over the step. Throws SolverError on non-convergence.
Vec step_burgers(const Vec& y, const Vec& forcing, const BurgersParams& params,
                 const SpaceTimeGrid& grid, const NewtonOptions& opts = {},
                 NewtonReport* report = nullptr);
Vec step_burgers(const Vec& y, const Vec& weights, const BasisSet& basis, const BurgersParams& params,
                 const SpaceTimeGrid& grid, const NewtonOptions& opts = {});

/// Iterated step_burgers; row k of `weights` drives step k (left endpoint).
StateTrajectory rollout_burgers(const Vec& y0, const Mat& weights, const BasisSet& basis,
                                const BurgersParams& params, const SpaceTimeGrid& grid,
                                const NewtonOptions& opts = {});

}  // namespace pdeop::pde
