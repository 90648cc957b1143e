#pragma once

#include <string>

#include "pdeop/optim.hpp"
#include "pdeop/system.hpp"

namespace pdeop::control {

// ---------------------------------------------------------------------------
// Static control (voltage):
//   J_h(u) = 1/2 ||y_N - y*||_M^2 + gamma/2 ||u||_M^2,  M = dx I
// which is half of objective_value() with lambda_run = 0.

struct Gradient {
    double value = 0.0;
    Vec gradient;
};

/// One forward rollout, then lambda_N = M (y_N - y*), lambda_k = A_cn^T lambda_{k+1},
/// grad = gamma M u + sum_k B^T lambda_{k+1}.
Gradient adjoint_gradient_static(const Simulator& sim, const Vec& u, const Vec& target, double gamma,
                                 SolveCounter* counter = nullptr);

/// J_h(u) from one forward rollout.
double static_objective(const Simulator& sim, const Vec& u, const Vec& target, double gamma,
                        SolveCounter* counter = nullptr);

struct StaticSolution {
    Vec u;
    double objective = 0.0;
    double terminal_mse = 0.0;
    optim::QnResult optimizer;
    SolveCounter counter;
    double wall_seconds = 0.0;
};

/// Black-box optimization with forward-difference gradients (n + 1 rollouts each).
StaticSolution direct_optimize_static(const Simulator& sim, const Vec& target, double gamma,
                                      const BoxBounds& bounds, const optim::QnOptions& opts = {},
                                      const optim::FdScheme& fd = {optim::FdKind::Forward, 1e-6});

StaticSolution adjoint_optimize_static(const Simulator& sim, const Vec& target, double gamma,
                                       const BoxBounds& bounds, const optim::QnOptions& opts = {});

// ---------------------------------------------------------------------------
// Time-varying basis control (heat, Burgers). With per-step inputs c_k and
// e_k = y_k - y*, the horizon objective over h steps from a given state is
//   J = 1/2 e_h' Q e_h + 1/2 sum_{i=1}^{h-1} e_i' T_Q e_i + 1/2 sum_{i=0}^{h-1} c_i' R c_i.
// All weight matrices are diagonal and stored as vectors.

struct MpcConfig {
    int horizon = 10;
    Vec terminal_weight;  // diag(Q), length n
    Vec running_weight;   // diag(T_Q), length n
    Vec effort_weight;    // diag(R), length M
    BoxBounds bounds;
    int inner_iterations = 20;   // quasi-Newton cap per step, adjoint receding horizon
    int nmpc_iterations = 50;    // same for NMPC
    optim::QnOptions qn;
    optim::QpOptions qp;

    void validate(int n, int m) const;
};

/// Q = dx I, T_Q = lambda_run dx dt I, R = gamma dt I from the system's objective weights.
MpcConfig default_mpc_config(const SystemSpec& spec, int horizon = 10);

/// Gradient of the horizon objective w.r.t. the h x M input block (row-major
/// flattening c_0, c_1, ...). Linear systems: lambda_h = Q e_h,
/// lambda_i = A^T lambda_{i+1} + T_Q e_i, grad_i = R c_i + B^T lambda_{i+1}.
Gradient linear_horizon_gradient(const Simulator& sim, const Vec& y_start, const Mat& inputs,
                                 const Vec& target, const MpcConfig& cfg, SolveCounter* counter = nullptr);

/// Full-horizon version from the system's initial state.
Gradient heat_adjoint_gradient(const Simulator& sim, const Mat& weights, const Vec& target,
                               const MpcConfig& cfg, SolveCounter* counter = nullptr);

/// Burgers discrete adjoint of the implicit CN scheme. With A_k = I - dt/2 J(y_{k+1})
/// and B_k = -I - dt/2 J(y_k) (pinned rows: identity in A_k, zero in B_k):
///   A_{h-1}^T q_{h-1} = Q e_h,   A_{i-1}^T q_{i-1} = T_Q e_i - B_i^T q_i,
///   grad_i = R c_i + dt Phi^T q_i.
Gradient burgers_horizon_gradient(const Simulator& sim, const Vec& y_start, const Mat& inputs,
                                  const Vec& target, const MpcConfig& cfg, SolveCounter* counter = nullptr);

Gradient burgers_adjoint_gradient(const Simulator& sim, const Mat& weights, const Vec& target,
                                  const MpcConfig& cfg, SolveCounter* counter = nullptr);

/// Row-major (c_0, c_1, ...) flattening used by the horizon gradients.
Vec flatten_inputs(const Mat& inputs);
Mat unflatten_inputs(const Vec& flat, int modes);

/// Horizon objective value from one forward rollout.
double horizon_objective(const Simulator& sim, const Vec& y_start, const Mat& inputs, const Vec& target,
                         const MpcConfig& cfg, SolveCounter* counter = nullptr);

struct ClosedLoopResult {
    Mat inputs;  // applied per-step inputs, steps x M
    StateTrajectory trajectory;
    SolveCounter counter;
    long inner_iterations = 0;
    double terminal_mse = 0.0;
    double wall_seconds = 0.0;
};

/// Open-loop minimization of the full-horizon objective with adjoint gradients.
ClosedLoopResult adjoint_optimize_open_loop(const Simulator& sim, const Vec& target, const MpcConfig& cfg,
                                            int max_iterations = 100);

/// Receding horizon: at each step minimize the (shrinking near T) horizon
/// objective with adjoint gradients and at most cfg.inner_iterations
/// quasi-Newton iterations, warm-started by shifting, then apply the first input.
ClosedLoopResult receding_horizon_adjoint(const Simulator& sim, const Vec& y0, const Vec& target,
                                          const MpcConfig& cfg);

/// Linear MPC: condensed dense QP over the stacked horizon inputs per step.
ClosedLoopResult lmpc_control(const Simulator& sim, const Vec& y0, const Vec& target, const MpcConfig& cfg);

/// Nonlinear MPC by single shooting on the Burgers model.
ClosedLoopResult nmpc_control(const Simulator& sim, const Vec& y0, const Vec& target, const MpcConfig& cfg);

/// Condensed QP of one LMPC horizon: 1/2 C'HC + q'C over row-major stacked inputs.
struct CondensedQp {
    Mat hessian;
    Vec linear;
};
CondensedQp condense_horizon(const Simulator& sim, const Vec& y_start, int horizon, const Vec& target,
                             const MpcConfig& cfg);

}  // namespace pdeop::control
