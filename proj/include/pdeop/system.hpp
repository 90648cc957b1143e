#pragma once

#include <optional>
#include <string>

#include "pdeop/core.hpp"
#include "pdeop/pde.hpp"

namespace pdeop {

enum class SystemKind { Voltage, Heat, Burgers };

std::string to_string(SystemKind kind);
SystemKind system_from_string(const std::string& name);

/// Everything needed to simulate and score one benchmark problem.
struct SystemSpec {
    SystemKind kind = SystemKind::Voltage;
    SpaceTimeGrid grid{1.0, 101, 5.0, 101};
    pde::ReactionDiffusionParams diffusion;  // voltage, heat
    pde::BurgersParams burgers;              // burgers
    BasisSet basis;                          // heat, burgers
    BoxBounds bounds;
    Vec initial_state;
    ObjectiveWeights objective;
    pde::NewtonOptions newton;

    bool static_control() const noexcept { return kind == SystemKind::Voltage; }
    /// n for static controls, M for basis controls.
    int control_dim() const noexcept { return static_control() ? grid.n() : basis.modes; }
};

/// Benchmark presets (grid, coefficients, bounds) for the three problems.
SystemSpec default_system(SystemKind kind);

/// Target profiles used for evaluation, keyed by family name.
TargetProfile default_target(SystemKind kind, const std::string& family);

/// Counts full forward rollouts and backward adjoint sweeps.
struct SolveCounter {
    long forward = 0;
    long backward = 0;
};

/// Reference solver for a SystemSpec with the CN factorization cached.
class Simulator {
public:
    explicit Simulator(SystemSpec spec);

    const SystemSpec& spec() const noexcept { return spec_; }
    const SpaceTimeGrid& grid() const noexcept { return spec_.grid; }
    /// n x M basis matrix (empty for static-control systems).
    const Mat& basis_matrix() const noexcept { return phi_; }
    const pde::CnOperator& linear_operator() const;
    bool linear() const noexcept { return op_.has_value(); }

    /// One step of the true dynamics with a per-step input.
    Vec step(const Vec& y, const Vec& input) const;

    /// Rollout from the spec's initial state with per-step inputs (steps x control_dim).
    StateTrajectory rollout(const Mat& inputs) const;
    StateTrajectory rollout(const Vec& y0, const Mat& inputs) const;
    StateTrajectory rollout(const ControlField& control) const;

    /// Per-step inputs implied by a control field.
    Mat inputs_of(const ControlField& control) const;

    ControlField control_from_inputs(const Mat& inputs) const;

private:
    SystemSpec spec_;
    std::optional<pde::CnOperator> op_;
    Mat phi_;
};

}  // namespace pdeop
