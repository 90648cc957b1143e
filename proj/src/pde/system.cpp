#include "pdeop/system.hpp"

#include <numbers>

namespace pdeop {

std::string to_string(SystemKind kind) {
    switch (kind) {
        case SystemKind::Voltage: return "voltage";
        case SystemKind::Heat: return "heat";
        case SystemKind::Burgers: return "burgers";
    }
    return "?";
}

SystemKind system_from_string(const std::string& name) {
    if (name == "voltage") return SystemKind::Voltage;
    if (name == "heat") return SystemKind::Heat;
    if (name == "burgers") return SystemKind::Burgers;
    throw ConfigError("unknown system '" + name + "'");
}

SystemSpec default_system(SystemKind kind) {
    SystemSpec s;
    s.kind = kind;
    s.bounds = BoxBounds(-1.0, 1.0);
    switch (kind) {
        case SystemKind::Voltage:
            s.grid = SpaceTimeGrid(1.0, 101, 5.0, 101);
            s.diffusion.diffusion = 0.1;
            s.diffusion.leakage = 1.0;
            s.diffusion.gain = 2.0;
            s.diffusion.reference = Vec::Ones(s.grid.n());
            s.basis = BasisSet{BasisKind::Cosine, 1, 1.0};  // unused: static control
            s.objective = ObjectiveWeights(0.0, 1e-4);
            break;
        case SystemKind::Heat:
            s.grid = SpaceTimeGrid(1.0, 41, 1.0, 41);
            s.diffusion.diffusion = 0.1;
            s.diffusion.leakage = 0.5;
            s.diffusion.gain = 2.0;
            s.diffusion.reference = Vec::Zero(s.grid.n());
            s.basis = BasisSet{BasisKind::Cosine, 6, 1.0};
            s.objective = ObjectiveWeights(0.0, 1e-5);
            break;
        case SystemKind::Burgers:
            s.grid = SpaceTimeGrid(1.0, 81, 4.0, 201);
            s.burgers.viscosity = 0.03;
            s.basis = BasisSet{BasisKind::Sine, 4, 1.0};
            s.objective = ObjectiveWeights(0.0, 1e-4);
            break;
    }
    s.initial_state = Vec::Zero(s.grid.n());
    return s;
}

TargetProfile default_target(SystemKind kind, const std::string& family) {
    switch (kind) {
        case SystemKind::Voltage:
            if (family == "sine") return TargetProfile::sine(1.0, 0.2, 0.0, 6.0);
            if (family == "ramp") return TargetProfile::ramp(1.0, 0.5);
            if (family == "constant") return TargetProfile::constant(1.0);
            break;
        case SystemKind::Heat:
            if (family == "sine") return TargetProfile::sine(0.6, 0.3, 0.0, 2.0);
            if (family == "ramp") return TargetProfile::ramp(1.0, 0.5);
            if (family == "constant") return TargetProfile::constant(1.0);
            break;
        case SystemKind::Burgers:
            // sin(pi x) keeps the profile compatible with the pinned endpoints
            if (family == "sine") return TargetProfile::sine(0.0, 0.8, 0.0, std::numbers::pi);
            if (family == "parabola") return TargetProfile::parabola(2.0);
            if (family == "constant" || family == "zero") return TargetProfile::constant(0.0);
            break;
    }
    throw ConfigError("no default '" + family + "' target for system " + to_string(kind));
}

Simulator::Simulator(SystemSpec spec) : spec_(std::move(spec)) {
    if (spec_.initial_state.size() != spec_.grid.n())
        throw DimensionError("initial state length does not match grid");
    if (spec_.kind == SystemKind::Burgers) {
        spec_.burgers.validate();
        phi_ = evaluate_basis(spec_.basis, spec_.grid);
    } else if (spec_.kind == SystemKind::Heat) {
        op_.emplace(spec_.diffusion, spec_.grid, pde::InputKind{spec_.basis});
        phi_ = evaluate_basis(spec_.basis, spec_.grid);
    } else {
        op_.emplace(spec_.diffusion, spec_.grid, pde::InputKind{pde::StaticInput{}});
    }
}

const pde::CnOperator& Simulator::linear_operator() const {
    if (!op_) throw ConfigError("system '" + to_string(spec_.kind) + "' has no linear CN operator");
    return *op_;
}

Vec Simulator::step(const Vec& y, const Vec& input) const {
    if (op_) return op_->step(y, input);
    if (input.size() != phi_.cols()) throw DimensionError("input length does not match basis");
    return pde::step_burgers(y, Vec(phi_ * input), spec_.burgers, spec_.grid, spec_.newton);
}

StateTrajectory Simulator::rollout(const Mat& inputs) const { return rollout(spec_.initial_state, inputs); }

StateTrajectory Simulator::rollout(const Vec& y0, const Mat& inputs) const {
    if (op_) return pde::rollout_linear_inputs(*op_, y0, inputs);
    return pde::rollout_burgers(y0, inputs, spec_.basis, spec_.burgers, spec_.grid, spec_.newton);
}

Mat Simulator::inputs_of(const ControlField& control) const {
    if (op_) return pde::step_inputs(*op_, control);
    if (control.is_static()) throw DimensionError("Burgers expects weighted controls");
    const Mat& w = control.as_weighted().weights;
    if (w.rows() < spec_.grid.steps()) throw DimensionError("weight trajectory too short");
    return w.topRows(spec_.grid.steps());
}

StateTrajectory Simulator::rollout(const ControlField& control) const { return rollout(inputs_of(control)); }

ControlField Simulator::control_from_inputs(const Mat& inputs) const {
    if (spec_.static_control()) return ControlField::make_static(inputs.row(0).transpose());
    return ControlField::make_weighted(inputs, spec_.basis);
}

}  // namespace pdeop
