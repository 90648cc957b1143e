#include "pdeop/core.hpp"

#include <cmath>
#include <numbers>
#include <sstream>
#include <vector>

namespace pdeop {

SpaceTimeGrid::SpaceTimeGrid(double length, int n, double final_time, int steps)
    : length_(length), n_(n), final_time_(final_time), steps_(steps) {
    if (n < 3) throw ConfigError("grid needs at least 3 spatial points, got " + std::to_string(n));
    if (steps < 1) throw ConfigError("grid needs at least 1 time step");
    if (!(length > 0.0) || !std::isfinite(length)) throw ConfigError("grid length must be positive");
    if (!(final_time > 0.0) || !std::isfinite(final_time))
        throw ConfigError("final time must be positive");
}

Vec SpaceTimeGrid::coordinates() const {
    Vec x(n_);
    for (int i = 0; i < n_; ++i) x[i] = this->x(i);
    return x;
}

std::string to_string(BasisKind kind) {
    switch (kind) {
        case BasisKind::Cosine: return "cosine";
        case BasisKind::Sine: return "sine";
        case BasisKind::FourierPairs: return "fourier";
    }
    return "?";
}

BasisKind basis_kind_from_string(const std::string& name) {
    if (name == "cosine") return BasisKind::Cosine;
    if (name == "sine") return BasisKind::Sine;
    if (name == "fourier" || name == "fourier-pairs") return BasisKind::FourierPairs;
    throw ConfigError("unknown basis kind '" + name + "'");
}

Mat evaluate_basis(const BasisSet& basis, const SpaceTimeGrid& grid) {
    if (basis.modes < 1) throw ConfigError("basis needs at least one mode");
    if (std::abs(basis.length - grid.length()) > 1e-12 * grid.length())
        throw ConfigError("basis domain length does not match grid length");
    const double pi = std::numbers::pi;
    const double L = basis.length;
    Mat phi(grid.n(), basis.modes);
    for (int i = 0; i < grid.n(); ++i) {
        const double x = grid.x(i);
        for (int j = 0; j < basis.modes; ++j) {
            switch (basis.kind) {
                case BasisKind::Cosine: phi(i, j) = std::cos(j * pi * x / L); break;
                case BasisKind::Sine: phi(i, j) = std::sin((j + 1) * pi * x / L); break;
                case BasisKind::FourierPairs: {
                    const int k = j / 2 + 1;
                    phi(i, j) = (j % 2 == 0) ? std::sin(k * pi * x / L) : std::cos(k * pi * x / L);
                    break;
                }
            }
        }
    }
    return phi;
}

Vec reconstruct_control(const Vec& weights, const Mat& basis_matrix) {
    if (weights.size() != basis_matrix.cols())
        throw DimensionError("weight count " + std::to_string(weights.size()) +
                             " does not match basis columns " + std::to_string(basis_matrix.cols()));
    return basis_matrix * weights;
}

BoxBounds::BoxBounds(double lo, double hi) : lower(lo), upper(hi) {
    if (!(lo <= hi)) throw ConfigError("box bounds require lower <= upper");
}

ControlField ControlField::make_static(Vec u) {
    if (!all_finite(u)) throw NumericalError("static control has non-finite entries");
    return ControlField(Static{std::move(u)});
}

ControlField ControlField::make_weighted(Mat weights, BasisSet basis) {
    if (!all_finite(weights)) throw NumericalError("control weights have non-finite entries");
    if (weights.cols() != basis.modes)
        throw DimensionError("weight matrix has " + std::to_string(weights.cols()) +
                             " columns but basis has " + std::to_string(basis.modes) + " modes");
    return ControlField(Weighted{std::move(weights), basis});
}

Vec ControlField::field_at(int k, const SpaceTimeGrid& grid) const {
    if (is_static()) return as_static().u;
    const auto& w = as_weighted();
    return evaluate_basis(w.basis, grid) * w.weights.row(k).transpose();
}

bool ControlField::within(const BoxBounds& bounds) const {
    const Mat& m = is_static() ? Mat(as_static().u) : as_weighted().weights;
    return (m.array() >= bounds.lower).all() && (m.array() <= bounds.upper).all();
}

StateTrajectory::StateTrajectory(Mat values, SpaceTimeGrid grid)
    : values_(std::move(values)), grid_(grid) {
    if (values_.cols() != grid_.n() || values_.rows() != grid_.steps() + 1)
        throw DimensionError("trajectory must be (steps+1) x n");
    if (!all_finite(values_)) throw NumericalError("trajectory contains non-finite values");
}

TargetProfile TargetProfile::constant(double p1) { return {Kind::Constant, p1, 0, 0, 0}; }
TargetProfile TargetProfile::ramp(double p1, double p2) { return {Kind::Ramp, p1, p2, 0, 0}; }
TargetProfile TargetProfile::sine(double p1, double p2, double p3, double f0) {
    return {Kind::Sine, p1, p2, p3, f0};
}
TargetProfile TargetProfile::parabola(double p1) { return {Kind::Parabola, p1, 0, 0, 0}; }

namespace {

double parse_number(const std::string& tok) {
    // accepts plain numbers and multiples of pi ("pi", "2pi", "0.5pi")
    const auto pos = tok.find("pi");
    if (pos != std::string::npos) {
        const std::string head = tok.substr(0, pos);
        const double factor = head.empty() ? 1.0 : std::stod(head);
        return factor * std::numbers::pi;
    }
    std::size_t used = 0;
    const double v = std::stod(tok, &used);
    if (used != tok.size()) throw ConfigError("bad number '" + tok + "'");
    return v;
}

}  // namespace

TargetProfile TargetProfile::parse(const std::string& spec) {
    const auto colon = spec.find(':');
    const std::string name = spec.substr(0, colon);
    std::vector<double> p;
    if (colon != std::string::npos) {
        std::stringstream ss(spec.substr(colon + 1));
        std::string tok;
        try {
            while (std::getline(ss, tok, ',')) p.push_back(parse_number(tok));
        } catch (const std::logic_error&) {
            throw ConfigError("bad target parameters in '" + spec + "'");
        }
    }
    auto need = [&](std::size_t k) {
        if (p.size() != k)
            throw ConfigError("target '" + name + "' expects " + std::to_string(k) + " parameters");
    };
    if (name == "constant") { need(1); return constant(p[0]); }
    if (name == "ramp") { need(2); return ramp(p[0], p[1]); }
    if (name == "sine") { need(4); return sine(p[0], p[1], p[2], p[3]); }
    if (name == "parabola") { need(1); return parabola(p[0]); }
    throw ConfigError("unknown target profile '" + name + "'");
}

double TargetProfile::value(double x) const {
    switch (kind_) {
        case Kind::Constant: return p1_;
        case Kind::Ramp: return p1_ * x + p2_;
        case Kind::Sine: return p1_ + p2_ * (std::sin(f0_ * x) + p3_);
        case Kind::Parabola: return p1_ * x * (1.0 - x);
    }
    return 0.0;
}

Vec TargetProfile::evaluate(const SpaceTimeGrid& grid) const {
    Vec y(grid.n());
    for (int i = 0; i < grid.n(); ++i) y[i] = value(grid.x(i));
    return y;
}

std::string TargetProfile::family() const {
    switch (kind_) {
        case Kind::Constant: return "constant";
        case Kind::Ramp: return "ramp";
        case Kind::Sine: return "sine";
        case Kind::Parabola: return "parabola";
    }
    return "?";
}

std::string TargetProfile::to_string() const {
    std::ostringstream os;
    os.precision(17);
    os << family() << ':';
    switch (kind_) {
        case Kind::Constant: os << p1_; break;
        case Kind::Ramp: os << p1_ << ',' << p2_; break;
        case Kind::Sine: os << p1_ << ',' << p2_ << ',' << p3_ << ',' << f0_; break;
        case Kind::Parabola: os << p1_; break;
    }
    return os.str();
}

ObjectiveWeights::ObjectiveWeights(double run, double eff) : running(run), effort(eff) {
    if (run < 0.0 || eff < 0.0) throw ConfigError("objective weights must be non-negative");
}

ObjectiveBreakdown objective_value(const StateTrajectory& traj, const ControlField& control,
                                   const TargetProfile& target, const ObjectiveWeights& w) {
    return objective_value(traj, control, target.evaluate(traj.grid()), w);
}

ObjectiveBreakdown objective_value(const StateTrajectory& traj, const ControlField& control,
                                   const Vec& target, const ObjectiveWeights& w) {
    const auto& g = traj.grid();
    if (target.size() != g.n()) throw DimensionError("target length does not match grid");
    const int N = g.steps();
    ObjectiveBreakdown out;
    out.terminal = g.dx() * (traj.terminal() - target).squaredNorm();
    for (int k = 0; k < N; ++k) out.running += (traj.at(k) - target).squaredNorm();
    out.running *= g.dx() * g.dt();
    if (control.is_static()) {
        const Vec& u = control.as_static().u;
        if (u.size() != g.n()) throw DimensionError("static control length does not match grid");
        out.effort = g.dx() * u.squaredNorm();
    } else {
        const Mat& c = control.as_weighted().weights;
        if (c.rows() < N) throw DimensionError("weight trajectory shorter than the time grid");
        out.effort = g.dt() * c.topRows(N).squaredNorm();
    }
    out.total = out.terminal + w.running * out.running + w.effort * out.effort;
    return out;
}

double terminal_mse(const StateTrajectory& traj, const TargetProfile& target) {
    return terminal_mse(traj.terminal(), target.evaluate(traj.grid()));
}

double terminal_mse(const Vec& terminal, const Vec& target) {
    if (terminal.size() != target.size()) throw DimensionError("terminal/target length mismatch");
    return (terminal - target).squaredNorm() / static_cast<double>(terminal.size());
}

bool all_finite(const Mat& m) { return m.allFinite(); }

}  // namespace pdeop
