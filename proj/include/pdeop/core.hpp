#pragma once

#include <Eigen/Dense>

#include <string>
#include <variant>

#include "pdeop/error.hpp"

namespace pdeop {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Uniform 1D spatial grid on [0, L] paired with a uniform time grid on [0, T].
///
/// Node i sits at x_i = i * dx with dx = L / (n - 1); step k ends at
/// t_k = k * dt with dt = T / steps.
class SpaceTimeGrid {
public:
    SpaceTimeGrid(double length, int n, double final_time, int steps);

    double length() const noexcept { return length_; }
    int n() const noexcept { return n_; }
    double final_time() const noexcept { return final_time_; }
    int steps() const noexcept { return steps_; }
    double dx() const noexcept { return length_ / (n_ - 1); }
    double dt() const noexcept { return final_time_ / steps_; }

    double x(int i) const noexcept { return i * dx(); }
    double t(int k) const noexcept { return k * dt(); }
    Vec coordinates() const;

    /// Same spatial grid, different number of time steps.
    SpaceTimeGrid with_steps(int steps) const { return {length_, n_, final_time_, steps}; }

    bool same_space(const SpaceTimeGrid& other) const noexcept {
        return n_ == other.n_ && length_ == other.length_;
    }

private:
    double length_;
    int n_;
    double final_time_;
    int steps_;
};

enum class BasisKind { Cosine, Sine, FourierPairs };

/// Trigonometric spatial basis used to parameterize controls.
///
///   Cosine:        phi_j(x) = cos(j pi x / L),        j = 0..M-1
///   Sine:          phi_j(x) = sin((j + 1) pi x / L),  j = 0..M-1
///   FourierPairs:  sin(pi x/L), cos(pi x/L), sin(2 pi x/L), cos(2 pi x/L), ...
struct BasisSet {
    BasisKind kind = BasisKind::Cosine;
    int modes = 1;
    double length = 1.0;
};

std::string to_string(BasisKind kind);
BasisKind basis_kind_from_string(const std::string& name);

/// n x M matrix whose column j holds phi_j sampled on the grid nodes.
Mat evaluate_basis(const BasisSet& basis, const SpaceTimeGrid& grid);

/// Phi * c.
Vec reconstruct_control(const Vec& weights, const Mat& basis_matrix);

struct BoxBounds {
    double lower = -1.0;
    double upper = 1.0;

    BoxBounds() = default;
    BoxBounds(double lo, double hi);

    double clamp(double v) const noexcept { return v < lower ? lower : (v > upper ? upper : v); }
    bool contains(double v) const noexcept { return v >= lower && v <= upper; }
    double midpoint() const noexcept { return 0.5 * (lower + upper); }
    double half_width() const noexcept { return 0.5 * (upper - lower); }
};

/// Control applied to a system: either a static spatial field u(x) or a
/// trajectory of basis weights c(t_k) (one row per time level).
class ControlField {
public:
    struct Static {
        Vec u;
    };
    struct Weighted {
        Mat weights;  // rows: time levels, cols: modes
        BasisSet basis;
    };

    static ControlField make_static(Vec u);
    static ControlField make_weighted(Mat weights, BasisSet basis);

    bool is_static() const noexcept { return std::holds_alternative<Static>(data_); }
    const Static& as_static() const { return std::get<Static>(data_); }
    const Weighted& as_weighted() const { return std::get<Weighted>(data_); }

    /// u(t_k, .) on the grid; for static controls k is ignored.
    Vec field_at(int k, const SpaceTimeGrid& grid) const;

    /// True when every entry satisfies the bounds.
    bool within(const BoxBounds& bounds) const;

private:
    explicit ControlField(std::variant<Static, Weighted> d) : data_(std::move(d)) {}
    std::variant<Static, Weighted> data_;
};

/// State y(t_k, x_i) for k = 0..N_t (row 0 is the initial condition).
class StateTrajectory {
public:
    StateTrajectory(Mat values, SpaceTimeGrid grid);

    const Mat& values() const noexcept { return values_; }
    const SpaceTimeGrid& grid() const noexcept { return grid_; }
    Vec initial() const { return values_.row(0).transpose(); }
    Vec terminal() const { return values_.row(values_.rows() - 1).transpose(); }
    Vec at(int k) const { return values_.row(k).transpose(); }

private:
    Mat values_;
    SpaceTimeGrid grid_;
};

/// Parametric target profile y_target(x).
///
///   Constant(p1):          p1
///   Ramp(p1, p2):          p1 x + p2
///   Sine(p1, p2, p3, f0):  p1 + p2 (sin(f0 x) + p3)
///   Parabola(p1):          p1 x (1 - x)
class TargetProfile {
public:
    enum class Kind { Constant, Ramp, Sine, Parabola };

    static TargetProfile constant(double p1);
    static TargetProfile ramp(double p1, double p2);
    static TargetProfile sine(double p1, double p2, double p3, double f0);
    static TargetProfile parabola(double p1);

    /// Parses "constant:1", "ramp:1,0.5", "sine:1,0.2,0,6", "parabola:2".
    static TargetProfile parse(const std::string& spec);

    Kind kind() const noexcept { return kind_; }
    double value(double x) const;
    Vec evaluate(const SpaceTimeGrid& grid) const;
    std::string to_string() const;
    /// Short family name: constant, ramp, sine, parabola.
    std::string family() const;

private:
    TargetProfile(Kind k, double p1, double p2, double p3, double f0)
        : kind_(k), p1_(p1), p2_(p2), p3_(p3), f0_(f0) {}
    Kind kind_;
    double p1_, p2_, p3_, f0_;
};

struct ObjectiveWeights {
    double running = 0.0;  // lambda_run
    double effort = 0.0;   // gamma

    ObjectiveWeights() = default;
    ObjectiveWeights(double run, double eff);
};

struct ObjectiveBreakdown {
    double total = 0.0;
    double terminal = 0.0;
    double running = 0.0;
    double effort = 0.0;
};

/// Rectangle-rule objective with mass matrix dx * I:
///   terminal = dx * sum_i (y_N - y*)^2
///   running  = dt * dx * sum_{k<N} sum_i (y_k - y*)^2
///   effort   = dx * sum_i u_i^2                  (static)
///            = dt * sum_{k<N} ||c(t_k)||^2        (weighted)
ObjectiveBreakdown objective_value(const StateTrajectory& traj, const ControlField& control,
                                   const TargetProfile& target, const ObjectiveWeights& w);
ObjectiveBreakdown objective_value(const StateTrajectory& traj, const ControlField& control,
                                   const Vec& target, const ObjectiveWeights& w);

/// (1/n) sum_i (y(T, x_i) - y*(x_i))^2.
double terminal_mse(const StateTrajectory& traj, const TargetProfile& target);
double terminal_mse(const Vec& terminal, const Vec& target);

bool all_finite(const Mat& m);

}  // namespace pdeop
