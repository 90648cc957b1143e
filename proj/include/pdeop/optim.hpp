#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "pdeop/core.hpp"

namespace pdeop::optim {

enum class FdKind { Forward, Central };

/// Per-coordinate step eps_j = eta * (1 + |x_j|).
struct FdScheme {
    FdKind kind = FdKind::Central;
    double eta = 1e-6;
};

struct FdResult {
    Vec gradient;
    long evaluations = 0;
    double value = 0.0;  // f(x); only computed by the forward scheme
};

using Objective = std::function<double(const Vec&)>;

/// Forward differences cost n + 1 evaluations, central differences 2n.
FdResult fd_gradient(const Objective& f, const Vec& x, const FdScheme& scheme = {});

/// Per-coordinate box.
struct Box {
    Vec lower;
    Vec upper;

    static Box uniform(int n, const BoxBounds& b);
    int size() const noexcept { return static_cast<int>(lower.size()); }
    Vec project(const Vec& x) const;
    bool contains(const Vec& x) const;
    void validate(int n) const;
};

struct QnOptions {
    int memory = 10;
    int max_iterations = 100;
    double ftol = 1e-6;
    double gtol = 1e-8;
    double armijo = 1e-4;
    int max_line_search = 30;
};

enum class QnStatus { FunctionTolerance, GradientTolerance, MaxIterations, LineSearchFailed };
std::string to_string(QnStatus s);

struct QnTraceRow {
    int iteration = 0;
    double f = 0.0;
    double projected_gradient = 0.0;
    long evaluations = 0;
};

struct QnResult {
    Vec x;
    double f = 0.0;
    int iterations = 0;
    long evaluations = 0;
    QnStatus status = QnStatus::MaxIterations;
    std::vector<QnTraceRow> trace;
};

/// Returns f(x) and writes the gradient into `grad`.
using FunGrad = std::function<double(const Vec& x, Vec& grad)>;

/// Projected limited-memory quasi-Newton. The active set is the set of
/// coordinates at a bound whose gradient points outward; the two-loop
/// recursion runs on the free coordinates and the line search backtracks
/// along the projected path. The f sequence is monotone non-increasing.
QnResult qn_minimize_box(const FunGrad& fg, const Vec& x0, const Box& box, const QnOptions& opts = {});

/// ||x - P(x - g)||_inf.
double projected_gradient_norm(const Vec& x, const Vec& g, const Box& box);

void write_trace_csv(const std::filesystem::path& path, const std::vector<QnTraceRow>& trace);

struct QpOptions {
    double tolerance = 1e-8;
    int max_iterations = 50000;
    int polish_every = 25;
};

struct QpResult {
    Vec x;
    int iterations = 0;
    double kkt_residual = 0.0;
};

/// min 1/2 x'Hx + q'x over a box. Accelerated projected gradient with step
/// 1/lambda_max(H) and adaptive restart; an exact solve on the current free
/// set is tried periodically and accepted when it is feasible and optimal.
/// Throws ConfigError for non-symmetric or indefinite H.
QpResult solve_box_qp(const Mat& h, const Vec& q, const Box& box, const QpOptions& opts = {});

/// Projected-gradient KKT residual of the box QP at x.
double qp_kkt_residual(const Mat& h, const Vec& q, const Vec& x, const Box& box);

}  // namespace pdeop::optim
