#include <cmath>
#include <deque>
#include <fstream>
#include <limits>

#include "pdeop/optim.hpp"

namespace pdeop::optim {

std::string to_string(QnStatus s) {
    switch (s) {
        case QnStatus::FunctionTolerance: return "ftol";
        case QnStatus::GradientTolerance: return "gtol";
        case QnStatus::MaxIterations: return "max_iterations";
        case QnStatus::LineSearchFailed: return "line_search_failed";
    }
    return "?";
}

Box Box::uniform(int n, const BoxBounds& b) { return {Vec::Constant(n, b.lower), Vec::Constant(n, b.upper)}; }

Vec Box::project(const Vec& x) const { return x.cwiseMax(lower).cwiseMin(upper); }

bool Box::contains(const Vec& x) const {
    return x.size() == lower.size() && (x.array() >= lower.array()).all() && (x.array() <= upper.array()).all();
}

void Box::validate(int n) const {
    if (lower.size() != n || upper.size() != n) throw DimensionError("box does not match the variable count");
    if ((lower.array() > upper.array()).any()) throw ConfigError("box has lower > upper");
}

double projected_gradient_norm(const Vec& x, const Vec& g, const Box& box) {
    return (x - box.project(x - g)).lpNorm<Eigen::Infinity>();
}

namespace {

struct Pair {
    Vec s, y;
    double rho;
};

// -H g on the free coordinates (two-loop recursion with the full pairs; input
// and output are masked so the result is a descent direction on the free set).
Vec lbfgs_direction(const Vec& g, const Eigen::Array<bool, Eigen::Dynamic, 1>& free,
                    const std::deque<Pair>& mem) {
    Vec q = free.select(g, 0.0);
    std::vector<double> alpha(mem.size());
    for (std::size_t i = mem.size(); i-- > 0;) {
        alpha[i] = mem[i].rho * mem[i].s.dot(q);
        q -= alpha[i] * mem[i].y;
    }
    if (!mem.empty()) {
        const auto& last = mem.back();
        q *= last.s.dot(last.y) / last.y.squaredNorm();
    }
    for (std::size_t i = 0; i < mem.size(); ++i) {
        const double beta = mem[i].rho * mem[i].y.dot(q);
        q += (alpha[i] - beta) * mem[i].s;
    }
    return free.select(-q, 0.0);
}

}  // namespace

QnResult qn_minimize_box(const FunGrad& fg, const Vec& x0, const Box& box, const QnOptions& opts) {
    const int n = static_cast<int>(x0.size());
    box.validate(n);
    if (opts.memory < 1) throw ConfigError("quasi-Newton memory must be >= 1");
    if (!(opts.ftol > 0.0) || !(opts.gtol > 0.0)) throw ConfigError("tolerances must be positive");

    QnResult r;
    r.x = box.project(x0);
    Vec g(n);
    r.f = fg(r.x, g);
    r.evaluations = 1;
    if (!std::isfinite(r.f) || !g.allFinite()) throw NumericalError("objective not finite at the initial point");
    r.trace.push_back({0, r.f, projected_gradient_norm(r.x, g, box), r.evaluations});

    std::deque<Pair> mem;
    constexpr double tiny = std::numeric_limits<double>::min();
    while (true) {
        if (projected_gradient_norm(r.x, g, box) <= opts.gtol) {
            r.status = QnStatus::GradientTolerance;
            break;
        }
        if (r.iterations >= opts.max_iterations) {
            r.status = QnStatus::MaxIterations;
            break;
        }
        const Eigen::Array<bool, Eigen::Dynamic, 1> free =
            !(((r.x.array() <= box.lower.array()) && (g.array() > 0.0)) ||
              ((r.x.array() >= box.upper.array()) && (g.array() < 0.0)));

        Vec d = lbfgs_direction(g, free, mem);
        if (!(g.dot(d) < 0.0) || !d.allFinite()) {
            mem.clear();
            d = free.select(-g, 0.0);
        }
        double alpha = 1.0;
        if (mem.empty()) alpha = std::min(1.0, 1.0 / std::max(d.lpNorm<Eigen::Infinity>(), tiny));

        bool accepted = false;
        Vec xt, gt(n);
        double ft = 0.0;
        for (int t = 0; t < opts.max_line_search; ++t, alpha *= 0.5) {
            xt = box.project(r.x + alpha * d);
            if ((xt - r.x).lpNorm<Eigen::Infinity>() == 0.0) break;
            ft = fg(xt, gt);
            ++r.evaluations;
            if (std::isfinite(ft) && gt.allFinite() && ft <= r.f + opts.armijo * g.dot(xt - r.x)) {
                accepted = true;
                break;
            }
        }
        if (!accepted) {
            if (!mem.empty()) {
                mem.clear();  // retry from steepest descent before giving up
                continue;
            }
            r.status = QnStatus::LineSearchFailed;
            break;
        }

        Vec s = xt - r.x, y = gt - g;
        const double sy = s.dot(y);
        if (sy > 1e-12 * y.squaredNorm() && sy > 0.0) {
            mem.push_back({std::move(s), std::move(y), 1.0 / sy});
            if (static_cast<int>(mem.size()) > opts.memory) mem.pop_front();
        }
        const double f_prev = r.f;
        r.x = std::move(xt);
        r.f = ft;
        g = gt;
        ++r.iterations;
        r.trace.push_back({r.iterations, r.f, projected_gradient_norm(r.x, g, box), r.evaluations});
        if (f_prev - r.f <= opts.ftol * std::max({std::abs(f_prev), std::abs(r.f), tiny})) {
            r.status = QnStatus::FunctionTolerance;
            break;
        }
    }
    return r;
}

void write_trace_csv(const std::filesystem::path& path, const std::vector<QnTraceRow>& trace) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw Error("cannot write trace '" + path.string() + "'");
    out.precision(17);
    out << "iteration,f,projected_gradient,evaluations\n";
    for (const auto& row : trace)
        out << row.iteration << ',' << row.f << ',' << row.projected_gradient << ',' << row.evaluations << '\n';
}

}  // namespace pdeop::optim
