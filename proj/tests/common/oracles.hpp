#pragma once

// Independent reference computations shared by unit and acceptance tests.

#include <cmath>
#include <functional>
#include <random>

#include "pdeop/core.hpp"

namespace oracle {

using pdeop::Mat;
using pdeop::Vec;

inline Mat random_matrix(int r, int c, std::uint64_t seed, double scale = 1.0) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd(0.0, scale);
    Mat m(r, c);
    for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j) m(i, j) = nd(rng);
    return m;
}

inline Mat random_uniform(int r, int c, std::uint64_t seed, double lo, double hi) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> ud(lo, hi);
    Mat m(r, c);
    for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j) m(i, j) = ud(rng);
    return m;
}

/// Plain central differences with an absolute step h, written independently
/// of the library's FD routine.
inline Vec central_difference(const std::function<double(const Vec&)>& f, const Vec& x, double h) {
    Vec g(x.size());
    Vec xp = x;
    for (int j = 0; j < x.size(); ++j) {
        const double keep = xp[j];
        xp[j] = keep + h;
        const double fp = f(xp);
        xp[j] = keep - h;
        const double fm = f(xp);
        xp[j] = keep;
        g[j] = (fp - fm) / (2.0 * h);
    }
    return g;
}

/// ||a - b||_inf / max(||b||_inf, floor).
inline double rel_inf(const Vec& a, const Vec& b, double floor = 1e-12) {
    return (a - b).lpNorm<Eigen::Infinity>() / std::max(b.lpNorm<Eigen::Infinity>(), floor);
}

/// Largest |eigenvalue| by power iteration.
inline double spectral_radius(const Mat& a, int iters = 2000) {
    Vec v = Vec::Ones(a.rows()) / std::sqrt(double(a.rows()));
    double lambda = 0.0;
    for (int i = 0; i < iters; ++i) {
        Vec w = a * v;
        lambda = w.norm();
        if (lambda == 0.0) return 0.0;
        v = w / lambda;
    }
    return lambda;
}

/// Observed order from terminal errors at dt, dt/2 against a fine reference.
/// `terminal(steps)` returns the terminal state computed with `steps` steps.
inline double observed_order(const std::function<Vec(int)>& terminal, int coarse_steps) {
    const Vec ref = terminal(coarse_steps * 64);
    const double e1 = (terminal(coarse_steps) - ref).lpNorm<Eigen::Infinity>();
    const double e2 = (terminal(coarse_steps * 2) - ref).lpNorm<Eigen::Infinity>();
    return std::log2(e1 / e2);
}

}  // namespace oracle
