#include <Eigen/Cholesky>

#include <cmath>

#include "pdeop/stochastic.hpp"

namespace pdeop::stochastic {

void GrfKernel::validate() const {
    if (!(variance >= 0.0) || !std::isfinite(variance)) throw ConfigError("GRF variance must be >= 0");
    if (!(length_scale > 0.0) || !std::isfinite(length_scale))
        throw ConfigError("GRF length scale must be positive");
}

Mat GrfKernel::covariance(const Vec& points) const {
    const auto n = points.size();
    Mat k(n, n);
    const double inv = 1.0 / (2.0 * length_scale * length_scale);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j <= i; ++j) {
            const double d = points[i] - points[j];
            k(i, j) = k(j, i) = variance * std::exp(-d * d * inv);
        }
    return k;
}

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::uint64_t mix_seed(std::uint64_t base, std::uint64_t index) { return splitmix64(base ^ splitmix64(index)); }

GrfSampler::GrfSampler(const GrfKernel& kernel, const Vec& points) {
    kernel.validate();
    if (!points.allFinite()) throw ConfigError("GRF points must be finite");
    const auto n = points.size();
    if (kernel.variance == 0.0) {
        chol_ = Mat::Zero(n, n);
        return;
    }
    const Mat k = kernel.covariance(points);
    double eps = 1e-10 * kernel.variance;
    for (int attempt = 0; attempt <= 3; ++attempt, eps *= 10.0) {
        Eigen::LLT<Mat> llt(k + eps * Mat::Identity(n, n));
        if (llt.info() == Eigen::Success) {
            chol_ = llt.matrixL();
            jitter_ = eps;
            return;
        }
    }
    throw NumericalError("GRF covariance is not positive definite after jitter escalation");
}

Vec GrfSampler::sample(std::mt19937_64& rng) const {
    std::normal_distribution<double> nd;
    Vec z(chol_.cols());
    for (auto i = 0; i < z.size(); ++i) z[i] = nd(rng);
    return chol_.triangularView<Eigen::Lower>() * z;
}

Vec sample_grf(const GrfKernel& kernel, const Vec& points, std::uint64_t seed) {
    GrfSampler s(kernel, points);
    std::mt19937_64 rng(seed);
    return s.sample(rng);
}

GrfKernel default_kernel(double span, const BoxBounds& bounds) {
    const double sigma = 0.5 * bounds.half_width();
    return GrfKernel{sigma * sigma, 0.2 * span};
}

}  // namespace pdeop::stochastic
