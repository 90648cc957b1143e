#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <vector>

#include "pdeop/core.hpp"
#include "pdeop/system.hpp"

namespace pdeop::stochastic {

/// Squared-exponential covariance k(a, b) = variance * exp(-|a - b|^2 / (2 l^2)).
struct GrfKernel {
    double variance = 0.25;
    double length_scale = 0.2;

    void validate() const;
    Mat covariance(const Vec& points) const;
};

/// splitmix64 finalizer.
std::uint64_t splitmix64(std::uint64_t x);
/// Per-item seed: splitmix64(base ^ splitmix64(index)).
std::uint64_t mix_seed(std::uint64_t base, std::uint64_t index);

/// Zero-mean GRF draws on a fixed point set; the jittered Cholesky factor is
/// computed once. Jitter starts at 1e-10 * variance and grows 10x up to three
/// times before giving up with NumericalError.
class GrfSampler {
public:
    GrfSampler(const GrfKernel& kernel, const Vec& points);

    Vec sample(std::mt19937_64& rng) const;
    const Mat& factor() const noexcept { return chol_; }
    double jitter() const noexcept { return jitter_; }

private:
    Mat chol_;
    double jitter_ = 0.0;
};

Vec sample_grf(const GrfKernel& kernel, const Vec& points, std::uint64_t seed);

/// Default kernel for a value range: l = 0.2 * span, sigma = 0.5 * bound half-width.
GrfKernel default_kernel(double span, const BoxBounds& bounds);

struct Splits {
    std::vector<int> train;
    std::vector<int> validation;
    std::vector<int> test;
};

/// Seeded shuffle of 0..count-1, then floor(0.8 N) / floor(0.1 N) / remainder.
Splits split_indices(int count, std::uint64_t seed);

struct TrajectoryRecord {
    std::uint64_t seed = 0;
    Mat inputs;  // steps x control_dim, exactly what the solver consumed
    Mat states;  // (steps + 1) x n
};

struct OneStepBatch {
    Mat state;  // rows: samples
    Mat input;
    Mat next;
};

struct Dataset {
    SystemKind system = SystemKind::Voltage;
    std::vector<TrajectoryRecord> items;
    Splits splits;
    long clipped_entries = 0;
    long total_entries = 0;
    int resampled = 0;

    int steps() const;
    std::size_t sample_count() const;
    double clipped_fraction() const {
        return total_entries == 0 ? 0.0 : double(clipped_entries) / double(total_entries);
    }
    /// All one-step triples (y_k, input_k, y_{k+1}) from the listed trajectories.
    OneStepBatch samples(const std::vector<int>& trajectories) const;
};

struct DatasetOptions {
    int count = 100;
    GrfKernel kernel;
    BoxBounds bounds;
    std::uint64_t seed = 0;
    int jobs = 1;
};

/// Static controls u(x) ~ GRF over space, clipped, rolled out from y0.
Dataset generate_static_control_dataset(const Simulator& sim, const DatasetOptions& opts);

/// M independent GRF draws over time levels t_0..t_N per trajectory. Heat uses
/// the step average of consecutive levels (matching its stepper), Burgers the
/// left value. Burgers Newton failures are resampled with a fresh seed.
Dataset generate_weight_trajectory_dataset(const Simulator& sim, const DatasetOptions& opts);

/// states.tensor (N x (steps+1) x n), inputs.tensor (N x steps x dim), manifest.jsonl.
void save_dataset(const std::filesystem::path& dir, const Dataset& ds);
Dataset load_dataset(const std::filesystem::path& dir);

}  // namespace pdeop::stochastic
