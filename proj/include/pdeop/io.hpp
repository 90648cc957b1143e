#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "pdeop/core.hpp"

namespace pdeop::io {

/// Long-format CSV with header "t,x,y", one row per (k, i).
void write_trajectory_csv(const std::filesystem::path& path, const StateTrajectory& traj);

/// Dense row-major float64 tensor.
struct Tensor {
    std::vector<std::uint64_t> dims;
    std::vector<double> data;

    std::size_t numel() const;
    static Tensor from_matrix(const Mat& m);
    /// Rank-2 view; rank-1 tensors become a single column.
    Mat to_matrix() const;
};

// File layout: "PDOPTNSR" | u32 version | u32 ndim | u64 dims[ndim] | f64 data (little endian).
inline constexpr char kTensorMagic[8] = {'P', 'D', 'O', 'P', 'T', 'N', 'S', 'R'};
inline constexpr std::uint32_t kTensorVersion = 1;

void write_tensor(const std::filesystem::path& path, const Tensor& t);
Tensor read_tensor(const std::filesystem::path& path);

std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace pdeop::io
