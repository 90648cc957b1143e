#include "pdeop/io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

namespace pdeop::io {

static_assert(std::endian::native == std::endian::little, "tensor IO assumes a little-endian host");

namespace {

std::ofstream open_out(const std::filesystem::path& path, std::ios::openmode mode = std::ios::out) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, mode);
    if (!out) throw Error("cannot open '" + path.string() + "' for writing");
    return out;
}

template <class T>
void put(std::ostream& os, const T& v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::istream& is, const std::filesystem::path& path) {
    T v{};
    if (!is.read(reinterpret_cast<char*>(&v), sizeof(T)))
        throw Error("truncated tensor file '" + path.string() + "'");
    return v;
}

}  // namespace

void write_trajectory_csv(const std::filesystem::path& path, const StateTrajectory& traj) {
    auto out = open_out(path);
    out.precision(17);
    out << "t,x,y\n";
    const auto& g = traj.grid();
    for (int k = 0; k < traj.values().rows(); ++k)
        for (int i = 0; i < g.n(); ++i) out << g.t(k) << ',' << g.x(i) << ',' << traj.values()(k, i) << '\n';
}

std::size_t Tensor::numel() const {
    std::size_t n = 1;
    for (auto d : dims) n *= d;
    return n;
}

Tensor Tensor::from_matrix(const Mat& m) {
    Tensor t;
    t.dims = {static_cast<std::uint64_t>(m.rows()), static_cast<std::uint64_t>(m.cols())};
    t.data.resize(m.size());
    Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
        t.data.data(), m.rows(), m.cols()) = m;
    return t;
}

Mat Tensor::to_matrix() const {
    if (dims.empty() || dims.size() > 2) throw DimensionError("tensor is not rank 1 or 2");
    const auto rows = static_cast<Eigen::Index>(dims[0]);
    const auto cols = dims.size() == 2 ? static_cast<Eigen::Index>(dims[1]) : 1;
    return Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
        data.data(), rows, cols);
}

void write_tensor(const std::filesystem::path& path, const Tensor& t) {
    if (t.data.size() != t.numel()) throw DimensionError("tensor data does not match dims");
    auto out = open_out(path, std::ios::binary);
    out.write(kTensorMagic, sizeof kTensorMagic);
    put(out, kTensorVersion);
    put(out, static_cast<std::uint32_t>(t.dims.size()));
    for (auto d : t.dims) put(out, d);
    out.write(reinterpret_cast<const char*>(t.data.data()),
              static_cast<std::streamsize>(t.data.size() * sizeof(double)));
    if (!out) throw Error("failed writing '" + path.string() + "'");
}

Tensor read_tensor(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open '" + path.string() + "'");
    char magic[8];
    if (!in.read(magic, 8) || std::memcmp(magic, kTensorMagic, 8) != 0)
        throw Error("'" + path.string() + "' is not a tensor file");
    const auto version = get<std::uint32_t>(in, path);
    if (version != kTensorVersion) throw Error("unsupported tensor version " + std::to_string(version));
    const auto ndim = get<std::uint32_t>(in, path);
    if (ndim > 8) throw Error("implausible tensor rank in '" + path.string() + "'");
    Tensor t;
    for (std::uint32_t i = 0; i < ndim; ++i) t.dims.push_back(get<std::uint64_t>(in, path));
    t.data.resize(t.numel());
    if (!in.read(reinterpret_cast<char*>(t.data.data()),
                 static_cast<std::streamsize>(t.data.size() * sizeof(double))))
        throw Error("truncated tensor file '" + path.string() + "'");
    return t;
}

std::string read_text(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    auto out = open_out(path);
    out << text;
}

}  // namespace pdeop::io
