#include <spdlog/spdlog.h>

#include <algorithm>
#include <atomic>
#include <fstream>
#include <json.hpp>
#include <numeric>
#include <thread>

#include "pdeop/io.hpp"
#include "pdeop/stochastic.hpp"

namespace pdeop::stochastic {

Splits split_indices(int count, std::uint64_t seed) {
    if (count < 0) throw ConfigError("negative split count");
    std::vector<int> idx(count);
    std::iota(idx.begin(), idx.end(), 0);
    std::mt19937_64 rng(mix_seed(seed, 0x5eedULL));
    // Fisher-Yates with our own index draw so the order does not depend on the std::shuffle implementation
    for (int i = count - 1; i > 0; --i) {
        const int j = static_cast<int>(rng() % static_cast<std::uint64_t>(i + 1));
        std::swap(idx[i], idx[j]);
    }
    const int n_train = count * 8 / 10;
    const int n_val = count / 10;
    Splits s;
    s.train.assign(idx.begin(), idx.begin() + n_train);
    s.validation.assign(idx.begin() + n_train, idx.begin() + n_train + n_val);
    s.test.assign(idx.begin() + n_train + n_val, idx.end());
    for (auto* v : {&s.train, &s.validation, &s.test}) std::sort(v->begin(), v->end());
    return s;
}

int Dataset::steps() const { return items.empty() ? 0 : static_cast<int>(items.front().inputs.rows()); }

std::size_t Dataset::sample_count() const { return items.size() * static_cast<std::size_t>(steps()); }

OneStepBatch Dataset::samples(const std::vector<int>& trajectories) const {
    OneStepBatch b;
    if (items.empty()) return b;
    const int nt = steps();
    const auto n = items.front().states.cols();
    const auto m = items.front().inputs.cols();
    const auto rows = static_cast<Eigen::Index>(trajectories.size()) * nt;
    b.state.resize(rows, n);
    b.input.resize(rows, m);
    b.next.resize(rows, n);
    Eigen::Index r = 0;
    for (int id : trajectories) {
        const auto& it = items.at(id);
        b.state.middleRows(r, nt) = it.states.topRows(nt);
        b.input.middleRows(r, nt) = it.inputs;
        b.next.middleRows(r, nt) = it.states.bottomRows(nt);
        r += nt;
    }
    return b;
}

namespace {

struct Draw {
    TrajectoryRecord record;
    long clipped = 0;
    long total = 0;
    int resampled = 0;
};

long clip_in_place(Mat& m, const BoxBounds& b) {
    long clipped = 0;
    for (Eigen::Index i = 0; i < m.size(); ++i) {
        double& v = m.data()[i];
        if (v < b.lower || v > b.upper) {
            v = b.clamp(v);
            ++clipped;
        }
    }
    return clipped;
}

template <class Fn>
std::vector<Draw> run_parallel(int count, int jobs, Fn&& fn) {
    std::vector<Draw> out(count);
    std::atomic<int> next{0};
    std::vector<std::exception_ptr> errors(std::max(1, jobs));
    auto worker = [&](int w) {
        try {
            for (int i = next++; i < count; i = next++) out[i] = fn(i);
        } catch (...) {
            errors[w] = std::current_exception();
            next = count;
        }
    };
    if (jobs <= 1) {
        worker(0);
    } else {
        std::vector<std::thread> pool;
        for (int w = 0; w < jobs; ++w) pool.emplace_back(worker, w);
        for (auto& t : pool) t.join();
    }
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
    return out;
}

Dataset assemble(const Simulator& sim, const DatasetOptions& opts, std::vector<Draw> draws) {
    Dataset ds;
    ds.system = sim.spec().kind;
    ds.items.reserve(draws.size());
    for (auto& d : draws) {
        ds.clipped_entries += d.clipped;
        ds.total_entries += d.total;
        ds.resampled += d.resampled;
        ds.items.push_back(std::move(d.record));
    }
    ds.splits = split_indices(opts.count, opts.seed);
    spdlog::info("{} dataset: {} trajectories, {:.2f}% of control entries clipped, {} resampled",
                 to_string(ds.system), opts.count, 100.0 * ds.clipped_fraction(), ds.resampled);
    return ds;
}

void check_options(const DatasetOptions& opts) {
    if (opts.count < 10) throw ConfigError("datasets need at least 10 trajectories");
    opts.kernel.validate();
}

}  // namespace

Dataset generate_static_control_dataset(const Simulator& sim, const DatasetOptions& opts) {
    check_options(opts);
    if (!sim.spec().static_control()) throw ConfigError("static-control dataset needs a static-control system");
    const GrfSampler sampler(opts.kernel, sim.grid().coordinates());
    const int steps = sim.grid().steps();
    auto draws = run_parallel(opts.count, opts.jobs, [&](int i) {
        Draw d;
        d.record.seed = mix_seed(opts.seed, static_cast<std::uint64_t>(i));
        std::mt19937_64 rng(d.record.seed);
        Mat u = sampler.sample(rng);
        d.clipped = clip_in_place(u, opts.bounds);
        d.total = u.size();
        d.record.inputs = u.transpose().replicate(steps, 1);
        d.record.states = sim.rollout(d.record.inputs).values();
        return d;
    });
    return assemble(sim, opts, std::move(draws));
}

Dataset generate_weight_trajectory_dataset(const Simulator& sim, const DatasetOptions& opts) {
    check_options(opts);
    const auto kind = sim.spec().kind;
    if (kind == SystemKind::Voltage) throw ConfigError("weight-trajectory datasets are for heat or Burgers");
    const auto& g = sim.grid();
    const int steps = g.steps();
    const int modes = sim.spec().basis.modes;
    Vec times(steps + 1);
    for (int k = 0; k <= steps; ++k) times[k] = g.t(k);
    const GrfSampler sampler(opts.kernel, times);

    auto draws = run_parallel(opts.count, opts.jobs, [&](int i) {
        Draw d;
        for (int attempt = 0;; ++attempt) {
            const auto base = mix_seed(opts.seed, static_cast<std::uint64_t>(i));
            d.record.seed = attempt == 0 ? base : mix_seed(base, static_cast<std::uint64_t>(attempt));
            std::mt19937_64 rng(d.record.seed);
            Mat levels(steps + 1, modes);
            for (int j = 0; j < modes; ++j) levels.col(j) = sampler.sample(rng);
            d.clipped = clip_in_place(levels, opts.bounds);
            d.total = levels.size();
            d.record.inputs = kind == SystemKind::Heat
                                  ? Mat(0.5 * (levels.topRows(steps) + levels.bottomRows(steps)))
                                  : Mat(levels.topRows(steps));
            try {
                d.record.states = sim.rollout(d.record.inputs).values();
                return d;
            } catch (const SolverError& e) {
                if (attempt >= 20) throw;
                spdlog::warn("trajectory {} attempt {}: {}; resampling", i, attempt, e.what());
                ++d.resampled;
            }
        }
    });
    return assemble(sim, opts, std::move(draws));
}

void save_dataset(const std::filesystem::path& dir, const Dataset& ds) {
    if (ds.items.empty()) throw ConfigError("refusing to save an empty dataset");
    std::filesystem::create_directories(dir);
    const auto n_items = ds.items.size();
    const auto steps = static_cast<std::uint64_t>(ds.steps());
    const auto n = static_cast<std::uint64_t>(ds.items.front().states.cols());
    const auto m = static_cast<std::uint64_t>(ds.items.front().inputs.cols());

    io::Tensor states, inputs;
    states.dims = {n_items, steps + 1, n};
    inputs.dims = {n_items, steps, m};
    states.data.reserve(states.numel());
    inputs.data.reserve(inputs.numel());
    for (const auto& it : ds.items) {
        const auto s = io::Tensor::from_matrix(it.states);
        const auto c = io::Tensor::from_matrix(it.inputs);
        states.data.insert(states.data.end(), s.data.begin(), s.data.end());
        inputs.data.insert(inputs.data.end(), c.data.begin(), c.data.end());
    }
    io::write_tensor(dir / "states.tensor", states);
    io::write_tensor(dir / "inputs.tensor", inputs);

    std::vector<std::string> split_of(n_items, "train");
    for (int i : ds.splits.validation) split_of[i] = "validation";
    for (int i : ds.splits.test) split_of[i] = "test";
    std::ofstream man(dir / "manifest.jsonl");
    for (std::size_t i = 0; i < n_items; ++i) {
        nlohmann::json j;
        j["id"] = i;
        j["split"] = split_of[i];
        j["seed"] = ds.items[i].seed;
        j["system"] = to_string(ds.system);
        j["shapes"] = {{"states", {steps + 1, n}}, {"inputs", {steps, m}}};
        man << j.dump() << '\n';
    }
    if (!man) throw Error("failed writing manifest in '" + dir.string() + "'");
}

Dataset load_dataset(const std::filesystem::path& dir) {
    const auto states = io::read_tensor(dir / "states.tensor");
    const auto inputs = io::read_tensor(dir / "inputs.tensor");
    if (states.dims.size() != 3 || inputs.dims.size() != 3 || states.dims[0] != inputs.dims[0] ||
        states.dims[1] != inputs.dims[1] + 1)
        throw DimensionError("dataset tensors in '" + dir.string() + "' have inconsistent shapes");
    Dataset ds;
    const auto count = states.dims[0];
    const auto sr = states.dims[1], sc = states.dims[2], ir = inputs.dims[1], ic = inputs.dims[2];
    using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    ds.items.resize(count);
    for (std::uint64_t i = 0; i < count; ++i) {
        ds.items[i].states = Eigen::Map<const RowMat>(states.data.data() + i * sr * sc, sr, sc);
        ds.items[i].inputs = Eigen::Map<const RowMat>(inputs.data.data() + i * ir * ic, ir, ic);
    }
    std::ifstream man(dir / "manifest.jsonl");
    if (!man) throw Error("missing manifest in '" + dir.string() + "'");
    std::string line;
    std::uint64_t rows = 0;
    while (std::getline(man, line)) {
        if (line.empty()) continue;
        const auto j = nlohmann::json::parse(line);
        const int id = j.at("id").get<int>();
        if (id < 0 || static_cast<std::uint64_t>(id) >= count) throw Error("manifest id out of range");
        ds.items[id].seed = j.at("seed").get<std::uint64_t>();
        ds.system = system_from_string(j.at("system").get<std::string>());
        const auto split = j.at("split").get<std::string>();
        if (split == "train") ds.splits.train.push_back(id);
        else if (split == "validation") ds.splits.validation.push_back(id);
        else if (split == "test") ds.splits.test.push_back(id);
        else throw Error("unknown split '" + split + "' in manifest");
        ++rows;
    }
    if (rows != count) throw Error("manifest lists " + std::to_string(rows) + " of " + std::to_string(count) + " trajectories");
    return ds;
}

}  // namespace pdeop::stochastic
