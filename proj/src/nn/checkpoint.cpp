#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "pdeop/io.hpp"
#include "pdeop/nn.hpp"

namespace pdeop::nn {

namespace {

constexpr char kMagic[8] = {'P', 'D', 'O', 'P', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;

using json = nlohmann::json;

template <class T>
void put(std::ostream& os, const T& v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::istream& is) {
    T v{};
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is) throw ConfigError("checkpoint truncated");
    return v;
}

void put_string(std::ostream& os, const std::string& s) {
    put<std::uint64_t>(os, s.size());
    os.write(s.data(), std::streamsize(s.size()));
}

std::string get_string(std::istream& is) {
    const auto len = get<std::uint64_t>(is);
    if (len > (1ULL << 32)) throw ConfigError("checkpoint string length is implausible");
    std::string s(len, '\0');
    is.read(s.data(), std::streamsize(len));
    if (!is) throw ConfigError("checkpoint truncated");
    return s;
}

struct Named {
    std::string name;
    ParamBlock* block;
};

void write_file(const std::filesystem::path& path, const json& arch, const std::vector<Named>& params,
                const std::string& metadata) {
    if (!json::accept(metadata)) throw ConfigError("checkpoint metadata is not valid JSON");
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream os(path, std::ios::binary);
    if (!os) throw ConfigError("cannot write checkpoint " + path.string());
    os.write(kMagic, sizeof(kMagic));
    put(os, kVersion);
    put_string(os, arch.dump());
    put<std::uint32_t>(os, std::uint32_t(params.size()));
    for (const auto& p : params) {
        const auto& v = p.block->value;
        put<std::uint32_t>(os, std::uint32_t(p.name.size()));
        os.write(p.name.data(), std::streamsize(p.name.size()));
        put<std::uint64_t>(os, std::uint64_t(v.rows()));
        put<std::uint64_t>(os, std::uint64_t(v.cols()));
        // row-major on disk
        for (Eigen::Index r = 0; r < v.rows(); ++r)
            for (Eigen::Index c = 0; c < v.cols(); ++c) put<double>(os, v(r, c));
    }
    put_string(os, metadata);
    if (!os) throw ConfigError("failed writing checkpoint " + path.string());
}

struct Loaded {
    json arch;
    std::map<std::string, Mat> params;
    std::string metadata;
};

Loaded read_file(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw ConfigError("cannot open checkpoint " + path.string());
    char magic[8];
    is.read(magic, sizeof(magic));
    if (!is || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
        throw ConfigError(path.string() + " is not a checkpoint (bad magic)");
    const auto version = get<std::uint32_t>(is);
    if (version != kVersion) throw ConfigError("unsupported checkpoint version " + std::to_string(version));
    Loaded out;
    out.arch = json::parse(get_string(is));
    const auto count = get<std::uint32_t>(is);
    for (std::uint32_t i = 0; i < count; ++i) {
        const auto nlen = get<std::uint32_t>(is);
        std::string name(nlen, '\0');
        is.read(name.data(), nlen);
        const auto rows = get<std::uint64_t>(is);
        const auto cols = get<std::uint64_t>(is);
        if (rows * cols > (1ULL << 28)) throw ConfigError("checkpoint block " + name + " is implausibly large");
        Mat m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
        for (Eigen::Index r = 0; r < m.rows(); ++r)
            for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = get<double>(is);
        out.params[name] = std::move(m);
    }
    out.metadata = get_string(is);
    return out;
}

std::vector<int> sizes_of(const json& j) { return j.get<std::vector<int>>(); }

json operator_arch(OperatorNet& net) {
    const auto& c = net.config();
    json j;
    j["n"] = c.n;
    j["m"] = c.m;
    j["branch_hidden"] = c.branch_hidden;
    j["trunk_hidden"] = c.trunk_hidden;
    j["features"] = c.features;
    j["activation"] = to_string(c.activation);
    j["residual"] = c.residual;
    j["coordinates"] = std::vector<double>(net.coordinates().data(), net.coordinates().data() + c.n);
    const Mat& s = net.input_shift();
    const Mat& is = net.input_inv_scale();
    j["input_shift"] = std::vector<double>(s.data(), s.data() + s.size());
    j["input_inv_scale"] = std::vector<double>(is.data(), is.data() + is.size());
    j["output_scale"] = net.output_scale();
    return j;
}

OperatorNet operator_from(const json& j) {
    OperatorConfig c;
    c.n = j.at("n");
    c.m = j.at("m");
    c.branch_hidden = sizes_of(j.at("branch_hidden"));
    c.trunk_hidden = sizes_of(j.at("trunk_hidden"));
    c.features = j.at("features");
    c.activation = activation_from_string(j.at("activation"));
    c.residual = j.at("residual");
    const auto coords = j.at("coordinates").get<std::vector<double>>();
    OperatorNet net(c, Eigen::Map<const Vec>(coords.data(), Eigen::Index(coords.size())), 0);
    const auto s = j.at("input_shift").get<std::vector<double>>();
    const auto is = j.at("input_inv_scale").get<std::vector<double>>();
    net.set_normalization(Eigen::Map<const Mat>(s.data(), 1, Eigen::Index(s.size())),
                          Eigen::Map<const Mat>(is.data(), 1, Eigen::Index(is.size())), j.at("output_scale"));
    return net;
}

json controller_arch(Controller& ctrl) {
    const auto& c = ctrl.config();
    json j;
    j["recurrent"] = c.recurrent;
    j["n"] = c.n;
    j["m"] = c.m;
    j["hidden"] = c.hidden;
    j["recurrent_hidden"] = c.recurrent_hidden;
    j["recurrent_layers"] = c.recurrent_layers;
    j["activation"] = to_string(c.activation);
    j["bounds"] = {c.bounds.lower, c.bounds.upper};
    j["squash"] = c.squash;
    return j;
}

Controller controller_from(const json& j) {
    ControllerConfig c;
    c.recurrent = j.at("recurrent");
    c.n = j.at("n");
    c.m = j.at("m");
    c.hidden = sizes_of(j.at("hidden"));
    c.recurrent_hidden = j.at("recurrent_hidden");
    c.recurrent_layers = j.at("recurrent_layers");
    c.activation = activation_from_string(j.at("activation"));
    c.bounds = BoxBounds(j.at("bounds").at(0), j.at("bounds").at(1));
    c.squash = j.at("squash");
    return Controller(c, 0);
}

std::vector<Named> named(const std::string& prefix, std::vector<ParamBlock*> ps) {
    std::vector<Named> out;
    for (auto* p : ps) out.push_back({prefix + p->name, p});
    return out;
}

void assign(const Loaded& l, const std::vector<Named>& targets, const std::filesystem::path& path) {
    if (l.params.size() != targets.size())
        throw ConfigError("checkpoint " + path.string() + " has " + std::to_string(l.params.size()) +
                          " parameter blocks, architecture expects " + std::to_string(targets.size()));
    for (const auto& t : targets) {
        auto it = l.params.find(t.name);
        if (it == l.params.end()) throw ConfigError("checkpoint is missing parameter block " + t.name);
        if (it->second.rows() != t.block->value.rows() || it->second.cols() != t.block->value.cols())
            throw ConfigError("checkpoint block " + t.name + " has the wrong shape");
        t.block->value = it->second;
        t.block->zero_grad();
    }
}

void check_kind(const Loaded& l, const std::string& kind, const std::filesystem::path& path) {
    if (l.arch.value("kind", "") != kind)
        throw ConfigError("checkpoint " + path.string() + " holds '" + l.arch.value("kind", "?") + "', expected '" +
                          kind + "'");
}

}  // namespace

void save_operator(const std::filesystem::path& path, OperatorNet& net, const std::string& metadata_json) {
    json arch{{"kind", "operator"}, {"operator", operator_arch(net)}};
    write_file(path, arch, named("operator/", net.parameters()), metadata_json);
}

OperatorNet load_operator(const std::filesystem::path& path, std::string* metadata_json) {
    const auto l = read_file(path);
    check_kind(l, "operator", path);
    OperatorNet net = operator_from(l.arch.at("operator"));
    assign(l, named("operator/", net.parameters()), path);
    net.prepare_inference();
    if (metadata_json) *metadata_json = l.metadata;
    return net;
}

void save_controller(const std::filesystem::path& path, Controller& ctrl, const std::string& metadata_json) {
    json arch{{"kind", "controller"}, {"controller", controller_arch(ctrl)}};
    write_file(path, arch, named("controller/", ctrl.parameters()), metadata_json);
}

Controller load_controller(const std::filesystem::path& path, std::string* metadata_json) {
    const auto l = read_file(path);
    check_kind(l, "controller", path);
    Controller ctrl = controller_from(l.arch.at("controller"));
    assign(l, named("controller/", ctrl.parameters()), path);
    if (metadata_json) *metadata_json = l.metadata;
    return ctrl;
}

void save_joint(const std::filesystem::path& path, Controller& ctrl, OperatorNet& net,
                const std::string& metadata_json) {
    json arch{{"kind", "joint"}, {"controller", controller_arch(ctrl)}, {"operator", operator_arch(net)}};
    auto ps = named("controller/", ctrl.parameters());
    auto po = named("operator/", net.parameters());
    ps.insert(ps.end(), po.begin(), po.end());
    write_file(path, arch, ps, metadata_json);
}

void load_joint(const std::filesystem::path& path, Controller& ctrl, OperatorNet& net, std::string* metadata_json) {
    const auto l = read_file(path);
    check_kind(l, "joint", path);
    ctrl = controller_from(l.arch.at("controller"));
    net = operator_from(l.arch.at("operator"));
    auto ps = named("controller/", ctrl.parameters());
    auto po = named("operator/", net.parameters());
    ps.insert(ps.end(), po.begin(), po.end());
    assign(l, ps, path);
    net.prepare_inference();
    if (metadata_json) *metadata_json = l.metadata;
}

void write_operator_history_csv(const std::filesystem::path& path, const OperatorTrainReport& report) {
    std::ostringstream os;
    os.precision(10);
    os << "epoch,train_loss,validation_loss,lr\n";
    for (const auto& e : report.history)
        os << e.epoch << ',' << e.train_loss << ',' << e.validation_loss << ',' << e.lr << '\n';
    io::write_text(path, os.str());
}

void write_pdeop_history_csv(const std::filesystem::path& path, const PdeopHistory& history) {
    std::ostringstream os;
    os.precision(10);
    os << "epoch,loss,objective,probed,dynamics_violation,initial_violation,bound_violation,"
          "lambda_dynamics,lambda_initial,lambda_bounds\n";
    for (const auto& e : history.epochs)
        os << e.epoch << ',' << e.loss << ',' << e.objective << ',' << int(e.probed) << ','
           << e.dynamics_violation << ',' << e.initial_violation << ',' << e.bound_violation << ','
           << e.lambda_equality[0] << ',' << e.lambda_equality[1] << ',' << e.lambda_inequality[0] << '\n';
    io::write_text(path, os.str());
}

}  // namespace pdeop::nn
