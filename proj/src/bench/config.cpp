#include <algorithm>
#include <charconv>
#include <cstdio>
#include <set>
#include <sstream>

#include "pdeop/bench.hpp"
#include "pdeop/io.hpp"

namespace pdeop::bench {

std::string to_string(Method m) {
    switch (m) {
        case Method::Direct: return "direct";
        case Method::Adjoint: return "adjoint";
        case Method::Lmpc: return "lmpc";
        case Method::Nmpc: return "nmpc";
        case Method::Pdeop: return "pdeop";
    }
    return "?";
}

Method method_from_string(const std::string& name) {
    if (name == "direct") return Method::Direct;
    if (name == "adjoint") return Method::Adjoint;
    if (name == "lmpc") return Method::Lmpc;
    if (name == "nmpc") return Method::Nmpc;
    if (name == "pdeop") return Method::Pdeop;
    throw ConfigError("unknown method '" + name + "'");
}

bool compatible(SystemKind system, Method method) {
    switch (method) {
        case Method::Direct: return system == SystemKind::Voltage;
        case Method::Lmpc: return system == SystemKind::Heat;
        case Method::Nmpc: return system == SystemKind::Burgers;
        case Method::Adjoint:
        case Method::Pdeop: return true;
    }
    return false;
}

void ExperimentConfig::validate() const {
    if (!compatible(system, method))
        throw ConfigError("method '" + to_string(method) + "' is not available for system '" +
                          pdeop::to_string(system) + "'");
    if (horizon < 1) throw ConfigError("horizon must be >= 1");
    if (iterations < 1 || inner_iterations < 1 || nmpc_iterations < 1)
        throw ConfigError("iteration caps must be >= 1");
    if (gamma && !(*gamma >= 0.0)) throw ConfigError("gamma must be >= 0");
    if (grid_n && *grid_n < 3) throw ConfigError("grid.n must be >= 3");
    if (grid_steps && *grid_steps < 1) throw ConfigError("grid.steps must be >= 1");
    if (grid_final_time && !(*grid_final_time > 0.0)) throw ConfigError("grid.final_time must be > 0");
    target_profile();
}

SystemSpec ExperimentConfig::system_spec() const {
    SystemSpec s = default_system(system);
    const auto& g = s.grid;
    const int n = grid_n.value_or(g.n());
    s.grid = SpaceTimeGrid(g.length(), n, grid_final_time.value_or(g.final_time()), grid_steps.value_or(g.steps()));
    if (n != g.n()) {
        const double ref = s.diffusion.reference.size() ? s.diffusion.reference[0] : 0.0;
        s.diffusion.reference = Vec::Constant(n, ref);
        s.initial_state = Vec::Zero(n);
    }
    if (gamma) s.objective.effort = *gamma;
    return s;
}

TargetProfile ExperimentConfig::target_profile() const {
    if (target.find(':') != std::string::npos) return TargetProfile::parse(target);
    return default_target(system, target);
}

namespace {

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

template <class T>
T parse_number(const std::string& key, const std::string& v) {
    T out{};
    const auto* end = v.data() + v.size();
    auto [p, ec] = std::from_chars(v.data(), end, out);
    if (ec != std::errc() || p != end) throw ConfigError("key '" + key + "': cannot parse '" + v + "'");
    return out;
}

std::string fmt_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

using KeyValues = std::vector<std::pair<std::string, std::string>>;

struct Line {
    int number;
    std::string key;
    std::string value;
};

std::vector<Line> split_lines(const std::string& text) {
    std::vector<Line> out;
    std::istringstream in(text);
    std::string raw;
    int number = 0;
    while (std::getline(in, raw)) {
        ++number;
        const auto hash = raw.find('#');
        const std::string line = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("line " + std::to_string(number) + ": expected 'key = value'");
        out.push_back({number, trim(line.substr(0, eq)), trim(line.substr(eq + 1))});
    }
    return out;
}

void check_schema(const std::vector<Line>& lines) {
    auto it = std::find_if(lines.begin(), lines.end(), [](const Line& l) { return l.key == "schema_version"; });
    if (it == lines.end()) throw ConfigError("missing schema_version");
    if (parse_number<int>("schema_version", it->value) != kSchemaVersion)
        throw ConfigError("unsupported schema_version " + it->value + " (expected " +
                          std::to_string(kSchemaVersion) + ")");
}

// Applies one key; returns false if the key is unknown.
bool apply(ExperimentConfig& c, const std::string& key, const std::string& v) {
    if (key == "schema_version") return true;
    if (key == "system") c.system = system_from_string(v);
    else if (key == "method") c.method = method_from_string(v);
    else if (key == "target") c.target = v;
    else if (key == "seed") c.seed = parse_number<std::uint64_t>(key, v);
    else if (key == "out") c.out = v;
    else if (key == "artifacts") c.artifacts = v;
    else if (key == "horizon") c.horizon = parse_number<int>(key, v);
    else if (key == "iterations") c.iterations = parse_number<int>(key, v);
    else if (key == "inner_iterations") c.inner_iterations = parse_number<int>(key, v);
    else if (key == "nmpc_iterations") c.nmpc_iterations = parse_number<int>(key, v);
    else if (key == "gamma") c.gamma = parse_number<double>(key, v);
    else if (key == "grid.n") c.grid_n = parse_number<int>(key, v);
    else if (key == "grid.steps") c.grid_steps = parse_number<int>(key, v);
    else if (key == "grid.final_time") c.grid_final_time = parse_number<double>(key, v);
    else if (key == "label") c.label = v;
    else return false;
    return true;
}

}  // namespace

ExperimentConfig parse_config(const std::string& text) {
    const auto lines = split_lines(text);
    check_schema(lines);
    ExperimentConfig c;
    std::set<std::string> seen;
    for (const auto& l : lines) {
        if (!seen.insert(l.key).second)
            throw ConfigError("line " + std::to_string(l.number) + ": duplicate key '" + l.key + "'");
        if (!apply(c, l.key, l.value))
            throw ConfigError("line " + std::to_string(l.number) + ": unknown key '" + l.key + "'");
    }
    c.validate();
    return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) { return parse_config(io::read_text(path)); }

std::string canonical_text(const ExperimentConfig& c) {
    std::vector<std::string> kv{
        "schema_version = " + std::to_string(kSchemaVersion),
        "system = " + pdeop::to_string(c.system),
        "method = " + to_string(c.method),
        "target = " + c.target_profile().to_string(),
        "seed = " + std::to_string(c.seed),
        "horizon = " + std::to_string(c.horizon),
        "iterations = " + std::to_string(c.iterations),
        "inner_iterations = " + std::to_string(c.inner_iterations),
        "nmpc_iterations = " + std::to_string(c.nmpc_iterations),
        "label = " + c.label,
    };
    const auto s = c.system_spec();
    kv.push_back("gamma = " + fmt_double(s.objective.effort));
    kv.push_back("grid.n = " + std::to_string(s.grid.n()));
    kv.push_back("grid.steps = " + std::to_string(s.grid.steps()));
    kv.push_back("grid.final_time = " + fmt_double(s.grid.final_time()));
    if (c.method == Method::Pdeop) kv.push_back("artifacts = " + c.artifacts.string());
    std::sort(kv.begin(), kv.end());
    std::string out;
    for (const auto& l : kv) out += l + "\n";
    return out;
}

std::uint64_t fnv1a64(const std::string& bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : bytes) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string config_hash(const ExperimentConfig& cfg) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(fnv1a64(canonical_text(cfg))));
    return buf;
}

Suite parse_suite(const std::string& text) {
    const auto lines = split_lines(text);
    check_schema(lines);
    ExperimentConfig shared;
    std::set<std::string> seen;
    std::vector<const Line*> runs;
    for (const auto& l : lines) {
        if (l.key == "run") {
            runs.push_back(&l);
            continue;
        }
        if (l.key == "system" || l.key == "method" || l.key == "target")
            throw ConfigError("line " + std::to_string(l.number) + ": '" + l.key + "' belongs in a run line");
        if (!seen.insert(l.key).second)
            throw ConfigError("line " + std::to_string(l.number) + ": duplicate key '" + l.key + "'");
        if (!apply(shared, l.key, l.value))
            throw ConfigError("line " + std::to_string(l.number) + ": unknown key '" + l.key + "'");
    }
    Suite suite;
    suite.out = shared.out;
    for (const Line* l : runs) {
        std::istringstream parts(l->value);
        std::string sys, method, target, extra;
        parts >> sys >> method >> target;
        if (target.empty() || (parts >> extra))
            throw ConfigError("line " + std::to_string(l->number) + ": expected 'run = <system> <method> <target>'");
        ExperimentConfig c = shared;
        c.system = system_from_string(sys);
        c.method = method_from_string(method);
        c.target = target;
        try {
            c.validate();
        } catch (const ConfigError& e) {
            throw ConfigError("line " + std::to_string(l->number) + ": " + e.what());
        }
        suite.runs.push_back(c);
    }
    return suite;
}

Suite load_suite(const std::filesystem::path& path) { return parse_suite(io::read_text(path)); }

namespace {

Suite make_suite(const std::filesystem::path& out, const std::filesystem::path& artifacts,
                 const std::vector<std::tuple<SystemKind, Method, std::string>>& rows) {
    Suite s;
    s.out = out;
    for (const auto& [sys, m, t] : rows) {
        ExperimentConfig c;
        c.system = sys;
        c.method = m;
        c.target = t;
        c.out = out;
        c.artifacts = artifacts;
        c.validate();
        s.runs.push_back(c);
    }
    return s;
}

const std::vector<std::pair<SystemKind, std::vector<Method>>>& table_methods() {
    static const std::vector<std::pair<SystemKind, std::vector<Method>>> rows{
        {SystemKind::Voltage, {Method::Direct, Method::Adjoint, Method::Pdeop}},
        {SystemKind::Heat, {Method::Lmpc, Method::Adjoint, Method::Pdeop}},
        {SystemKind::Burgers, {Method::Nmpc, Method::Adjoint, Method::Pdeop}},
    };
    return rows;
}

}  // namespace

Suite default_suite(const std::filesystem::path& out, const std::filesystem::path& artifacts) {
    std::vector<std::tuple<SystemKind, Method, std::string>> rows;
    for (const auto& [sys, methods] : table_methods())
        for (auto m : methods) rows.emplace_back(sys, m, "sine");
    return make_suite(out, artifacts, rows);
}

Suite full_suite(const std::filesystem::path& out, const std::filesystem::path& artifacts) {
    std::vector<std::tuple<SystemKind, Method, std::string>> rows;
    for (const auto& [sys, methods] : table_methods()) {
        const std::vector<std::string> targets = sys == SystemKind::Burgers
                                                     ? std::vector<std::string>{"sine", "parabola", "zero"}
                                                     : std::vector<std::string>{"sine", "ramp", "constant"};
        for (const auto& t : targets)
            for (auto m : methods) rows.emplace_back(sys, m, t);
    }
    return make_suite(out, artifacts, rows);
}

}  // namespace pdeop::bench
