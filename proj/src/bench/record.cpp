#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <cerrno>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "pdeop/bench.hpp"
#include "pdeop/io.hpp"

#ifndef PDEOP_VERSION
#define PDEOP_VERSION "0.0.0"
#endif
#ifndef PDEOP_REVISION
#define PDEOP_REVISION "unknown"
#endif

namespace pdeop::bench {

using json = nlohmann::json;

std::string provenance() { return std::string("pdeop ") + PDEOP_VERSION + " (" + PDEOP_REVISION + ")"; }

std::string to_json(const ResultRecord& r) {
    json j;
    j["config_hash"] = r.config_hash;
    j["system"] = r.system;
    j["method"] = r.method;
    j["target"] = r.target;
    j["label"] = r.label;
    j["seed"] = r.seed;
    j["horizon"] = r.horizon;
    j["ok"] = r.ok;
    j["error"] = r.error;
    j["mse"] = r.mse;
    j["objective"] = {{"total", r.obj_total},
                      {"terminal", r.obj_terminal},
                      {"running", r.obj_running},
                      {"effort", r.obj_effort}};
    j["wall_seconds"] = r.wall_seconds;
    j["forward_solves"] = r.forward_solves;
    j["backward_solves"] = r.backward_solves;
    j["iterations"] = r.iterations;
    j["provenance"] = r.provenance;
    j["timestamp"] = r.timestamp;
    j["x"] = r.x;
    j["terminal"] = r.terminal;
    j["target_values"] = r.target_values;
    j["predicted_terminal"] = r.predicted_terminal;
    return j.dump(2);
}

ResultRecord record_from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("result record is not valid JSON: ") + e.what());
    }
    ResultRecord r;
    try {
        r.config_hash = j.at("config_hash");
        r.system = j.at("system");
        r.method = j.at("method");
        r.target = j.at("target");
        r.label = j.value("label", "");
        r.seed = j.value("seed", std::uint64_t(0));
        r.horizon = j.value("horizon", 0);
        r.ok = j.at("ok");
        r.error = j.value("error", "");
        r.mse = j.at("mse");
        const auto& o = j.at("objective");
        r.obj_total = o.at("total");
        r.obj_terminal = o.at("terminal");
        r.obj_running = o.at("running");
        r.obj_effort = o.at("effort");
        r.wall_seconds = j.at("wall_seconds");
        r.forward_solves = j.at("forward_solves");
        r.backward_solves = j.at("backward_solves");
        r.iterations = j.value("iterations", 0L);
        r.provenance = j.value("provenance", "");
        r.timestamp = j.value("timestamp", "");
        r.x = j.value("x", std::vector<double>{});
        r.terminal = j.value("terminal", std::vector<double>{});
        r.target_values = j.value("target_values", std::vector<double>{});
        r.predicted_terminal = j.value("predicted_terminal", std::vector<double>{});
    } catch (const json::exception& e) {
        throw ConfigError(std::string("malformed result record: ") + e.what());
    }
    return r;
}

void write_record(const std::filesystem::path& path, const ResultRecord& r) { io::write_text(path, to_json(r) + "\n"); }

namespace {

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.10g", v);
    return buf;
}

// Targets may contain commas ("sine:1,0.2,0,6").
std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                cur += '"';
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                cur += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

}  // namespace

std::string ledger_row(const ResultRecord& r) {
    std::ostringstream os;
    os << csv_field(r.timestamp) << ',' << r.config_hash << ',' << r.system << ',' << r.method << ','
       << csv_field(r.target) << ',' << num(r.mse) << ',' << num(r.obj_terminal) << ',' << num(r.obj_running) << ','
       << num(r.obj_effort) << ',' << num(r.wall_seconds) << ',' << r.forward_solves << ',' << r.backward_solves;
    return os.str();
}

void append_ledger(const std::filesystem::path& path, const ResultRecord& r) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    const int fd = ::open(path.c_str(), O_WRONLY | O_CREAT | O_APPEND, 0644);
    if (fd < 0) throw ConfigError("cannot open ledger " + path.string() + ": " + std::strerror(errno));
    if (::flock(fd, LOCK_EX) != 0) {
        ::close(fd);
        throw ConfigError("cannot lock ledger " + path.string());
    }
    std::string text;
    if (::lseek(fd, 0, SEEK_END) == 0) text = std::string(kLedgerHeader) + "\n";
    text += ledger_row(r) + "\n";
    std::size_t done = 0;
    while (done < text.size()) {
        const auto w = ::write(fd, text.data() + done, text.size() - done);
        if (w < 0) {
            if (errno == EINTR) continue;
            ::flock(fd, LOCK_UN);
            ::close(fd);
            throw ConfigError("failed writing ledger " + path.string());
        }
        done += std::size_t(w);
    }
    ::flock(fd, LOCK_UN);
    ::close(fd);
}

std::vector<LedgerRow> read_ledger(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open ledger " + path.string());
    std::string line;
    if (!std::getline(in, line) || line != kLedgerHeader)
        throw ConfigError("ledger " + path.string() + " has an unexpected header");
    std::vector<LedgerRow> rows;
    int number = 1;
    while (std::getline(in, line)) {
        ++number;
        if (line.empty()) continue;
        const auto f = split_csv(line);
        if (f.size() != 12)
            throw ConfigError("ledger line " + std::to_string(number) + ": expected 12 fields, got " +
                              std::to_string(f.size()));
        LedgerRow r;
        try {
            r.timestamp = f[0];
            r.config_hash = f[1];
            r.system = f[2];
            r.method = f[3];
            r.target = f[4];
            std::size_t pos = 0;
            auto d = [&](const std::string& s) {
                const double v = std::stod(s, &pos);
                if (pos != s.size()) throw std::invalid_argument(s);
                return v;
            };
            auto l = [&](const std::string& s) {
                const long v = std::stol(s, &pos);
                if (pos != s.size()) throw std::invalid_argument(s);
                return v;
            };
            r.mse = d(f[5]);
            r.obj_terminal = d(f[6]);
            r.obj_running = d(f[7]);
            r.obj_effort = d(f[8]);
            r.wall_seconds = d(f[9]);
            r.forward_solves = l(f[10]);
            r.backward_solves = l(f[11]);
        } catch (const std::exception&) {
            throw ConfigError("ledger line " + std::to_string(number) + ": malformed number");
        }
        rows.push_back(r);
    }
    return rows;
}

}  // namespace pdeop::bench
