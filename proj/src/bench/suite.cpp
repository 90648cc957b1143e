#include <sys/wait.h>
#include <unistd.h>

#include <cstdio>
#include <map>
#include <set>
#include <sstream>

#include <spdlog/spdlog.h>

#include "pdeop/bench.hpp"
#include "pdeop/io.hpp"

namespace pdeop::bench {

namespace {

ResultRecord failed_record(const ExperimentConfig& cfg, const std::string& what) {
    ResultRecord r;
    r.ok = false;
    r.error = what;
    r.system = pdeop::to_string(cfg.system);
    r.method = to_string(cfg.method);
    r.target = cfg.target;
    r.seed = cfg.seed;
    r.label = cfg.label;
    r.provenance = provenance();
    try {
        r.config_hash = config_hash(cfg);
    } catch (const std::exception&) {
    }
    return r;
}

ResultRecord execute_safely(const ExperimentConfig& cfg) {
    try {
        return execute(cfg);
    } catch (const std::exception& e) {
        return failed_record(cfg, e.what());
    }
}

std::string num(double v, const char* f) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), f, v);
    return buf;
}

}  // namespace

std::string table_csv(const std::vector<ResultRecord>& records) {
    std::ostringstream os;
    os << "system,target,method,horizon,wall_s,mse,forward_solves,backward_solves,status\n";
    for (const auto& r : records) {
        os << r.system << ",\"" << r.target << "\"," << r.method << ',' << r.horizon << ',';
        if (r.ok)
            os << num(r.wall_seconds, "%.6g") << ',' << num(r.mse, "%.6e") << ',' << r.forward_solves << ','
               << r.backward_solves << ",ok\n";
        else
            os << ",,,,\"failed: " << r.error << "\"\n";
    }
    return os.str();
}

std::string table_text(const std::vector<ResultRecord>& records) {
    std::ostringstream os;
    char line[256];
    std::snprintf(line, sizeof(line), "%-9s %-10s %-8s %12s %14s %10s %10s\n", "system", "target", "method",
                  "runtime_s", "mse", "forward", "backward");
    os << line << std::string(79, '-') << '\n';
    std::string last;
    for (const auto& r : records) {
        if (!last.empty() && r.system != last) os << '\n';
        last = r.system;
        if (r.ok)
            std::snprintf(line, sizeof(line), "%-9s %-10s %-8s %12.4f %14.4e %10ld %10ld\n", r.system.c_str(),
                          r.target.c_str(), r.method.c_str(), r.wall_seconds, r.mse, r.forward_solves,
                          r.backward_solves);
        else
            std::snprintf(line, sizeof(line), "%-9s %-10s %-8s FAILED: %.60s\n", r.system.c_str(), r.target.c_str(),
                          r.method.c_str(), r.error.c_str());
        os << line;
    }
    return os.str();
}

SuiteReport run_suite(const Suite& suite, int jobs, bool plots) {
    if (jobs < 1) throw ConfigError("--jobs must be >= 1");
    const auto out = suite.out;
    std::filesystem::create_directories(out);
    const auto work = out / ".work";
    std::vector<ResultRecord> records(suite.runs.size());

    if (jobs == 1 || suite.runs.size() <= 1) {
        for (std::size_t i = 0; i < suite.runs.size(); ++i) records[i] = execute_safely(suite.runs[i]);
    } else {
        std::filesystem::create_directories(work);
        std::map<pid_t, std::size_t> running;
        std::size_t next = 0;
        auto reap = [&] {
            int status = 0;
            const pid_t pid = ::waitpid(-1, &status, 0);
            if (pid < 0) throw Error("waitpid failed");
            const std::size_t i = running.at(pid);
            running.erase(pid);
            const auto file = work / (std::to_string(i) + ".json");
            if (WIFEXITED(status) && WEXITSTATUS(status) == 0 && std::filesystem::exists(file)) {
                records[i] = record_from_json(io::read_text(file));
            } else {
                const std::string why = WIFSIGNALED(status)
                                            ? "worker terminated by signal " + std::to_string(WTERMSIG(status))
                                            : "worker exited without a result";
                records[i] = failed_record(suite.runs[i], why);
            }
            std::filesystem::remove(file);
        };
        std::fflush(nullptr);
        while (next < suite.runs.size() || !running.empty()) {
            while (next < suite.runs.size() && running.size() < std::size_t(jobs)) {
                const pid_t pid = ::fork();
                if (pid < 0) throw Error("fork failed");
                if (pid == 0) {
                    int code = 0;
                    try {
                        const auto r = execute_safely(suite.runs[next]);
                        write_record(work / (std::to_string(next) + ".json"), r);
                    } catch (...) {
                        code = 1;
                    }
                    std::fflush(nullptr);
                    ::_exit(code);
                }
                running[pid] = next++;
            }
            reap();
        }
        std::filesystem::remove_all(work);
    }

    // single writer for records and the ledger
    for (const auto& r : records) {
        if (!r.config_hash.empty()) write_record(out / "records" / (r.config_hash + ".json"), r);
        if (r.ok) append_ledger(out / "ledger.csv", r);
        else spdlog::warn("{} {} {} failed: {}", r.system, r.method, r.target, r.error);
    }

    SuiteReport rep;
    rep.records = records;
    rep.table_csv = out / "table.csv";
    rep.table_text = out / "table.txt";
    io::write_text(rep.table_csv, table_csv(records));
    io::write_text(rep.table_text, table_text(records));
    if (plots && !records.empty()) {
        const auto dir = out / "plots";
        rep.plots = write_overlay_plots(dir, records);
        std::set<SystemKind> systems;
        std::filesystem::path artifacts;
        for (const auto& c : suite.runs)
            if (c.method == Method::Pdeop) {
                systems.insert(c.system);
                artifacts = c.artifacts;
            }
        try {
            auto more = write_operator_plots(dir, artifacts, {systems.begin(), systems.end()});
            rep.plots.insert(rep.plots.end(), more.begin(), more.end());
        } catch (const std::exception& e) {
            spdlog::warn("operator plots skipped: {}", e.what());
        }
    }
    return rep;
}

}  // namespace pdeop::bench
