#include <chrono>

#include <json.hpp>
#include <spdlog/spdlog.h>

#include "pdeop/bench.hpp"
#include "pdeop/nn.hpp"
#include "pdeop/stochastic.hpp"

namespace pdeop::bench {

PipelineDefaults pipeline_defaults(SystemKind kind) {
    PipelineDefaults d;
    switch (kind) {
        case SystemKind::Voltage:
            d = {1200, 50, 3e-3, 128, 400, 96, 16, 3e-3, 1e-3, 1};
            break;
        case SystemKind::Heat:
            d = {2000, 60, 2e-3, 128, 300, 96, 16, 3e-3, 1e-3, 1};
            break;
        case SystemKind::Burgers:
            d = {1000, 80, 2e-3, 128, 150, 96, 16, 3e-3, 3e-4, 1};
            break;
    }
    return d;
}

namespace {

using json = nlohmann::json;
using clock_type = std::chrono::steady_clock;

double since(clock_type::time_point t0) { return std::chrono::duration<double>(clock_type::now() - t0).count(); }

template <class F>
auto stage(SystemKind kind, const std::string& name, F&& f) {
    try {
        return f();
    } catch (const StageError&) {
        throw;
    } catch (const std::exception& e) {
        throw StageError(pdeop::to_string(kind) + "/" + name, e.what());
    }
}

}  // namespace

std::vector<StageReport> generate_all(const PipelineOptions& opts) {
    std::vector<StageReport> reports;
    for (auto kind : opts.systems) {
        const auto def = pipeline_defaults(kind);
        const int trajectories = opts.trajectories > 0 ? opts.trajectories : def.trajectories;
        const int op_epochs = opts.operator_epochs > 0 ? opts.operator_epochs : def.operator_epochs;
        const int pd_epochs = opts.pdeop_epochs > 0 ? opts.pdeop_epochs : def.pdeop_epochs;
        const int task_count = opts.tasks > 0 ? opts.tasks : def.tasks;
        const std::uint64_t seed = stochastic::mix_seed(opts.seed, std::uint64_t(kind) + 1);

        const auto dir = artifact_dir(opts.artifacts, kind);
        std::filesystem::create_directories(dir);
        const Simulator sim(default_system(kind));
        StageReport rep;
        rep.system = kind;
        bool stale = opts.force;

        // dataset
        const auto data_dir = dir / "dataset";
        stochastic::Dataset ds;
        if (opts.run_dataset && (stale || !std::filesystem::exists(data_dir / "manifest.jsonl"))) {
            stage(kind, "gen-data", [&] {
                const auto t0 = clock_type::now();
                stochastic::DatasetOptions d;
                d.count = trajectories;
                d.bounds = sim.spec().bounds;
                d.seed = seed;
                d.jobs = opts.jobs;
                d.kernel = stochastic::default_kernel(
                    sim.spec().static_control() ? sim.grid().length() : sim.grid().final_time(), d.bounds);
                ds = sim.spec().static_control() ? stochastic::generate_static_control_dataset(sim, d)
                                                 : stochastic::generate_weight_trajectory_dataset(sim, d);
                stochastic::save_dataset(data_dir, ds);
                rep.dataset_seconds = since(t0);
                return 0;
            });
            rep.dataset_built = true;
            stale = true;
        }

        // supervised operator
        const auto op_path = dir / "operator.ckpt";
        nn::OperatorNet op;
        if (opts.run_operator && (stale || !std::filesystem::exists(op_path))) {
            stage(kind, "train-operator", [&] {
                if (ds.items.empty()) {
                    if (!std::filesystem::exists(data_dir / "manifest.jsonl"))
                        throw ConfigError("no dataset in " + data_dir.string() + "; run gen-data first");
                    ds = stochastic::load_dataset(data_dir);
                }
                const auto t0 = clock_type::now();
                op = nn::OperatorNet(nn::default_operator_config(sim.spec()), sim.grid().coordinates(),
                                     stochastic::mix_seed(seed, 11));
                nn::OperatorTrainOptions o;
                o.epochs = op_epochs;
                o.lr = def.operator_lr;
                o.batch = def.operator_batch;
                o.seed = stochastic::mix_seed(seed, 12);
                const auto r = nn::train_operator(op, ds, o);
                rep.operator_seconds = since(t0);
                json meta{{"system", pdeop::to_string(kind)},
                          {"trajectories", int(ds.items.size())},
                          {"epochs", op_epochs},
                          {"best_epoch", r.best_epoch},
                          {"best_validation_mse", r.best_validation_loss},
                          {"train_seconds", r.wall_seconds}};
                nn::save_operator(op_path, op, meta.dump());
                nn::write_operator_history_csv(dir / "operator_history.csv", r);
                spdlog::info("{} operator: best validation mse {:.3e} at epoch {} ({:.0f} s)", pdeop::to_string(kind),
                             r.best_validation_loss, r.best_epoch, r.wall_seconds);
                return 0;
            });
            rep.operator_trained = true;
            stale = true;
        }

        // primal-dual controller training
        const auto joint_path = dir / "joint.ckpt";
        const auto ctrl_path = dir / "controller.ckpt";
        if (opts.run_pdeop &&
            (stale || !std::filesystem::exists(joint_path) || !std::filesystem::exists(ctrl_path))) {
            stage(kind, "train-pdeop", [&] {
                if (op.config().n == 0) {
                    if (!std::filesystem::exists(op_path))
                        throw ConfigError("no operator checkpoint " + op_path.string() + "; run train-operator first");
                    op = nn::load_operator(op_path);
                }
                const auto t0 = clock_type::now();
                nn::Controller ctrl(nn::default_controller_config(sim.spec()), stochastic::mix_seed(seed, 21));
                const auto tasks = nn::sample_control_tasks(sim.spec(), task_count, stochastic::mix_seed(seed, 22));
                nn::PdeopOptions o;
                o.epochs = pd_epochs;
                o.batch = def.pdeop_batch;
                o.lr = def.pdeop_lr;
                o.operator_lr = def.pdeop_operator_lr;
                o.probe_period = def.probe_period;
                o.split_updates = true;
                o.seed = stochastic::mix_seed(seed, 23);
                auto lambda = nn::default_lagrange_state(1.0);
                const auto h = nn::train_pdeop(ctrl, op, sim, tasks, lambda, o);
                nn::write_pdeop_history_csv(dir / "pdeop_history.csv", h);
                if (h.aborted) throw NumericalError("primal-dual training aborted: " + h.abort_reason);
                rep.pdeop_seconds = since(t0);
                json meta{{"system", pdeop::to_string(kind)},
                          {"epochs", pd_epochs},
                          {"tasks", task_count},
                          {"train_seconds", h.wall_seconds},
                          {"final_loss", h.epochs.empty() ? 0.0 : h.epochs.back().loss}};
                op.prepare_inference();
                nn::save_controller(ctrl_path, ctrl, meta.dump());
                nn::save_joint(joint_path, ctrl, op, meta.dump());
                spdlog::info("{} primal-dual training done ({:.0f} s)", pdeop::to_string(kind), h.wall_seconds);
                return 0;
            });
            rep.pdeop_trained = true;
        }
        reports.push_back(rep);
    }
    return reports;
}

}  // namespace pdeop::bench
