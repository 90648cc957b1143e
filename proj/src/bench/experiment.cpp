#include <chrono>
#include <ctime>

#include <spdlog/spdlog.h>

#include "pdeop/bench.hpp"
#include "pdeop/control.hpp"
#include "pdeop/nn.hpp"

namespace pdeop::bench {

namespace {

std::string utc_timestamp() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

std::vector<double> as_std(const Vec& v) { return {v.data(), v.data() + v.size()}; }

void score(ResultRecord& r, const Simulator& sim, const StateTrajectory& traj, const ControlField& control,
           const Vec& target) {
    const auto obj = objective_value(traj, control, target, sim.spec().objective);
    r.obj_total = obj.total;
    r.obj_terminal = obj.terminal;
    r.obj_running = obj.running;
    r.obj_effort = obj.effort;
    r.mse = terminal_mse(traj.terminal(), target);
    r.terminal = as_std(traj.terminal());
}

}  // namespace

std::filesystem::path artifact_dir(const std::filesystem::path& artifacts, SystemKind kind) {
    return artifacts / pdeop::to_string(kind);
}

ResultRecord execute(const ExperimentConfig& cfg) {
    cfg.validate();
    const SystemSpec spec = cfg.system_spec();
    const Simulator sim(spec);
    const Vec target = cfg.target_profile().evaluate(spec.grid);

    ResultRecord r;
    r.config_hash = config_hash(cfg);
    r.system = pdeop::to_string(cfg.system);
    r.method = to_string(cfg.method);
    r.target = cfg.target;
    r.label = cfg.label;
    r.seed = cfg.seed;
    r.provenance = provenance();
    r.timestamp = utc_timestamp();
    r.x = as_std(spec.grid.coordinates());
    r.target_values = as_std(target);

    if (cfg.method == Method::Pdeop) {
        const auto path = artifact_dir(cfg.artifacts, cfg.system) / "joint.ckpt";
        if (!std::filesystem::exists(path))
            throw ConfigError("missing checkpoint " + path.string() + " (run the gen-data/train pipeline first)");
        nn::Controller ctrl;
        nn::OperatorNet op;
        nn::load_joint(path, ctrl, op);
        if (op.config().n != spec.grid.n() || op.config().m != spec.control_dim() ||
            ctrl.config().n != spec.grid.n())
            throw ConfigError("checkpoint " + path.string() + " does not match the configured grid");
        // trunk features and first-touch allocations are load-time costs, not synthesis
        op.prepare_inference();
        nn::synthesize(ctrl, op, spec.initial_state, target, spec.grid.steps());
        const auto syn = nn::synthesize(ctrl, op, spec.initial_state, target, spec.grid.steps());
        r.wall_seconds = syn.wall_seconds;
        const ControlField control = sim.control_from_inputs(syn.inputs);
        score(r, sim, sim.rollout(syn.inputs), control, target);
        r.predicted_terminal = as_std(Vec(syn.predicted_states.bottomRows(1).transpose()));
        return r;
    }

    if (spec.static_control()) {
        optim::QnOptions qn;
        qn.max_iterations = cfg.iterations;
        const double gamma = spec.objective.effort;
        const auto sol = cfg.method == Method::Direct
                             ? control::direct_optimize_static(sim, target, gamma, spec.bounds, qn)
                             : control::adjoint_optimize_static(sim, target, gamma, spec.bounds, qn);
        const ControlField control = ControlField::make_static(sol.u);
        score(r, sim, sim.rollout(control), control, target);
        r.wall_seconds = sol.wall_seconds;
        r.forward_solves = sol.counter.forward;
        r.backward_solves = sol.counter.backward;
        r.iterations = sol.optimizer.iterations;
        return r;
    }

    auto mpc = control::default_mpc_config(spec, cfg.horizon);
    mpc.inner_iterations = cfg.inner_iterations;
    mpc.nmpc_iterations = cfg.nmpc_iterations;
    const auto res = [&] {
        switch (cfg.method) {
            case Method::Lmpc: return control::lmpc_control(sim, spec.initial_state, target, mpc);
            case Method::Nmpc: return control::nmpc_control(sim, spec.initial_state, target, mpc);
            default: return control::receding_horizon_adjoint(sim, spec.initial_state, target, mpc);
        }
    }();
    score(r, sim, res.trajectory, sim.control_from_inputs(res.inputs), target);
    r.horizon = cfg.horizon;
    r.wall_seconds = res.wall_seconds;
    r.forward_solves = res.counter.forward;
    r.backward_solves = res.counter.backward;
    r.iterations = res.inner_iterations;
    return r;
}

ResultRecord run_experiment(const ExperimentConfig& cfg) {
    ResultRecord r = execute(cfg);
    write_record(cfg.out / "records" / (r.config_hash + ".json"), r);
    append_ledger(cfg.out / "ledger.csv", r);
    spdlog::info("{} {} {}: mse {:.4e}, {:.3f} s", r.system, r.method, r.target, r.mse, r.wall_seconds);
    return r;
}

}  // namespace pdeop::bench
