#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "pdeop/bench.hpp"
#include "pdeop/control.hpp"
#include "pdeop/nn.hpp"

namespace py = pybind11;
using namespace pdeop;

namespace {

SystemSpec spec_for(const std::string& system, int n, int steps) {
    auto s = default_system(system_from_string(system));
    if (n > 0 || steps > 0) {
        const int nn = n > 0 ? n : s.grid.n();
        s.grid = SpaceTimeGrid(s.grid.length(), nn, s.grid.final_time(), steps > 0 ? steps : s.grid.steps());
        if (s.diffusion.reference.size() != nn)
            s.diffusion.reference = Vec::Constant(nn, s.diffusion.reference.size() ? s.diffusion.reference[0] : 0.0);
        s.initial_state = Vec::Constant(nn, s.initial_state.size() ? s.initial_state[0] : 0.0);
    }
    return s;
}

py::dict record_dict(const bench::ResultRecord& r) {
    py::dict d;
    d["system"] = r.system;
    d["method"] = r.method;
    d["target"] = r.target;
    d["mse"] = r.mse;
    d["objective"] = r.obj_total;
    d["wall_seconds"] = r.wall_seconds;
    d["forward_solves"] = r.forward_solves;
    d["backward_solves"] = r.backward_solves;
    d["hash"] = r.config_hash;
    d["x"] = r.x;
    d["terminal"] = r.terminal;
    d["target_values"] = r.target_values;
    return d;
}

}  // namespace

PYBIND11_MODULE(_pdeop, m) {
    m.doc() = "PDE-constrained control laboratory";

    py::register_exception<Error>(m, "PdeopError", PyExc_RuntimeError);

    py::class_<Simulator>(m, "Simulator")
        .def(py::init([](const std::string& system, int n, int steps) { return Simulator(spec_for(system, n, steps)); }),
             py::arg("system"), py::arg("n") = 0, py::arg("steps") = 0)
        .def_property_readonly("n", [](const Simulator& s) { return s.grid().n(); })
        .def_property_readonly("steps", [](const Simulator& s) { return s.grid().steps(); })
        .def_property_readonly("control_dim", [](const Simulator& s) { return s.spec().control_dim(); })
        .def_property_readonly("x", [](const Simulator& s) { return s.grid().coordinates(); })
        .def("step", &Simulator::step, py::arg("y"), py::arg("input"))
        .def("rollout", [](const Simulator& s, const Mat& inputs) -> Mat { return s.rollout(inputs).values(); },
             py::arg("inputs"), "states (steps + 1) x n for per-step inputs steps x control_dim")
        .def("target", [](const Simulator& s, const std::string& family) {
            return default_target(s.spec().kind, family).evaluate(s.grid());
        }, py::arg("family"));

    m.def("terminal_mse", py::overload_cast<const Vec&, const Vec&>(&terminal_mse), py::arg("terminal"),
          py::arg("target"));

    m.def("adjoint_gradient_static", [](const Simulator& sim, const Vec& u, const Vec& target, double gamma) {
        SolveCounter c;
        auto g = control::adjoint_gradient_static(sim, u, target, gamma, &c);
        return py::make_tuple(g.value, g.gradient, c.forward, c.backward);
    }, py::arg("sim"), py::arg("u"), py::arg("target"), py::arg("gamma"),
          "(value, gradient, forward solves, backward solves)");

    m.def("static_objective", [](const Simulator& sim, const Vec& u, const Vec& target, double gamma) {
        return control::static_objective(sim, u, target, gamma);
    }, py::arg("sim"), py::arg("u"), py::arg("target"), py::arg("gamma"));

    m.def("run", [](const std::string& system, const std::string& method, const std::string& target,
                    const std::string& artifacts) {
        bench::ExperimentConfig cfg;
        cfg.system = system_from_string(system);
        cfg.method = bench::method_from_string(method);
        cfg.target = target;
        if (!artifacts.empty()) cfg.artifacts = artifacts;
        py::gil_scoped_release release;
        auto r = bench::execute(cfg);
        py::gil_scoped_acquire acquire;
        return record_dict(r);
    }, py::arg("system"), py::arg("method"), py::arg("target") = "sine", py::arg("artifacts") = "",
          "run one experiment without writing records");

    py::class_<nn::OperatorNet>(m, "Operator")
        .def_static("load", [](const std::filesystem::path& p) {
            auto op = nn::load_operator(p);
            op.prepare_inference();
            return op;
        })
        .def_property_readonly("n", [](const nn::OperatorNet& o) { return o.config().n; })
        .def_property_readonly("m", [](const nn::OperatorNet& o) { return o.config().m; })
        .def("step", &nn::OperatorNet::eval_step, py::arg("y"), py::arg("c"), "batched one-step prediction");
}
