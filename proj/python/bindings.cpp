#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "carbongmam/carbon_model.hpp"
#include "carbongmam/dynamics.hpp"
#include "carbongmam/error.hpp"
#include "carbongmam/experiment.hpp"
#include "carbongmam/gmam.hpp"
#include "carbongmam/sde.hpp"
#include "carbongmam/system.hpp"

namespace py = pybind11;
using namespace carbongmam;

namespace {

using Points = py::array_t<double, py::array::c_style | py::array::forcecast>;

Points to_array(const std::vector<State>& states) {
    Points out({static_cast<py::ssize_t>(states.size()), py::ssize_t{2}});
    auto v = out.mutable_unchecked<2>();
    for (std::size_t i = 0; i < states.size(); ++i) {
        v(i, 0) = states[i].c;
        v(i, 1) = states[i].w;
    }
    return out;
}

std::vector<State> from_array(const Points& a) {
    if (a.ndim() != 2 || a.shape(1) != 2) throw py::value_error("expected an (n, 2) array of states");
    auto v = a.unchecked<2>();
    std::vector<State> out(static_cast<std::size_t>(a.shape(0)));
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = {v(i, 0), v(i, 1)};
    return out;
}

State to_state(const std::pair<double, double>& p) { return {p.first, p.second}; }
std::pair<double, double> from_state(const State& s) { return {s.c, s.w}; }

py::dict result_dict(const TransitionResult& r) {
    py::dict d;
    d["path"] = to_array(r.path.points);
    d["action"] = r.action;
    d["converged"] = r.converged;
    d["iterations"] = r.iterations;
    d["endpoint_index"] = r.endpoint_index;
    d["final_displacement"] = r.final_displacement;
    return d;
}

py::dict cycle_dict(const LimitCycle& c) {
    py::dict d;
    d["points"] = to_array(c.points);
    d["period"] = c.period;
    d["stability"] = to_string(c.stability);
    return d;
}

CycleStability parse_stability(const std::string& s) {
    if (s == "stable") return CycleStability::stable;
    if (s == "unstable") return CycleStability::unstable;
    throw py::value_error("stability must be 'stable' or 'unstable'");
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Geometric minimum action method for the upper-ocean carbonate model";
    m.attr("__version__") = version_string();

    py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<NoCycleError>(m, "NoCycleError", PyExc_RuntimeError);
    py::register_exception<ConvergenceError>(m, "ConvergenceError", PyExc_RuntimeError);
    py::register_exception<DomainError>(m, "DomainError", PyExc_ValueError);

    py::class_<ModelParams>(m, "ModelParams")
        .def(py::init<>())
        .def_readwrite("mu", &ModelParams::mu)
        .def_readwrite("b", &ModelParams::b)
        .def_readwrite("theta", &ModelParams::theta)
        .def_readwrite("nu", &ModelParams::nu)
        .def_readwrite("c_p", &ModelParams::c_p)
        .def_readwrite("c_x", &ModelParams::c_x)
        .def_readwrite("c_f", &ModelParams::c_f)
        .def_readwrite("f0", &ModelParams::f0)
        .def_readwrite("w0", &ModelParams::w0)
        .def_readwrite("gamma", &ModelParams::gamma)
        .def_readwrite("beta", &ModelParams::beta)
        .def_readwrite("tau_w_years", &ModelParams::tau_w_years)
        .def("validate", &ModelParams::validate)
        .def("to_json", [](const ModelParams& p) { return params_to_json(p); });
    m.def("load_params", [](const std::filesystem::path& p) { return load_params(p); }, py::arg("path"));
    m.def("parse_params", [](const std::string& text) { return parse_params(text); }, py::arg("text"));

    m.def("sigmoid", &sigmoid, py::arg("c"), py::arg("c_half"), py::arg("gamma"));
    m.def("buffer", &buffer, py::arg("c"), py::arg("params"));
    m.def(
        "drift", [](std::pair<double, double> x, const ModelParams& p) { return from_state(drift(to_state(x), p)); },
        py::arg("state"), py::arg("params"));
    m.def(
        "diffusion",
        [](std::pair<double, double> x, const ModelParams& p) {
            const Mat2 d = diffusion(to_state(x), p);
            return std::vector<std::vector<double>>{{d.a11, d.a12}, {d.a21, d.a22}};
        },
        py::arg("state"), py::arg("params"));

    py::class_<StochasticSystem>(m, "StochasticSystem")
        .def("drift", [](const StochasticSystem& s, std::pair<double, double> x) { return from_state(s.drift(to_state(x))); });
    py::class_<CarbonSystem, StochasticSystem>(m, "CarbonSystem").def(py::init<ModelParams>(), py::arg("params"));
    py::class_<DoubleWellSystem, StochasticSystem>(m, "DoubleWellSystem").def(py::init<>());
    py::class_<LinearSystem, StochasticSystem>(m, "LinearSystem")
        .def(py::init([](const std::vector<std::vector<double>>& j) {
                 if (j.size() != 2 || j[0].size() != 2 || j[1].size() != 2) {
                     throw py::value_error("expected a 2x2 matrix");
                 }
                 return LinearSystem(Mat2{j[0][0], j[0][1], j[1][0], j[1][1]});
             }),
             py::arg("jacobian"));

    m.def(
        "find_fixed_point",
        [](const ModelParams& p) { return from_state(find_fixed_point(CarbonSystem(p), equilibrium_guess(p))); },
        py::arg("params"));
    m.def(
        "find_limit_cycle",
        [](const ModelParams& p, const std::string& stability) {
            return cycle_dict(find_limit_cycle(p, parse_stability(stability)));
        },
        py::arg("params"), py::arg("stability") = "stable");
    m.def(
        "scan_regimes",
        [](const std::vector<double>& c_x, const ModelParams& p, double tol) {
            ScanOptions o;
            o.bisection_tol = tol;
            const ScanResult r = scan_regimes(c_x, p, o);
            py::list regimes;
            for (const auto& rep : r.reports) regimes.append(to_string(rep.regime));
            py::list thresholds;
            for (const auto& t : r.thresholds) thresholds.append(t.c_x);
            py::dict d;
            d["regimes"] = regimes;
            d["thresholds"] = thresholds;
            return d;
        },
        py::arg("c_x"), py::arg("params"), py::arg("bisection_tol") = 0.01);

    py::class_<GmamConfig>(m, "GmamConfig")
        .def(py::init<>())
        .def_readwrite("n_points", &GmamConfig::n_points)
        .def_readwrite("max_outer_iters", &GmamConfig::max_outer_iters)
        .def_readwrite("step_tau", &GmamConfig::step_tau)
        .def_readwrite("min_step_tau", &GmamConfig::min_step_tau)
        .def_readwrite("conv_tol", &GmamConfig::conv_tol)
        .def_readwrite("n_candidates", &GmamConfig::n_candidates)
        .def_readwrite("refine_candidates", &GmamConfig::refine_candidates)
        .def_readwrite("threads", &GmamConfig::threads);

    m.def(
        "geometric_action",
        [](const Points& pts, const StochasticSystem& s) { return geometric_action(from_array(pts), s); },
        py::arg("points"), py::arg("system"));
    m.def(
        "solve",
        [](std::pair<double, double> a, std::pair<double, double> b, const GmamConfig& cfg,
           const StochasticSystem& s) {
            TransitionResult r;
            {
                py::gil_scoped_release release;
                r = solve(to_state(a), to_state(b), cfg, s);
            }
            return result_dict(r);
        },
        py::arg("start"), py::arg("end"), py::arg("config"), py::arg("system"));

    py::class_<SimConfig>(m, "SimConfig")
        .def(py::init<>())
        .def_readwrite("epsilon", &SimConfig::epsilon)
        .def_readwrite("dt", &SimConfig::dt)
        .def_readwrite("t_max", &SimConfig::t_max)
        .def_readwrite("seed", &SimConfig::seed)
        .def_readwrite("n_paths", &SimConfig::n_paths)
        .def_readwrite("record_every", &SimConfig::record_every)
        .def_readwrite("threads", &SimConfig::threads);
    m.def(
        "euler_maruyama",
        [](const StochasticSystem& s, std::pair<double, double> start, const SimConfig& cfg, std::uint64_t path_id) {
            const SimTrajectory t = euler_maruyama(s, to_state(start), cfg, path_id);
            py::dict d;
            d["t"] = t.trajectory.times;
            d["states"] = to_array(t.trajectory.states);
            d["clamp_count"] = t.clamp_count;
            d["non_finite"] = t.non_finite;
            return d;
        },
        py::arg("system"), py::arg("start"), py::arg("config"), py::arg("path_id") = 0);

    m.def("parse_config", [](const std::string& text) { return config_to_json(parse_config(text)); },
          py::arg("text"), "Validate a configuration and return the effective configuration as JSON.");
    m.def(
        "run_transition",
        [](const std::string& config_text, double nu) {
            const ExperimentConfig cfg = parse_config(config_text);
            NuOutcome o;
            {
                py::gil_scoped_release release;
                o = run_transition(cfg, nu, cfg.threads);
            }
            py::dict d;
            d["nu"] = o.record.nu;
            d["status"] = to_string(o.record.status);
            d["action"] = o.record.action;
            d["path_length"] = o.record.path_length;
            d["arrival_c"] = o.record.arrival_c;
            d["converged"] = o.record.converged;
            d["note"] = o.record.note;
            d["fixed_point"] = from_state(o.fixed_point);
            if (o.path) d["path"] = to_array(o.path->points);
            return d;
        },
        py::arg("config"), py::arg("nu"));
}
