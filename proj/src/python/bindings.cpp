// Python extension `eomsim._core`. Reports cross the boundary as JSON text;
// the pure-Python wrapper in python/eomsim decodes them.

#include <pybind11/complex.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "eomsim/analysis.hpp"
#include "eomsim/biphoton_source.hpp"
#include "eomsim/errors.hpp"
#include "eomsim/optical_chain.hpp"
#include "eomsim/report.hpp"
#include "eomsim/scenario.hpp"
#include "eomsim/waveform.hpp"

namespace py = pybind11;
using namespace eomsim;

namespace {

RunOptions make_options(std::optional<std::uint64_t> seed, unsigned workers, double time_scale) {
    RunOptions o;
    o.seed = seed;
    o.workers = workers;
    o.time_scale = time_scale;
    return o;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Heralded single-photon modulation simulator (compiled core)";

    // Owned for the life of the interpreter; `kind` names the ErrorKind.
    static PyObject *error_type = PyErr_NewException("eomsim._core.EomsimError", PyExc_RuntimeError, nullptr);
    m.add_object("EomsimError", py::handle(error_type));
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) {
                std::rethrow_exception(p);
            }
        } catch (const Error &e) {
            py::object exc = py::reinterpret_borrow<py::object>(error_type)(e.what());
            exc.attr("kind") = std::string(to_string(e.kind()));
            PyErr_SetObject(error_type, exc.ptr());
        }
    });

    py::class_<Scenario>(m, "Scenario", "A parsed and validated scenario.")
        .def_static("load", &parse_scenario, py::arg("path"), "Parse a .scn file.")
        .def_static(
            "from_text",
            [](const std::string &text, const std::filesystem::path &base_dir, const std::string &source_name) {
                return parse_scenario_text(text, base_dir, source_name);
            },
            py::arg("text"), py::arg("base_dir") = std::filesystem::path("."), py::arg("source_name") = "<text>")
        .def_readonly("name", &Scenario::name)
        .def_property(
            "seed", [](const Scenario &s) { return s.source.seed; },
            [](Scenario &s, std::uint64_t v) { s.source.seed = v; })
        .def_property(
            "run_duration_s", [](const Scenario &s) { return s.source.run_duration_s; },
            [](Scenario &s, double v) { s.source.run_duration_s = v; })
        .def_property_readonly("window_offset_ns", &Scenario::window_offset_ns)
        .def_property_readonly("signal_window_ns", &Scenario::signal_window_ns)
        .def("config_digest", [](const Scenario &s) { return config_digest(s); })
        .def("canonical_json", [](const Scenario &s) { return canonical_json(s).dump(); })
        .def("validate", [](const Scenario &s) { validate_scenario(s); });

    m.def(
        "run",
        [](const Scenario &s, std::optional<std::uint64_t> seed, unsigned workers, double time_scale,
           std::optional<std::filesystem::path> out) {
            py::gil_scoped_release release;
            const auto report = run(s, make_options(seed, workers, time_scale));
            if (out) {
                write_outputs(report, *out);
            }
            return report_text(report);
        },
        py::arg("scenario"), py::arg("seed") = py::none(), py::arg("workers") = 1u, py::arg("time_scale") = 1.0,
        py::arg("out") = py::none(), "Simulate and analyze a scenario; returns the report as JSON text.");

    m.def(
        "run_controls",
        [](const Scenario &s, std::optional<std::uint64_t> seed, unsigned workers, double time_scale) {
            py::gil_scoped_release release;
            const auto [a, b] = run_controls(s, make_options(seed, workers, time_scale));
            return std::pair{report_text(a), report_text(b)};
        },
        py::arg("scenario"), py::arg("seed") = py::none(), py::arg("workers") = 1u, py::arg("time_scale") = 1.0,
        "No-fiber and externally clocked controls; returns two JSON reports.");

    m.def(
        "floor_curve",
        [](const Scenario &s, const std::vector<double> &rates, double heralds, std::optional<std::uint64_t> seed,
           unsigned workers) {
            py::gil_scoped_release release;
            const auto curve = multi_pair_floor(s, rates, make_options(seed, workers, 1.0), heralds);
            return floor_curve_json(curve).dump();
        },
        py::arg("scenario"), py::arg("rates"), py::arg("heralds") = 2e5, py::arg("seed") = py::none(),
        py::arg("workers") = 1u, "Multi-pair floor and with-background g2_cond against Stokes rate, as JSON text.");

    m.def(
        "modulator_transfer",
        [](double volts, double v_pi, double alpha) {
            ModulatorParams p;
            p.v_pi = v_pi;
            p.alpha = alpha;
            validate_modulator(p);
            return modulator_transfer(volts, p);
        },
        py::arg("volts"), py::arg("v_pi") = 1.3, py::arg("alpha") = 0.75, "Complex field transfer m(V).");

    m.def(
        "predistort",
        [](const std::function<double(double)> &target, double v_pi, double sample_period_ns,
           std::pair<double, double> support_ns) {
            const auto w = predistort(target, v_pi, sample_period_ns, support_ns);
            const auto &tab = std::get<TabulatedWave>(w.kind);
            return py::make_tuple(tab.start_ns, tab.sample_period_ns, tab.volts);
        },
        py::arg("target"), py::arg("v_pi"), py::arg("sample_period_ns"), py::arg("support_ns"),
        "Drive voltages whose modulator amplitude equals target(tau); returns (start_ns, period_ns, volts).");

    m.def(
        "g2_cond",
        [](std::uint64_t n1, std::uint64_t n12, std::uint64_t n13, std::uint64_t n123) {
            const auto g = g2_cond(n1, n12, n13, n123);
            py::dict d;
            d["value"] = g.value;
            d["standard_error"] = g.standard_error;
            d["upper_bound_90"] = g.upper_bound ? py::cast(*g.upper_bound) : py::none();
            return d;
        },
        py::arg("n1"), py::arg("n12"), py::arg("n13"), py::arg("n123"));

    m.def("back_out_losses", [](double measured, const std::vector<double> &factors) {
        return back_out_losses(measured, factors);
    }, py::arg("measured"), py::arg("factors"));

    m.def("reference_eta_ledger", [] {
        std::vector<std::pair<std::string, double>> out;
        for (const auto &e : reference_eta_ledger()) {
            out.emplace_back(e.label, e.factor);
        }
        return out;
    });

    m.def("group_delay_from_velocity", &group_delay_from_velocity, py::arg("length_m"),
          py::arg("group_velocity_m_per_s"), "Group delay in ns.");
}
