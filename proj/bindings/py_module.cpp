#include "msdarcy/experiments.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

namespace py = pybind11;

namespace {

using namespace msdarcy;

py::dict errors_dict(const ErrorReport& e) {
    py::dict d;
    d["u_error"] = e.u_error;
    d["u_norm"] = e.u_norm;
    d["gradp_error"] = e.gradp_error;
    d["gradp_norm"] = e.gradp_norm;
    d["p_error"] = e.p_error;
    d["p_norm"] = e.p_norm;
    d["multiplier_error"] = e.multiplier_error;
    return d;
}

py::dict table_dict(const TableOutcome& out) {
    py::dict d;
    d["reference"] = errors_dict(out.reference);
    d["reference_conservation"] = out.reference_conservation;
    d["source_l2"] = out.source_l2;
    py::list runs;
    for (const auto& r : out.runs) {
        py::dict rd;
        rd["variant"] = r.variant;
        rd["coarse"] = r.coarse;
        rd["errors"] = errors_dict(r.errors);
        if (r.has_postprocessed) {
            rd["postprocessed_error"] = r.postprocessed.error;
            rd["postprocessed_norm"] = r.postprocessed.norm;
        }
        rd["conservation_defect"] = r.conservation_defect;
        rd["interface_jump"] = r.interface_jump;
        runs.append(rd);
    }
    d["runs"] = runs;
    d["fingerprint"] = out.fingerprint;
    return d;
}

py::dict convergence_dict(const ConvergenceOutcome& out) {
    py::dict d;
    py::list points;
    for (const auto& pt : out.points) {
        py::dict pd;
        pd["H"] = pt.H;
        pd["errors"] = errors_dict(pt.errors);
        points.append(pd);
    }
    d["points"] = points;
    d["u_slope"] = out.u_slope;
    d["gradp_slope"] = out.gradp_slope;
    d["p_slope"] = out.p_slope;
    d["fingerprint"] = out.fingerprint;
    return d;
}

py::dict homog_dict(const HomogOutcome& out) {
    py::dict d;
    py::list entries;
    for (const auto& e : out.entries) {
        py::dict ed;
        ed["field"] = e.field;
        ed["n"] = e.n;
        ed["k_star"] = e.k_star;
        ed["expected"] = e.expected;
        ed["harmonic_mean"] = e.means.harmonic;
        ed["arithmetic_mean"] = e.means.arithmetic;
        entries.append(ed);
    }
    d["entries"] = entries;
    d["fingerprint"] = out.fingerprint;
    return d;
}

py::dict impes_dict(const ImpesOutcome& out) {
    py::dict d;
    d["times"] = out.series.times;
    d["errors"] = out.series.errors; // [pipeline][step], pipelines are [local, global]
    d["ref_snapshot"] = out.series.ref_snapshot;
    d["snapshots"] = out.series.snapshots;
    d["ref_final"] = out.series.ref_final;
    d["finals"] = out.series.finals;
    d["max_balance_defect"] = out.series.max_balance_defect;
    d["s_min"] = out.series.s_min;
    d["s_max"] = out.series.s_max;
    d["fingerprint"] = out.fingerprint;
    return d;
}

} // namespace

PYBIND11_MODULE(_msdarcy, m) {
    m.doc() = "multiscale expanded mixed finite elements for Darcy flow";
    m.attr("__version__") = "0.1.0";

    m.def(
        "default_config",
        [](const std::string& experiment) {
            ExperimentConfig cfg;
            cfg.experiment = experiment;
            return experiment_to_config(cfg);
        },
        py::arg("experiment"),
        "Canonical, fully resolved configuration for a named experiment.");

    m.def(
        "run",
        [](const ConfigMap& cfg) { run_experiment(experiment_from_config(cfg)); },
        py::arg("config"),
        "Run any experiment from a flat string-to-string configuration, writing artifacts "
        "when the config sets 'out'.");

    m.def(
        "table",
        [](const ConfigMap& cfg) { return table_dict(run_table(experiment_from_config(cfg))); },
        py::arg("config"),
        "Run one of the table experiments and return reference norms plus per-variant errors.");

    m.def(
        "convergence",
        [](const ConfigMap& cfg) {
            return convergence_dict(run_convergence(experiment_from_config(cfg)));
        },
        py::arg("config"), "Coarse-grid convergence sweep; returns per-H errors and slopes.");

    m.def(
        "homog_check",
        [](const ConfigMap& cfg) {
            return homog_dict(run_homog_check(experiment_from_config(cfg)));
        },
        py::arg("config"),
        "Periodic cell problems; returns computed and closed-form effective tensors.");

    m.def(
        "impes",
        [](const ConfigMap& cfg) {
            return impes_dict(run_impes_experiment(experiment_from_config(cfg)));
        },
        py::arg("config"),
        "Two-phase IMPES run; returns per-step saturation errors for the local and global "
        "pipelines.");

    py::register_exception<ConfigError>(m, "MsdarcyConfigError");
    py::register_exception<DomainError>(m, "MsdarcyDomainError");
    py::register_exception<SolverError>(m, "MsdarcySolverError");
}
