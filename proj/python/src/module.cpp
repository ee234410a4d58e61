#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "vargauss/config.hpp"
#include "vargauss/oracle.hpp"
#include "vargauss/polaron.hpp"
#include "vargauss/spinboson.hpp"
#include "vargauss/tasks.hpp"

namespace py = pybind11;
using namespace vg;

namespace {

FlowConfig imaginary_flow(double dt, double t_max, double tol)
{
    FlowConfig cfg;
    cfg.dt = dt;
    cfg.t_max = t_max;
    cfg.fixed_point_tol = tol;
    return cfg;
}

PolaronSpec polaron_spec(const std::string& kind, int sites, double omega0, double g, int k_index, double t0)
{
    PolaronSpec spec;
    spec.kind = polaron_kind_from_string(kind);
    spec.n_sites = sites;
    spec.omega0 = omega0;
    spec.g = g;
    spec.k_index = k_index;
    spec.t0 = t0;
    spec.validate();
    return spec;
}

OhmicBathSpec bath_spec(int modes, double alpha, double delta, double omega_c)
{
    OhmicBathSpec bath;
    bath.n_modes = modes;
    bath.alpha = alpha;
    bath.delta = delta;
    bath.omega_c = omega_c;
    bath.validate();
    return bath;
}

}  // namespace

PYBIND11_MODULE(_core, m)
{
    m.doc() = "Gaussian variational ground states and dynamics for polaron and spin-boson models";

    py::register_exception<Error>(m, "VargaussError");

    m.def("build_id", &build_id);

    m.def(
        "run",
        [](const std::string& task, const std::string& config, const std::vector<std::string>& overrides) {
            YAML::Node doc = parse_document(config);
            for (const auto& o : overrides) apply_override(doc, o);
            std::ostringstream log;
            RunOutcome out;
            {
                py::gil_scoped_release release;
                out = run(task_from_string(task), doc, log);
            }
            return py::make_tuple(out.exit_code, out.dir.string(), out.record.dump());
        },
        py::arg("task"), py::arg("config"), py::arg("overrides") = std::vector<std::string>{},
        "Run a task from YAML text; returns (exit_code, output_dir, result_json).");

    m.def(
        "polaron_ground",
        [](const std::string& kind, int sites, double omega0, double g, int k_index, double t0, double dt,
           double t_max, double tol, unsigned long long seed) {
            const PolaronSpec spec = polaron_spec(kind, sites, omega0, g, k_index, t0);
            PolaronGroundResult r;
            {
                py::gil_scoped_release release;
                r = polaron_ground(spec, imaginary_flow(dt, t_max, tol), seed);
            }
            py::dict d;
            d["k"] = r.row.k;
            d["energy"] = r.row.energy;
            d["z"] = r.row.z;
            d["phonons"] = r.row.phonons;
            d["converged"] = r.row.converged;
            d["rhs_norm"] = r.row.rhs_norm;
            return d;
        },
        py::arg("kind") = "holstein", py::arg("sites") = 8, py::arg("omega0") = 0.5, py::arg("g") = 0.0,
        py::arg("k_index") = 0, py::arg("t0") = 1.0, py::arg("dt") = 0.05, py::arg("t_max") = 200.0,
        py::arg("tol") = 1e-10, py::arg("seed") = 1ULL);

    m.def(
        "polaron_ed",
        [](const std::string& kind, int sites, double omega0, double g, int k_index, double t0, int n_max) {
            const PolaronSpec spec = polaron_spec(kind, sites, omega0, g, k_index, t0);
            py::gil_scoped_release release;
            return ed_polaron(spec, n_max, Truncation::Total).e0;
        },
        py::arg("kind") = "holstein", py::arg("sites") = 4, py::arg("omega0") = 0.5, py::arg("g") = 0.0,
        py::arg("k_index") = 0, py::arg("t0") = 1.0, py::arg("n_max") = 8,
        "Exact ground-state energy with total phonon number at most n_max.");

    m.def(
        "spin_boson_ground",
        [](int modes, double alpha, double delta, double omega_c, const std::string& frame, bool scf_start,
           double dt, double t_max, double tol) {
            const OhmicBathSpec bath = bath_spec(modes, alpha, delta, omega_c);
            SpinBosonGround r;
            {
                py::gil_scoped_release release;
                r = sb_ground(bath, spin_boson_frame_from_string(frame), imaginary_flow(dt, t_max, tol), scf_start);
            }
            py::dict d;
            d["energy"] = r.energy;
            d["m_x"] = r.obs.m_x;
            d["n_perp"] = r.obs.n_perp;
            d["lambda"] = r.lambda;
            d["converged"] = r.converged;
            d["rhs_norm"] = r.rhs_norm;
            return d;
        },
        py::arg("modes") = 50, py::arg("alpha") = 0.1, py::arg("delta") = 0.1, py::arg("omega_c") = 1.0,
        py::arg("frame") = "polaron", py::arg("scf_start") = true, py::arg("dt") = 0.05, py::arg("t_max") = 2000.0,
        py::arg("tol") = 1e-10);

    m.def(
        "kondo_cutoff",
        [](int modes, double omega_c) { return kondo_cutoff_solve(modes, omega_c); }, py::arg("modes"),
        py::arg("omega_c") = 1.0, "Cutoff length l_c solving the Kondo mapping condition.");
}
