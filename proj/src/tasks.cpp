#include "vargauss/tasks.hpp"

#include "vargauss/oracle.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <mutex>
#include <numbers>
#include <ostream>
#include <random>
#include <sstream>
#include <thread>

#ifndef VARGAUSS_BUILD_ID
#define VARGAUSS_BUILD_ID "unknown"
#endif

namespace vg {

std::string build_id() { return VARGAUSS_BUILD_ID; }

const Observable* TaskResult::find(const std::string& name) const
{
    for (const auto& o : observables)
        if (o.name == name) return &o;
    return nullptr;
}

namespace {


void mark_convergence(TaskResult& r, bool converged, const std::string& why)
{
    if (!converged && r.status == "ok") {
        r.status = "not_converged";
        r.message = why;
    }
}

FlowConfig imaginary_defaults()
{
    FlowConfig f;
    f.dt = 0.1;
    f.t_max = 2000.0;
    f.fixed_point_tol = 1e-9;
    return f;
}

// ---------------------------------------------------------------- polaron

TaskResult polaron_ground_task(const RunConfig& c)
{
    const std::string eu = "t0";
    const PolaronGroundResult g = polaron_ground(c.polaron, c.flow, c.seed, c.dispersion.starts);
    TaskResult r;
    r.observables = {{"k", "1/a", c.polaron.k()},
                     {"energy", eu, g.row.energy},
                     {"z", "1", g.row.z},
                     {"phonons", "1", g.row.phonons},
                     {"rhs_norm", eu, g.row.rhs_norm},
                     {"steps", "1", static_cast<double>(g.trajectory.steps)}};
    r.diagnostics["monotone"] = g.trajectory.monotone;
    r.diagnostics["max_purity"] = g.trajectory.max_purity;
    r.diagnostics["starts"] = g.row.starts;
    r.diagnostics["message"] = g.row.message;
    mark_convergence(r, g.row.converged, "imaginary-time flow did not reach the fixed-point tolerance: " + g.row.message);

    const RealSpaceProfile p = realspace_profile(g.row.state, c.polaron);
    Table prof({{"site", "1"}, {"x", "1"}, {"p", "1"}, {"cov_x0", "1"}});
    for (Eigen::Index j = 0; j < p.x.size(); ++j) prof.add_row({static_cast<long>(j), p.x(j), p.p(j), p.cov_x(0, j)});
    r.tables.push_back({"profile.tsv", prof});
    Table tr({{"tau", "1/t0"}, {"energy", eu}});
    for (size_t i = 0; i < g.trajectory.times.size(); ++i) tr.add_row({g.trajectory.times[i], g.trajectory.energies[i]});
    r.tables.push_back({"trajectory.tsv", tr});
    return r;
}

TaskResult dispersion_task(const RunConfig& c)
{
    std::vector<int> ks = c.dispersion.k_indices;
    if (ks.empty())
        for (int k = 0; k < c.polaron.n_sites; ++k) ks.push_back(k);
    const DispersionResult d = dispersion_scan(c.polaron, ks, c.flow, c.seed, c.dispersion.starts);
    TaskResult r;
    Table t({{"k_index", "1"}, {"k", "1/a"}, {"energy", "t0"}, {"z", "1"}, {"phonons", "1"}, {"converged", "bool"},
             {"rhs_norm", "t0"}});
    bool all = true;
    for (const auto& row : d.rows) {
        t.add_row({static_cast<long>(row.k_index), row.k, row.energy, row.z, row.phonons, static_cast<long>(row.converged),
                   row.rhs_norm});
        all = all && row.converged;
    }
    r.tables.push_back({"dispersion.tsv", t});
    if (d.argmin >= 0) {
        const auto& m = d.rows[static_cast<size_t>(d.argmin)];
        // report the minimum on (-pi, pi] folded to |k|
        double k = m.k;
        if (k > std::numbers::pi) k -= 2.0 * std::numbers::pi;
        r.observables = {{"argmin_k", "1/a", std::abs(k)}, {"argmin_k_index", "1", static_cast<double>(m.k_index)},
                         {"energy_min", "t0", m.energy}, {"z_at_min", "1", m.z}};
    }
    r.diagnostics["points"] = d.rows.size();
    mark_convergence(r, all, "at least one momentum did not converge");
    return r;
}

TaskResult spectral_task(const RunConfig& c)
{
    TaskResult r;
    const PolaronGroundResult g = polaron_ground(c.polaron, imaginary_defaults(), c.seed, c.dispersion.starts);
    mark_convergence(r, g.row.converged, "imaginary-time reference energy did not converge");
    const GreenFunction gf = polaron_green(c.polaron, c.flow);
    const Vec om = Vec::LinSpaced(c.spectral.omega_points, c.spectral.omega_min, c.spectral.omega_max);
    const Vec a = spectral_function(gf.times, gf.g, c.spectral.eta, om);
    const double dx = om(1) - om(0);
    const double weight = dx * (a.sum() - 0.5 * (a(0) + a(a.size() - 1)));
    const auto peaks = find_peaks(om, a, c.spectral.peak_threshold);
    const auto faint = find_peaks(om, a);
    r.observables = {{"energy_imaginary", "t0", g.row.energy},
                     {"lowest_peak", "t0", peaks.empty() ? std::nan("") : peaks.front()},
                     {"peak_offset", "t0", peaks.empty() ? std::nan("") : peaks.front() - g.row.energy},
                     {"peaks", "1", static_cast<double>(peaks.size())},
                     {"lowest_faint_peak", "t0", faint.empty() ? std::nan("") : faint.front()},
                     {"min_spectral_value", "1/t0", a.minCoeff()},
                     {"window_weight", "1", weight},
                     {"eta", "t0", c.spectral.eta},
                     {"max_energy_drift", "t0", gf.max_energy_drift},
                     {"max_purity", "1", gf.max_purity}};
    Table gt({{"t", "1/t0"}, {"re_g", "1"}, {"im_g", "1"}});
    for (size_t i = 0; i < gf.times.size(); ++i) gt.add_row({gf.times[i], gf.g[i].real(), gf.g[i].imag()});
    r.tables.push_back({"green.tsv", gt});
    Table st({{"omega", "t0"}, {"a", "1/t0"}});
    for (Eigen::Index i = 0; i < om.size(); ++i) st.add_row({om(i), a(i)});
    r.tables.push_back({"spectral.tsv", st});
    Table pt({{"omega", "t0"}, {"a", "1/t0"}, {"resolved", "bool"}});
    for (double p : faint) {
        const auto i = static_cast<Eigen::Index>(std::lround((p - om(0)) / dx));
        pt.add_row({p, a(i), static_cast<long>(std::find(peaks.begin(), peaks.end(), p) != peaks.end())});
    }
    r.tables.push_back({"peaks.tsv", pt});
    return r;
}

// ---------------------------------------------------------------- spin-boson and Kondo

void bath_mode_table(TaskResult& r, const OhmicBathSpec& bath, const SpinBosonGround& g)
{
    const Vec eps = bath.eps(), cp = bath.couplings();
    const int n = bath.n_modes;
    Table t({{"k", "1"}, {"eps", "omega_c"}, {"g", "omega_c"}, {"lambda_x", "1"}, {"lambda_p", "1"}, {"s_x", "1"}});
    for (int k = 0; k < n; ++k)
        t.add_row({static_cast<long>(k + 1), eps(k), cp(k), g.lambda(k), g.lambda(n + k), g.obs.s_x(k)});
    r.tables.push_back({"modes.tsv", t});
}

void ground_observables(TaskResult& r, const SpinBosonGround& g)
{
    r.observables.push_back({"energy", "omega_c", g.energy});
    r.observables.push_back({"m_x", "1", g.obs.m_x});
    r.observables.push_back({"n_perp", "omega_c^2", g.obs.n_perp});
    r.observables.push_back({"y", "1", g.obs.y});
    r.observables.push_back({"rhs_norm", "omega_c", g.rhs_norm});
    r.observables.push_back({"steps", "1", static_cast<double>(g.steps)});
    r.diagnostics["frame"] = spin_boson_frame_name(g.frame);
    r.diagnostics["monotone"] = g.monotone;
    r.diagnostics["max_purity"] = g.max_purity;
    r.diagnostics["fixed_point_residual"] = g.fixed_point_residual;
    r.diagnostics["message"] = g.message;
    mark_convergence(r, g.converged, "imaginary-time flow did not reach the fixed-point tolerance: " + g.message);
}

TaskResult spin_boson_ground_task(const RunConfig& c)
{
    TaskResult r;
    const SpinBosonGround g = sb_ground(c.bath, c.frame, c.flow, c.scf_start);
    ground_observables(r, g);
    bath_mode_table(r, c.bath, g);
    return r;
}

Vec kondo_grid(const RunConfig& c)
{
    const double x_max = c.kondo_opts.x_max > 0.0 ? c.kondo_opts.x_max
                                                   : std::numbers::pi * c.kondo.n_modes / c.kondo.omega_c;
    return Vec::LinSpaced(c.kondo_opts.x_points, 0.0, x_max);
}

double kondo_near(const RunConfig& c) { return c.kondo_opts.x_near > 0.0 ? c.kondo_opts.x_near : c.kondo.cutoff_length(); }

void kondo_parameters(TaskResult& r, const RunConfig& c)
{
    r.observables.push_back({"alpha", "1", c.kondo.alpha()});
    r.observables.push_back({"delta", "omega_c", c.kondo.delta()});
    r.observables.push_back({"cutoff_length", "1/omega_c", c.kondo.cutoff_length()});
    r.observables.push_back({"x_near", "1/omega_c", kondo_near(c)});
}

TaskResult kondo_ground_task(const RunConfig& c)
{
    TaskResult r;
    const OhmicBathSpec bath = c.kondo.bath();
    kondo_parameters(r, c);
    const SpinBosonGround g = sb_ground(bath, SpinBosonFrame::Polaron, c.flow, true);
    ground_observables(r, g);
    r.observables.push_back({"near_polarization", "omega_c", kondo_near_polarization(g.lambda, c.kondo, kondo_near(c))});
    const Vec xs = kondo_grid(c);
    const Vec rho = kondo_spin_density(g.lambda, c.kondo, xs);
    Table t({{"x", "1/omega_c"}, {"rho_spin", "omega_c"}});
    for (Eigen::Index i = 0; i < xs.size(); ++i) t.add_row({xs(i), rho(i)});
    r.tables.push_back({"spin_density.tsv", t});
    bath_mode_table(r, bath, g);
    return r;
}

TaskResult spin_boson_quench_task(const RunConfig& c)
{
    TaskResult r;
    const SpinBosonQuench q = sb_quench(c.bath, c.flow, false, c.quench.engine);
    Table t({{"t", "1/omega_c"}, {"m_x", "1"}, {"n_perp", "omega_c^2"}, {"energy", "omega_c"}});
    for (size_t i = 0; i < q.times.size(); ++i) t.add_row({q.times[i], q.m_x[i], q.n_perp[i], q.energy[i]});
    r.tables.push_back({"quench.tsv", t});
    r.observables = {{"m_x_final", "1", q.m_x.back()},
                     {"n_perp_max", "omega_c^2", *std::max_element(q.n_perp.begin(), q.n_perp.end())},
                     {"energy", "omega_c", q.energy.front()},
                     {"max_energy_drift", "omega_c", q.max_energy_drift},
                     {"max_purity", "1", q.max_purity},
                     {"steps", "1", static_cast<double>(q.steps)}};
    r.diagnostics["engine"] = quench_engine_name(c.quench.engine);
    return r;
}

TaskResult kondo_quench_task(const RunConfig& c)
{
    TaskResult r;
    kondo_parameters(r, c);
    const Vec xs = kondo_grid(c);
    const KondoQuench q = kondo_quench(c.kondo, c.flow, xs, kondo_near(c));
    const SignPattern s = classify_sign_pattern(q.times, q.near, c.quench.early_from, c.quench.early_to, c.quench.late_from);
    r.observables.push_back({"early_sign", "1", static_cast<double>(s.early_sign)});
    r.observables.push_back({"late_sign", "1", static_cast<double>(s.late_sign)});
    r.observables.push_back({"sign_change", "bool", s.sign_change ? 1.0 : 0.0});
    r.observables.push_back({"max_energy_drift", "omega_c", q.max_energy_drift});
    r.observables.push_back({"steps", "1", static_cast<double>(q.steps)});
    r.labels.push_back({"pattern", s.sign_change ? "sign_change" : "single_sign"});
    Table nt({{"t", "1/omega_c"}, {"near_polarization", "omega_c"}, {"m_x", "1"}});
    for (size_t i = 0; i < q.times.size(); ++i) nt.add_row({q.times[i], q.near[i], q.m_x[i]});
    r.tables.push_back({"near.tsv", nt});
    Table dt({{"t", "1/omega_c"}, {"x", "1/omega_c"}, {"rho_spin", "omega_c"}});
    for (size_t i = 0; i < q.times.size(); ++i)
        for (Eigen::Index j = 0; j < xs.size(); ++j) dt.add_row({q.times[i], xs(j), q.rho[i](j)});
    r.tables.push_back({"spin_density.tsv", dt});
    return r;
}

// ---------------------------------------------------------------- lattice

TaskResult lattice_ground_task(const RunConfig& c)
{
    TaskResult r;
    const LatticeGround g = lattice_ground(c.lattice, c.flow, c.seeds);
    const PhaseObservables& o = g.obs;
    r.observables = {{"mu", "t0", c.lattice.mu},
                     {"g", "t0", c.lattice.g},
                     {"n_sigma", "1", o.n_sigma},
                     {"gap", "t0", o.gap},
                     {"rho_s", "1", o.rho_s},
                     {"d0", "1", o.d0},
                     {"ds", "1", o.ds},
                     {"energy", "t0", o.energy},
                     {"constraint_residual", "1", o.constraint},
                     {"translation_residual", "1", o.translation_residual},
                     {"rhs_norm", "t0", g.rhs_norm},
                     {"steps", "1", static_cast<double>(g.steps)}};
    r.labels = {{"phase", o.phase}, {"seed", lattice_seed_name(g.seed)}};
    nlohmann::json seeds = nlohmann::json::array();
    for (size_t i = 0; i < g.seed_energies.size() && i < c.seeds.size(); ++i)
        seeds.push_back({{"seed", lattice_seed_name(c.seeds[i])}, {"energy", g.seed_energies[i]}});
    r.diagnostics["seeds"] = seeds;
    r.diagnostics["monotone"] = g.monotone;
    r.diagnostics["max_purity"] = g.max_purity;
    r.diagnostics["message"] = g.message;
    mark_convergence(r, g.converged, "no seed reached the fixed-point tolerance: " + g.message);
    if (o.gap_k.size() > 0) {
        Table t({{"kx", "1/a"}, {"ky", "1/a"}, {"gap_k", "t0"}, {"gap_k_direct", "t0"}, {"lambda_q", "1"},
                 {"gamma_q_xx", "1"}});
        const int n = c.lattice.n_sites();
        for (int q = 0; q < n; ++q)
            t.add_row({2.0 * std::numbers::pi * (q % c.lattice.lx) / c.lattice.lx,
                       2.0 * std::numbers::pi * (q / c.lattice.lx) / c.lattice.ly, o.gap_k(q), o.gap_k_direct(q),
                       o.lambda_q(q), o.gamma_q_xx(q)});
        r.tables.push_back({"momentum.tsv", t});
    }
    return r;
}

// ---------------------------------------------------------------- validate

struct Check {
    std::string name;
    double value;
    double tolerance;
    bool pass;
};

std::vector<Check> validation_suite(std::ostream& log)
{
    std::vector<Check> out;
    auto add = [&](const std::string& name, double value, double tolerance, bool pass) {
        out.push_back({name, value, tolerance, pass});
        log << "  " << std::left << std::setw(44) << name << std::setw(14) << format_number(value) << " tol "
            << std::setw(10) << format_number(tolerance) << (pass ? "PASS" : "FAIL") << "\n";
    };
    auto guarded = [&](const std::string& name, const std::function<void()>& body) {
        try {
            body();
        } catch (const std::exception& e) {
            add(name + " (" + e.what() + ")", std::nan(""), 0.0, false);
        }
    };
    const FlowConfig gcfg = imaginary_defaults();
    std::mt19937_64 rng(2024);

    guarded("polaron free band", [&] {
        // omega0 > 4 t0 keeps every one-phonon state above the bare band, so the band is the ground state at each k
        double err = 0.0;
        std::vector<int> ks(8);
        for (int k = 0; k < 8; ++k) ks[k] = k;
        for (PolaronKind kind : {PolaronKind::Holstein, PolaronKind::SSH}) {
            PolaronSpec s;
            s.kind = kind;
            s.n_sites = 8;
            s.omega0 = 5.0;
            for (const auto& row : dispersion_scan(s, ks, gcfg, 1).rows) {
                err = std::max(err, std::abs(row.energy + 2.0 * std::cos(row.k)));
                err = std::max(err, std::abs(row.z - 1.0));
            }
        }
        add("polaron free band |E_k + 2cos k|, |Z - 1|", err, 1e-10, err < 1e-10);
    });
    guarded("polaron gradients", [&] {
        double worst = 0.0;
        for (PolaronKind kind : {PolaronKind::Holstein, PolaronKind::SSH}) {
            PolaronSpec s;
            s.kind = kind;
            s.n_sites = 6;
            s.g = 0.8;
            s.k_index = 1;
            const PolaronModel m(s);
            for (int i = 0; i < 5; ++i)
                worst = std::max(worst, gradient_check(m, perturb_state(polaron_initial_state(s, rng()), 0.4, 0.15, rng)).max_rel());
        }
        add("polaron gradients vs finite differences", worst, 1e-6, worst < 1e-6);
    });
    guarded("spin-boson gradients", [&] {
        OhmicBathSpec b;
        b.n_modes = 5;
        b.alpha = 0.6;
        b.delta = 0.4;
        const SpinBosonParityModel pm(b);
        const SpinBosonPolaronModel qm(b);
        double worst = 0.0;
        for (int i = 0; i < 5; ++i) {
            worst = std::max(worst, gradient_check(pm, perturb_state(sb_vacuum_state(b, SpinBosonFrame::Parity), 0.5, 0.15, rng)).max_rel());
            VariationalState st = perturb_state(sb_vacuum_state(b, SpinBosonFrame::Polaron), 0.0, 0.15, rng);
            std::normal_distribution<double> nd(0.0, 0.3);
            for (Eigen::Index a = 0; a < st.params.size(); ++a) st.params(a) = nd(rng);
            worst = std::max(worst, gradient_check(qm, st).max_rel());
        }
        add("spin-boson gradients vs finite differences", worst, 1e-6, worst < 1e-6);
    });
    guarded("lattice gradients", [&] {
        LatticeSpec s;
        s.lx = 2;
        s.ly = 2;
        s.omega0 = 2.0;
        s.g = 0.8;
        s.mu = -0.7;
        const LatticeHolsteinModel m(s);
        double worst = 0.0;
        for (int i = 0; i < 5; ++i)
            worst = std::max(worst, gradient_check(m, perturb_state(lattice_initial_state(s, LatticeSeed::SC, 0.3), 0.4, 0.2, rng)).max_rel());
        add("lattice gradients vs finite differences", worst, 1e-6, worst < 1e-6);
    });
    guarded("polaron ED bound", [&] {
        PolaronSpec s;
        s.n_sites = 4;
        s.omega0 = 0.5;
        s.g = 1.0;
        const PolaronGroundResult g = polaron_ground(s, gcfg, 1);
        const CertifiedEnergy ed = ed_polaron_certified(s, 16, Truncation::Total, "none");
        const double rel = (g.row.energy - ed.e0) / std::abs(ed.e0);
        add("polaron N=4 (E - E_ED)/|E_ED|", rel, 0.02, ed.certified && g.row.converged && rel > -1e-10 && rel < 0.02);
        add("polaron imaginary-time monotone", g.trajectory.monotone ? 1.0 : 0.0, 1.0, g.trajectory.monotone);
        add("polaron imaginary-time purity", g.trajectory.max_purity, 1e-6, g.trajectory.max_purity < 1e-6);
    });
    guarded("spin-boson frames", [&] {
        OhmicBathSpec b;
        b.n_modes = 10;
        b.alpha = 0.5;
        b.delta = 0.3;
        FlowConfig f = gcfg;
        f.t_max = 20000.0;
        f.fixed_point_tol = 1e-11;
        const SpinBosonGround p = sb_ground(b, SpinBosonFrame::Parity, f);
        const SpinBosonGround q = sb_ground(b, SpinBosonFrame::Polaron, f);
        const double de = std::abs(p.energy - q.energy);
        const double dl = (p.lambda - q.lambda).cwiseAbs().maxCoeff();
        add("spin-boson frame energy difference", de, 1e-8, p.converged && q.converged && de < 1e-8);
        add("spin-boson frame lambda difference", dl, 1e-8, p.converged && q.converged && dl < 1e-8);
        add("spin-boson imaginary-time monotone", (p.monotone && q.monotone) ? 1.0 : 0.0, 1.0, p.monotone && q.monotone);
    });
    guarded("spin-boson ED bound", [&] {
        OhmicBathSpec b;
        b.n_modes = 4;
        b.alpha = 0.8;
        b.delta = 0.5;
        FlowConfig f = gcfg;
        f.t_max = 20000.0;
        const SpinBosonGround g = sb_ground(b, SpinBosonFrame::Polaron, f);
        const CertifiedEnergy ed = ed_spin_boson_certified(b, 10, Truncation::PerMode, "none");
        const double rel = (g.energy - ed.e0) / std::abs(ed.e0);
        add("spin-boson N=4 (E - E_ED)/|E_ED|", rel, 0.02, ed.certified && g.converged && rel > -1e-10 && rel < 0.02);
    });
    guarded("spin-boson decoupled limit", [&] {
        OhmicBathSpec b;
        b.n_modes = 12;
        b.alpha = 0.5;
        b.delta = 0.0;
        FlowConfig f = gcfg;
        f.t_max = 20000.0;
        f.fixed_point_tol = 1e-11;
        const SpinBosonGround g = sb_ground(b, SpinBosonFrame::Polaron, f);
        const Vec eps = b.eps(), cp = b.couplings();
        double err = 0.0, sum = 0.0;
        for (int k = 0; k < 12; ++k) {
            err = std::max(err, std::abs(g.lambda(12 + k) + cp(k) / (2.0 * eps(k))));
            sum += cp(k) * cp(k) / (2.0 * eps(k) * eps(k));
        }
        err = std::max(err, std::abs(g.obs.m_x - std::exp(-sum)));
        add("spin-boson Delta=0 analytic fixed point", err, 1e-8, g.converged && err < 1e-8);
    });
    guarded("spin-boson quench", [&] {
        OhmicBathSpec b;
        b.n_modes = 20;
        b.alpha = 0.5;
        b.delta = 0.3;
        FlowConfig f;
        f.mode = FlowMode::Real;
        f.dt = 0.5;
        f.t_max = 20.0;
        f.abs_tol = 1e-11;
        f.rel_tol = 1e-10;
        for (QuenchEngine e : {QuenchEngine::Structured, QuenchEngine::Generic}) {
            const SpinBosonQuench q = sb_quench(b, f, false, e);
            const double bound = std::max(1e-8, 1e-6 * std::abs(q.energy.front()));
            add(std::string("quench energy drift (") + quench_engine_name(e) + ")", q.max_energy_drift, bound,
                q.max_energy_drift <= bound);
            add(std::string("quench purity (") + quench_engine_name(e) + ")", q.max_purity, 1e-6, q.max_purity < 1e-6);
        }
    });
    guarded("lattice", [&] {
        LatticeSpec s;
        s.lx = 2;
        s.ly = 1;
        s.omega0 = 2.0;
        s.g = 1.0;
        s.mu = -1.0;
        FlowConfig f = gcfg;
        f.t_max = 300.0;
        const LatticeGround g = lattice_ground(s, f);
        const CertifiedEnergy ed = ed_lattice_toy_certified(s, 8, "none");
        const double rel = (g.obs.energy - ed.e0) / std::abs(ed.e0);
        add("lattice 2x1 (E - E_ED)/|E_ED|", rel, 0.05, ed.certified && g.converged && rel > -1e-10 && rel < 0.05);
        add("lattice constraint residual", g.obs.constraint, 1e-8, g.obs.constraint < 1e-8);
        add("lattice imaginary-time monotone", g.monotone ? 1.0 : 0.0, 1.0, g.monotone);
    });
    guarded("Kondo cutoff", [&] {
        const double lc = kondo_cutoff_solve(200, 1.0);
        const double res = std::abs(kondo_cutoff_residual(200, 1.0, lc));
        add("Kondo cutoff residual N=200", res, 1e-12, res < 1e-12);
    });
    return out;
}

TaskResult validate_task(std::ostream& log)
{
    TaskResult r;
    log << "validation suite\n";
    const std::vector<Check> checks = validation_suite(log);
    Table t({{"check", "-"}, {"value", "1"}, {"tolerance", "1"}, {"pass", "bool"}});
    int failed = 0;
    for (const Check& c : checks) {
        t.add_row({c.name, c.value, c.tolerance, static_cast<long>(c.pass)});
        if (!c.pass) ++failed;
    }
    r.tables.push_back({"validate.tsv", t});
    r.observables = {{"checks", "1", static_cast<double>(checks.size())}, {"failed", "1", static_cast<double>(failed)}};
    if (failed > 0) {
        r.status = "failed";
        r.message = std::to_string(failed) + " invariant checks failed";
    }
    return r;
}

nlohmann::json result_json(const TaskResult& r)
{
    nlohmann::json obs = nlohmann::json::object(), units = nlohmann::json::object();
    for (const auto& o : r.observables) {
        obs[o.name] = std::isfinite(o.value) ? nlohmann::json(o.value) : nlohmann::json(nullptr);
        units[o.name] = o.unit;
    }
    for (const auto& [k, v] : r.labels) obs[k] = v;
    nlohmann::json j;
    j["status"] = r.status;
    if (!r.message.empty()) j["message"] = r.message;
    j["observables"] = obs;
    j["units"] = units;
    j["diagnostics"] = r.diagnostics;
    return j;
}

std::string cell_dir(size_t i)
{
    std::ostringstream os;
    os << "cells/cell_" << std::setw(4) << std::setfill('0') << i;
    return os.str();
}

}  // namespace

TaskResult run_task(const RunConfig& c, std::ostream& log)
{
    try {
        switch (c.task) {
        case Task::Validate: return validate_task(log);
        case Task::Dispersion: return dispersion_task(c);
        case Task::Spectral: return spectral_task(c);
        case Task::Quench: return c.model == ModelKind::Kondo ? kondo_quench_task(c) : spin_boson_quench_task(c);
        case Task::PhaseScan: return lattice_ground_task(c);
        case Task::Ground:
            switch (c.model) {
            case ModelKind::Polaron: return polaron_ground_task(c);
            case ModelKind::SpinBoson: return spin_boson_ground_task(c);
            case ModelKind::Kondo: return kondo_ground_task(c);
            case ModelKind::Lattice: return lattice_ground_task(c);
            case ModelKind::None: break;
            }
            throw Error(ErrorKind::Config, "config error: task ground needs a model block");
        }
    } catch (const Error& e) {
        if (e.kind() == ErrorKind::Config) throw;
        TaskResult r;
        r.status = "failed";
        r.message = std::string(error_kind_name(e.kind())) + ": " + e.what();
        return r;
    } catch (const std::exception& e) {
        TaskResult r;
        r.status = "failed";
        r.message = e.what();
        return r;
    }
    return {};
}

std::vector<GridCell> expand_grid(const RunConfig& cfg)
{
    std::vector<GridCell> cells;
    if (cfg.grid.empty()) {
        cells.push_back({{}, cfg});
        return cells;
    }
    size_t total = 1;
    for (const auto& ax : cfg.grid) total *= ax.values.size();
    for (size_t idx = 0; idx < total; ++idx) {
        std::vector<double> vals(cfg.grid.size());
        size_t rem = idx;
        for (size_t a = cfg.grid.size(); a-- > 0;) {
            vals[a] = cfg.grid[a].values[rem % cfg.grid[a].values.size()];
            rem /= cfg.grid[a].values.size();
        }
        YAML::Node doc = YAML::Clone(cfg.document);
        doc.remove("grid");
        for (size_t a = 0; a < cfg.grid.size(); ++a) set_value(doc, cfg.grid[a].key, YAML::Node(vals[a]));
        GridCell cell{vals, build_run_config(doc, cfg.task)};
        cells.push_back(std::move(cell));
    }
    return cells;
}

std::vector<TaskResult> run_cells(const std::vector<GridCell>& cells, int jobs, std::ostream& log)
{
    std::vector<TaskResult> results(cells.size());
    std::atomic<size_t> next{0};
    std::mutex log_mutex;
    auto worker = [&] {
        std::ostringstream sink;
        for (size_t i = next++; i < cells.size(); i = next++) {
            const auto t0 = std::chrono::steady_clock::now();
            results[i] = run_task(cells[i].config, sink);
            const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            std::lock_guard<std::mutex> lock(log_mutex);
            log << "cell " << i + 1 << "/" << cells.size() << ": " << results[i].status << " (" << std::fixed
                << std::setprecision(2) << secs << " s)" << std::defaultfloat << "\n";
        }
    };
    const int n = std::max(1, std::min<int>(jobs, static_cast<int>(cells.size())));
    if (n == 1) {
        worker();
        return results;
    }
    std::vector<std::thread> pool;
    for (int t = 0; t < n; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
    return results;
}

Table merge_cells(const RunConfig& cfg, const std::vector<GridCell>& cells, const std::vector<TaskResult>& results)
{
    // column set from the first cell that produced observables, so failed cells do not change the layout
    const TaskResult* proto = nullptr;
    for (const auto& r : results)
        if (!r.observables.empty()) {
            proto = &r;
            break;
        }
    std::vector<Column> cols{{"cell", "1"}};
    const bool axis_columns = cfg.task != Task::PhaseScan;
    if (axis_columns)
        for (const auto& ax : cfg.grid) cols.push_back({ax.key, "input"});
    cols.push_back({"status", "-"});
    std::vector<std::string> label_names;
    if (proto)
        for (const auto& [k, v] : proto->labels) {
            label_names.push_back(k);
            cols.push_back({k, "-"});
        }
    std::vector<std::string> obs_names;
    if (proto)
        for (const auto& o : proto->observables) {
            obs_names.push_back(o.name);
            cols.push_back({o.name, o.unit});
        }
    Table t(cols);
    for (size_t i = 0; i < cells.size(); ++i) {
        const TaskResult& r = results[i];
        std::vector<Cell> row{static_cast<long>(i)};
        if (axis_columns)
            for (double v : cells[i].values) row.push_back(v);
        row.push_back(r.status);
        for (const auto& name : label_names) {
            std::string v = "-";
            for (const auto& [k, val] : r.labels)
                if (k == name) v = val;
            row.push_back(v);
        }
        for (const auto& name : obs_names) {
            const Observable* o = r.find(name);
            row.push_back(o ? o->value : std::nan(""));
        }
        t.add_row(std::move(row));
    }
    return t;
}

RunOutcome run(Task task, const YAML::Node& document, std::ostream& log)
{
    const auto start = std::chrono::steady_clock::now();
    const RunConfig cfg = build_run_config(document, task);
    const bool sweep = !cfg.grid.empty() || task == Task::PhaseScan;
    const std::vector<GridCell> cells = sweep ? expand_grid(cfg) : std::vector<GridCell>{};

    RunOutcome out;
    out.dir = resolve_output_dir(cfg);
    std::filesystem::create_directories(out.dir);
    std::vector<std::string> files;
    nlohmann::json rec;
    rec["schema_version"] = kResultSchema;
    rec["task"] = task_name(task);
    rec["model"] = model_kind_name(cfg.model);
    rec["build_id"] = build_id();
    rec["config"] = yaml_to_json(cfg.document);

    log << "vargauss " << task_name(task) << " (" << model_kind_name(cfg.model) << ") -> " << out.dir.string() << "\n";
    bool all_ok = true;
    if (!sweep) {
        const TaskResult r = run_task(cfg, log);
        for (const auto& nt : r.tables) {
            write_tsv(out.dir / nt.file, nt.table);
            files.push_back(nt.file);
        }
        const nlohmann::json j = result_json(r);
        for (const auto& [k, v] : j.items()) rec[k] = v;
        all_ok = r.ok();
    } else {
        const std::vector<TaskResult> results = run_cells(cells, cfg.parallel_jobs, log);
        const std::string merged = task == Task::PhaseScan ? "phase_scan.tsv" : "sweep.tsv";
        write_tsv(out.dir / merged, merge_cells(cfg, cells, results));
        files.push_back(merged);
        nlohmann::json arr = nlohmann::json::array();
        long failed = 0, not_conv = 0;
        for (size_t i = 0; i < cells.size(); ++i) {
            const TaskResult& r = results[i];
            nlohmann::json cj = result_json(r);
            cj["cell"] = i;
            nlohmann::json point = nlohmann::json::object();
            for (size_t a = 0; a < cfg.grid.size(); ++a) point[cfg.grid[a].key] = cells[i].values[a];
            cj["point"] = point;
            const std::string sub = cell_dir(i);
            for (const auto& nt : r.tables) {
                write_tsv(out.dir / sub / nt.file, nt.table);
                files.push_back(sub + "/" + nt.file);
            }
            arr.push_back(cj);
            if (r.status == "failed") ++failed;
            if (r.status == "not_converged") ++not_conv;
        }
        all_ok = failed == 0 && not_conv == 0;
        rec["status"] = all_ok ? "ok" : (failed > 0 ? "failed" : "not_converged");
        rec["observables"] = {{"cells", cells.size()}, {"failed", failed}, {"not_converged", not_conv}};
        rec["units"] = {{"cells", "1"}, {"failed", "1"}, {"not_converged", "1"}};
        rec["diagnostics"] = {{"parallel_jobs", cfg.parallel_jobs},
                              {"grid", nlohmann::json::array()}};
        for (const auto& ax : cfg.grid) rec["diagnostics"]["grid"].push_back({{"key", ax.key}, {"values", ax.values}});
        rec["cells"] = arr;
    }
    rec["wall_time_s"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    rec["artifacts"] = files;
    write_text(out.dir / "result.json", rec.dump(2) + "\n");
    files.push_back("result.json");
    write_manifest(out.dir, files);
    out.exit_code = all_ok ? 0 : 2;
    out.record = rec;
    log << "status: " << rec["status"].get<std::string>() << "\n";
    return out;
}

}  // namespace vg
