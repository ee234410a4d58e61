#include "doctest.h"
#include "fock.hpp"
#include "vargauss/oracle.hpp"
#include "vargauss/polaron.hpp"
#include "vargauss/wei_norman.hpp"

#include <cmath>
#include <random>

using namespace vg;

namespace {

const cplx I1(0.0, 1.0);

VariationalState as_state(const BosonGaussian& b)
{
    VariationalState st;
    st.boson = b;
    return st;
}

// Hbar_k assembled directly in a tensor-product Fock space.
fock::SpMat fock_hamiltonian(const PolaronSpec& spec, const fock::Modes& m)
{
    const int n = spec.n_sites;
    const double k = spec.k();
    Vec q(n);
    for (int j = 0; j < n; ++j) q(j) = spec.q(j);
    fock::SpMat H(m.dim(), m.dim());
    for (int j = 0; j < n; ++j) H += cplx(spec.omega0) * fock::SpMat(m.b[j].adjoint() * m.b[j]);
    const fock::SpMat Up = m.phase(q);
    fock::SpMat hop = cplx(-spec.t0) * std::exp(-I1 * k) * Up;
    H += hop + fock::SpMat(hop.adjoint());
    const double sn = 1.0 / std::sqrt(double(n));
    std::vector<int> ls = spec.kind == PolaronKind::Holstein ? std::vector<int>{0} : std::vector<int>{1, -1};
    for (int l : ls) {
        const fock::SpMat U = m.phase(q * double(l));
        for (int j = 0; j < n; ++j) {
            cplx c = spec.kind == PolaronKind::Holstein
                         ? cplx(spec.g * sn)
                         : std::exp(-I1 * ((k - 0.5 * q(j)) * l)) * (2.0 * I1 * spec.g * std::sin(0.5 * q(j)) * sn);
            fock::SpMat t = c * fock::SpMat(U * m.b[j]);
            H += t + fock::SpMat(t.adjoint());
        }
    }
    return H;
}

FlowConfig ground_cfg()
{
    FlowConfig cfg;
    cfg.dt = 0.1;
    cfg.t_max = 2000.0;
    cfg.fixed_point_tol = 1e-9;
    return cfg;
}

// H = w b^dag b + kappa (b^2 + b^dag^2) + f (b + b^dag); Gaussian evolution is exact for it.
class QuadraticToy : public ModelFunctional {
public:
    QuadraticToy(double w, double kappa, double f) : w_(w), k_(kappa), f_(f) {}
    int n_modes() const override { return 1; }
    ModelEval evaluate(const VariationalState& st, FlowMode) const override
    {
        const Vec& d = st.boson.delta;
        const Mat& G = st.boson.gamma;
        ModelEval ev;
        ev.energy = w_ * (0.25 * (G(0, 0) + G(1, 1) - 2.0) + 0.25 * d.squaredNorm())
                    + 0.5 * k_ * (G(0, 0) - G(1, 1) + d(0) * d(0) - d(1) * d(1)) + f_ * d(0);
        ev.h_delta = Vec(2);
        ev.h_delta << (w_ + 2.0 * k_) * d(0) + 2.0 * f_, (w_ - 2.0 * k_) * d(1);
        ev.h_b = Mat::Zero(2, 2);
        ev.h_b(0, 0) = w_ + 2.0 * k_;
        ev.h_b(1, 1) = w_ - 2.0 * k_;
        return ev;
    }

private:
    double w_, k_, f_;
};

}  // namespace

TEST_CASE("polaron free limit: bare band and unit quasiparticle weight")
{
    for (PolaronKind kind : {PolaronKind::Holstein, PolaronKind::SSH}) {
        PolaronSpec spec;
        spec.kind = kind;
        spec.n_sites = 10;
        spec.g = 0.0;
        for (int ki = 0; ki < spec.n_sites; ++ki) {
            spec.k_index = ki;
            const BosonGaussian vac = BosonGaussian::vacuum(spec.n_sites);
            CHECK(std::abs(polaron_energy(vac, spec) + 2.0 * std::cos(spec.k())) < 1e-12);
            const auto [hd, hb] = polaron_gradients(vac, spec);
            CHECK(hd.norm() < 1e-14);
            CHECK(quasiparticle_weight(vac) == doctest::Approx(1.0).epsilon(1e-14));
        }
    }
}

TEST_CASE("polaron free limit: squeezing raises the k = 0 energy")
{
    std::mt19937_64 rng(3);
    PolaronSpec spec;
    spec.n_sites = 6;
    for (int rep = 0; rep < 10; ++rep) {
        const BosonGaussian st = fock::random_state(6, 0.2, 0.0, rng);
        CHECK(polaron_energy(st, spec) >= -2.0 - 1e-12);
    }
}

TEST_CASE("polaron energy matches a truncated Fock evaluation")
{
    std::mt19937_64 rng(17);
    const fock::Modes m(3, 20);
    for (PolaronKind kind : {PolaronKind::Holstein, PolaronKind::SSH}) {
        for (int ki = 0; ki < 3; ++ki) {
            PolaronSpec spec;
            spec.kind = kind;
            spec.n_sites = 3;
            spec.g = 0.7;
            spec.omega0 = 0.8;
            spec.k_index = ki;
            const BosonGaussian st = fock::random_state(3, 0.08, 0.3, rng);
            const CVec psi = m.gaussian_state(st);
            const fock::SpMat H = fock_hamiltonian(spec, m);
            const cplx e = psi.dot(H * psi);
            CHECK(std::abs(e.imag()) < 1e-10);
            CHECK(std::abs(e.real() - polaron_energy(st, spec)) < 1e-8);
        }
    }
}

TEST_CASE("polaron analytic gradients match finite differences")
{
    std::mt19937_64 rng(23);
    for (PolaronKind kind : {PolaronKind::Holstein, PolaronKind::SSH}) {
        PolaronSpec spec;
        spec.kind = kind;
        spec.n_sites = 6;
        spec.g = 0.9;
        spec.omega0 = 0.5;
        spec.k_index = 2;
        const PolaronModel model(spec);
        for (int rep = 0; rep < 20; ++rep) {
            const VariationalState st = as_state(fock::random_state(6, 0.15, 0.5, rng));
            CHECK(gradient_check(model, st).max_rel() < 1e-6);
        }
    }
}

TEST_CASE("polaron ground state is variational against certified ED")
{
    PolaronSpec spec;
    spec.kind = PolaronKind::Holstein;
    spec.n_sites = 4;
    spec.omega0 = 0.5;
    spec.g = 1.0;
    const PolaronGroundResult r = polaron_ground(spec, ground_cfg(), 1);
    REQUIRE(r.row.converged);
    const CertifiedEnergy ed = ed_polaron_certified(spec, 16, Truncation::Total, "none");
    CHECK(ed.certified);
    CHECK(r.row.energy >= ed.e0 - 1e-10);
    CHECK(std::abs(r.row.energy - ed.e0) < 0.02 * std::abs(ed.e0));
    CHECK(r.row.z > 0.0);
    CHECK(r.row.z < 1.0);
    // fixed point: the displacement rate vanishes
    const ModelEval ev = PolaronModel(spec).evaluate(as_state(r.row.state), FlowMode::Imaginary);
    CHECK((r.row.state.gamma * ev.h_delta).cwiseAbs().maxCoeff() < 1e-8);
    // monotone trajectory with pure states
    for (size_t i = 1; i < r.trajectory.energies.size(); ++i)
        CHECK(r.trajectory.energies[i] <= r.trajectory.energies[i - 1] + 1e-9 * std::abs(r.trajectory.energies[i - 1]));
    CHECK(r.trajectory.max_purity < 1e-6);
}

TEST_CASE("polaron dispersion is symmetric under k -> -k")
{
    PolaronSpec spec;
    spec.kind = PolaronKind::SSH;
    spec.n_sites = 6;
    spec.omega0 = 0.5;
    spec.g = 0.6;
    const DispersionResult d = dispersion_scan(spec, {1, 5, 2, 4}, ground_cfg(), 7);
    REQUIRE(d.rows.size() == 4);
    for (const auto& r : d.rows) CHECK(r.converged);
    CHECK(std::abs(d.rows[0].energy - d.rows[1].energy) < 1e-7);
    CHECK(std::abs(d.rows[0].z - d.rows[1].z) < 1e-5);
    CHECK(std::abs(d.rows[2].energy - d.rows[3].energy) < 1e-7);
}

TEST_CASE("real-space profile")
{
    PolaronSpec spec;
    spec.n_sites = 8;
    const RealSpaceProfile p0 = realspace_profile(BosonGaussian::vacuum(8), spec);
    CHECK(p0.x.norm() < 1e-14);
    CHECK((p0.cov_x - Mat::Identity(8, 8)).norm() < 1e-12);

    spec.g = 1.0;
    spec.omega0 = 0.5;
    const PolaronGroundResult r = polaron_ground(spec, ground_cfg(), 2);
    REQUIRE(r.row.converged);
    const RealSpaceProfile p = realspace_profile(r.row.state, spec);
    CHECK(p.p.cwiseAbs().maxCoeff() < 1e-7);
    CHECK(p.cov_x(0, 0) > 1.0);
    // the lattice is displaced against the attractive coupling around the electron
    CHECK(std::abs(p.x(0)) > std::abs(p.x(4)));
}

TEST_CASE("Wei-Norman tracking is exact for a quadratic Hamiltonian")
{
    const double w = 1.0, kappa = 0.2, f = 0.35;
    QuadraticToy toy(w, kappa, f);
    WeiNormanTracker tr(toy);
    VariationalState init;
    init.boson = BosonGaussian::vacuum(1);
    init = tr.attach(init);
    FlowConfig cfg;
    cfg.mode = FlowMode::Real;
    cfg.dt = 0.1;
    cfg.t_max = 8.0;
    cfg.abs_tol = 1e-11;
    cfg.rel_tol = 1e-10;
    const Trajectory traj = flow_real(init, tr, cfg);

    const int cut = 80;
    const fock::SpMat a = fock::annihilator(cut);
    const CMat A(a);
    const CMat H = w * A.adjoint() * A + kappa * (A * A + A.adjoint() * A.adjoint()) + f * (A + A.adjoint());
    Eigen::SelfAdjointEigenSolver<CMat> es(H);
    double err_dyn = 0.0, err_static = 0.0, asym = 0.0;
    for (size_t i = 0; i < traj.times.size(); ++i) {
        const double t = traj.times[i];
        CVec ph(cut);
        for (int s = 0; s < cut; ++s) ph(s) = std::exp(-I1 * es.eigenvalues()(s) * t);
        const cplx exact = -I1 * (es.eigenvectors().row(0) * ph.asDiagonal() * es.eigenvectors().row(0).adjoint())(0, 0);
        err_dyn = std::max(err_dyn, std::abs(tr.green(traj.states[i], true) - exact));
        err_static = std::max(err_static, std::abs(tr.green(traj.states[i], false) - exact));
        const CMat L = tr.lambda1(traj.states[i]);
        asym = std::max(asym, (L - L.transpose()).cwiseAbs().maxCoeff());
    }
    CHECK(err_dyn < 1e-7);
    CHECK(err_static > 1e-2);
    CHECK(asym < 1e-10);
}

TEST_CASE("Wei-Norman free limit and short-time pair amplitude")
{
    PolaronSpec spec;
    spec.n_sites = 6;
    spec.k_index = 1;
    FlowConfig cfg;
    cfg.dt = 0.1;
    cfg.t_max = 20.0;
    const GreenFunction gf = polaron_green(spec, cfg);
    const double ek = -2.0 * std::cos(spec.k());
    double err = 0.0;
    for (size_t i = 0; i < gf.times.size(); ++i)
        err = std::max(err, std::abs(gf.g[i] + I1 * std::exp(-I1 * ek * gf.times[i])));
    CHECK(err < 1e-7);
    CHECK(std::abs(gf.g.front() + I1) < 1e-15);

    // one small step from the vacuum: Lambda1 ~ -i v dt / 2
    spec.g = 0.8;
    const PolaronModel model(spec);
    const WeiNormanTracker tr(model);
    VariationalState init;
    init.boson = BosonGaussian::vacuum(6);
    init = tr.attach(init);
    FlowConfig one;
    one.mode = FlowMode::Real;
    one.dt = 1e-4;
    one.t_max = 1e-4;
    const Trajectory traj = flow_real(init, tr, one);
    CMat w, v;
    quadratic_blocks(model.evaluate(init, FlowMode::Real).h_b, w, v);
    const CMat expect = -I1 * v * (0.5 * one.dt);
    CHECK((tr.lambda1(traj.states.back()) - expect).cwiseAbs().maxCoeff() < 1e-6 * std::max(1.0, v.cwiseAbs().maxCoeff()));
}

TEST_CASE("Green function follows ED and the time-dependent displacement reading is the right one")
{
    PolaronSpec spec;
    spec.n_sites = 4;
    spec.omega0 = 0.5;
    spec.g = 0.3;
    FlowConfig cfg;
    cfg.dt = 0.05;
    cfg.t_max = 10.0;
    const GreenFunction gf = polaron_green(spec, cfg);
    const std::vector<cplx> ed = ed_polaron_green(spec, 12, Truncation::Total, gf.times);
    double e_dyn = 0.0, e_static = 0.0;
    for (size_t i = 0; i < gf.times.size(); ++i) {
        e_dyn = std::max(e_dyn, std::abs(gf.g[i] - ed[i]));
        e_static = std::max(e_static, std::abs(gf.g_static[i] - ed[i]));
        CHECK(std::abs(gf.g[i]) <= 1.0 + 1e-9);
    }
    MESSAGE("max |G - G_ED|: displacement at t " << e_dyn << ", displacement zero " << e_static);
    CHECK(e_dyn < e_static);
    CHECK(e_dyn < 0.05);
    CHECK(gf.max_lambda_asymmetry < 1e-10);
}

TEST_CASE("spectral function of the free polaron")
{
    PolaronSpec spec;
    spec.n_sites = 6;
    spec.k_index = 2;
    FlowConfig cfg;
    cfg.dt = 0.05;
    cfg.t_max = 200.0;
    const GreenFunction gf = polaron_green(spec, cfg);
    const double eta = 0.05;
    const Vec om = Vec::LinSpaced(8001, -12.0, 12.0);
    const Vec a = spectral_function(gf.times, gf.g, eta, om);
    const double dx = om(1) - om(0);
    const double integral = dx * (a.sum() - 0.5 * (a(0) + a(a.size() - 1)));
    // a Lorentzian loses 2 eta / (pi X) outside +-X
    CHECK(std::abs(integral - 1.0) < 1e-2);
    CHECK(a.minCoeff() > -1e-6);
    const auto peaks = find_peaks(om, a);
    REQUIRE(peaks.size() == 1);
    CHECK(std::abs(peaks[0] + 2.0 * std::cos(spec.k())) < dx);
    CHECK(a.maxCoeff() == doctest::Approx(1.0 / (M_PI * eta)).epsilon(1e-3));

    std::vector<double> t_short(gf.times.begin(), gf.times.begin() + 101);
    std::vector<cplx> g_short(gf.g.begin(), gf.g.begin() + 101);
    try {
        spectral_function(t_short, g_short, eta, om);
        FAIL("expected under-resolved");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::UnderResolved);
    }
}

TEST_CASE("polaron spec validation")
{
    PolaronSpec spec;
    spec.n_sites = 1;
    CHECK_THROWS_AS(spec.validate(), Error);
    spec.n_sites = 4;
    spec.omega0 = 0.0;
    CHECK_THROWS_AS(spec.validate(), Error);
    spec.omega0 = 1.0;
    spec.k_index = 4;
    CHECK_THROWS_AS(spec.validate(), Error);
    CHECK_THROWS_AS(polaron_kind_from_string("fröhlich"), Error);
}
