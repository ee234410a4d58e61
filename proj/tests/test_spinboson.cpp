#include "doctest.h"
#include "vargauss/oracle.hpp"
#include "vargauss/spinboson.hpp"

#include <cmath>
#include <numbers>
#include <random>

using namespace vg;

namespace {

OhmicBathSpec bath_of(int n, double alpha, double delta)
{
    OhmicBathSpec b;
    b.n_modes = n;
    b.alpha = alpha;
    b.delta = delta;
    return b;
}

FlowConfig ground_cfg()
{
    FlowConfig cfg;
    cfg.dt = 0.1;
    cfg.t_max = 20000.0;
    cfg.fixed_point_tol = 1e-11;
    return cfg;
}

VariationalState random_polaron_state(const OhmicBathSpec& bath, std::mt19937_64& rng)
{
    VariationalState st = perturb_state(sb_vacuum_state(bath, SpinBosonFrame::Polaron), 0.0, 0.15, rng);
    std::normal_distribution<double> nd(0.0, 0.3);
    for (Eigen::Index i = 0; i < st.params.size(); ++i) st.params(i) = nd(rng);
    return st;
}

// dE/dlambda in the polaron frame
Vec polaron_lambda_gradient(const Mat& gamma, const Vec& lam, const OhmicBathSpec& bath)
{
    const int n = bath.n_modes;
    const Vec eps = bath.eps(), g = bath.couplings();
    const double c = bath.delta * std::exp(-2.0 * lam.dot(gamma * lam));
    Vec d = 2.0 * c * (gamma * lam);
    for (int k = 0; k < n; ++k) {
        d(k) += 2.0 * eps(k) * lam(k);
        d(n + k) += 2.0 * eps(k) * lam(n + k) + g(k);
    }
    return d;
}

}  // namespace

TEST_CASE("Ohmic bath discretization")
{
    const OhmicBathSpec b = bath_of(4, 0.5, 0.1);
    const Vec e = b.eps(), g = b.couplings();
    for (int k = 0; k < 4; ++k) {
        CHECK(e(k) == doctest::Approx((k + 1) / 4.0).epsilon(1e-15));
        CHECK(g(k) == doctest::Approx(std::sqrt(2.0 * 0.5 * e(k) / 4.0)).epsilon(1e-15));
    }
    CHECK_THROWS_AS(bath_of(0, 0.1, 0.1).validate(), Error);
    CHECK_THROWS_AS(bath_of(4, -0.1, 0.1).validate(), Error);
    CHECK_THROWS_AS(bath_of(4, 0.1, -0.1).validate(), Error);
}

TEST_CASE("parity-frame energy: vacuum and the decoupled-spin limit")
{
    const OhmicBathSpec b = bath_of(10, 0.4, 0.0);
    const VariationalState vac = sb_vacuum_state(b, SpinBosonFrame::Parity);
    CHECK(std::abs(sb_energy_parity(vac.boson, b)) < 1e-15);

    const Vec eps = b.eps(), g = b.couplings();
    BosonGaussian st = BosonGaussian::vacuum(10);
    double exact = 0.0;
    for (int k = 0; k < 10; ++k) {
        st.delta(k) = g(k) / eps(k);
        exact -= g(k) * g(k) / (4.0 * eps(k));
    }
    CHECK(sb_energy_parity(st, b) == doctest::Approx(exact).epsilon(1e-14));
    auto [hd, hb] = sb_gradients_parity(st, b);
    CHECK(hd.cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("parity-frame gradients match finite differences at random states")
{
    std::mt19937_64 rng(11);
    for (double delta : {0.1, 0.7}) {
        const SpinBosonParityModel model(bath_of(5, 0.6, delta));
        for (int i = 0; i < 10; ++i) {
            const VariationalState st = perturb_state(sb_vacuum_state(model.bath(), SpinBosonFrame::Parity), 0.5, 0.15, rng);
            CHECK(gradient_check(model, st).max_rel() < 1e-6);
        }
    }
}

TEST_CASE("polaron-frame gradients match finite differences at random states")
{
    std::mt19937_64 rng(12);
    for (double delta : {0.1, 0.7}) {
        const OhmicBathSpec b = bath_of(5, 0.6, delta);
        const SpinBosonPolaronModel model(b);
        for (int i = 0; i < 10; ++i) {
            const VariationalState st = random_polaron_state(b, rng);
            CHECK(gradient_check(model, st).max_rel() < 1e-6);

            const Vec d = polaron_lambda_gradient(st.boson.gamma, st.params, b);
            const double h = 1e-6;
            double err = 0.0;
            for (Eigen::Index a = 0; a < st.params.size(); ++a) {
                Vec p = st.params, m = st.params;
                p(a) += h;
                m(a) -= h;
                const double fd = (sb_energy_polaron(st.boson.gamma, p, b) - sb_energy_polaron(st.boson.gamma, m, b)) / (2 * h);
                err = std::max(err, std::abs(fd - d(a)));
            }
            CHECK(err / std::max(1.0, d.cwiseAbs().maxCoeff()) < 1e-6);

            // the imaginary-time lambda rate is a descent direction
            const ModelEval ev = model.evaluate(st, FlowMode::Imaginary);
            CHECK(d.dot(ev.param_rates) < 0.0);
        }
    }
}

TEST_CASE("energy variance identities")
{
    for (double delta : {0.0, 0.1, 1.0}) CHECK(std::abs(energy_variance(delta, 0.0)) < 1e-16);
    for (double y : {0.0, 0.3, 2.0}) CHECK(energy_variance(0.0, y) == 0.0);
    for (double y = 0.0; y < 5.0; y += 0.05) CHECK(energy_variance(0.5, y) >= -1e-16);

    const OhmicBathSpec b = bath_of(6, 0.3, 0.2);
    const SpinBosonObservables o = sb_observables(Mat::Identity(12, 12), Vec::Zero(12), b);
    CHECK(o.m_x == 1.0);
    CHECK(std::abs(o.n_perp) < 1e-16);
}

TEST_CASE("Delta = 0 fixed point is the independent-boson solution")
{
    const OhmicBathSpec b = bath_of(12, 0.5, 0.0);
    const Vec eps = b.eps(), g = b.couplings();
    double sum = 0.0;
    for (int k = 0; k < 12; ++k) sum += g(k) * g(k) / (2.0 * eps(k) * eps(k));
    for (SpinBosonFrame frame : {SpinBosonFrame::Parity, SpinBosonFrame::Polaron}) {
        const SpinBosonGround gs = sb_ground(b, frame, ground_cfg());
        REQUIRE(gs.converged);
        CHECK(gs.monotone);
        for (int k = 0; k < 12; ++k) {
            CHECK(std::abs(gs.lambda(12 + k) + g(k) / (2.0 * eps(k))) < 1e-8);
            CHECK(std::abs(gs.lambda(k)) < 1e-8);
        }
        CHECK(std::abs(gs.obs.m_x - std::exp(-sum)) < 1e-8);
    }
}

TEST_CASE("parity and polaron frames reach the same ground state")
{
    for (double alpha : {0.2, 0.9})
        for (double delta : {0.05, 0.6}) {
            const OhmicBathSpec b = bath_of(10, alpha, delta);
            const SpinBosonGround p = sb_ground(b, SpinBosonFrame::Parity, ground_cfg());
            const SpinBosonGround q = sb_ground(b, SpinBosonFrame::Polaron, ground_cfg());
            REQUIRE(p.converged);
            REQUIRE(q.converged);
            CHECK(p.monotone);
            CHECK(q.monotone);
            CHECK(std::abs(p.energy - q.energy) < 1e-8);
            CHECK((p.lambda - q.lambda).cwiseAbs().maxCoeff() < 1e-8);
            CHECK(p.fixed_point_residual < 1e-8);
        }
}

TEST_CASE("variational ground energy lies above certified ED")
{
    for (double alpha : {0.3, 1.0})
        for (double delta : {0.1, 0.5}) {
            const OhmicBathSpec b = bath_of(4, alpha, delta);
            const CertifiedEnergy ed = ed_spin_boson_certified(b, 10, Truncation::PerMode, "none");
            REQUIRE(ed.certified);
            const SpinBosonGround gs = sb_ground(b, SpinBosonFrame::Polaron, ground_cfg());
            REQUIRE(gs.converged);
            CHECK(gs.energy >= ed.e0 - 1e-10);
            CHECK(gs.energy - ed.e0 < 0.02 * std::abs(ed.e0));
        }
}

TEST_CASE("majorize-minimize start agrees with the flow from the vacuum")
{
    const OhmicBathSpec b = bath_of(20, 0.7, 0.3);
    const PolaronScf scf = sb_polaron_scf(b);
    REQUIRE(scf.converged);
    const SpinBosonGround flow = sb_ground(b, SpinBosonFrame::Polaron, ground_cfg());
    const SpinBosonGround cert = sb_ground(b, SpinBosonFrame::Polaron, ground_cfg(), true);
    REQUIRE(flow.converged);
    REQUIRE(cert.converged);
    CHECK(std::abs(scf.energy - flow.energy) < 1e-9);
    CHECK(std::abs(cert.energy - flow.energy) < 1e-9);
    CHECK((cert.lambda - flow.lambda).cwiseAbs().maxCoeff() < 1e-7);
    CHECK(cert.steps < flow.steps);
}

TEST_CASE("magnetization decreases with alpha and high modes stay in the vacuum")
{
    double prev = 1.0;
    for (double alpha : {0.0, 0.2, 0.4, 0.6, 0.8, 1.0, 1.2}) {
        const OhmicBathSpec b = bath_of(30, alpha, 0.1);
        const PolaronScf scf = sb_polaron_scf(b);
        REQUIRE(scf.converged);
        const SpinBosonObservables o = sb_observables(scf.gamma, scf.lambda, b);
        CHECK(o.m_x > 0.0);
        CHECK(o.m_x <= prev + 1e-12);
        if (alpha == 0.0) CHECK(o.m_x == 1.0);
        prev = o.m_x;
        CHECK(o.s_x.minCoeff() >= -1e-12);
        CHECK(o.s_x(29) < 1e-3);
        CHECK(o.s_x(0) >= o.s_x(29) - 1e-12);
    }
}

TEST_CASE("quench conserves energy and purity, and both engines agree")
{
    const OhmicBathSpec b = bath_of(20, 0.5, 0.3);
    FlowConfig cfg;
    cfg.mode = FlowMode::Real;
    cfg.dt = 0.5;
    cfg.t_max = 20.0;
    cfg.abs_tol = 1e-11;
    cfg.rel_tol = 1e-10;
    const SpinBosonQuench s = sb_quench(b, cfg, false, QuenchEngine::Structured);
    const SpinBosonQuench g = sb_quench(b, cfg, false, QuenchEngine::Generic);
    REQUIRE(s.times.size() == g.times.size());
    const double bound = std::max(1e-8, 1e-6 * std::abs(s.energy.front()));
    CHECK(s.max_energy_drift <= bound);
    CHECK(g.max_energy_drift <= bound);
    CHECK(s.max_purity < 1e-6);
    CHECK(g.max_purity < 1e-6);
    double diff = 0.0;
    for (size_t i = 0; i < s.times.size(); ++i) diff = std::max(diff, std::abs(s.m_x[i] - g.m_x[i]));
    CHECK(diff < 1e-6);
    CHECK(s.m_x.front() == 1.0);
    CHECK(s.m_x.back() < 1.0);
    CHECK(quench_engine_from_string("generic") == QuenchEngine::Generic);
    CHECK_THROWS_AS(quench_engine_from_string("rk4"), Error);
}

TEST_CASE("Kondo cutoff length")
{
    CHECK(kondo_cutoff_solve(1, 1.0) == doctest::Approx(-std::log(1.0 - std::exp(-1.0))).epsilon(1e-13));
    CHECK(kondo_cutoff_solve(1, 2.0) == doctest::Approx(-0.5 * std::log(1.0 - std::exp(-1.0))).epsilon(1e-13));
    double prev = 0.0;
    const double bound = std::exp(-std::numbers::egamma);
    for (int n : {1, 2, 5, 10, 50, 100, 200, 1000}) {
        const double lc = kondo_cutoff_solve(n, 1.0);
        CHECK(std::abs(kondo_cutoff_residual(n, 1.0, lc)) < 1e-12);
        CHECK(lc > prev);
        CHECK(lc < bound);
        prev = lc;
    }
    CHECK_THROWS_AS(kondo_cutoff_solve(0, 1.0), Error);
}

TEST_CASE("Kondo mapping")
{
    KondoSpec k;
    k.j_perp = 1.0;
    k.j_par = 0.0;
    CHECK(k.alpha() == 1.0);
    k.j_par = 4.0 * std::numbers::pi * (1.0 - std::sqrt(0.5));
    CHECK(k.alpha() == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(k.delta() == doctest::Approx(1.0 / (2.0 * std::numbers::pi * k.cutoff_length())).epsilon(1e-14));
    const OhmicBathSpec b = k.bath();
    CHECK(b.alpha == k.alpha());
    CHECK(b.n_modes == k.n_modes);
}

TEST_CASE("Kondo spin density")
{
    KondoSpec k;
    k.n_modes = 40;
    Vec xs = Vec::LinSpaced(50, 0.0, 2.0 * std::numbers::pi * k.n_modes / k.omega_c / 2.0);

    const Vec bare = kondo_spin_density(Vec::Zero(80), k, xs);
    for (Eigen::Index i = 0; i < xs.size(); ++i) {
        double s = 0.0;
        for (int m = 1; m <= 40; ++m) s += std::cos(m / 40.0 * xs(i));
        CHECK(std::abs(bare(i) + s / (std::numbers::pi * 40.0)) < 1e-13);
    }

    const Vec sea = kondo_spin_density(kondo_fermi_sea_lambda(k), k, xs);
    CHECK(sea.cwiseAbs().maxCoeff() < 1e-13);

    std::mt19937_64 rng(5);
    std::normal_distribution<double> nd(0.0, 0.2);
    Vec lam(80);
    for (int i = 0; i < 80; ++i) lam(i) = nd(rng);
    const double x_near = 3.0;
    const int m = 20001;
    const Vec grid = Vec::LinSpaced(m, 0.0, x_near);
    const Vec rho = kondo_spin_density(lam, k, grid);
    double trap = 0.5 * (rho(0) + rho(m - 1));
    for (int i = 1; i < m - 1; ++i) trap += rho(i);
    trap /= (m - 1);
    CHECK(kondo_near_polarization(lam, k, x_near) == doctest::Approx(trap).epsilon(1e-7));
}

TEST_CASE("sign pattern classification")
{
    std::vector<double> t, up_down, up;
    for (int i = 0; i <= 200; ++i) {
        t.push_back(i);
        up_down.push_back(i < 50 ? 0.01 : -0.02);
        up.push_back(0.01);
    }
    const SignPattern a = classify_sign_pattern(t, up_down, 2.0, 20.0, 100.0);
    CHECK(a.early_sign == 1);
    CHECK(a.late_sign == -1);
    CHECK(a.sign_change);
    const SignPattern b = classify_sign_pattern(t, up, 2.0, 20.0, 100.0);
    CHECK_FALSE(b.sign_change);
    CHECK(b.early_sign == 1);
    CHECK(b.late_sign == 1);
}
