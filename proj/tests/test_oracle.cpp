#include "doctest.h"
#include "vargauss/oracle.hpp"

#include <cmath>
#include <filesystem>
#include <random>

using namespace vg;

namespace {

const cplx I1(0.0, 1.0);

long binomial(int n, int k)
{
    long r = 1;
    for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
    return r;
}

MatVec dense_matvec(const CMat& h)
{
    return [h](const CVec& in, CVec& out) { out = h * in; };
}

CMat random_hermitian(int n, std::mt19937_64& rng)
{
    std::normal_distribution<double> nd;
    CMat a(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) a(i, j) = cplx(nd(rng), nd(rng));
    return 0.5 * (a + a.adjoint());
}

PolaronSpec holstein(int n, double w0, double g, int k)
{
    PolaronSpec s;
    s.kind = PolaronKind::Holstein;
    s.n_sites = n;
    s.omega0 = w0;
    s.g = g;
    s.k_index = k;
    return s;
}

}  // namespace

TEST_CASE("boson basis ranking round-trips and counts states")
{
    const BosonBasis total(4, 6, 6);
    CHECK(total.size() == binomial(4 + 6, 6));
    const BosonBasis mode(3, 2, 6);
    CHECK(mode.size() == 27);
    std::vector<int> occ;
    for (const BosonBasis* b : {&total, &mode})
        for (long s = 0; s < b->size(); ++s) {
            b->unrank(s, occ);
            CHECK(b->rank(occ) == s);
        }
    CHECK_THROWS_AS(BosonBasis(30, 30, 30), Error);
}

TEST_CASE("Lanczos agrees with dense diagonalization")
{
    std::mt19937_64 rng(3);
    const CMat h = random_hermitian(60, rng);
    Eigen::SelfAdjointEigenSolver<CMat> es(h);
    const LanczosResult r = lanczos_ground(dense_matvec(h), 60, 600, 1e-13, true);
    REQUIRE(r.converged);
    CHECK(r.e0 == doctest::Approx(es.eigenvalues()(0)).epsilon(1e-11));
    CVec hv;
    dense_matvec(h)(r.vector, hv);
    CHECK((hv - r.e0 * r.vector).norm() < 1e-6);

    const LanczosResult again = lanczos_ground(dense_matvec(h), 60, 600, 1e-13);
    CHECK(again.e0 == r.e0);
}

TEST_CASE("Krylov propagation matches the dense exponential and keeps the norm")
{
    std::mt19937_64 rng(4);
    const CMat h = random_hermitian(40, rng);
    Eigen::SelfAdjointEigenSolver<CMat> es(h);
    CVec psi0 = CVec::Zero(40);
    psi0(0) = 1.0;
    const std::vector<double> times = {0.0, 0.3, 1.0, 4.0, 10.0};
    const auto states = krylov_evolve(dense_matvec(h), psi0, times);
    for (size_t i = 0; i < times.size(); ++i) {
        CVec ph(40);
        for (int j = 0; j < 40; ++j) ph(j) = std::exp(-I1 * es.eigenvalues()(j) * times[i]);
        const CVec exact = es.eigenvectors() * ph.cwiseProduct(es.eigenvectors().adjoint() * psi0);
        CHECK((states[i] - exact).norm() < 1e-9);
        CHECK(std::abs(states[i].norm() - 1.0) < 1e-12);
    }
}

TEST_CASE("two-site Holstein at zero coupling is the free electron")
{
    for (Truncation tr : {Truncation::PerMode, Truncation::Total}) {
        const EDResult r = ed_polaron(holstein(2, 1.0, 0.0, 0), 4, tr);
        CHECK(r.e0 == doctest::Approx(-2.0).epsilon(1e-12));
    }
    // at k = pi the bare level 2 t0 lies below the one-phonon band -2 t0 + omega0 only for omega0 > 4 t0
    const EDResult k1 = ed_polaron(holstein(2, 5.0, 0.0, 1), 4, Truncation::PerMode);
    CHECK(ed_polaron(holstein(2, 1.0, 0.0, 1), 4, Truncation::PerMode).e0 == doctest::Approx(-1.0).epsilon(1e-12));
    CHECK(k1.e0 == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("spin-boson ED: displaced oscillator and bare spin limits")
{
    OhmicBathSpec b;
    b.n_modes = 1;
    b.alpha = 0.4;
    b.delta = 0.0;
    const double g = b.couplings()(0), e = b.eps()(0);
    CHECK(ed_spin_boson(b, 30, Truncation::PerMode).e0 == doctest::Approx(-g * g / (4.0 * e)).epsilon(1e-12));

    b.n_modes = 3;
    b.alpha = 0.0;
    b.delta = 0.7;
    CHECK(ed_spin_boson(b, 4, Truncation::Total).e0 == doctest::Approx(-0.35).epsilon(1e-12));
}

TEST_CASE("lattice toy ED: free fermions at zero coupling")
{
    LatticeSpec s;
    s.lx = 2;
    s.ly = 1;
    s.g = 0.0;
    s.omega0 = 1.0;
    s.mu = 0.5;
    // levels -2 - mu and 2 - mu, each doubly degenerate in spin
    CHECK(ed_lattice_toy(s, 2).e0 == doctest::Approx(2.0 * (-2.0 - 0.5)).epsilon(1e-12));
    s.mu = 3.0;
    CHECK(ed_lattice_toy(s, 2).e0 == doctest::Approx(2.0 * (-5.0) + 2.0 * (-1.0)).epsilon(1e-12));

    s.lx = 5;
    s.ly = 5;
    CHECK_THROWS_AS(lattice_toy_space(s, 2), Error);
}

TEST_CASE("exact evolution: free phases, observables and norm")
{
    const PolaronSpec s = holstein(3, 0.7, 0.0, 1);
    const BosonBasis basis = polaron_basis(s, 3, Truncation::Total);
    CVec psi0 = CVec::Zero(basis.size());
    psi0(0) = 1.0;
    std::vector<double> times;
    for (int i = 0; i <= 20; ++i) times.push_back(0.5 * i);
    const EvolveSeries ev = ed_evolve(polaron_hamiltonian(s, basis), basis, psi0, times);
    const double ek = -2.0 * std::cos(s.k());
    for (size_t i = 0; i < times.size(); ++i) {
        CHECK(std::abs(ev.overlap[i] - std::exp(-I1 * ek * times[i])) < 1e-10);
        CHECK(std::abs(ev.norm[i] - 1.0) < 1e-12);
        CHECK(std::abs(ev.number[i]) < 1e-14);
    }

    // coupled run: norm is conserved and <b + b^dag> of the q = 0 mode oscillates
    const PolaronSpec c = holstein(3, 0.7, 0.8, 0);
    const BosonBasis cb = polaron_basis(c, 8, Truncation::Total);
    CVec v0 = CVec::Zero(cb.size());
    v0(0) = 1.0;
    const EvolveSeries cv = ed_evolve(polaron_hamiltonian(c, cb), cb, v0, times);
    double xmax = 0.0;
    for (size_t i = 0; i < times.size(); ++i) {
        CHECK(std::abs(cv.norm[i] - 1.0) < 1e-12);
        xmax = std::max(xmax, cv.x[i].cwiseAbs().maxCoeff());
    }
    CHECK(xmax > 0.1);
    CHECK(cv.number.back() > 0.0);
}

TEST_CASE("certification, cache and reproducibility")
{
    const auto dir = std::filesystem::temp_directory_path() / "vargauss_oracle_test_cache";
    std::filesystem::remove_all(dir);
    const PolaronSpec s = holstein(4, 0.5, 1.0, 0);
    const CertifiedEnergy a = ed_polaron_certified(s, 10, Truncation::PerMode, dir.string());
    CHECK(a.certified);
    CHECK_FALSE(a.from_cache);
    CHECK(a.e0 <= a.e0_lower_cap + 1e-12);
    const CertifiedEnergy b = ed_polaron_certified(s, 10, Truncation::PerMode, dir.string());
    CHECK(b.from_cache);
    CHECK(b.e0 == a.e0);
    CHECK(b.certified == a.certified);

    const CertifiedEnergy c = ed_polaron_certified(s, 10, Truncation::PerMode, "none");
    CHECK_FALSE(c.from_cache);
    CHECK(c.e0 == a.e0);

    // a coarse cutoff does not certify
    const CertifiedEnergy d = ed_polaron_certified(holstein(4, 0.5, 2.0, 0), 2, Truncation::PerMode, "none");
    CHECK_FALSE(d.certified);

    CHECK(fnv1a64("") == 1469598103934665603ULL);
    CHECK(fnv1a64("a") != fnv1a64("b"));
    std::filesystem::remove_all(dir);
}
