#include "vargauss/oracle.hpp"

#include <bit>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <json.hpp>
#include <random>
#include <sstream>

namespace vg {

namespace {
const cplx I1(0.0, 1.0);

std::string canon(double x)
{
    std::ostringstream os;
    os << std::setprecision(17) << x;
    return os.str();
}
}  // namespace

BosonBasis::BosonBasis(int n_modes, int per_mode_cap, int total_cap)
    : n_(n_modes), cap_(per_mode_cap), total_(total_cap)
{
    if (n_modes < 1 || per_mode_cap < 0 || total_cap < 0)
        throw Error(ErrorKind::Precondition, "BosonBasis: invalid mode count or cutoff");
    cap_ = std::min(cap_, total_);
    table_.assign(static_cast<size_t>(n_ + 1) * (total_ + 1), 0);
    for (int b = 0; b <= total_; ++b) table_[b] = 1;
    for (int m = 1; m <= n_; ++m)
        for (int b = 0; b <= total_; ++b) {
            long s = 0;
            for (int v = 0; v <= std::min(cap_, b); ++v) {
                s += table_[static_cast<size_t>(m - 1) * (total_ + 1) + (b - v)];
                if (s > kMaxOracleDim * 4L) break;
            }
            table_[static_cast<size_t>(m) * (total_ + 1) + b] = s;
        }
    size_ = count(n_, total_);
    if (size_ > kMaxOracleDim) {
        std::ostringstream os;
        os << "oracle: Hilbert space dimension exceeds the guard of " << kMaxOracleDim;
        throw Error(ErrorKind::DimensionExceeded, os.str());
    }
}

long BosonBasis::count(int modes, int budget) const
{
    return table_[static_cast<size_t>(modes) * (total_ + 1) + budget];
}

long BosonBasis::rank(const std::vector<int>& occ) const
{
    long r = 0;
    int budget = total_;
    for (int i = 0; i < n_; ++i) {
        for (int v = 0; v < occ[i]; ++v) r += count(n_ - i - 1, budget - v);
        budget -= occ[i];
    }
    return r;
}

void BosonBasis::unrank(long idx, std::vector<int>& occ) const
{
    occ.assign(n_, 0);
    int budget = total_;
    for (int i = 0; i < n_; ++i) {
        int v = 0;
        while (true) {
            const long c = count(n_ - i - 1, budget - v);
            if (idx < c) break;
            idx -= c;
            ++v;
        }
        occ[i] = v;
        budget -= v;
    }
}

LanczosResult lanczos_ground(const MatVec& h, long dim, int max_iter, double tol, bool want_vector)
{
    std::mt19937_64 rng(12345);
    std::normal_distribution<double> nd;
    CVec v0(dim);
    for (long i = 0; i < dim; ++i) v0(i) = cplx(nd(rng), nd(rng));
    v0.normalize();
    const int m_max = static_cast<int>(std::min<long>(max_iter, dim));

    std::vector<double> alpha, beta;
    auto run = [&](bool accumulate, const Vec& y, CVec& out) {
        CVec v = v0, vprev = CVec::Zero(dim), w(dim);
        if (accumulate) out = CVec::Zero(dim);
        const int steps = accumulate ? static_cast<int>(y.size()) : m_max;
        double e_old = 0.0;
        LanczosResult r;
        for (int j = 0; j < steps; ++j) {
            if (accumulate) out += y(j) * v;
            h(v, w);
            if (accumulate) {
                w -= alpha[j] * v;
                if (j > 0) w -= beta[j - 1] * vprev;
                if (j + 1 < steps) {
                    vprev = v;
                    v = w / beta[j];
                }
                continue;
            }
            const double a = std::real(v.dot(w));
            w -= a * v;
            if (j > 0) w -= beta[j - 1] * vprev;
            alpha.push_back(a);
            const double b = w.norm();
            r.iterations = j + 1;
            const bool done_space = b < 1e-13 * std::max(1.0, std::abs(a));
            if ((j + 1) % 5 == 0 || done_space || j + 1 == steps) {
                const int k = j + 1;
                Mat T = Mat::Zero(k, k);
                for (int i = 0; i < k; ++i) {
                    T(i, i) = alpha[i];
                    if (i + 1 < k) T(i, i + 1) = T(i + 1, i) = beta[i];
                }
                Eigen::SelfAdjointEigenSolver<Mat> es(T, Eigen::EigenvaluesOnly);
                const double e = es.eigenvalues()(0);
                if (done_space || (j >= 10 && std::abs(e - e_old) < tol * std::max(1.0, std::abs(e)))) {
                    r.e0 = e;
                    r.converged = true;
                    return r;
                }
                e_old = e;
                r.e0 = e;
            }
            beta.push_back(b);
            vprev = v;
            v = w / b;
        }
        return r;
    };
    CVec dummy;
    LanczosResult res = run(false, Vec(), dummy);
    if (want_vector) {
        const int k = res.iterations;
        Mat T = Mat::Zero(k, k);
        for (int i = 0; i < k; ++i) {
            T(i, i) = alpha[i];
            if (i + 1 < k) T(i, i + 1) = T(i + 1, i) = beta[i];
        }
        Eigen::SelfAdjointEigenSolver<Mat> es(T);
        const Vec y = es.eigenvectors().col(0);
        run(true, y, res.vector);
        res.vector.normalize();
    }
    return res;
}

std::vector<CVec> krylov_evolve(const MatVec& h, const CVec& psi0, const std::vector<double>& times,
                                int krylov_dim, double tol)
{
    std::vector<CVec> out;
    const long dim = psi0.size();
    CVec psi = psi0;
    double t = times.empty() ? 0.0 : times.front();
    double sub = 0.1;
    for (double target : times) {
        while (target - t > 1e-14) {
            // Lanczos basis with full reorthogonalization
            const int m = static_cast<int>(std::min<long>(krylov_dim, dim));
            std::vector<CVec> V;
            V.reserve(m + 1);
            const double nrm = psi.norm();
            V.push_back(psi / nrm);
            Mat T = Mat::Zero(m, m);
            double beta_last = 0.0;
            int k = 0;
            CVec w(dim);
            for (; k < m; ++k) {
                h(V[k], w);
                for (int i = 0; i <= k; ++i) {
                    const cplx c = V[i].dot(w);
                    w -= c * V[i];
                    if (i == k) T(k, k) = std::real(c);
                }
                for (int i = 0; i <= k; ++i) w -= V[i].dot(w) * V[i];
                beta_last = w.norm();
                if (k + 1 < m) {
                    T(k, k + 1) = T(k + 1, k) = beta_last;
                }
                if (beta_last < 1e-14) {
                    ++k;
                    break;
                }
                if (k + 1 < m) V.push_back(w / beta_last);
            }
            const int kk = std::min(k, m);
            const Mat Tk = T.topLeftCorner(kk, kk);
            Eigen::SelfAdjointEigenSolver<Mat> es(Tk);
            double dt = std::min(sub, target - t);
            CVec coeff;
            while (true) {
                CVec phase(kk);
                for (int i = 0; i < kk; ++i) phase(i) = std::exp(-I1 * es.eigenvalues()(i) * dt);
                const CVec e1 = es.eigenvectors().row(0).transpose().cast<cplx>();
                coeff = es.eigenvectors().cast<cplx>() * phase.cwiseProduct(e1);
                const double err = beta_last * std::abs(coeff(kk - 1));
                if (err < tol || beta_last < 1e-14) break;
                dt *= 0.5;
                if (dt < 1e-12) throw Error(ErrorKind::IntegratorFailure, "krylov_evolve: step size underflow");
            }
            CVec next = CVec::Zero(dim);
            for (int i = 0; i < kk; ++i) next += coeff(i) * V[i];
            psi = nrm * next;
            t += dt;
            sub = std::min(2.0 * dt, 5.0);
        }
        out.push_back(psi);
    }
    return out;
}

namespace {

// target[s * n + j]: state with one quantum less in mode j (-1 if empty), amp: sqrt of its occupation
struct LoweringTable {
    std::vector<long> target;
    std::vector<double> amp;
    Vec number;
};

LoweringTable lowering_table(const BosonBasis& basis)
{
    const int n = basis.n_modes();
    const long dim = basis.size();
    LoweringTable t;
    t.target.assign(static_cast<size_t>(dim) * n, -1);
    t.amp.assign(static_cast<size_t>(dim) * n, 0.0);
    t.number = Vec::Zero(dim);
    std::vector<int> occ;
    for (long s = 0; s < dim; ++s) {
        basis.unrank(s, occ);
        for (int j = 0; j < n; ++j) {
            t.number(s) += occ[j];
            if (occ[j] == 0) continue;
            --occ[j];
            t.target[static_cast<size_t>(s) * n + j] = basis.rank(occ);
            ++occ[j];
            t.amp[static_cast<size_t>(s) * n + j] = std::sqrt(static_cast<double>(occ[j]));
        }
    }
    return t;
}

CertifiedEnergy certify(const std::string& key, const std::string& cache_dir, int n_max,
                        const std::function<EDResult(int)>& solve)
{
    const std::string dir = oracle_cache_dir(cache_dir);
    CertifiedEnergy c;
    c.n_max = n_max;
    std::vector<double> vals;
    if (cache_lookup(dir, key, vals) && vals.size() == 4) {
        c.e0_lower_cap = vals[0];
        c.e0 = vals[1];
        c.dim = static_cast<long>(vals[2]);
        c.certified = vals[3] != 0.0;
        c.from_cache = true;
        return c;
    }
    const EDResult a = solve(n_max);
    const EDResult b = solve(n_max + 4);
    c.e0_lower_cap = a.e0;
    c.e0 = b.e0;
    c.dim = b.dim;
    c.certified = a.converged && b.converged && std::abs(b.e0 - a.e0) < 1e-6 * std::abs(b.e0);
    cache_store(dir, key, {c.e0_lower_cap, c.e0, static_cast<double>(c.dim), c.certified ? 1.0 : 0.0});
    return c;
}

EDResult run_lanczos(const MatVec& h, long dim, int n_max)
{
    const LanczosResult lr = lanczos_ground(h, dim);
    EDResult r;
    r.e0 = lr.e0;
    r.dim = dim;
    r.n_max = n_max;
    r.iterations = lr.iterations;
    r.converged = lr.converged;
    return r;
}

}  // namespace

BosonBasis polaron_basis(const PolaronSpec& spec, int n_max, Truncation trunc)
{
    if (trunc == Truncation::PerMode) return BosonBasis(spec.n_sites, n_max, n_max * spec.n_sites);
    return BosonBasis(spec.n_sites, n_max, n_max);
}

MatVec polaron_hamiltonian(const PolaronSpec& spec, const BosonBasis& basis)
{
    spec.validate();
    const int n = spec.n_sites;
    const double k = spec.k();
    const double sn = 1.0 / std::sqrt(static_cast<double>(n));
    std::vector<int> ls;
    std::vector<std::vector<cplx>> cs;
    if (spec.g != 0.0) {
        if (spec.kind == PolaronKind::Holstein) {
            ls.push_back(0);
            cs.emplace_back(n, cplx(spec.g * sn));
        } else {
            for (int l : {1, -1}) {
                std::vector<cplx> c(n);
                for (int j = 0; j < n; ++j) {
                    const double q = spec.q(j);
                    c[j] = std::exp(-I1 * ((k - 0.5 * q) * l)) * (2.0 * I1 * spec.g * std::sin(0.5 * q) * sn);
                }
                ls.push_back(l);
                cs.push_back(c);
            }
        }
    }
    const long dim = basis.size();
    // precomputed diagonal and total phonon momentum per basis state
    auto diag = std::make_shared<Vec>(dim);
    auto qtot = std::make_shared<Vec>(dim);
    {
        std::vector<int> occ;
        for (long s = 0; s < dim; ++s) {
            basis.unrank(s, occ);
            double Q = 0.0, nt = 0.0;
            for (int j = 0; j < n; ++j) {
                Q += spec.q(j) * occ[j];
                nt += occ[j];
            }
            (*qtot)(s) = Q;
            (*diag)(s) = spec.omega0 * nt - 2.0 * spec.t0 * std::cos(k - Q);
        }
    }
    const BosonBasis b = basis;
    return [=](const CVec& in, CVec& out) {
        out = diag->cwiseProduct(in);
        std::vector<int> occ;
        for (long s = 0; s < dim; ++s) {
            b.unrank(s, occ);
            for (int j = 0; j < n; ++j) {
                if (occ[j] == 0) continue;
                const double amp = std::sqrt(static_cast<double>(occ[j]));
                --occ[j];
                const long s2 = b.rank(occ);
                ++occ[j];
                const double Q2 = (*qtot)(s2);
                for (size_t t = 0; t < ls.size(); ++t) {
                    // c e^{i Q l} b_q maps s -> s2; its conjugate maps s2 -> s
                    const cplx m = cs[t][j] * std::exp(I1 * (Q2 * ls[t])) * amp;
                    out(s2) += m * in(s);
                    out(s) += std::conj(m) * in(s2);
                }
            }
        }
    };
}

EDResult ed_polaron(const PolaronSpec& spec, int n_max, Truncation trunc)
{
    const BosonBasis basis = polaron_basis(spec, n_max, trunc);
    return run_lanczos(polaron_hamiltonian(spec, basis), basis.size(), n_max);
}

CertifiedEnergy ed_polaron_certified(const PolaronSpec& spec, int n_max, Truncation trunc, const std::string& cache_dir)
{
    std::ostringstream key;
    key << "polaron-ed-v1 kind=" << polaron_kind_name(spec.kind) << " n=" << spec.n_sites << " t0=" << canon(spec.t0)
        << " w0=" << canon(spec.omega0) << " g=" << canon(spec.g) << " k=" << spec.k_index << " nmax=" << n_max
        << " trunc=" << (trunc == Truncation::Total ? "total" : "mode");
    return certify(key.str(), cache_dir, n_max, [&](int m) { return ed_polaron(spec, m, trunc); });
}

std::vector<cplx> ed_polaron_green(const PolaronSpec& spec, int n_max, Truncation trunc,
                                   const std::vector<double>& times)
{
    const BosonBasis basis = polaron_basis(spec, n_max, trunc);
    if (basis.size() > 100000)
        throw Error(ErrorKind::DimensionExceeded, "ed_polaron_green: dense propagation limited to dimension 1e5");
    const MatVec h = polaron_hamiltonian(spec, basis);
    CVec psi0 = CVec::Zero(basis.size());
    psi0(0) = 1.0;
    const auto states = krylov_evolve(h, psi0, times);
    std::vector<cplx> g;
    for (const auto& s : states) g.push_back(-I1 * s(0));
    return g;
}

BosonBasis spin_boson_basis(const OhmicBathSpec& bath, int n_max, Truncation trunc)
{
    bath.validate();
    if (trunc == Truncation::PerMode) return BosonBasis(bath.n_modes, n_max, n_max * bath.n_modes);
    return BosonBasis(bath.n_modes, n_max, n_max);
}

MatVec spin_boson_hamiltonian(const OhmicBathSpec& bath, const BosonBasis& basis)
{
    bath.validate();
    const int n = bath.n_modes;
    const Vec eps = bath.eps(), g = bath.couplings();
    auto low = std::make_shared<LoweringTable>(lowering_table(basis));
    auto diag = std::make_shared<Vec>(basis.size());
    std::vector<int> occ;
    for (long s = 0; s < basis.size(); ++s) {
        basis.unrank(s, occ);
        double e = 0.0;
        int nt = 0;
        for (int j = 0; j < n; ++j) {
            e += eps(j) * occ[j];
            nt += occ[j];
        }
        (*diag)(s) = e - 0.5 * bath.delta * (nt % 2 == 0 ? 1.0 : -1.0);
    }
    const long dim = basis.size();
    return [=](const CVec& in, CVec& out) {
        out = diag->cwiseProduct(in);
        for (long s = 0; s < dim; ++s)
            for (int j = 0; j < n; ++j) {
                const long s2 = low->target[static_cast<size_t>(s) * n + j];
                if (s2 < 0) continue;
                const double m = 0.5 * g(j) * low->amp[static_cast<size_t>(s) * n + j];
                out(s2) += m * in(s);
                out(s) += m * in(s2);
            }
    };
}

EDResult ed_spin_boson(const OhmicBathSpec& bath, int n_max, Truncation trunc)
{
    const BosonBasis basis = spin_boson_basis(bath, n_max, trunc);
    return run_lanczos(spin_boson_hamiltonian(bath, basis), basis.size(), n_max);
}

CertifiedEnergy ed_spin_boson_certified(const OhmicBathSpec& bath, int n_max, Truncation trunc,
                                        const std::string& cache_dir)
{
    std::ostringstream key;
    key << "spin-boson-ed-v1 n=" << bath.n_modes << " wc=" << canon(bath.omega_c) << " alpha=" << canon(bath.alpha)
        << " delta=" << canon(bath.delta) << " nmax=" << n_max
        << " trunc=" << (trunc == Truncation::Total ? "total" : "mode");
    return certify(key.str(), cache_dir, n_max, [&](int m) { return ed_spin_boson(bath, m, trunc); });
}

LatticeToySpace lattice_toy_space(const LatticeSpec& spec, int n_max)
{
    spec.validate();
    const int n = spec.n_sites();
    if (2 * n > 20) throw Error(ErrorKind::DimensionExceeded, "lattice toy oracle: at most 10 sites");
    const long nf = 1L << (2 * n);
    BosonBasis ph(n, n_max, n_max * n);
    if (nf * ph.size() > kMaxOracleDim) {
        std::ostringstream os;
        os << "oracle: Hilbert space dimension exceeds the guard of " << kMaxOracleDim;
        throw Error(ErrorKind::DimensionExceeded, os.str());
    }
    return LatticeToySpace{n, ph, nf};
}

MatVec lattice_toy_hamiltonian(const LatticeSpec& spec, const LatticeToySpace& space)
{
    const int n = space.n_sites;
    const long nf = space.fermion_states;
    const long np = space.phonons.size();
    const Mat t = spec.hopping();
    struct Hop {
        long to;
        double amp;
    };
    auto hops = std::make_shared<std::vector<std::vector<Hop>>>(nf);
    auto fdiag = std::make_shared<Vec>(nf);
    auto site_n = std::make_shared<Mat>(nf, n);
    for (long f = 0; f < nf; ++f) {
        for (int j = 0; j < n; ++j) (*site_n)(f, j) = ((f >> j) & 1) + ((f >> (n + j)) & 1);
        (*fdiag)(f) = -spec.mu * static_cast<double>(std::popcount(static_cast<unsigned long>(f)));
        for (int sigma = 0; sigma < 2; ++sigma)
            for (int a = 0; a < n; ++a)
                for (int b = 0; b < n; ++b) {
                    if (a == b || t(a, b) == 0.0) continue;
                    const int A = sigma * n + a, B = sigma * n + b;
                    if (!((f >> B) & 1) || ((f >> A) & 1)) continue;
                    // c_B then c_A^dag, each picking up the parity of occupied orbitals below it
                    const long f1 = f & ~(1L << B);
                    const int below = std::popcount(static_cast<unsigned long>(f & ((1L << B) - 1))) +
                                      std::popcount(static_cast<unsigned long>(f1 & ((1L << A) - 1)));
                    (*hops)[f].push_back({f1 | (1L << A), (below % 2 == 0 ? 1.0 : -1.0) * t(a, b)});
                }
    }
    auto low = std::make_shared<LoweringTable>(lowering_table(space.phonons));
    const double w0 = spec.omega0, g = spec.g;
    return [=](const CVec& in, CVec& out) {
        out.setZero(in.size());
        for (long f = 0; f < nf; ++f) {
            const long base = f * np;
            for (long p = 0; p < np; ++p) {
                const long i = base + p;
                out(i) += ((*fdiag)(f) + w0 * low->number(p)) * in(i);
                for (const Hop& h : (*hops)[f]) out(h.to * np + p) += h.amp * in(i);
                for (int j = 0; j < n; ++j) {
                    const long p2 = low->target[static_cast<size_t>(p) * n + j];
                    if (p2 < 0) continue;
                    const double m = g * (*site_n)(f, j) * low->amp[static_cast<size_t>(p) * n + j];
                    out(base + p2) += m * in(i);
                    out(i) += m * in(base + p2);
                }
            }
        }
    };
}

EDResult ed_lattice_toy(const LatticeSpec& spec, int n_max)
{
    const LatticeToySpace space = lattice_toy_space(spec, n_max);
    return run_lanczos(lattice_toy_hamiltonian(spec, space), space.size(), n_max);
}

CertifiedEnergy ed_lattice_toy_certified(const LatticeSpec& spec, int n_max, const std::string& cache_dir)
{
    std::ostringstream key;
    key << "lattice-toy-ed-v1 lx=" << spec.lx << " ly=" << spec.ly << " t0=" << canon(spec.t0)
        << " w0=" << canon(spec.omega0) << " g=" << canon(spec.g) << " mu=" << canon(spec.mu) << " nmax=" << n_max;
    return certify(key.str(), cache_dir, n_max, [&](int m) { return ed_lattice_toy(spec, m); });
}

EvolveSeries ed_evolve(const MatVec& h, const BosonBasis& basis, const CVec& psi0, const std::vector<double>& times)
{
    if (basis.size() > 100000)
        throw Error(ErrorKind::DimensionExceeded, "ed_evolve: dense propagation limited to dimension 1e5");
    const int n = basis.n_modes();
    const LoweringTable low = lowering_table(basis);
    EvolveSeries out;
    out.times = times;
    for (const CVec& psi : krylov_evolve(h, psi0, times)) {
        out.overlap.push_back(psi0.dot(psi));
        out.norm.push_back(psi.norm());
        out.number.push_back(psi.cwiseAbs2().dot(low.number));
        Vec x = Vec::Zero(n);
        for (long s = 0; s < basis.size(); ++s)
            for (int j = 0; j < n; ++j) {
                const long s2 = low.target[static_cast<size_t>(s) * n + j];
                if (s2 >= 0) x(j) += 2.0 * std::real(std::conj(psi(s2)) * psi(s)) * low.amp[static_cast<size_t>(s) * n + j];
            }
        out.x.push_back(x);
    }
    return out;
}

std::string oracle_cache_dir(const std::string& requested)
{
    if (!requested.empty()) return requested;
    if (const char* env = std::getenv("VARGAUSS_ORACLE_CACHE")) return env;
    return ".vargauss_oracle_cache";
}

std::uint64_t fnv1a64(const std::string& s)
{
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

namespace {
std::filesystem::path cache_path(const std::string& dir, const std::string& key)
{
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << fnv1a64(key) << ".json";
    return std::filesystem::path(dir) / os.str();
}
}  // namespace

bool cache_lookup(const std::string& dir, const std::string& key, std::vector<double>& values)
{
    if (dir == "none") return false;
    std::ifstream in(cache_path(dir, key));
    if (!in) return false;
    try {
        nlohmann::json j;
        in >> j;
        if (j.at("key").get<std::string>() != key) return false;
        values = j.at("values").get<std::vector<double>>();
        return true;
    } catch (const std::exception&) {
        return false;
    }
}

void cache_store(const std::string& dir, const std::string& key, const std::vector<double>& values)
{
    if (dir == "none") return;
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) return;
    const auto path = cache_path(dir, key);
    const auto tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp);
        if (!out) return;
        nlohmann::json j;
        j["key"] = key;
        j["values"] = values;
        out << j.dump(2) << "\n";
    }
    std::filesystem::rename(tmp, path, ec);
}

}  // namespace vg
