#include "vargauss/polaron.hpp"

#include "vargauss/wei_norman.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

namespace vg {

namespace {
const cplx I1(0.0, 1.0);

// (e^x - 1)/x and (e^x (x - 1) + 1)/x^2 without cancellation
void phi12(cplx x, cplx& p1, cplx& p2)
{
    if (std::abs(x) < 1e-3) {
        p1 = 1.0 + x / 2.0 + x * x / 6.0 + x * x * x / 24.0;
        p2 = 0.5 + x / 3.0 + x * x / 8.0 + x * x * x / 30.0;
    } else {
        const cplx e = std::exp(x);
        p1 = (e - 1.0) / x;
        p2 = (e * (x - 1.0) + 1.0) / (x * x);
    }
}
}  // namespace

PolaronKind polaron_kind_from_string(const std::string& s)
{
    if (s == "holstein") return PolaronKind::Holstein;
    if (s == "ssh") return PolaronKind::SSH;
    throw Error(ErrorKind::Config, "unknown polaron model '" + s + "' (expected holstein or ssh)");
}

const char* polaron_kind_name(PolaronKind k) { return k == PolaronKind::Holstein ? "holstein" : "ssh"; }

double PolaronSpec::k() const { return 2.0 * M_PI * k_index / n_sites; }

double PolaronSpec::q(int j) const
{
    const int m = (2 * j > n_sites) ? j - n_sites : j;
    return 2.0 * M_PI * m / n_sites;
}

void PolaronSpec::validate() const
{
    if (n_sites < 2) throw Error(ErrorKind::Precondition, "polaron: n_sites must be at least 2");
    if (!(omega0 > 0.0)) throw Error(ErrorKind::Precondition, "polaron: omega0 must be positive");
    if (!(t0 >= 0.0)) throw Error(ErrorKind::Precondition, "polaron: t0 must be non-negative");
    if (!std::isfinite(g)) throw Error(ErrorKind::Precondition, "polaron: g must be finite");
    if (k_index < 0 || k_index >= n_sites)
        throw Error(ErrorKind::Precondition, "polaron: k index must lie on the momentum grid 0..n_sites-1");
}

PolaronModel::PolaronModel(PolaronSpec spec) : spec_(spec)
{
    spec_.validate();
    const int n = spec_.n_sites;
    beta_plus_.resize(n);
    for (int j = 0; j < n; ++j) beta_plus_(j) = spec_.q(j);
    beta_minus_ = -beta_plus_;
    beta_zero_ = Vec::Zero(n);
    const double k = spec_.k();
    const double sn = 1.0 / std::sqrt(static_cast<double>(n));
    auto make = [&](const std::vector<cplx>& c) {
        CVec v(2 * n);
        for (int j = 0; j < n; ++j) {
            v(j) = c[j];
            v(n + j) = I1 * c[j];
        }
        return v;
    };
    if (spec_.g == 0.0) return;
    if (spec_.kind == PolaronKind::Holstein) {
        coupling_.push_back(make(std::vector<cplx>(n, cplx(spec_.g * sn))));
        coupling_beta_.push_back(&beta_zero_);
    } else {
        for (int l : {1, -1}) {
            std::vector<cplx> c(n);
            for (int j = 0; j < n; ++j) {
                const double q = spec_.q(j);
                c[j] = std::exp(-I1 * ((k - 0.5 * q) * l)) * (2.0 * I1 * spec_.g * std::sin(0.5 * q) * sn);
            }
            coupling_.push_back(make(c));
            coupling_beta_.push_back(l == 1 ? &beta_plus_ : &beta_minus_);
        }
    }
}

ModelEval PolaronModel::eval_impl(const BosonGaussian& st, bool with_gradients) const
{
    const int n = spec_.n_sites;
    if (st.n != n) throw Error(ErrorKind::Precondition, "polaron: state has the wrong number of modes");
    const double w0 = spec_.omega0;
    const Vec& d = st.delta;
    ModelEval ev;
    ev.energy = 0.25 * w0 * d.squaredNorm() + 0.25 * w0 * st.gamma.trace() - 0.5 * n * w0;
    CVec gd = CVec::Zero(2 * n);
    CMat gg = CMat::Zero(2 * n, 2 * n);

    const ExpnBoson ex_plus = expn_boson_eval(st, beta_plus_);
    const cplx ch = -spec_.t0 * std::exp(-I1 * spec_.k());
    ev.energy += 2.0 * std::real(ch * ex_plus.value);
    if (with_gradients) {
        gd += ch * ex_plus.grad_delta();
        gg += ch * ex_plus.grad_gamma();
    }
    for (size_t t = 0; t < coupling_.size(); ++t) {
        const Vec* beta = coupling_beta_[t];
        const ExpnBoson ex_other = (beta == &beta_plus_) ? ExpnBoson{} : expn_boson_eval(st, *beta);
        const ExpnBoson& ex = (beta == &beta_plus_) ? ex_plus : ex_other;
        const LinearForm lf = linear_form(ex, d, coupling_[t]);
        ev.energy += 2.0 * std::real(ex.value * lf.s);
        if (with_gradients) {
            gd += lf.s * ex.grad_delta() + ex.value * lf.d_delta;
            gg += lf.s * ex.grad_gamma() + ex.value * lf.d_gamma;
        }
    }
    if (with_gradients) {
        ev.h_delta = w0 * d + 4.0 * gd.real();
        Mat hb = 8.0 * gg.real();
        hb = (0.5 * (hb + hb.transpose())).eval();
        hb.diagonal().array() += w0;
        ev.h_b = hb;
    }
    return ev;
}

ModelEval PolaronModel::evaluate(const VariationalState& st, FlowMode) const { return eval_impl(st.boson, true); }

double PolaronModel::energy(const VariationalState& st) const { return eval_impl(st.boson, false).energy; }

std::vector<std::string> PolaronModel::observable_names() const { return {"Z", "phonons"}; }

std::vector<double> PolaronModel::observables(const VariationalState& st) const
{
    return {quasiparticle_weight(st.boson), phonon_number(st.boson)};
}

double polaron_energy(const BosonGaussian& st, const PolaronSpec& spec)
{
    VariationalState s;
    s.boson = st;
    return PolaronModel(spec).energy(s);
}

std::pair<Vec, Mat> polaron_gradients(const BosonGaussian& st, const PolaronSpec& spec)
{
    VariationalState s;
    s.boson = st;
    const ModelEval ev = PolaronModel(spec).evaluate(s, FlowMode::Imaginary);
    return {ev.h_delta, ev.h_b};
}

double quasiparticle_weight(const BosonGaussian& st)
{
    const int n = st.n;
    const Mat A = st.gamma + Mat::Identity(2 * n, 2 * n);
    Eigen::LLT<Mat> llt(A);
    if (llt.info() != Eigen::Success) throw Error(ErrorKind::SingularExpectation, "quasiparticle weight: Gamma + 1 is not positive");
    const double quad = st.delta.dot(llt.solve(st.delta));
    double logdet = 0.0;
    for (int i = 0; i < 2 * n; ++i) logdet += std::log(0.5 * llt.matrixL()(i, i) * llt.matrixL()(i, i));
    return std::exp(-0.5 * quad - 0.5 * logdet);
}

double phonon_number(const BosonGaussian& st)
{
    return 0.25 * (st.gamma.trace() - 2.0 * st.n) + 0.25 * st.delta.squaredNorm();
}

VariationalState polaron_initial_state(const PolaronSpec& spec, std::uint64_t seed, double delta_scale)
{
    VariationalState st;
    st.boson = BosonGaussian::vacuum(spec.n_sites);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd(0.0, 1.0);
    for (int a = 0; a < 2 * spec.n_sites; ++a) st.boson.delta(a) = delta_scale * nd(rng);
    return st;
}

PolaronGroundResult polaron_ground(const PolaronSpec& spec, const FlowConfig& cfg, std::uint64_t seed, int n_starts)
{
    const PolaronModel model(spec);
    PolaronGroundResult best;
    bool have = false;
    std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
    std::string messages;
    for (int s = 0; s < std::max(1, n_starts); ++s) {
        VariationalState init = polaron_initial_state(spec, seed + static_cast<std::uint64_t>(s));
        if (s > 0) init = perturb_state(init, 0.5, 0.05, rng);
        Trajectory tr;
        try {
            tr = flow_imaginary(init, model, cfg);
        } catch (const Error& e) {
            messages += std::string(e.what()) + "; ";
            continue;
        }
        const double e = tr.energies.back();
        const bool better = !have || (tr.converged && !best.row.converged) ||
                            (tr.converged == best.row.converged && e < best.row.energy);
        if (better) {
            best.trajectory = std::move(tr);
            DispersionRow& r = best.row;
            r.k_index = spec.k_index;
            r.k = spec.k();
            r.energy = e;
            r.state = best.trajectory.final_state().boson;
            r.z = quasiparticle_weight(r.state);
            r.phonons = phonon_number(r.state);
            r.converged = best.trajectory.converged;
            r.rhs_norm = best.trajectory.final_rhs_norm;
            r.message = best.trajectory.message;
            have = true;
        }
    }
    best.row.starts = std::max(1, n_starts);
    if (!have) {
        best.row.k_index = spec.k_index;
        best.row.k = spec.k();
        best.row.converged = false;
        best.row.energy = std::nan("");
        best.row.message = messages;
    }
    return best;
}

DispersionResult dispersion_scan(PolaronSpec spec, const std::vector<int>& k_indices, const FlowConfig& cfg,
                                 std::uint64_t seed, int n_starts)
{
    DispersionResult out;
    for (int ki : k_indices) {
        spec.k_index = ki;
        out.rows.push_back(polaron_ground(spec, cfg, seed, n_starts).row);
    }
    double emin = 0.0;
    for (size_t i = 0; i < out.rows.size(); ++i) {
        const auto& r = out.rows[i];
        if (!std::isfinite(r.energy)) continue;
        if (out.argmin < 0 || r.energy < emin) {
            emin = r.energy;
            out.argmin = static_cast<int>(i);
        }
    }
    return out;
}

RealSpaceProfile realspace_profile(const BosonGaussian& st, const PolaronSpec& spec)
{
    const int n = spec.n_sites;
    if (st.n != n) throw Error(ErrorKind::Precondition, "realspace_profile: state has the wrong number of modes");
    Mat T = Mat::Zero(2 * n, 2 * n);
    const double sn = 1.0 / std::sqrt(static_cast<double>(n));
    for (int j = 0; j < n; ++j)
        for (int m = 0; m < n; ++m) {
            const double ph = spec.q(m) * j;
            const double re = std::cos(ph) * sn, im = std::sin(ph) * sn;
            T(j, m) = re;
            T(j, n + m) = -im;
            T(n + j, m) = im;
            T(n + j, n + m) = re;
        }
    RealSpaceProfile p;
    const Vec d = T * st.delta;
    p.x = d.head(n);
    p.p = d.tail(n);
    const Mat G = T * st.gamma * T.transpose();
    p.cov_x = G.topLeftCorner(n, n);
    return p;
}

GreenFunction polaron_green(const PolaronSpec& spec, const FlowConfig& cfg_in)
{
    const PolaronModel model(spec);
    const WeiNormanTracker tracker(model);
    FlowConfig cfg = cfg_in;
    cfg.mode = FlowMode::Real;
    cfg.record_stride = 1;
    VariationalState init;
    init.boson = BosonGaussian::vacuum(spec.n_sites);
    init = tracker.attach(init);
    const Trajectory tr = flow_real(init, tracker, cfg);
    GreenFunction out;
    out.times = tr.times;
    out.max_energy_drift = tr.max_energy_drift;
    out.max_purity = tr.max_purity;
    for (const auto& st : tr.states) {
        out.g.push_back(tracker.green(st, true));
        out.g_static.push_back(tracker.green(st, false));
        const CMat L = tracker.lambda1(st);
        out.max_lambda_asymmetry = std::max(out.max_lambda_asymmetry, (L - L.transpose()).cwiseAbs().maxCoeff());
        out.max_abs_g = std::max(out.max_abs_g, std::abs(out.g.back()));
    }
    return out;
}

Vec spectral_function(const std::vector<double>& times, const std::vector<cplx>& g, double eta, const Vec& omegas)
{
    if (times.size() != g.size() || times.size() < 2)
        throw Error(ErrorKind::Precondition, "spectral_function: need at least two samples of G");
    if (!(eta > 0.0)) throw Error(ErrorKind::Precondition, "spectral_function: eta must be positive");
    const double h = times[1] - times[0];
    for (size_t i = 1; i < times.size(); ++i)
        if (std::abs(times[i] - times[i - 1] - h) > 1e-9 * std::max(1.0, h))
            throw Error(ErrorKind::Precondition, "spectral_function: time grid must be uniform");
    const double tmax = times.back() - times.front();
    if (std::exp(-eta * tmax) >= 1e-4) {
        std::ostringstream os;
        os << "spectral_function: t_max = " << tmax << " is too short for eta = " << eta
           << " (need exp(-eta t_max) < 1e-4)";
        throw Error(ErrorKind::UnderResolved, os.str());
    }
    Vec a(omegas.size());
    for (int i = 0; i < omegas.size(); ++i) {
        const cplx z(-eta, omegas(i));
        const cplx x = z * h;
        cplx p1, p2;
        phi12(x, p1, p2);
        const cplx step = std::exp(x);
        cplx ea = std::exp(z * times.front());
        cplx acc = 0.0;
        for (size_t s = 0; s + 1 < g.size(); ++s) {
            acc += ea * (g[s] * p1 + (g[s + 1] - g[s]) * p2);
            ea *= step;
        }
        a(i) = -std::imag(acc * h) / M_PI;
    }
    return a;
}

std::vector<double> find_peaks(const Vec& omegas, const Vec& a, double rel_height)
{
    std::vector<double> out;
    if (a.size() < 3) return out;
    const double top = a.maxCoeff();
    for (int i = 1; i + 1 < a.size(); ++i)
        if (a(i) > a(i - 1) && a(i) >= a(i + 1) && a(i) > rel_height * top) out.push_back(omegas(i));
    return out;
}

}  // namespace vg
