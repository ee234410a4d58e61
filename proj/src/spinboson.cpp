#include "vargauss/spinboson.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

namespace vg {

Vec OhmicBathSpec::eps() const
{
    Vec e(n_modes);
    for (int k = 0; k < n_modes; ++k) e(k) = omega_c * (k + 1) / n_modes;
    return e;
}

Vec OhmicBathSpec::couplings() const
{
    const Vec e = eps();
    Vec g(n_modes);
    for (int k = 0; k < n_modes; ++k) g(k) = e(k) <= omega_c ? std::sqrt(2.0 * alpha * omega_c * e(k) / n_modes) : 0.0;
    return g;
}

void OhmicBathSpec::validate() const
{
    if (n_modes < 1) throw Error(ErrorKind::Config, "bath.n_modes must be at least 1");
    if (!(omega_c > 0.0)) throw Error(ErrorKind::Config, "bath.omega_c must be positive");
    if (!(alpha >= 0.0)) throw Error(ErrorKind::Config, "bath.alpha must be nonnegative");
    if (!(delta >= 0.0)) throw Error(ErrorKind::Config, "bath.delta must be nonnegative");
}

SpinBosonFrame spin_boson_frame_from_string(const std::string& s)
{
    if (s == "parity") return SpinBosonFrame::Parity;
    if (s == "polaron") return SpinBosonFrame::Polaron;
    throw Error(ErrorKind::Config, "unknown spin-boson frame '" + s + "' (expected parity or polaron)");
}

const char* spin_boson_frame_name(SpinBosonFrame f) { return f == SpinBosonFrame::Parity ? "parity" : "polaron"; }

namespace {

struct ParityParts {
    double energy = 0.0;
    Vec ginv_d;      // Gamma^{-1} Delta
    double overlap;  // exp(-Delta^T Gamma^{-1} Delta / 2)
};

ParityParts parity_parts(const BosonGaussian& st, const Vec& eps, const Vec& g, double delta)
{
    const int n = st.n;
    ParityParts p;
    p.ginv_d = st.gamma.llt().solve(st.delta);
    p.overlap = std::exp(-0.5 * st.delta.dot(p.ginv_d));
    double e = 0.0;
    for (int k = 0; k < n; ++k) {
        e += 0.25 * eps(k) * (st.delta(k) * st.delta(k) + st.delta(n + k) * st.delta(n + k));
        e += 0.25 * eps(k) * (st.gamma(k, k) + st.gamma(n + k, n + k)) - 0.5 * eps(k);
        e -= 0.5 * g(k) * st.delta(k);
    }
    p.energy = e - 0.5 * delta * p.overlap;
    return p;
}

std::pair<Vec, Mat> parity_gradients(const BosonGaussian& st, const ParityParts& p, const Vec& eps, const Vec& g,
                                     double delta)
{
    const int n = st.n;
    Vec hd(2 * n);
    for (int k = 0; k < n; ++k) {
        hd(k) = eps(k) * st.delta(k) - g(k);
        hd(n + k) = eps(k) * st.delta(n + k);
    }
    hd += delta * p.overlap * p.ginv_d;
    Mat hb = -delta * p.overlap * (p.ginv_d * p.ginv_d.transpose());
    for (int k = 0; k < n; ++k) {
        hb(k, k) += eps(k);
        hb(n + k, n + k) += eps(k);
    }
    return {hd, hb};
}

double quad_eps(const Vec& v, const Vec& eps)
{
    const int n = static_cast<int>(eps.size());
    double s = 0.0;
    for (int k = 0; k < n; ++k) s += eps(k) * (v(k) * v(k) + v(n + k) * v(n + k));
    return s;
}

// G = (g + 2 eps lambda_p, -2 eps lambda_x)
Vec g_vector(const Vec& lambda, const Vec& eps, const Vec& g)
{
    const int n = static_cast<int>(eps.size());
    Vec G(2 * n);
    for (int k = 0; k < n; ++k) {
        G(k) = g(k) + 2.0 * eps(k) * lambda(n + k);
        G(n + k) = -2.0 * eps(k) * lambda(k);
    }
    return G;
}

Vec sigma_times(const Vec& v)
{
    const Eigen::Index n = v.size() / 2;
    Vec out(v.size());
    out.head(n) = v.tail(n);
    out.tail(n) = -v.head(n);
    return out;
}

}  // namespace

double sb_energy_parity(const BosonGaussian& st, const OhmicBathSpec& bath)
{
    return parity_parts(st, bath.eps(), bath.couplings(), bath.delta).energy;
}

std::pair<Vec, Mat> sb_gradients_parity(const BosonGaussian& st, const OhmicBathSpec& bath)
{
    const Vec eps = bath.eps(), g = bath.couplings();
    return parity_gradients(st, parity_parts(st, eps, g, bath.delta), eps, g, bath.delta);
}

double sb_energy_polaron(const Mat& gamma, const Vec& lambda, const OhmicBathSpec& bath)
{
    const Vec eps = bath.eps(), g = bath.couplings();
    const int n = bath.n_modes;
    const double y = lambda.dot(gamma * lambda);
    double e = -0.5 * bath.delta * std::exp(-2.0 * y) + quad_eps(lambda, eps) + g.dot(lambda.tail(n));
    for (int k = 0; k < n; ++k) e += 0.25 * eps(k) * (gamma(k, k) + gamma(n + k, n + k)) - 0.5 * eps(k);
    return e;
}

SpinBosonParityModel::SpinBosonParityModel(OhmicBathSpec bath) : bath_(bath)
{
    bath_.validate();
    eps_ = bath_.eps();
    g_ = bath_.couplings();
}

ModelEval SpinBosonParityModel::evaluate(const VariationalState& st, FlowMode) const
{
    const ParityParts p = parity_parts(st.boson, eps_, g_, bath_.delta);
    ModelEval ev;
    ev.energy = p.energy;
    auto [hd, hb] = parity_gradients(st.boson, p, eps_, g_, bath_.delta);
    ev.h_delta = std::move(hd);
    ev.h_b = std::move(hb);
    return ev;
}

double SpinBosonParityModel::energy(const VariationalState& st) const
{
    return parity_parts(st.boson, eps_, g_, bath_.delta).energy;
}

std::vector<std::string> SpinBosonParityModel::observable_names() const { return {"m_x", "n_perp"}; }

std::vector<double> SpinBosonParityModel::observables(const VariationalState& st) const
{
    const auto o = sb_observables(st, SpinBosonFrame::Parity, bath_);
    return {o.m_x, o.n_perp};
}

SpinBosonPolaronModel::SpinBosonPolaronModel(OhmicBathSpec bath) : bath_(bath)
{
    bath_.validate();
    eps_ = bath_.eps();
    g_ = bath_.couplings();
}

ModelEval SpinBosonPolaronModel::evaluate(const VariationalState& st, FlowMode mode) const
{
    const int n = bath_.n_modes;
    const Mat& gamma = st.boson.gamma;
    const Vec& lam = st.params;
    const Vec gl = gamma * lam;
    const double y = lam.dot(gl);
    const double dw = bath_.delta * std::exp(-2.0 * y);
    ModelEval ev;
    ev.energy = -0.5 * dw + quad_eps(lam, eps_) + g_.dot(lam.tail(n));
    for (int k = 0; k < n; ++k) ev.energy += 0.25 * eps_(k) * (gamma(k, k) + gamma(n + k, n + k)) - 0.5 * eps_(k);
    ev.h_delta = Vec::Zero(2 * n);
    ev.h_b = 4.0 * dw * (lam * lam.transpose());
    for (int k = 0; k < n; ++k) {
        ev.h_b(k, k) += eps_(k);
        ev.h_b(n + k, n + k) += eps_(k);
    }
    const Vec G = g_vector(lam, eps_, g_);
    if (mode == FlowMode::Imaginary)
        ev.param_rates = -dw * lam + 0.5 * sigma_times(gamma * G);
    else
        ev.param_rates = dw * sigma_times(gl) + 0.5 * G;
    return ev;
}

double SpinBosonPolaronModel::energy(const VariationalState& st) const
{
    return sb_energy_polaron(st.boson.gamma, st.params, bath_);
}

std::vector<std::string> SpinBosonPolaronModel::observable_names() const { return {"m_x", "n_perp"}; }

std::vector<double> SpinBosonPolaronModel::observables(const VariationalState& st) const
{
    const auto o = sb_observables(st, SpinBosonFrame::Polaron, bath_);
    return {o.m_x, o.n_perp};
}

Vec lambda_from_parity(const Vec& delta_r) { return 0.5 * sigma_times(delta_r); }

double energy_variance(double delta, double y)
{
    const double e4 = std::exp(-4.0 * y);
    return delta * delta / 8.0 * (2.0 - e4) - 2.0 * delta * delta * e4 * (y + 0.25) * (y + 0.25);
}

SpinBosonObservables sb_observables(const Mat& gamma, const Vec& lambda, const OhmicBathSpec& bath)
{
    const int n = bath.n_modes;
    SpinBosonObservables o;
    o.energy = sb_energy_polaron(gamma, lambda, bath);
    o.y = lambda.dot(gamma * lambda);
    o.m_x = std::exp(-2.0 * o.y);
    o.n_perp = energy_variance(bath.delta, o.y);
    o.s_x.resize(n);
    for (int k = 0; k < n; ++k) o.s_x(k) = gamma(k, k) - 1.0;
    return o;
}

SpinBosonObservables sb_observables(const VariationalState& st, SpinBosonFrame frame, const OhmicBathSpec& bath)
{
    if (frame == SpinBosonFrame::Polaron) return sb_observables(st.boson.gamma, st.params, bath);
    SpinBosonObservables o = sb_observables(st.boson.gamma, lambda_from_parity(st.boson.delta), bath);
    o.energy = sb_energy_parity(st.boson, bath);
    return o;
}

VariationalState sb_vacuum_state(const OhmicBathSpec& bath, SpinBosonFrame frame)
{
    VariationalState st;
    st.boson = BosonGaussian::vacuum(bath.n_modes);
    if (frame == SpinBosonFrame::Polaron) st.params = Vec::Zero(2 * bath.n_modes);
    return st;
}

PolaronScf sb_polaron_scf(const OhmicBathSpec& bath, double step_tol, int max_sweeps)
{
    bath.validate();
    const int n = bath.n_modes;
    const Vec eps = bath.eps(), g = bath.couplings();
    const Vec se = eps.cwiseSqrt();
    // The optimum has lambda_x = 0 and Gamma = Gamma_xx (+) Gamma_pp, so the p-block form
    // eps + 4 c lambda_p lambda_p^T is the only non-diagonal piece; with M = eps^{1/2} (.) eps^{1/2}
    // the ground state is Gamma_pp = eps^{1/2} M^{-1/2} eps^{1/2}, Gamma_xx = eps^{-1/2} M^{1/2} eps^{-1/2}.
    Vec lp = Vec::Zero(n);
    Mat gpp = Mat::Identity(n, n);
    Eigen::SelfAdjointEigenSolver<Mat> es;
    PolaronScf out;
    bool have_eig = false;
    for (int it = 1; it <= max_sweeps; ++it) {
        double c = bath.delta * std::exp(-2.0 * lp.dot(gpp * lp));
        Mat a = 2.0 * c * gpp;
        a.diagonal() += 2.0 * eps;
        const Vec lam = -a.llt().solve(g);
        c = bath.delta * std::exp(-2.0 * lam.dot(gpp * lam));
        const Vec u = se.cwiseProduct(lam);
        Mat m = 4.0 * c * (u * u.transpose());
        m.diagonal() += eps.cwiseProduct(eps);
        es.compute(m);
        have_eig = true;
        const Mat q = se.asDiagonal() * es.eigenvectors();
        const Mat gam = q * es.eigenvalues().cwiseSqrt().cwiseInverse().asDiagonal() * q.transpose();
        const double change = std::max((lam - lp).cwiseAbs().maxCoeff(), (gam - gpp).cwiseAbs().maxCoeff());
        lp = lam;
        gpp = 0.5 * (gam + gam.transpose());
        out.sweeps = it;
        if (change <= step_tol) {
            out.converged = true;
            break;
        }
    }
    out.lambda = Vec::Zero(2 * n);
    out.lambda.tail(n) = lp;
    out.gamma = Mat::Identity(2 * n, 2 * n);
    out.gamma.bottomRightCorner(n, n) = gpp;
    if (have_eig) {
        const Mat q = se.cwiseInverse().asDiagonal() * es.eigenvectors();
        const Mat gxx = q * es.eigenvalues().cwiseSqrt().asDiagonal() * q.transpose();
        out.gamma.topLeftCorner(n, n) = 0.5 * (gxx + gxx.transpose());
    }
    out.energy = sb_energy_polaron(out.gamma, out.lambda, bath);
    return out;
}

SpinBosonGround sb_ground(const OhmicBathSpec& bath, SpinBosonFrame frame, const FlowConfig& cfg, bool scf_start)
{
    bath.validate();
    FlowConfig c = cfg;
    c.mode = FlowMode::Imaginary;
    c.record_stride = std::max<int>(c.record_stride, 1 << 30);
    VariationalState init = sb_vacuum_state(bath, frame);
    if (scf_start && frame == SpinBosonFrame::Polaron) {
        const PolaronScf scf = sb_polaron_scf(bath);
        init.boson.gamma = scf.gamma;
        init.params = scf.lambda;
    }
    Trajectory tr;
    if (frame == SpinBosonFrame::Parity) {
        const SpinBosonParityModel model(bath);
        tr = flow_imaginary(init, model, c);
    } else {
        const SpinBosonPolaronModel model(bath);
        tr = flow_imaginary(init, model, c);
    }
    SpinBosonGround out;
    out.frame = frame;
    const VariationalState& fs = tr.final_state();
    out.energy = tr.energies.back();
    out.gamma = fs.boson.gamma;
    out.lambda = frame == SpinBosonFrame::Parity ? lambda_from_parity(fs.boson.delta) : fs.params;
    out.obs = sb_observables(fs, frame, bath);
    out.converged = tr.converged;
    out.rhs_norm = tr.final_rhs_norm;
    out.steps = tr.steps;
    out.monotone = tr.monotone;
    out.max_purity = tr.max_purity;
    out.message = tr.message;
    if (frame == SpinBosonFrame::Parity) {
        // Delta_R = (eps + Delta e^{-y/2} Gamma^{-1})^{-1} (g, 0)
        const int n = bath.n_modes;
        const Vec eps = bath.eps(), g = bath.couplings();
        const Vec ginv_d = fs.boson.gamma.llt().solve(fs.boson.delta);
        const double ov = std::exp(-0.5 * fs.boson.delta.dot(ginv_d));
        Vec lhs = bath.delta * ov * ginv_d;
        for (int k = 0; k < n; ++k) {
            lhs(k) += eps(k) * fs.boson.delta(k) - g(k);
            lhs(n + k) += eps(k) * fs.boson.delta(n + k);
        }
        out.fixed_point_residual = lhs.cwiseAbs().maxCoeff();
    }
    return out;
}

namespace {

// sigma M for a 2n x 2n matrix
Mat sigma_rows(const Mat& m)
{
    const Eigen::Index n = m.rows() / 2;
    Mat out(m.rows(), m.cols());
    out.topRows(n) = m.bottomRows(n);
    out.bottomRows(n) = -m.topRows(n);
    return out;
}

struct PolaronPoint {
    Vec lambda;
    Mat gamma;
};

// Real-time rates with h = eps (+) eps + 4 c lambda lambda^T applied in O(N^2).
PolaronPoint polaron_real_rates(const PolaronPoint& p, const Vec& e2, const Vec& eps, const Vec& g, double delta)
{
    const Vec v = p.gamma * p.lambda;
    const double c = delta * std::exp(-2.0 * p.lambda.dot(v));
    PolaronPoint r;
    r.lambda = c * sigma_times(v) + 0.5 * g_vector(p.lambda, eps, g);
    Mat a = sigma_rows(e2.asDiagonal() * p.gamma);
    a.noalias() += (4.0 * c) * sigma_times(p.lambda) * v.transpose();
    r.gamma = a + a.transpose();
    return r;
}

double purity_residual(const Mat& gamma)
{
    const Mat s = sigma_rows(Mat::Identity(gamma.rows(), gamma.cols()));
    return (gamma * s * gamma - s).cwiseAbs().maxCoeff();
}

// Stops early (aborted = true) once the energy drift exceeds bound or the purity residual exceeds cfg.purity_tol.
SpinBosonQuench structured_quench(const OhmicBathSpec& bath, const FlowConfig& cfg, bool keep_lambda, double h_max,
                                  const Vec& lambda0, double bound, bool& aborted)
{
    aborted = false;
    const int n = bath.n_modes;
    const Vec eps = bath.eps(), g = bath.couplings();
    Vec e2(2 * n);
    e2 << eps, eps;
    PolaronPoint p{lambda0, Mat::Identity(2 * n, 2 * n)};
    const long n_samples = static_cast<long>(std::llround(cfg.t_max / cfg.dt));
    const int sub = std::max(1, static_cast<int>(std::ceil(cfg.dt / h_max - 1e-12)));
    const double h = cfg.dt / sub;
    SpinBosonQuench q;
    auto sample = [&](double t) {
        const auto o = sb_observables(p.gamma, p.lambda, bath);
        q.times.push_back(t);
        q.m_x.push_back(o.m_x);
        q.n_perp.push_back(o.n_perp);
        q.energy.push_back(o.energy);
        if (keep_lambda) q.lambda.push_back(p.lambda);
        q.max_energy_drift = std::max(q.max_energy_drift, std::abs(o.energy - q.energy.front()));
        q.max_purity = std::max(q.max_purity, purity_residual(p.gamma));
        if (q.max_purity > cfg.purity_tol || q.max_energy_drift > bound) aborted = true;
    };
    sample(0.0);
    auto axpy = [](const PolaronPoint& a, double s, const PolaronPoint& d) {
        return PolaronPoint{a.lambda + s * d.lambda, a.gamma + s * d.gamma};
    };
    for (long k = 1; k <= n_samples; ++k) {
        for (int j = 0; j < sub; ++j) {
            const PolaronPoint k1 = polaron_real_rates(p, e2, eps, g, bath.delta);
            const PolaronPoint k2 = polaron_real_rates(axpy(p, 0.5 * h, k1), e2, eps, g, bath.delta);
            const PolaronPoint k3 = polaron_real_rates(axpy(p, 0.5 * h, k2), e2, eps, g, bath.delta);
            const PolaronPoint k4 = polaron_real_rates(axpy(p, h, k3), e2, eps, g, bath.delta);
            p.lambda += (h / 6.0) * (k1.lambda + 2.0 * k2.lambda + 2.0 * k3.lambda + k4.lambda);
            p.gamma += (h / 6.0) * (k1.gamma + 2.0 * k2.gamma + 2.0 * k3.gamma + k4.gamma);
            p.gamma = (0.5 * (p.gamma + p.gamma.transpose())).eval();
            ++q.steps;
        }
        if (k % std::max(1, cfg.record_stride) == 0 || k == n_samples) sample(static_cast<double>(k) * cfg.dt);
        if (aborted) break;
    }
    return q;
}

}  // namespace

const char* quench_engine_name(QuenchEngine e) { return e == QuenchEngine::Structured ? "structured" : "generic"; }

QuenchEngine quench_engine_from_string(const std::string& s)
{
    if (s == "structured") return QuenchEngine::Structured;
    if (s == "generic") return QuenchEngine::Generic;
    throw Error(ErrorKind::Config, "unknown quench engine '" + s + "' (expected structured or generic)");
}

SpinBosonQuench sb_quench(const OhmicBathSpec& bath, const FlowConfig& cfg, bool keep_lambda, QuenchEngine engine,
                          const Vec& lambda0)
{
    bath.validate();
    if (!(cfg.dt > 0.0) || !(cfg.t_max > 0.0)) throw Error(ErrorKind::Precondition, "quench: dt and t_max must be positive");
    const Vec lam0 = lambda0.size() ? lambda0 : Vec::Zero(2 * bath.n_modes);
    if (lam0.size() != 2 * bath.n_modes) throw Error(ErrorKind::Precondition, "quench: initial lambda has wrong size");
    if (engine == QuenchEngine::Structured) {
        const double e0 = sb_energy_polaron(Mat::Identity(2 * bath.n_modes, 2 * bath.n_modes), lam0, bath);
        const double bound = std::max(1e-8, 1e-6 * std::abs(e0));
        double h_max = 0.05 / bath.omega_c;
        SpinBosonQuench q;
        for (int attempt = 0; attempt < 6; ++attempt, h_max *= 0.5) {
            bool aborted = false;
            q = structured_quench(bath, cfg, keep_lambda, h_max, lam0, bound, aborted);
            if (!aborted) return q;
        }
        if (q.max_purity > cfg.purity_tol)
            throw Error(ErrorKind::PurityDrift, "purity residual " + std::to_string(q.max_purity) +
                                                    " exceeds the tolerance at the smallest step");
        throw Error(ErrorKind::EnergyDrift, "energy drift " + std::to_string(q.max_energy_drift) +
                                                " exceeds the conservation bound");
    }
    FlowConfig c = cfg;
    c.mode = FlowMode::Real;
    const SpinBosonPolaronModel model(bath);
    VariationalState init = sb_vacuum_state(bath, SpinBosonFrame::Polaron);
    init.params = lam0;
    const Trajectory tr = flow_real(init, model, c);
    SpinBosonQuench q;
    q.max_energy_drift = tr.max_energy_drift;
    q.max_purity = tr.max_purity;
    q.steps = tr.steps;
    for (size_t i = 0; i < tr.times.size(); ++i) {
        const auto o = sb_observables(tr.states[i].boson.gamma, tr.states[i].params, bath);
        q.times.push_back(tr.times[i]);
        q.m_x.push_back(o.m_x);
        q.n_perp.push_back(o.n_perp);
        q.energy.push_back(tr.energies[i]);
        if (keep_lambda) q.lambda.push_back(tr.states[i].params);
    }
    return q;
}

double KondoSpec::alpha() const
{
    const double a = 1.0 - j_par / (4.0 * std::numbers::pi);
    return a * a;
}

double KondoSpec::cutoff_length() const { return kondo_cutoff_solve(n_modes, omega_c); }

double KondoSpec::delta() const { return j_perp / (2.0 * std::numbers::pi * cutoff_length()); }

OhmicBathSpec KondoSpec::bath() const
{
    OhmicBathSpec b;
    b.n_modes = n_modes;
    b.omega_c = omega_c;
    b.alpha = alpha();
    b.delta = delta();
    return b;
}

void KondoSpec::validate() const
{
    if (n_modes < 1) throw Error(ErrorKind::Config, "kondo.n_modes must be at least 1");
    if (!(omega_c > 0.0)) throw Error(ErrorKind::Config, "kondo.omega_c must be positive");
    if (!(j_perp >= 0.0)) throw Error(ErrorKind::Config, "kondo.j_perp must be nonnegative");
    if (!std::isfinite(j_par)) throw Error(ErrorKind::Config, "kondo.j_par must be finite");
}

double kondo_cutoff_residual(int n_modes, double omega_c, double lc)
{
    return digamma(n_modes + 1.0) + std::numbers::egamma + std::log1p(-std::exp(-omega_c * lc / n_modes));
}

double kondo_cutoff_solve(int n_modes, double omega_c)
{
    if (n_modes < 1 || !(omega_c > 0.0))
        throw Error(ErrorKind::Precondition, "kondo_cutoff_solve: need n_modes >= 1 and omega_c > 0");
    // -ln(1 - e^{-u}) = H with H = psi(N+1) + gamma_E inverts to u = -ln(1 - e^{-H})
    const double h = digamma(n_modes + 1.0) + std::numbers::egamma;
    const double u = -std::log1p(-std::exp(-h));
    const double lc = u * n_modes / omega_c;
    if (!(lc > 0.0) || !std::isfinite(lc)) throw Error(ErrorKind::Numeric, "kondo_cutoff_solve: no positive root");
    return lc;
}

Vec kondo_spin_density(const Vec& lambda, const KondoSpec& kondo, const Vec& xs)
{
    const int n = kondo.n_modes;
    if (lambda.size() != 2 * n) throw Error(ErrorKind::Precondition, "kondo_spin_density: lambda has wrong size");
    const double pref = -kondo.omega_c / (std::numbers::pi * n);
    Vec rho = Vec::Zero(xs.size());
    for (Eigen::Index i = 0; i < xs.size(); ++i) {
        double s = 0.0;
        for (int m = 1; m <= n; ++m) {
            const double q = kondo.omega_c * m / n;
            const double a = std::sqrt(2.0 * m);
            s += a * lambda(m - 1) * std::sin(q * xs(i)) + (1.0 + a * lambda(n + m - 1)) * std::cos(q * xs(i));
        }
        rho(i) = pref * s;
    }
    return rho;
}

double kondo_near_polarization(const Vec& lambda, const KondoSpec& kondo, double x_near)
{
    // closed-form average of sin(qx) and cos(qx) over [0, x_near]
    const int n = kondo.n_modes;
    const double pref = -kondo.omega_c / (std::numbers::pi * n);
    double s = 0.0;
    for (int m = 1; m <= n; ++m) {
        const double q = kondo.omega_c * m / n;
        const double a = std::sqrt(2.0 * m);
        const double qx = q * x_near;
        const double avg_sin = x_near > 0.0 ? (1.0 - std::cos(qx)) / qx : 0.0;
        const double avg_cos = x_near > 0.0 ? std::sin(qx) / qx : 1.0;
        s += a * lambda(m - 1) * avg_sin + (1.0 + a * lambda(n + m - 1)) * avg_cos;
    }
    return pref * s;
}

Vec kondo_fermi_sea_lambda(const KondoSpec& kondo)
{
    const int n = kondo.n_modes;
    Vec lam = Vec::Zero(2 * n);
    for (int m = 1; m <= n; ++m) lam(n + m - 1) = -1.0 / std::sqrt(2.0 * m);
    return lam;
}

KondoQuench kondo_quench(const KondoSpec& kondo, const FlowConfig& cfg, const Vec& xs, double x_near)
{
    kondo.validate();
    const OhmicBathSpec bath = kondo.bath();
    const SpinBosonQuench q = sb_quench(bath, cfg, true, QuenchEngine::Structured, kondo_fermi_sea_lambda(kondo));
    KondoQuench k;
    k.xs = xs;
    k.times = q.times;
    k.m_x = q.m_x;
    k.max_energy_drift = q.max_energy_drift;
    k.steps = q.steps;
    for (const Vec& lam : q.lambda) {
        k.rho.push_back(kondo_spin_density(lam, kondo, xs));
        k.near.push_back(kondo_near_polarization(lam, kondo, x_near));
    }
    return k;
}

SignPattern classify_sign_pattern(const std::vector<double>& times, const std::vector<double>& near,
                                  double early_from, double early_to, double late_from)
{
    double early = 0.0, late = 0.0;
    int ne = 0, nl = 0;
    for (size_t i = 0; i < times.size(); ++i) {
        if (times[i] >= early_from && times[i] <= early_to) {
            early += near[i];
            ++ne;
        }
        if (times[i] >= late_from) {
            late += near[i];
            ++nl;
        }
    }
    SignPattern s;
    if (ne > 0) s.early_sign = early > 0.0 ? 1 : (early < 0.0 ? -1 : 0);
    if (nl > 0) s.late_sign = late > 0.0 ? 1 : (late < 0.0 ? -1 : 0);
    s.sign_change = s.early_sign != 0 && s.late_sign != 0 && s.early_sign != s.late_sign;
    return s;
}

}  // namespace vg
