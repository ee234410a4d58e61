#include "vargauss/flow.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <unsupported/Eigen/MatrixFunctions>

namespace vg {

namespace {

double max_abs(const Vec& v) { return v.size() ? v.cwiseAbs().maxCoeff() : 0.0; }

std::string fmt(double x)
{
    std::ostringstream os;
    os.precision(6);
    os << x;
    return os.str();
}

void record(Trajectory& tr, const GaussianFlowSystem& sys, double t, const Vec& y, double energy,
            const StepDiagnostics& d)
{
    tr.times.push_back(t);
    tr.energies.push_back(energy);
    VariationalState st = sys.unpack(y);
    tr.observables.push_back(sys.model().observables(st));
    tr.states.push_back(std::move(st));
    tr.extras.push_back(sys.unpack_extra(y));
    tr.diagnostics.push_back(d);
}

}  // namespace

GaussianFlowSystem::GaussianFlowSystem(const ModelFunctional& model, FlowMode mode)
    : model_(model), mode_(mode)
{
    n_ = model.n_modes();
    np_ = model.n_params();
    ne_ = model.n_extra();
    nf_ = model.fermion_dim();
    size_ = 2 * n_ + 4 * n_ * n_ + np_ + nf_ * nf_ + ne_;
    sigma_ = symplectic_form(n_);
    if (mode == FlowMode::Real && !model.supports_real_time())
        throw Error(ErrorKind::Precondition, "real-time evolution is not supported for this model");
}

Vec GaussianFlowSystem::pack(const VariationalState& st, const Vec& extra) const
{
    if (st.boson.n != n_ || st.params.size() != np_ || st.fermion.rows() != nf_)
        throw Error(ErrorKind::Precondition, "flow: state layout does not match the model");
    Vec y(size_);
    int o = 0;
    y.segment(o, 2 * n_) = st.boson.delta;
    o += 2 * n_;
    y.segment(o, 4 * n_ * n_) = Eigen::Map<const Vec>(st.boson.gamma.data(), 4 * n_ * n_);
    o += 4 * n_ * n_;
    y.segment(o, np_) = st.params;
    o += np_;
    if (nf_ > 0) y.segment(o, nf_ * nf_) = Eigen::Map<const Vec>(st.fermion.data(), nf_ * nf_);
    o += nf_ * nf_;
    if (ne_ > 0) {
        if (extra.size() != ne_) throw Error(ErrorKind::Precondition, "flow: auxiliary vector has wrong size");
        y.segment(o, ne_) = extra;
    }
    return y;
}

VariationalState GaussianFlowSystem::unpack(const Vec& y) const
{
    VariationalState st;
    st.boson.n = n_;
    int o = 0;
    st.boson.delta = y.segment(o, 2 * n_);
    o += 2 * n_;
    st.boson.gamma = Eigen::Map<const Mat>(y.data() + o, 2 * n_, 2 * n_);
    o += 4 * n_ * n_;
    st.params = y.segment(o, np_);
    o += np_;
    st.fermion = Eigen::Map<const Mat>(y.data() + o, nf_, nf_);
    return st;
}

Vec GaussianFlowSystem::unpack_extra(const Vec& y) const { return y.tail(ne_); }

double GaussianFlowSystem::energy(const Vec& y) const { return model_.energy(unpack(y)); }

Vec GaussianFlowSystem::rhs(const Vec& y) const
{
    double e = 0.0;
    return rhs(y, e);
}

namespace {

// sigma M and M sigma without a dense product
Mat sigma_left(const Mat& m)
{
    const Eigen::Index n = m.rows() / 2;
    Mat r(m.rows(), m.cols());
    r.topRows(n) = m.bottomRows(n);
    r.bottomRows(n) = -m.topRows(n);
    return r;
}

Mat sigma_right(const Mat& m)
{
    const Eigen::Index n = m.cols() / 2;
    Mat r(m.rows(), m.cols());
    r.leftCols(n) = -m.rightCols(n);
    r.rightCols(n) = m.leftCols(n);
    return r;
}

// (I - U/2)^{-1} (I + U/2)
Mat cayley(const Mat& u)
{
    const Mat I = Mat::Identity(u.rows(), u.cols());
    return (I - 0.5 * u).partialPivLu().solve(I + 0.5 * u);
}

// inverse differential of the Cayley map: the algebra rate that realizes generator x at u
Mat dcayley_inv(const Mat& u, const Mat& x)
{
    if (u.size() == 0) return x;
    const Mat I = Mat::Identity(u.rows(), u.cols());
    return (I - 0.5 * u) * x * (I + 0.5 * u);
}

Mat congruence(const Mat& u, const Mat& g)
{
    if (u.size() == 0 || u.isZero(0.0)) return g;
    const Mat c = cayley(u);
    Mat r = c * g * c.transpose();
    return 0.5 * (r + r.transpose());
}

}  // namespace

FlowGenerator GaussianFlowSystem::generator(const Vec& y) const
{
    const VariationalState st = unpack(y);
    const ModelEval ev = model_.evaluate(st, mode_);
    FlowGenerator out;
    out.energy = ev.energy;
    const Mat& G = st.boson.gamma;
    const Mat& h = ev.h_b;
    if (h.rows() != 2 * n_ || h.cols() != 2 * n_ || ev.h_delta.size() != 2 * n_)
        throw Error(ErrorKind::Precondition, "model returned gradients of the wrong size");
    Vec dd;
    if (mode_ == FlowMode::Imaginary) {
        dd = -(G * ev.h_delta);
        const Mat Gh = G * h;
        out.xb = -0.5 * Gh - 0.5 * sigma_right(sigma_left(Gh.transpose()));
    } else {
        dd = sigma_left(ev.h_delta);
        out.xb = sigma_left(h);
    }
    if (ev.delta_shift.size()) dd += ev.delta_shift;
    if (ev.gamma_generator.size()) out.xb += ev.gamma_generator;
    if (model_.pin_delta()) dd.setZero();
    out.flat.resize(2 * n_ + np_ + ne_);
    out.flat.head(2 * n_) = dd;
    if (np_ > 0) {
        if (ev.param_rates.size() != np_) throw Error(ErrorKind::Precondition, "model returned wrong parameter rates");
        out.flat.segment(2 * n_, np_) = ev.param_rates;
    }
    if (ne_ > 0) {
        if (ev.extra_rates.size() != ne_) throw Error(ErrorKind::Precondition, "model returned wrong auxiliary rates");
        out.flat.tail(ne_) = ev.extra_rates;
    }
    if (nf_ > 0) {
        if (mode_ == FlowMode::Real)
            throw Error(ErrorKind::Precondition, "real-time fermionic evolution is not supported");
        const Mat PG = st.fermion * ev.g_fermion;
        out.xf = PG - PG.transpose();
    }
    return out;
}

Vec GaussianFlowSystem::flat_part(const Vec& y) const
{
    Vec f(2 * n_ + np_ + ne_);
    f.head(2 * n_) = y.head(2 * n_);
    f.segment(2 * n_, np_) = y.segment(2 * n_ + 4 * n_ * n_, np_);
    f.tail(ne_) = y.tail(ne_);
    return f;
}

Vec GaussianFlowSystem::advance(const Vec& y0, const Vec& df, const Mat& ub, const Mat& uf) const
{
    Vec y = y0;
    y.head(2 * n_) += df.head(2 * n_);
    y.segment(2 * n_ + 4 * n_ * n_, np_) += df.segment(2 * n_, np_);
    if (ne_ > 0) y.tail(ne_) += df.tail(ne_);
    Eigen::Map<Mat> G(y.data() + 2 * n_, 2 * n_, 2 * n_);
    G = congruence(ub, Mat(G));
    if (nf_ > 0) {
        Eigen::Map<Mat> P(y.data() + 2 * n_ + 4 * n_ * n_ + np_, nf_, nf_);
        P = congruence(uf, Mat(P));
    }
    return y;
}

Vec GaussianFlowSystem::rhs(const Vec& y, double& energy) const
{
    const FlowGenerator g = generator(y);
    energy = g.energy;
    return rates(y, g);
}

Vec GaussianFlowSystem::rates(const Vec& y, const FlowGenerator& g) const
{
    Vec dy = Vec::Zero(size_);
    dy.head(2 * n_) = g.flat.head(2 * n_);
    const Mat G = Eigen::Map<const Mat>(y.data() + 2 * n_, 2 * n_, 2 * n_);
    const Mat XG = g.xb * G;
    const Mat dG = XG + XG.transpose();
    dy.segment(2 * n_, 4 * n_ * n_) = Eigen::Map<const Vec>(dG.data(), 4 * n_ * n_);
    dy.segment(2 * n_ + 4 * n_ * n_, np_) = g.flat.segment(2 * n_, np_);
    if (nf_ > 0) {
        const Mat P = Eigen::Map<const Mat>(y.data() + 2 * n_ + 4 * n_ * n_ + np_, nf_, nf_);
        const Mat YP = g.xf * P;
        const Mat dP = YP + YP.transpose();
        dy.segment(2 * n_ + 4 * n_ * n_ + np_, nf_ * nf_) = Eigen::Map<const Vec>(dP.data(), nf_ * nf_);
    }
    if (ne_ > 0) dy.tail(ne_) = g.flat.tail(ne_);
    return dy;
}

double GaussianFlowSystem::purity(const Vec& y) const
{
    const VariationalState st = unpack(y);
    double r = st.boson.purity_residual();
    if (nf_ > 0) r = std::max(r, (st.fermion * st.fermion - st.fermion).norm());
    return r;
}

void GaussianFlowSystem::symmetrize(Vec& y) const
{
    Eigen::Map<Mat> G(y.data() + 2 * n_, 2 * n_, 2 * n_);
    G = 0.5 * (G + G.transpose()).eval();
    if (nf_ > 0) {
        Eigen::Map<Mat> P(y.data() + 2 * n_ + 4 * n_ * n_ + np_, nf_, nf_);
        P = 0.5 * (P + P.transpose()).eval();
    }
}

void GaussianFlowSystem::repurify(Vec& y) const
{
    Eigen::Map<Mat> G(y.data() + 2 * n_, 2 * n_, 2 * n_);
    G = vg::repurify(Mat(G));
    if (nf_ > 0) {
        Eigen::Map<Mat> P(y.data() + 2 * n_ + 4 * n_ * n_ + np_, nf_, nf_);
        Eigen::SelfAdjointEigenSolver<Mat> es{Mat(P)};
        Vec v = es.eigenvalues().unaryExpr([](double x) { return x > 0.5 ? 1.0 : 0.0; });
        P = es.eigenvectors() * v.asDiagonal() * es.eigenvectors().transpose();
    }
}

namespace {

struct Stage {
    Vec f;
    Mat kb;
    Mat kf;
};

Stage make_stage(const FlowGenerator& g, const Mat& ub, const Mat& uf)
{
    return {g.flat, dcayley_inv(ub, g.xb), g.xf.size() ? dcayley_inv(uf, g.xf) : Mat()};
}

struct Increment {
    Vec f;
    Mat ub;
    Mat uf;
};

Increment combine(const std::vector<Stage>& st, const std::vector<double>& w, double h)
{
    Increment inc{Vec::Zero(st[0].f.size()), Mat::Zero(st[0].kb.rows(), st[0].kb.cols()),
                  Mat::Zero(st[0].kf.rows(), st[0].kf.cols())};
    for (size_t j = 0; j < w.size() && j < st.size(); ++j) {
        if (w[j] == 0.0) continue;
        inc.f += (h * w[j]) * st[j].f;
        inc.ub += (h * w[j]) * st[j].kb;
        if (inc.uf.size()) inc.uf += (h * w[j]) * st[j].kf;
    }
    return inc;
}

// Runge-Kutta-Munthe-Kaas stages for an explicit tableau; the first generator is given.
std::vector<Stage> rkmk_stages(const GaussianFlowSystem& sys, const Vec& y0, const FlowGenerator& g0, double h,
                               const std::vector<std::vector<double>>& a)
{
    std::vector<Stage> st;
    st.reserve(a.size() + 1);
    st.push_back(make_stage(g0, Mat(), Mat()));
    for (const auto& row : a) {
        const Increment inc = combine(st, row, h);
        const Vec yi = sys.advance(y0, inc.f, inc.ub, inc.uf);
        st.push_back(make_stage(sys.generator(yi), inc.ub, inc.uf));
    }
    return st;
}

double rate_norm(const GaussianFlowSystem& sys, const Vec& y, const FlowGenerator& g)
{
    return max_abs(sys.rates(y, g));
}

}  // namespace

Trajectory flow_imaginary(const VariationalState& init, const ModelFunctional& model, const FlowConfig& cfg)
{
    if (!(cfg.dt > 0.0) || !(cfg.t_max > 0.0) || !(cfg.fixed_point_tol > 0.0))
        throw Error(ErrorKind::Precondition, "flow: dt, t_max and tolerances must be positive");
    GaussianFlowSystem sys(model, FlowMode::Imaginary);
    Trajectory tr;
    tr.observable_names = model.observable_names();
    Vec y = sys.pack(init, Vec::Zero(model.n_extra()));
    static const std::vector<std::vector<double>> a_rk4 = {{0.5}, {0.0, 0.5}, {0.0, 0.0, 1.0}};
    static const std::vector<double> b_rk4 = {1.0 / 6, 1.0 / 3, 1.0 / 3, 1.0 / 6};
    double t = 0.0;
    double dt = cfg.dt;
    FlowGenerator g = sys.generator(y);
    double E = g.energy;
    double rn = rate_norm(sys, y, g);
    StepDiagnostics d0;
    d0.purity = sys.purity(y);
    d0.rhs_norm = rn;
    tr.max_purity = d0.purity;
    record(tr, sys, t, y, E, d0);
    int rejected_here = 0;

    while (true) {
        tr.final_rhs_norm = rn;
        if (rn < cfg.fixed_point_tol) {
            tr.converged = true;
            break;
        }
        if (t >= cfg.t_max - 1e-12 || tr.steps >= cfg.max_steps) break;
        const double h = std::min(dt, cfg.t_max - t);
        const auto st = rkmk_stages(sys, y, g, h, a_rk4);
        const Increment inc = combine(st, b_rk4, h);
        Vec yn = sys.advance(y, inc.f, inc.ub, inc.uf);
        FlowGenerator gn = sys.generator(yn);
        double En = gn.energy;
        const double allowed = std::max(cfg.energy_guard * std::abs(E), 1e-12);
        if (!std::isfinite(En) || En > E + allowed) {
            dt *= 0.5;
            ++rejected_here;
            ++tr.rejected_steps;
            if (dt < cfg.min_dt) {
                tr.monotone = false;
                tr.message = "energy increase persisted down to the minimum step at tau = " + fmt(t);
                throw Error(ErrorKind::IntegratorFailure, tr.message);
            }
            continue;
        }
        double pur = sys.purity(yn);
        ++tr.steps;
        if (cfg.repurify_every > 0 && (tr.steps % cfg.repurify_every == 0 || pur > cfg.purity_tol)) {
            sys.repurify(yn);
            gn = sys.generator(yn);
            En = gn.energy;
            pur = sys.purity(yn);
        }
        if (pur > cfg.purity_tol) {
            tr.message = "purity residual " + fmt(pur) + " at tau = " + fmt(t + h);
            throw Error(ErrorKind::PurityDrift, tr.message);
        }
        tr.max_purity = std::max(tr.max_purity, pur);
        y = std::move(yn);
        g = std::move(gn);
        E = En;
        t += h;
        rn = rate_norm(sys, y, g);
        if (rejected_here == 0) dt = std::min(cfg.dt, dt * 1.2);
        StepDiagnostics d;
        d.purity = pur;
        d.rhs_norm = rn;
        d.rejected = rejected_here;
        rejected_here = 0;
        if (tr.steps % std::max(1, cfg.record_stride) == 0) record(tr, sys, t, y, E, d);
    }
    if (tr.times.back() != t) {
        StepDiagnostics d;
        d.purity = sys.purity(y);
        d.rhs_norm = rn;
        record(tr, sys, t, y, E, d);
    }
    if (!tr.converged && tr.message.empty())
        tr.message = "fixed point not reached: rate norm " + fmt(tr.final_rhs_norm) + " at tau = " + fmt(t);
    return tr;
}

namespace {

// Dormand-Prince 5(4)
const std::vector<std::vector<double>> a_dp = {
    {1.0 / 5},
    {3.0 / 40, 9.0 / 40},
    {44.0 / 45, -56.0 / 15, 32.0 / 9},
    {19372.0 / 6561, -25360.0 / 2187, 64448.0 / 6561, -212.0 / 729},
    {9017.0 / 3168, -355.0 / 33, 46732.0 / 5247, 49.0 / 176, -5103.0 / 18656},
};
const std::vector<double> b_dp = {35.0 / 384, 0.0, 500.0 / 1113, 125.0 / 192, -2187.0 / 6784, 11.0 / 84};
const std::vector<double> e_dp = {71.0 / 57600, 0.0, -71.0 / 16695, 71.0 / 1920, -17253.0 / 339200, 22.0 / 525};

Trajectory run_real(const GaussianFlowSystem& sys, const VariationalState& init, const Vec& extra0,
                    const FlowConfig& cfg, double atol, double rtol)
{
    Trajectory tr;
    tr.observable_names = sys.model().observable_names();
    Vec y = sys.pack(init, extra0);
    double t = 0.0;
    FlowGenerator g = sys.generator(y);
    const double E0 = g.energy;
    StepDiagnostics d0;
    d0.purity = sys.purity(y);
    tr.max_purity = d0.purity;
    record(tr, sys, t, y, E0, d0);

    const int n2 = 2 * sys.model().n_modes();
    double h = std::min(cfg.dt, 0.01);
    double err_prev = 1.0;
    long n_rec = 1;
    const long n_total = static_cast<long>(std::llround(cfg.t_max / cfg.dt));
    while (n_rec <= n_total) {
        const double t_next = static_cast<double>(n_rec) * cfg.dt;
        bool land = false;
        double hs = h;
        if (t + hs >= t_next - 1e-14) {
            hs = t_next - t;
            land = true;
        }
        const auto st = rkmk_stages(sys, y, g, hs, a_dp);
        const Increment inc = combine(st, b_dp, hs);
        // the seventh stage only feeds the error estimate
        const Vec yn = sys.advance(y, inc.f, inc.ub, inc.uf);
        FlowGenerator gn = sys.generator(yn);
        std::vector<Stage> st7 = st;
        st7.push_back(make_stage(gn, inc.ub, inc.uf));
        std::vector<double> e7 = e_dp;
        e7.push_back(-1.0 / 40);
        const Increment ei = combine(st7, e7, hs);
        const Vec f0 = sys.flat_part(y), f1 = sys.flat_part(yn);
        double err = 0.0;
        for (int i = 0; i < ei.f.size(); ++i) {
            const double sc = atol + rtol * std::max(std::abs(f0(i)), std::abs(f1(i)));
            err = std::max(err, std::abs(ei.f(i)) / sc);
        }
        {
            const Mat G = Eigen::Map<const Mat>(y.data() + n2, n2, n2);
            const Mat eg = ei.ub * G;
            const Mat egs = eg + eg.transpose();
            for (int j = 0; j < n2; ++j)
                for (int i = 0; i < n2; ++i)
                    err = std::max(err, std::abs(egs(i, j)) / (atol + rtol * std::abs(G(i, j))));
        }
        if (!std::isfinite(err)) err = 1e10;
        if (err <= 1.0) {
            ++tr.steps;
            const double pur = sys.purity(yn);
            if (pur > cfg.purity_tol) {
                tr.message = "purity residual " + fmt(pur) + " at t = " + fmt(t + hs);
                throw Error(ErrorKind::PurityDrift, tr.message);
            }
            tr.max_purity = std::max(tr.max_purity, pur);
            y = yn;
            g = std::move(gn);
            t = land ? t_next : t + hs;
            const double fac = std::clamp(0.9 * std::pow(std::max(err, 1e-10), -0.7 / 5.0) * std::pow(err_prev, 0.4 / 5.0),
                                          0.2, 5.0);
            err_prev = std::max(err, 1e-4);
            if (!land || hs >= h) h = hs * fac;
            if (land) {
                const double E = g.energy;
                tr.max_energy_drift = std::max(tr.max_energy_drift, std::abs(E - E0));
                if (n_rec % std::max(1, cfg.record_stride) == 0 || n_rec == n_total) {
                    StepDiagnostics d;
                    d.purity = pur;
                    record(tr, sys, t, y, E, d);
                }
                ++n_rec;
            }
        } else {
            ++tr.rejected_steps;
            h = hs * std::max(0.2, 0.9 * std::pow(err, -0.2));
            if (h < cfg.min_dt) {
                tr.message = "step size underflow at t = " + fmt(t);
                throw Error(ErrorKind::IntegratorFailure, tr.message);
            }
        }
        if (tr.steps > cfg.max_steps) throw Error(ErrorKind::IntegratorFailure, "step budget exhausted");
    }
    tr.converged = true;
    return tr;
}

}  // namespace

Trajectory flow_real(const VariationalState& init, const ModelFunctional& model, const FlowConfig& cfg,
                     const Vec& extra0)
{
    if (!(cfg.dt > 0.0) || !(cfg.t_max > 0.0) || !(cfg.abs_tol > 0.0) || !(cfg.rel_tol > 0.0))
        throw Error(ErrorKind::Precondition, "flow: dt, t_max and tolerances must be positive");
    GaussianFlowSystem sys(model, FlowMode::Real);
    const Vec ex = extra0.size() ? extra0 : Vec::Zero(model.n_extra());
    double atol = cfg.abs_tol, rtol = cfg.rel_tol;
    Trajectory tr;
    for (int attempt = 0; attempt < 3; ++attempt) {
        tr = run_real(sys, init, ex, cfg, atol, rtol);
        const double bound = std::max(1e-8, 1e-6 * std::abs(tr.energies.front()));
        if (tr.max_energy_drift <= bound) return tr;
        atol *= 0.1;
        rtol *= 0.1;
    }
    tr.converged = false;
    tr.message = "energy drift " + fmt(tr.max_energy_drift) + " exceeds the conservation bound";
    throw Error(ErrorKind::EnergyDrift, tr.message);
}

double GradientCheck::max_rel() const { return std::max({delta_err, gamma_err, fermion_err}); }

GradientCheck gradient_check(const ModelFunctional& model, const VariationalState& st, double step)
{
    const ModelEval ev = model.evaluate(st, FlowMode::Imaginary);
    GradientCheck out;
    const int n = st.boson.n;
    if (!model.pin_delta()) {
        const double scale = std::max(1.0, max_abs(ev.h_delta));
        for (int a = 0; a < 2 * n; ++a) {
            VariationalState p = st, m = st;
            p.boson.delta(a) += step;
            m.boson.delta(a) -= step;
            const double fd = 2.0 * (model.energy(p) - model.energy(m)) / (2.0 * step);
            out.delta_err = std::max(out.delta_err, std::abs(fd - ev.h_delta(a)) / scale);
        }
    }
    {
        const double scale = std::max(1.0, ev.h_b.cwiseAbs().maxCoeff());
        for (int a = 0; a < 2 * n; ++a)
            for (int b = a; b < 2 * n; ++b) {
                VariationalState p = st, m = st;
                p.boson.gamma(a, b) += step;
                m.boson.gamma(a, b) -= step;
                if (a != b) {
                    p.boson.gamma(b, a) += step;
                    m.boson.gamma(b, a) -= step;
                }
                const double mult = (a == b) ? 1.0 : 2.0;
                const double fd = 4.0 * (model.energy(p) - model.energy(m)) / (2.0 * step * mult);
                out.gamma_err = std::max(out.gamma_err, std::abs(fd - ev.h_b(a, b)) / scale);
            }
    }
    const int nf = model.fermion_dim();
    if (nf > 0) {
        const double scale = std::max(1.0, ev.g_fermion.cwiseAbs().maxCoeff());
        for (int a = 0; a < nf; ++a)
            for (int b = a; b < nf; ++b) {
                VariationalState p = st, m = st;
                p.fermion(a, b) += step;
                m.fermion(a, b) -= step;
                if (a != b) {
                    p.fermion(b, a) += step;
                    m.fermion(b, a) -= step;
                }
                const double mult = (a == b) ? 1.0 : 2.0;
                const double fd = (model.energy(p) - model.energy(m)) / (2.0 * step * mult);
                out.fermion_err = std::max(out.fermion_err, std::abs(fd - ev.g_fermion(a, b)) / scale);
            }
    }
    return out;
}

VariationalState perturb_state(const VariationalState& st, double delta_scale, double squeeze_scale,
                               std::mt19937_64& rng)
{
    std::normal_distribution<double> nd(0.0, 1.0);
    VariationalState out = st;
    const int n = st.boson.n;
    for (int a = 0; a < 2 * n; ++a) out.boson.delta(a) += delta_scale * nd(rng);
    if (squeeze_scale > 0.0 && n > 0) {
        Mat H(2 * n, 2 * n);
        for (int a = 0; a < 2 * n; ++a)
            for (int b = a; b < 2 * n; ++b) H(a, b) = H(b, a) = squeeze_scale * nd(rng);
        const Mat S = (symplectic_form(n) * H).exp();
        out.boson.gamma = S * st.boson.gamma * S.transpose();
        out.boson.gamma = 0.5 * (out.boson.gamma + out.boson.gamma.transpose()).eval();
    }
    const int nf = static_cast<int>(st.fermion.rows());
    if (squeeze_scale > 0.0 && nf > 0) {
        Mat A = Mat::Zero(nf, nf);
        for (int a = 0; a < nf; ++a)
            for (int b = a + 1; b < nf; ++b) {
                A(a, b) = squeeze_scale * nd(rng);
                A(b, a) = -A(a, b);
            }
        const Mat O = A.exp();
        out.fermion = O * st.fermion * O.transpose();
        out.fermion = 0.5 * (out.fermion + out.fermion.transpose()).eval();
    }
    return out;
}

FluctuationSpectrum linearize(const FluctuationProblem& problem, double deflate_tol)
{
    const CMat& G = problem.gram;
    const CMat& M = problem.hmat;
    const Eigen::Index n = G.rows();
    if (G.cols() != n || M.rows() != n || M.cols() != n)
        throw Error(ErrorKind::Precondition, "linearize: Gram and Hamiltonian matrices must be square and equal size");
    const double scale = std::max(1.0, G.norm());
    if ((G - G.adjoint()).norm() > 1e-10 * scale || (M - M.adjoint()).norm() > 1e-10 * std::max(1.0, M.norm()))
        throw Error(ErrorKind::Precondition, "linearize: matrices must be Hermitian");
    Eigen::SelfAdjointEigenSolver<CMat> eg(0.5 * (G + G.adjoint()));
    const Vec& g = eg.eigenvalues();
    if (g.minCoeff() < -deflate_tol * scale) {
        std::ostringstream os;
        os << "linearize: Gram matrix is indefinite, eigenvalue " << g.minCoeff();
        throw Error(ErrorKind::SingularGram, os.str());
    }
    std::vector<int> keep;
    for (int i = 0; i < n; ++i)
        if (g(i) > deflate_tol * scale) keep.push_back(i);
    const int k = static_cast<int>(keep.size());
    CMat Bm(n, k), Bh(n, k);
    for (int c = 0; c < k; ++c) {
        Bm.col(c) = eg.eigenvectors().col(keep[c]) / std::sqrt(g(keep[c]));
        Bh.col(c) = eg.eigenvectors().col(keep[c]) * std::sqrt(g(keep[c]));
    }
    CMat L = Bm.adjoint() * M * Bm;
    L = 0.5 * (L + L.adjoint()).eval();
    Eigen::SelfAdjointEigenSolver<CMat> el(L);
    FluctuationSpectrum out;
    out.mu = el.eigenvalues();
    out.eta = el.eigenvectors();
    out.basis = Bm;
    out.overlap = Bh * out.eta;
    for (int i = 0; i < n; ++i) {
        const double gii = std::real(G(i, i));
        if (gii > 0.0) out.overlap.row(i) /= std::sqrt(gii);
    }
    return out;
}

Vec spectral_weight(const FluctuationSpectrum& spec, int k, const Vec& omegas, double eta)
{
    if (k < 0 || k >= spec.overlap.rows())
        throw Error(ErrorKind::Precondition, "spectral_weight: excitation index out of range");
    if (!(eta > 0.0)) throw Error(ErrorKind::Precondition, "spectral_weight: broadening must be positive");
    Vec z = Vec::Zero(omegas.size());
    for (int l = 0; l < spec.mu.size(); ++l) {
        const double w = std::norm(spec.overlap(k, l));
        for (int i = 0; i < omegas.size(); ++i) {
            const double x = omegas(i) - spec.mu(l);
            z(i) += w * (eta / M_PI) / (x * x + eta * eta);
        }
    }
    return z;
}

}  // namespace vg
