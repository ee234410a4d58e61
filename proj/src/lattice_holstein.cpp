#include "vargauss/lattice_holstein.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

namespace vg {

int LatticeSpec::site(int x, int y) const
{
    x = ((x % lx) + lx) % lx;
    y = ((y % ly) + ly) % ly;
    return x + lx * y;
}

Mat LatticeSpec::hopping() const
{
    const int n = n_sites();
    Mat t = Mat::Zero(n, n);
    for (int y = 0; y < ly; ++y)
        for (int x = 0; x < lx; ++x) {
            const int a = site(x, y);
            if (lx > 1) {
                const int b = site(x + 1, y);
                t(a, b) -= t0;
                t(b, a) -= t0;
            }
            if (ly > 1) {
                const int b = site(x, y + 1);
                t(a, b) -= t0;
                t(b, a) -= t0;
            }
        }
    return t;
}

Vec LatticeSpec::stagger() const
{
    Vec s(n_sites());
    for (int y = 0; y < ly; ++y)
        for (int x = 0; x < lx; ++x) s(site(x, y)) = ((x + y) % 2 == 0) ? 1.0 : -1.0;
    return s;
}

void LatticeSpec::validate() const
{
    if (lx < 1 || ly < 1 || lx * ly < 2) throw Error(ErrorKind::Config, "lattice: need at least two sites");
    if (!(omega0 > 0.0)) throw Error(ErrorKind::Config, "lattice.omega0 must be positive");
    if (!std::isfinite(t0) || !std::isfinite(g) || !std::isfinite(mu))
        throw Error(ErrorKind::Config, "lattice: t0, g and mu must be finite");
}

LatticeHolsteinModel::LatticeHolsteinModel(LatticeSpec spec, double lambda_mass)
    : spec_(spec), lambda_mass_(lambda_mass)
{
    spec_.validate();
    if (!(lambda_mass > 0.0)) throw Error(ErrorKind::Precondition, "lattice: lambda mass must be positive");
    const int n = spec_.n_sites();
    const Mat t = spec_.hopping();
    for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b)
            if (t(a, b) != 0.0) bonds_.push_back({a, b, t(a, b)});
    diff_.resize(static_cast<size_t>(n) * n);
    for (int l = 0; l < n; ++l)
        for (int m = 0; m < n; ++m) {
            const int xl = l % spec_.lx, yl = l / spec_.lx, xm = m % spec_.lx, ym = m / spec_.lx;
            diff_[static_cast<size_t>(l) * n + m] = spec_.site(xl - xm, yl - ym);
        }
}

Mat LatticeHolsteinModel::lambda_matrix(const Vec& lam) const
{
    const int n = spec_.n_sites();
    Mat L(n, n);
    for (int l = 0; l < n; ++l)
        for (int m = 0; m < n; ++m) L(l, m) = lam(diff_[static_cast<size_t>(l) * n + m]);
    return L;
}

Vec LatticeHolsteinModel::reduce(const Mat& dL) const
{
    const int n = spec_.n_sites();
    Vec r = Vec::Zero(n);
    for (int l = 0; l < n; ++l)
        for (int m = 0; m < n; ++m) r(diff_[static_cast<size_t>(l) * n + m]) += dL(l, m);
    return r;
}

ModelEval LatticeHolsteinModel::eval_impl(const VariationalState& st, bool gradients, Vec* dlambda) const
{
    const int n = spec_.n_sites();
    const double w0 = spec_.omega0, g = spec_.g;
    const Mat L = lambda_matrix(st.params);
    const Vec dx = st.boson.delta.head(n), dp = st.boson.delta.tail(n);
    const Mat& G = st.boson.gamma;
    const Mat Gpp = G.bottomRightCorner(n, n);
    const Mat& P = st.fermion;
    const Mat ru = P.topLeftCorner(n, n);
    const Mat rd = Mat::Identity(n, n) - P.bottomRightCorner(n, n);
    const Mat F = P.topRightCorner(n, n);
    const Mat rt = ru + rd;
    const Vec dens = ru.diagonal() + rd.diagonal();

    const Mat V = 2.0 * w0 * (L.transpose() * L) - 2.0 * g * (L + L.transpose());
    const Mat dg = g * Mat::Identity(n, n) - w0 * L;
    const Vec dgx = dg.transpose() * dx;  // sum_l dg_{l n} dx_l

    Mat K = 0.5 * dens * dens.transpose() - 0.5 * (ru.cwiseProduct(ru) + rd.cwiseProduct(rd));
    const Mat F2 = F.cwiseProduct(F);
    K += 0.5 * (F2 + F2.transpose());
    K.diagonal() += 0.5 * dens;

    double e_hop = 0.0;
    Mat T = Mat::Zero(n, n);
    Mat hpp = Mat::Zero(n, n);
    Vec hdp = Vec::Zero(n);
    Mat dL = Mat::Zero(n, n);
    for (const Bond& b : bonds_) {
        const Vec w = L.col(b.n) - L.col(b.m);
        const Vec gw = Gpp * w;
        const double D = std::exp(-0.5 * w.dot(gw));
        const double phi = dp.dot(w);
        const double c = std::cos(phi), s = std::sin(phi);
        const double r = rt(b.n, b.m);
        T(b.n, b.m) += b.t * D * c;
        e_hop += b.t * D * c * r;
        if (gradients) {
            hpp -= (2.0 * b.t * D * c * r) * (w * w.transpose());
            hdp -= (2.0 * b.t * D * s * r) * w;
            const Vec z = (b.t * r * D) * (-s * dp - c * gw);
            dL.col(b.n) += z;
            dL.col(b.m) -= z;
        }
    }

    ModelEval ev;
    ev.energy = e_hop + dens.dot(dgx - spec_.mu * Vec::Ones(n)) + V.cwiseProduct(K).sum() +
                0.25 * w0 * (G.trace() + st.boson.delta.squaredNorm()) - 0.5 * n * w0;
    if (!gradients) return ev;

    const Vec u = -spec_.mu * Vec::Ones(n) + dgx + V * dens + 0.5 * V.diagonal();
    Mat Au = T - V.cwiseProduct(ru);
    Mat Ad = T - V.cwiseProduct(rd);
    Au.diagonal() += u;
    Ad.diagonal() += u;
    const Mat B = 2.0 * V.cwiseProduct(F);
    ev.g_fermion.resize(2 * n, 2 * n);
    ev.g_fermion.topLeftCorner(n, n) = Au;
    ev.g_fermion.bottomRightCorner(n, n) = -Ad;
    ev.g_fermion.topRightCorner(n, n) = 0.5 * B;
    ev.g_fermion.bottomLeftCorner(n, n) = 0.5 * B.transpose();

    ev.h_delta.resize(2 * n);
    ev.h_delta.head(n) = w0 * dx + 2.0 * dg * dens;
    ev.h_delta.tail(n) = w0 * dp + hdp;
    ev.h_b = w0 * Mat::Identity(2 * n, 2 * n);
    ev.h_b.bottomRightCorner(n, n) += hpp;

    dL += 4.0 * w0 * (L * K) - 4.0 * g * K - w0 * dx * dens.transpose();
    const Vec dlam = reduce(dL);
    if (dlambda) *dlambda = dlam;
    // metric: lambda_mass * N plus a fraction of the positive interaction curvature at fixed K
    Mat H(n, n);
    for (int r = 0; r < n; ++r)
        for (int q = 0; q < n; ++q) {
            const int rx = r % spec_.lx, ry = r / spec_.lx, qx = q % spec_.lx, qy = q / spec_.lx;
            double acc = 0.0;
            for (int a = 0; a < n; ++a)
                acc += K(a, spec_.site(a % spec_.lx + rx - qx, a / spec_.lx + ry - qy));
            H(r, q) = 4.0 * w0 * acc;
        }
    Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (H + H.transpose()));
    constexpr double curvature_weight = 0.1;
    const Vec ev_h = curvature_weight * es.eigenvalues().cwiseMax(0.0).array() + lambda_mass_ * n;
    ev.param_rates = -es.eigenvectors() * (es.eigenvectors().transpose() * dlam).cwiseQuotient(ev_h);
    return ev;
}

ModelEval LatticeHolsteinModel::evaluate(const VariationalState& st, FlowMode mode) const
{
    if (mode == FlowMode::Real) throw Error(ErrorKind::Precondition, "lattice Holstein: real-time flow not supported");
    return eval_impl(st, true, nullptr);
}

double LatticeHolsteinModel::energy(const VariationalState& st) const { return eval_impl(st, false, nullptr).energy; }

Vec LatticeHolsteinModel::lambda_gradient(const VariationalState& st) const
{
    Vec d;
    eval_impl(st, true, &d);
    return d;
}

namespace {

struct Densities {
    Vec dens;
    double n_sigma, rho_s, d0, ds, gap;
};

Densities densities(const VariationalState& st, const LatticeSpec& spec, const Mat& L)
{
    const int n = spec.n_sites();
    const Mat& P = st.fermion;
    Densities d;
    d.dens = P.topLeftCorner(n, n).diagonal() + Vec::Ones(n) - P.bottomRightCorner(n, n).diagonal();
    const Vec s = spec.stagger();
    d.n_sigma = d.dens.mean() / 2.0;
    d.rho_s = s.dot(d.dens) / (2.0 * n);
    const Vec disp = st.boson.delta.head(n) - 2.0 * L * d.dens;
    d.d0 = disp.mean();
    d.ds = s.dot(disp) / n;
    const Mat V = 2.0 * spec.omega0 * (L.transpose() * L) - 2.0 * spec.g * (L + L.transpose());
    d.gap = V(0, 0) * P.topRightCorner(n, n).diagonal().mean();
    return d;
}

Mat lambda_matrix_of(const LatticeSpec& spec, const Vec& lam)
{
    const int n = spec.n_sites();
    Mat L(n, n);
    for (int l = 0; l < n; ++l)
        for (int m = 0; m < n; ++m) {
            const int xl = l % spec.lx, yl = l / spec.lx, xm = m % spec.lx, ym = m / spec.lx;
            L(l, m) = lam(spec.site(xl - xm, yl - ym));
        }
    return L;
}

// momentum of grid point j in site ordering
std::pair<double, double> momentum(const LatticeSpec& spec, int j)
{
    return {2.0 * std::numbers::pi * (j % spec.lx) / spec.lx, 2.0 * std::numbers::pi * (j / spec.lx) / spec.ly};
}

// sum_r f(r) e^{-i q r} for a function on displacements in site ordering
Vec fourier_real(const LatticeSpec& spec, const Vec& f)
{
    const int n = spec.n_sites();
    Vec out(n);
    for (int q = 0; q < n; ++q) {
        const auto [qx, qy] = momentum(spec, q);
        double s = 0.0;
        for (int r = 0; r < n; ++r) s += f(r) * std::cos(qx * (r % spec.lx) + qy * (r / spec.lx));
        out(q) = s;
    }
    return out;
}

// average of M_{n, n - r} over n, indexed by r
Vec displacement_average(const LatticeSpec& spec, const Mat& M)
{
    const int n = spec.n_sites();
    Vec f = Vec::Zero(n);
    for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b) {
            const int r = spec.site(a % spec.lx - b % spec.lx, a / spec.lx - b / spec.lx);
            f(r) += M(a, b) / n;
        }
    return f;
}

}  // namespace

std::vector<std::string> LatticeHolsteinModel::observable_names() const
{
    return {"n_sigma", "rho_s", "gap", "d0", "ds"};
}

std::vector<double> LatticeHolsteinModel::observables(const VariationalState& st) const
{
    const Densities d = densities(st, spec_, lambda_matrix(st.params));
    return {d.n_sigma, d.rho_s, d.gap, d.d0, d.ds};
}

double lattice_energy(const VariationalState& st, const LatticeSpec& spec)
{
    return LatticeHolsteinModel(spec).energy(st);
}

LatticeGradients lattice_gradients(const VariationalState& st, const LatticeSpec& spec)
{
    const LatticeHolsteinModel model(spec);
    LatticeGradients out;
    Vec dl;
    ModelEval ev = model.evaluate(st, FlowMode::Imaginary);
    out.h_delta = ev.h_delta;
    out.h_b = ev.h_b;
    out.h_f = ev.g_fermion;
    out.d_lambda = model.lambda_gradient(st);
    return out;
}

Vec lambda_flow_step(const VariationalState& st, const LatticeSpec& spec, double lambda_mass)
{
    return LatticeHolsteinModel(spec, lambda_mass).evaluate(st, FlowMode::Imaginary).param_rates;
}

double constraint_residual(const VariationalState& st, const LatticeSpec& spec)
{
    const int n = spec.n_sites();
    const int m2 = 2 * n;
    const Mat L = lambda_matrix_of(spec, st.params);
    const Mat& P = st.fermion;
    const Mat& G = st.boson.gamma;
    const Vec dp = st.boson.delta.tail(n);
    // spin-orbital index a = site + n * spin
    Mat rho = Mat::Zero(m2, m2);
    rho.topLeftCorner(n, n) = P.topLeftCorner(n, n);
    rho.bottomRightCorner(n, n) = Mat::Identity(n, n) - P.bottomRightCorner(n, n);
    const Mat F = P.topRightCorner(n, n);
    Mat kappa = Mat::Zero(m2, m2);  // <c_a^dagger c_b^dagger>
    kappa.topRightCorner(n, n) = F;
    kappa.bottomLeftCorner(n, n) = -F.transpose();
    auto cc = [&](int a, int b) { return kappa(b, a); };              // <c_a c_b>
    auto c_cd = [&](int a, int b) { return (a == b ? 1.0 : 0.0) - rho(b, a); };  // <c_a c_b^dagger>

    // density-density connected correlator, summed over the spin of the first index
    Mat csite = Mat::Zero(n, m2);
    for (int b = 0; b < m2; ++b)
        for (int a = 0; a < m2; ++a) {
            const double c = rho(b, a) * c_cd(b, a) - kappa(b, a) * cc(b, a);
            csite(b % n, a) += c;
        }
    const Mat dg = spec.g * Mat::Identity(n, n) - spec.omega0 * L;
    Mat res = G.block(n, 0, n, n) * (dg * csite);

    const Mat t = spec.hopping();
    const Mat Gpp = G.bottomRightCorner(n, n);
    Mat Y = Mat::Zero(n, m2);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            if (t(i, j) == 0.0) continue;
            const Vec w = L.col(i) - L.col(j);
            const double D = std::exp(-0.5 * w.dot(Gpp * w));
            const double coef = t(i, j) * D * std::sin(dp.dot(w));
            if (coef == 0.0) continue;
            for (int s = 0; s < 2; ++s) {
                const int b = i + n * s, c = j + n * s;
                for (int a = 0; a < m2; ++a) {
                    const double x1 = -kappa(a, b) * cc(a, c) + rho(a, c) * c_cd(a, b);
                    const double x2 = -kappa(b, a) * cc(c, a) + rho(b, a) * c_cd(c, a);
                    Y.col(a) += (coef * (x1 + x2)) * w;
                }
            }
        }
    res -= 0.5 * Gpp * Y;
    return res.cwiseAbs().maxCoeff();
}

std::string classify_phase(double rho_s, double gap, double threshold)
{
    const bool cdw = std::abs(rho_s) > threshold, sc = std::abs(gap) > threshold;
    if (cdw && !sc) return "CDW";
    if (sc && !cdw) return "SC";
    if (sc && cdw) return "coexistence";
    return "normal";
}

PhaseObservables cdw_observables(const VariationalState& st, const LatticeSpec& spec)
{
    const int n = spec.n_sites();
    const LatticeHolsteinModel model(spec);
    const Mat L = lambda_matrix_of(spec, st.params);
    const Densities d = densities(st, spec, L);
    PhaseObservables o;
    o.energy = model.energy(st);
    o.n_sigma = d.n_sigma;
    o.rho_s = d.rho_s;
    o.d0 = d.d0;
    o.ds = d.ds;
    o.gap = d.gap;
    const Mat V = 2.0 * spec.omega0 * (L.transpose() * L) - 2.0 * spec.g * (L + L.transpose());
    const Mat F = st.fermion.topRightCorner(n, n);
    // V_q and F_p from displacement averages
    Vec vr(n);
    for (int r = 0; r < n; ++r) vr(r) = V(r, 0);
    const Vec vq = fourier_real(spec, vr);
    const Vec fp = fourier_real(spec, displacement_average(spec, F));
    o.gap_k.resize(n);
    for (int k = 0; k < n; ++k) {
        const int kx = k % spec.lx, ky = k / spec.lx;
        double s = 0.0;
        for (int p = 0; p < n; ++p) s += vq(spec.site(kx - p % spec.lx, ky - p / spec.lx)) * fp(p);
        o.gap_k(k) = s / n;
    }
    o.gap_k_direct = fourier_real(spec, displacement_average(spec, V.cwiseProduct(F)));
    o.lambda_q = fourier_real(spec, st.params);
    const Mat& G = st.boson.gamma;
    o.gamma_q_xx = fourier_real(spec, displacement_average(spec, G.topLeftCorner(n, n)));
    double tr = 0.0;
    for (int bi = 0; bi < 2; ++bi)
        for (int bj = 0; bj < 2; ++bj) {
            const Mat blk = G.block(bi * n, bj * n, n, n);
            const Vec f = displacement_average(spec, blk);
            for (int a = 0; a < n; ++a)
                for (int b = 0; b < n; ++b) {
                    const int r = spec.site(a % spec.lx - b % spec.lx, a / spec.lx - b / spec.lx);
                    tr = std::max(tr, std::abs(blk(a, b) - f(r)));
                }
        }
    o.translation_residual = tr;
    o.constraint = constraint_residual(st, spec);
    o.phase = classify_phase(o.rho_s, o.gap);
    return o;
}

const char* lattice_seed_name(LatticeSeed s) { return s == LatticeSeed::CDW ? "cdw" : "sc"; }

VariationalState lattice_initial_state(const LatticeSpec& spec, LatticeSeed seed, double amplitude)
{
    spec.validate();
    const int n = spec.n_sites();
    VariationalState st;
    st.boson = BosonGaussian::vacuum(n);
    st.params = Vec::Zero(n);
    st.params(0) = spec.g / spec.omega0;
    const Vec stag = spec.stagger();
    if (seed == LatticeSeed::CDW) st.boson.delta.head(n) = amplitude * stag;
    // Slater determinant of a seeded mean-field Hamiltonian in the (c_up, c_down^dagger) basis
    const double lam0 = st.params(0);
    const Mat h0 = std::exp(-lam0 * lam0) * spec.hopping();
    Mat h = Mat::Zero(2 * n, 2 * n);
    Mat hn = h0;
    if (seed == LatticeSeed::CDW) hn.diagonal() -= amplitude * stag;
    h.topLeftCorner(n, n) = hn;
    h.bottomRightCorner(n, n) = -hn;
    if (seed == LatticeSeed::SC) {
        h.topRightCorner(n, n) = -amplitude * Mat::Identity(n, n);
        h.bottomLeftCorner(n, n) = -amplitude * Mat::Identity(n, n);
    }
    Eigen::SelfAdjointEigenSolver<Mat> es(h);
    const Mat occ = es.eigenvectors().leftCols(n);
    st.fermion = occ * occ.transpose();
    return st;
}

LatticeGround lattice_ground(const LatticeSpec& spec, const FlowConfig& cfg, const std::vector<LatticeSeed>& seeds)
{
    const LatticeHolsteinModel model(spec);
    FlowConfig c = cfg;
    c.mode = FlowMode::Imaginary;
    c.record_stride = std::max<int>(c.record_stride, 1 << 30);
    LatticeGround best;
    bool have = false;
    std::string messages;
    for (LatticeSeed s : seeds) {
        Trajectory tr;
        try {
            tr = flow_imaginary(lattice_initial_state(spec, s), model, c);
        } catch (const Error& e) {
            messages += std::string(lattice_seed_name(s)) + ": " + e.what() + "; ";
            best.seed_energies.push_back(std::nan(""));
            continue;
        }
        const double e = tr.energies.back();
        best.seed_energies.push_back(e);
        const bool better = !have || (tr.converged && !best.converged) ||
                            (tr.converged == best.converged && e < best.obs.energy);
        if (better) {
            best.state = tr.final_state();
            best.obs = cdw_observables(best.state, spec);
            best.seed = s;
            best.converged = tr.converged;
            best.monotone = tr.monotone;
            best.rhs_norm = tr.final_rhs_norm;
            best.steps = tr.steps;
            best.max_purity = tr.max_purity;
            best.message = tr.message;
            have = true;
        }
        if (!tr.converged) messages += std::string(lattice_seed_name(s)) + ": " + tr.message + "; ";
    }
    if (!have) {
        best.converged = false;
        best.obs.energy = std::nan("");
        best.obs.phase = "failed";
    }
    if (!messages.empty()) best.message = messages;
    return best;
}

std::vector<PhaseScanRow> phase_scan(const LatticeSpec& base, const std::vector<double>& mus,
                                     const std::vector<double>& gs, const FlowConfig& cfg)
{
    std::vector<PhaseScanRow> rows;
    for (double g : gs)
        for (double mu : mus) {
            LatticeSpec s = base;
            s.g = g;
            s.mu = mu;
            PhaseScanRow r;
            r.mu = mu;
            r.g = g;
            r.ground = lattice_ground(s, cfg);
            rows.push_back(std::move(r));
        }
    return rows;
}

}  // namespace vg
