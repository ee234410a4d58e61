#include "vargauss/gaussian.hpp"

#include <cmath>
#include <sstream>

namespace vg {

namespace {

const cplx I1(0.0, 1.0);

cplx wick_rec(const Vec& delta, const CMat& C, std::vector<int>& idx, std::size_t pos)
{
    if (pos >= idx.size()) return 1.0;
    const int a = idx[pos];
    if (a < 0) return wick_rec(delta, C, idx, pos + 1);
    idx[pos] = -1;
    cplx acc = delta(a) * wick_rec(delta, C, idx, pos + 1);
    for (std::size_t q = pos + 1; q < idx.size(); ++q) {
        const int b = idx[q];
        if (b < 0) continue;
        idx[q] = -1;
        acc += C(a, b) * wick_rec(delta, C, idx, pos + 1);
        idx[q] = b;
    }
    idx[pos] = a;
    return acc;
}

}  // namespace

BosonGaussian BosonGaussian::vacuum(int n)
{
    BosonGaussian s;
    s.n = n;
    s.delta = Vec::Zero(2 * n);
    s.gamma = Mat::Identity(2 * n, 2 * n);
    return s;
}

BosonGaussian BosonGaussian::from_symplectic(const Mat& S, const Vec& delta)
{
    if (S.rows() != delta.size() || S.rows() % 2 != 0)
        throw Error(ErrorKind::Precondition, "from_symplectic: dimension mismatch");
    BosonGaussian s;
    s.n = static_cast<int>(S.rows() / 2);
    s.delta = delta;
    s.gamma = S * S.transpose();
    s.gamma = 0.5 * (s.gamma + s.gamma.transpose()).eval();
    return s;
}

double BosonGaussian::purity_residual() const { return purity_residual_boson(gamma); }

void BosonGaussian::validate(double purity_tol) const
{
    if (delta.size() != 2 * n || gamma.rows() != 2 * n || gamma.cols() != 2 * n)
        throw Error(ErrorKind::Precondition, "BosonGaussian: dimension mismatch");
    if ((gamma - gamma.transpose()).norm() > 1e-10 * std::max(1.0, gamma.norm()))
        throw Error(ErrorKind::Precondition, "BosonGaussian: covariance is not symmetric");
    const double r = purity_residual();
    if (r > purity_tol) {
        std::ostringstream os;
        os << "BosonGaussian: purity residual " << r << " exceeds " << purity_tol;
        throw Error(ErrorKind::PurityDrift, os.str());
    }
}

FermionCovariance FermionCovariance::vacuum(int n)
{
    FermionCovariance c;
    c.n = n;
    c.gamma_m = -symplectic_form(n);
    return c;
}

FermionCovariance FermionCovariance::from_occupations(const std::vector<int>& occ)
{
    FermionCovariance c = vacuum(static_cast<int>(occ.size()));
    for (int j = 0; j < c.n; ++j) {
        if (occ[j]) {
            c.gamma_m(j, c.n + j) = 1.0;
            c.gamma_m(c.n + j, j) = -1.0;
        }
    }
    return c;
}

double FermionCovariance::purity_residual() const
{
    return (gamma_m * gamma_m + Mat::Identity(2 * n, 2 * n)).norm();
}

cplx wick_moment(const BosonGaussian& st, const std::vector<int>& idx)
{
    if (idx.size() > 4)
        throw Error(ErrorKind::Precondition, "wick_moment: degree above 4 is not supported");
    for (int a : idx) {
        if (a < 0 || a >= 2 * st.n)
            throw Error(ErrorKind::Precondition, "wick_moment: quadrature index out of range");
    }
    const CMat C = st.gamma.cast<cplx>() + I1 * symplectic_form(st.n).cast<cplx>();
    std::vector<int> work = idx;
    return wick_rec(st.delta, C, work, 0);
}

CMat ExpnBoson::grad_gamma() const
{
    CMat g = 0.5 * value * (p_delta * p_delta.transpose() - P);
    return g;
}

ExpnBoson expn_boson_eval(const BosonGaussian& st, const Vec& beta, bool want_sign)
{
    const int n = st.n;
    if (beta.size() != n)
        throw Error(ErrorKind::Precondition, "expn_boson: phase vector has wrong length");
    for (int j = 0; j < n; ++j) {
        if (!std::isfinite(beta(j)))
            throw Error(ErrorKind::Precondition, "expn_boson: non-finite phase");
    }

    std::vector<int> act;
    std::vector<double> theta;
    for (int j = 0; j < n; ++j) {
        const double th = 0.5 * beta(j);
        if (std::abs(std::sin(th)) > 1e-12) {
            act.push_back(j);
            theta.push_back(th);
        }
    }
    const int m = static_cast<int>(act.size());

    ExpnBoson out;
    out.n_active = m;
    out.P = CMat::Zero(2 * n, 2 * n);
    out.p_delta = CVec::Zero(2 * n);

    CVec f(2 * n);
    for (int j = 0; j < n; ++j) {
        f(j) = std::exp(I1 * beta(j));
        f(n + j) = f(j);
    }
    CMat gt = (CVec::Ones(2 * n) - f).asDiagonal() * st.gamma.cast<cplx>();
    gt.diagonal() += CVec::Ones(2 * n) + f;
    Eigen::PartialPivLU<CMat> lu(gt);
    out.gt_inv = lu.inverse();

    if (m == 0) {
        out.value = 1.0;
        return out;
    }

    std::vector<int> q(2 * m);
    for (int a = 0; a < m; ++a) {
        q[a] = act[a];
        q[m + a] = n + act[a];
    }
    Mat Gaa(2 * m, 2 * m);
    Vec Da(2 * m);
    Vec K(2 * m);
    for (int a = 0; a < 2 * m; ++a) {
        Da(a) = st.delta(q[a]);
        const double th = theta[a % m];
        K(a) = std::cos(th) / std::sin(th);
        for (int b = 0; b < 2 * m; ++b) Gaa(a, b) = st.gamma(q[a], q[b]);
    }
    Eigen::LLT<Mat> llt(Gaa);
    if (llt.info() != Eigen::Success)
        throw Error(ErrorKind::SingularExpectation, "expn_boson: covariance block is not positive definite");
    const Mat L = llt.matrixL();
    Mat Linv = L.triangularView<Eigen::Lower>().solve(Mat::Identity(2 * m, 2 * m));
    Mat Kt = Linv * K.asDiagonal() * Linv.transpose();
    Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (Kt + Kt.transpose()));
    const Vec& kap = es.eigenvalues();

    double log_det_g = 0.0;
    for (int a = 0; a < 2 * m; ++a) log_det_g += 2.0 * std::log(L(a, a));
    cplx root = std::exp(-0.5 * log_det_g);
    CVec inv_diag(2 * m);
    for (int a = 0; a < 2 * m; ++a) {
        const cplx z(1.0, kap(a));
        root /= std::sqrt(z);
        inv_diag(a) = 1.0 / z;
    }
    const Mat M = Linv.transpose() * es.eigenvectors();
    const CMat Pa = M.cast<cplx>() * inv_diag.asDiagonal() * M.transpose().cast<cplx>();

    cplx pref = 1.0;
    for (int a = 0; a < m; ++a) pref /= -I1 * std::exp(I1 * theta[a]) * std::sin(theta[a]);

    const CVec PD = Pa * Da.cast<cplx>();
    const cplx expo = -0.5 * Da.cast<cplx>().dot(PD);
    out.value = pref * root * std::exp(expo);

    for (int a = 0; a < 2 * m; ++a) {
        out.p_delta(q[a]) = PD(a);
        for (int b = 0; b < 2 * m; ++b) out.P(q[a], q[b]) = Pa(a, b);
    }

    if (want_sign) {
        // principal branch of det(Gamma_B / 2)^{-1/2} for comparison
        CVec sq(2 * n);
        for (int j = 0; j < 2 * n; ++j) sq(j) = std::sqrt(1.0 - f(j));
        CMat gb = sq.asDiagonal() * st.gamma.cast<cplx>() * sq.asDiagonal();
        gb.diagonal() += CVec::Ones(2 * n) + f;
        const cplx det_half = (0.5 * gb).determinant();
        const cplx principal = 1.0 / std::sqrt(det_half);
        out.s0 = std::real((pref * root) / principal) >= 0.0 ? 1 : -1;
    }
    return out;
}

cplx expn_boson(const BosonGaussian& st, const Vec& beta) { return expn_boson_eval(st, beta).value; }

LinearForm linear_form(const ExpnBoson& ex, const Vec& delta, const CVec& v)
{
    LinearForm lf;
    const CVec w = ex.gt_inv * v;
    lf.s = delta.cast<cplx>().dot(w);
    lf.d_delta = w;
    lf.d_gamma = -0.5 * (w * ex.p_delta.transpose() + ex.p_delta * w.transpose());
    return lf;
}

ExpnPoly expn_boson_with_poly(const BosonGaussian& st, const Vec& beta, int j, int k)
{
    const int n = st.n;
    if (j < 0 || j >= n || k < 0 || k >= n)
        throw Error(ErrorKind::Precondition, "expn_boson_with_poly: mode index out of range");
    const ExpnBoson ex = expn_boson_eval(st, beta);
    CVec u = CVec::Zero(2 * n);
    u(k) = 1.0;
    u(n + k) = I1;
    CVec ubar = CVec::Zero(2 * n);
    ubar(j) = 1.0;
    ubar(n + j) = -I1;

    const CVec D = st.delta.cast<cplx>();
    const CVec w = ex.gt_inv * u;
    const cplx s_k = D.transpose() * w;
    const cplx s_j = (ex.gt_inv.transpose() * D).transpose() * ubar;
    CMat gm1 = st.gamma.cast<cplx>();
    gm1.diagonal().array() -= 1.0;
    const cplx fluct = 0.5 * (ubar.transpose() * gm1 * w)(0, 0);

    ExpnPoly r;
    r.value = ex.value;
    r.b_k = ex.value * s_k;
    r.bdag_j_b_k = std::exp(I1 * beta(j)) * ex.value * (fluct + s_j * s_k);
    return r;
}

cplx displaced_exp(const BosonGaussian& st, const Vec& gamma)
{
    if (gamma.size() != 2 * st.n)
        throw Error(ErrorKind::Precondition, "displaced_exp: source vector has wrong length");
    const double ph = st.delta.dot(gamma);
    const double q = gamma.dot(st.gamma * gamma);
    return std::exp(cplx(-0.5 * q, ph));
}

cplx expn_fermion(const FermionCovariance& cov, const Vec& alpha)
{
    const int n = cov.n;
    if (alpha.size() != n)
        throw Error(ErrorKind::Precondition, "expn_fermion: phase vector has wrong length");
    CVec d(2 * n), c(2 * n);
    for (int j = 0; j < n; ++j) {
        const cplx e = std::exp(I1 * alpha(j));
        d(j) = d(n + j) = std::sqrt(1.0 - e);
        c(j) = c(n + j) = 1.0 + e;
    }
    const CMat sig = symplectic_form(n).cast<cplx>();
    CMat gf = d.asDiagonal() * cov.gamma_m.cast<cplx>() * d.asDiagonal();
    gf -= c.asDiagonal() * sig;
    gf = 0.5 * (gf - gf.transpose()).eval();
    // (-1/2)^N s_f with s_f = (-1)^{N(N-1)/2}, i.e. 1 / Pf(-2 sigma)
    double norm = std::pow(-0.5, n);
    if ((static_cast<long>(n) * (n - 1) / 2) % 2 == 1) norm = -norm;
    return norm * pfaffian_complex(gf);
}

CMat gamma_f_from_m(const FermionCovariance& cov)
{
    const int n = cov.n;
    const CMat W = wb_matrix(n);
    CMat g = -0.25 * I1 * (W.adjoint() * cov.gamma_m.cast<cplx>() * W);
    g.diagonal().array() += 0.5;
    return g;
}

Mat repurify(const Mat& gamma)
{
    const int n = static_cast<int>(gamma.rows() / 2);
    const Mat sig = symplectic_form(n);
    Mat K = gamma * sig;
    for (int it = 0; it < 60; ++it) {
        Mat Kn = 0.5 * (K - K.inverse());
        const double ch = (Kn - K).norm();
        K = Kn;
        if (ch < 1e-15 * std::max(1.0, K.norm())) break;
    }
    Mat g = -K * sig;
    return 0.5 * (g + g.transpose());
}

}  // namespace vg
