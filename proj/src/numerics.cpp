#include "vargauss/numerics.hpp"

#include <algorithm>
#include <boost/math/special_functions/digamma.hpp>
#include <cmath>
#include <numeric>
#include <sstream>

namespace vg {

const char* error_kind_name(ErrorKind k)
{
    switch (k) {
    case ErrorKind::Precondition: return "precondition";
    case ErrorKind::Domain: return "domain";
    case ErrorKind::SingularGram: return "singular-gram";
    case ErrorKind::SingularExpectation: return "singular-expectation";
    case ErrorKind::IntegratorFailure: return "integrator-failure";
    case ErrorKind::PurityDrift: return "purity-drift";
    case ErrorKind::EnergyDrift: return "energy-drift";
    case ErrorKind::UnderResolved: return "under-resolved";
    case ErrorKind::DimensionExceeded: return "dimension-exceeded";
    case ErrorKind::RiccatiBlowup: return "riccati-blowup";
    case ErrorKind::Degenerate: return "degenerate-tangent";
    case ErrorKind::Config: return "config";
    case ErrorKind::Numeric: return "numeric";
    }
    return "unknown";
}

Mat symplectic_form(int n)
{
    Mat s = Mat::Zero(2 * n, 2 * n);
    s.topRightCorner(n, n) = Mat::Identity(n, n);
    s.bottomLeftCorner(n, n) = -Mat::Identity(n, n);
    return s;
}

CMat wb_matrix(int n)
{
    const cplx I(0.0, 1.0);
    CMat w = CMat::Zero(2 * n, 2 * n);
    w.topLeftCorner(n, n) = CMat::Identity(n, n);
    w.topRightCorner(n, n) = CMat::Identity(n, n);
    w.bottomLeftCorner(n, n) = -I * CMat::Identity(n, n);
    w.bottomRightCorner(n, n) = I * CMat::Identity(n, n);
    return w;
}

TakagiFactorization takagi(const CMat& M)
{
    const Eigen::Index n = M.rows();
    if (M.cols() != n)
        throw Error(ErrorKind::Precondition, "takagi: matrix is not square");
    const double scale = std::max(1.0, M.norm());
    if ((M - M.transpose()).norm() > tol::symmetry * scale)
        throw Error(ErrorKind::Precondition, "takagi: matrix is not symmetric");

    // M conj(v) = d v  <=>  [[A, B], [B, -A]] (x; y) = d (x; y) with v = x + i y
    const Mat A = M.real();
    const Mat B = M.imag();
    Mat H(2 * n, 2 * n);
    H << A, B, B, -A;
    Eigen::SelfAdjointEigenSolver<Mat> es(H);
    const Vec& ev = es.eigenvalues();

    const double cut = tol::takagi_rank * std::max(1.0, ev.cwiseAbs().maxCoeff());
    CMat V(n, n);
    Vec d(n);
    Eigen::Index k = 0;
    for (Eigen::Index j = 2 * n - 1; j >= 0 && k < n; --j) {
        if (ev(j) <= cut) break;
        CVec v = es.eigenvectors().col(j).head(n).cast<cplx>()
                 + cplx(0, 1) * es.eigenvectors().col(j).tail(n).cast<cplx>();
        V.col(k) = v.normalized();
        d(k) = ev(j);
        ++k;
    }
    if (k < n) {
        // complete with an orthonormal basis of the null space of conj(M)
        CMat Q = CMat::Identity(n, n);
        if (k > 0) {
            Eigen::HouseholderQR<CMat> qr(V.leftCols(k).eval());
            Q = qr.householderQ();
        }
        for (Eigen::Index j = k; j < n; ++j) {
            V.col(j) = Q.col(j);
            d(j) = 0.0;
        }
    }
    for (Eigen::Index j = 0; j < n; ++j) {
        Eigen::Index imax = 0;
        V.col(j).cwiseAbs().maxCoeff(&imax);
        const cplx ph = V(imax, j) / std::abs(V(imax, j));
        if (d(j) > 0.0) {
            // v -> -v is the only freedom for a nondegenerate Takagi vector
            if (std::real(ph) < 0.0) V.col(j) *= -1.0;
        } else {
            V.col(j) *= std::conj(ph);
        }
    }
    TakagiFactorization out;
    out.d = d;
    out.U = V.transpose();
    if (n > 0 && std::real(out.U.determinant()) < 0.0) out.U.row(0) *= -1.0;
    out.s0 = std::real(out.U.adjoint().determinant()) >= 0.0 ? 1 : -1;
    return out;
}

double pfaffian(Mat A)
{
    const Eigen::Index n = A.rows();
    if (A.cols() != n)
        throw Error(ErrorKind::Precondition, "pfaffian: matrix is not square");
    const double scale = std::max(1.0, A.norm());
    if ((A + A.transpose()).norm() > tol::symmetry * scale)
        throw Error(ErrorKind::Precondition, "pfaffian: matrix is not antisymmetric");
    if (n % 2 == 1) return 0.0;
    if (n == 0) return 1.0;

    double pf = 1.0;
    for (Eigen::Index k = 0; k + 1 < n; k += 2) {
        const Eigen::Index m = n - k - 1;
        Vec x = A.col(k).tail(m);
        const double sigma = m > 1 ? x.tail(m - 1).squaredNorm() : 0.0;
        if (sigma > 0.0) {
            const double nrm = std::sqrt(x(0) * x(0) + sigma);
            const double alpha = x(0) > 0.0 ? -nrm : nrm;
            Vec v = x;
            v(0) -= alpha;
            v.normalize();
            auto blk = A.bottomRightCorner(m, m);
            Vec vb = blk.transpose() * v;
            blk.noalias() -= 2.0 * v * vb.transpose();
            Vec bv = blk * v;
            blk.noalias() -= 2.0 * bv * v.transpose();
            A.col(k).tail(m).setZero();
            A(k + 1, k) = alpha;
            A.row(k).tail(m).setZero();
            A(k, k + 1) = -alpha;
            pf = -pf;
        }
        pf *= A(k, k + 1);
        if (pf == 0.0) return 0.0;
    }
    return pf;
}

cplx pfaffian_complex(CMat A)
{
    const Eigen::Index n = A.rows();
    if (A.cols() != n)
        throw Error(ErrorKind::Precondition, "pfaffian: matrix is not square");
    const double scale = std::max(1.0, A.norm());
    if ((A + A.transpose()).norm() > tol::symmetry * scale)
        throw Error(ErrorKind::Precondition, "pfaffian: matrix is not antisymmetric");
    if (n % 2 == 1) return 0.0;

    cplx pf = 1.0;
    for (Eigen::Index k = 0; k + 1 < n; k += 2) {
        Eigen::Index p = 0;
        A.col(k).tail(n - k - 1).cwiseAbs().maxCoeff(&p);
        p += k + 1;
        if (p != k + 1) {
            A.row(k + 1).swap(A.row(p));
            A.col(k + 1).swap(A.col(p));
            pf = -pf;
        }
        const cplx piv = A(k, k + 1);
        if (piv == cplx(0.0)) return 0.0;
        pf *= piv;
        const Eigen::Index m = n - k - 2;
        if (m > 0) {
            CVec tau = A.row(k).tail(m).transpose() / piv;
            CVec u = A.col(k + 1).tail(m);
            A.bottomRightCorner(m, m).noalias() += tau * u.transpose() - u * tau.transpose();
        }
    }
    return pf;
}

bool symplectic_check(const Mat& S, double tolerance)
{
    if (S.rows() != S.cols() || S.rows() % 2 != 0) return false;
    const Mat sig = symplectic_form(static_cast<int>(S.rows() / 2));
    return (S * sig * S.transpose() - sig).norm() < tolerance;
}

double digamma(double z)
{
    if (!(z > 0.0)) throw Error(ErrorKind::Domain, "digamma: argument must be positive");
    return boost::math::digamma(z);
}

Mat matrix_sqrt_posdef(const Mat& M)
{
    if (M.rows() != M.cols())
        throw Error(ErrorKind::Precondition, "matrix_sqrt_posdef: matrix is not square");
    const double scale = std::max(1.0, M.norm());
    if ((M - M.transpose()).norm() > 1e-10 * scale)
        throw Error(ErrorKind::Precondition, "matrix_sqrt_posdef: matrix is not symmetric");
    Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (M + M.transpose()));
    const double emin = es.eigenvalues().minCoeff();
    if (emin <= tol::sqrt_min_eig) {
        std::ostringstream os;
        os << "matrix_sqrt_posdef: singular Gram matrix, eigenvalue " << emin;
        throw Error(ErrorKind::SingularGram, os.str());
    }
    Mat X = es.eigenvectors() * es.eigenvalues().cwiseSqrt().asDiagonal()
            * es.eigenvectors().transpose();
    return 0.5 * (X + X.transpose());
}

double purity_residual_boson(const Mat& gamma)
{
    const Mat sig = symplectic_form(static_cast<int>(gamma.rows() / 2));
    return (gamma * sig * gamma - sig).norm();
}

}  // namespace vg
