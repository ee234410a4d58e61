#pragma once

#include <Eigen/Dense>
#include <complex>
#include <stdexcept>
#include <string>

namespace vg {

using cplx = std::complex<double>;
using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;
using CMat = Eigen::MatrixXcd;
using CVec = Eigen::VectorXcd;

enum class ErrorKind {
    Precondition,
    Domain,
    SingularGram,
    SingularExpectation,
    IntegratorFailure,
    PurityDrift,
    EnergyDrift,
    UnderResolved,
    DimensionExceeded,
    RiccatiBlowup,
    Degenerate,
    Config,
    Numeric
};

const char* error_kind_name(ErrorKind k);

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    ErrorKind kind() const { return kind_; }

private:
    ErrorKind kind_;
};

namespace tol {
inline constexpr double symmetry = 1e-12;
inline constexpr double symplectic = 1e-8;
inline constexpr double takagi_rank = 1e-13;
inline constexpr double sqrt_min_eig = 1e-12;
}  // namespace tol

// sigma = [[0, I], [-I, 0]] in (x_1..x_n, p_1..p_n) ordering.
Mat symplectic_form(int n);

// W_b = [[I, I], [-iI, iI]] so that R = W_b (b, b^dagger).
CMat wb_matrix(int n);

struct TakagiFactorization {
    Vec d;    // nonnegative, descending
    CMat U;   // unitary, M = U^T diag(d) U
    int s0 = 1;
};

TakagiFactorization takagi(const CMat& M);

double pfaffian(Mat A);

// Parlett-Reid elimination with pivoting, for complex antisymmetric input.
cplx pfaffian_complex(CMat A);

bool symplectic_check(const Mat& S, double tolerance = tol::symplectic);

double digamma(double z);

Mat matrix_sqrt_posdef(const Mat& M);

double purity_residual_boson(const Mat& gamma);

}  // namespace vg
