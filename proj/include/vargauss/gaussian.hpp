#pragma once

#include "vargauss/numerics.hpp"

#include <vector>

namespace vg {

// Pure bosonic Gaussian state in the (x_1..x_n, p_1..p_n) quadrature ordering,
// x = b + b^dagger, p = i (b^dagger - b).
struct BosonGaussian {
    int n = 0;
    Vec delta;
    Mat gamma;
    double theta0 = 0.0;

    static BosonGaussian vacuum(int n);
    static BosonGaussian from_symplectic(const Mat& S, const Vec& delta);
    double purity_residual() const;
    void validate(double purity_tol = 1e-8) const;
};

// Real antisymmetric Majorana covariance, (Gamma_m)_ij = (i/2) <[A_i, A_j]>,
// A = (a_1.., a_2..), a_1 = c^dagger + c, a_2 = i (c^dagger - c).
struct FermionCovariance {
    int n = 0;
    Mat gamma_m;

    static FermionCovariance vacuum(int n);
    static FermionCovariance from_occupations(const std::vector<int>& occ);
    double purity_residual() const;
};

// Ordered product <R_{i1} R_{i2} ...>, complex because quadratures do not commute.
cplx wick_moment(const BosonGaussian& st, const std::vector<int>& idx);

// <exp(i sum_j beta_j n_j)> together with the pieces needed for insertions and
// for analytic derivatives with respect to Delta and Gamma.
struct ExpnBoson {
    cplx value;
    CMat P;           // (Gamma_aa + i cot(beta_a/2))^{-1}, zero-padded on inactive modes
    CMat gt_inv;      // inverse of (1 - f) Gamma + (1 + f), f = I_2 (x) diag(e^{i beta})
    CVec p_delta;     // P Delta
    int s0 = 1;       // branch sign relative to the principal det(Gamma_B / 2)^{-1/2}
    int n_active = 0;

    CVec grad_delta() const { return -value * p_delta; }
    CMat grad_gamma() const;
};

ExpnBoson expn_boson_eval(const BosonGaussian& st, const Vec& beta, bool want_sign = false);
cplx expn_boson(const BosonGaussian& st, const Vec& beta);

struct ExpnPoly {
    cplx value;       // <e^{i beta n}>
    cplx b_k;         // <e^{i beta n} b_k>
    cplx bdag_j_b_k;  // <e^{i beta n} b_j^dagger b_k>
};
ExpnPoly expn_boson_with_poly(const BosonGaussian& st, const Vec& beta, int j, int k);

// <e^{i beta n} Delta^T (Gamma~)^{-1} v>-type linear form and its derivatives.
struct LinearForm {
    cplx s;
    CVec d_delta;
    CMat d_gamma;
};
LinearForm linear_form(const ExpnBoson& ex, const Vec& delta, const CVec& v);

cplx displaced_exp(const BosonGaussian& st, const Vec& gamma);

cplx expn_fermion(const FermionCovariance& cov, const Vec& alpha);

CMat gamma_f_from_m(const FermionCovariance& cov);

// Nearest pure covariance via the matrix sign iteration on Gamma sigma.
Mat repurify(const Mat& gamma);

}  // namespace vg
