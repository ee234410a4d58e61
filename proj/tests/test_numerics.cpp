#include "doctest.h"
#include "fock.hpp"
#include "vargauss/numerics.hpp"

#include <random>

using namespace vg;

namespace {

CMat random_complex_symmetric(int n, std::mt19937_64& rng)
{
    std::normal_distribution<double> nd(0.0, 1.0);
    CMat M(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = i; j < n; ++j) M(i, j) = M(j, i) = cplx(nd(rng), nd(rng));
    return M;
}

Mat random_antisymmetric(int n, std::mt19937_64& rng)
{
    std::normal_distribution<double> nd(0.0, 1.0);
    Mat A = Mat::Zero(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) {
            A(i, j) = nd(rng);
            A(j, i) = -A(i, j);
        }
    return A;
}

double takagi_residual(const CMat& M, const TakagiFactorization& t)
{
    const CMat rec = t.U.transpose() * t.d.cast<cplx>().asDiagonal() * t.U;
    return (rec - M).norm() / std::max(1e-300, M.norm());
}

}  // namespace

TEST_CASE("takagi of a positive diagonal matrix sorts and permutes")
{
    CMat M = CMat::Zero(2, 2);
    M(0, 0) = 2.0;
    M(1, 1) = 3.0;
    const auto t = takagi(M);
    CHECK(t.d(0) == doctest::Approx(3.0).epsilon(1e-14));
    CHECK(t.d(1) == doctest::Approx(2.0).epsilon(1e-14));
    CHECK(std::abs(t.U(0, 1)) == doctest::Approx(1.0));
    CHECK(std::abs(t.U(1, 0)) == doctest::Approx(1.0));
    CHECK(t.s0 == 1);
    CHECK(takagi_residual(M, t) < 1e-12);
}

TEST_CASE("takagi of the exchange matrix")
{
    CMat M(2, 2);
    M << 0, 1, 1, 0;
    const auto t = takagi(M);
    CHECK(t.d(0) == doctest::Approx(1.0));
    CHECK(t.d(1) == doctest::Approx(1.0));
    CHECK(takagi_residual(M, t) < 1e-12);
    CHECK((t.U * t.U.adjoint() - CMat::Identity(2, 2)).norm() < 1e-12);
}

TEST_CASE("takagi reconstruction on random complex symmetric matrices")
{
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 20; ++trial) {
        const int n = 2 + trial % 6;
        const CMat M = random_complex_symmetric(n, rng);
        const auto t = takagi(M);
        CHECK(takagi_residual(M, t) < 1e-10);
        CHECK((t.U * t.U.adjoint() - CMat::Identity(n, n)).norm() < 1e-10);
        for (int k = 0; k < n; ++k) CHECK(t.d(k) >= 0.0);
        for (int k = 1; k < n; ++k) CHECK(t.d(k - 1) >= t.d(k));
    }
}

TEST_CASE("takagi handles rank-deficient input")
{
    std::mt19937_64 rng(12);
    std::normal_distribution<double> nd(0.0, 1.0);
    CVec v(5);
    for (int i = 0; i < 5; ++i) v(i) = cplx(nd(rng), nd(rng));
    const CMat M = v * v.transpose();
    const auto t = takagi(M);
    CHECK(takagi_residual(M, t) < 1e-10);
    CHECK(t.d(1) < 1e-10);
    CHECK((t.U * t.U.adjoint() - CMat::Identity(5, 5)).norm() < 1e-10);
}

TEST_CASE("takagi rejects non-symmetric input")
{
    CMat M(2, 2);
    M << 1, 2, 3, 4;
    CHECK_THROWS_AS(takagi(M), Error);
}

TEST_CASE("pfaffian small cases")
{
    Mat A(2, 2);
    A << 0, 2.5, -2.5, 0;
    CHECK(pfaffian(A) == doctest::Approx(2.5));

    Mat B = Mat::Zero(4, 4);
    B(0, 1) = 1; B(0, 2) = 2; B(0, 3) = 3; B(1, 2) = 4; B(1, 3) = 5; B(2, 3) = 6;
    B -= B.transpose().eval();
    CHECK(pfaffian(B) == doctest::Approx(8.0).epsilon(1e-13));
    CHECK(std::real(pfaffian_complex(B.cast<cplx>())) == doctest::Approx(8.0).epsilon(1e-13));

    CHECK(pfaffian(Mat::Zero(3, 3)) == 0.0);
    Mat C(2, 2);
    C << 0, 1, 1, 0;
    CHECK_THROWS_AS(pfaffian(C), Error);
}

TEST_CASE("pfaffian squared equals determinant")
{
    std::mt19937_64 rng(13);
    for (int n = 2; n <= 12; n += 2) {
        for (int trial = 0; trial < 5; ++trial) {
            const Mat A = random_antisymmetric(n, rng);
            const double pf = pfaffian(A);
            const double det = A.determinant();
            CHECK(std::abs(pf * pf - det) <= 1e-8 * std::abs(det));
            CHECK(std::abs(std::real(pfaffian_complex(A.cast<cplx>())) - pf) <= 1e-9 * std::abs(pf));
        }
    }
}

TEST_CASE("pfaffian transforms with the determinant of a congruence")
{
    std::mt19937_64 rng(14);
    std::normal_distribution<double> nd(0.0, 1.0);
    for (int n = 2; n <= 8; n += 2) {
        const Mat A = random_antisymmetric(n, rng);
        Mat B(n, n);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) B(i, j) = nd(rng);
        const Mat C = B.transpose() * A * B;
        const double lhs = pfaffian(0.5 * (C - C.transpose()));
        const double rhs = B.determinant() * pfaffian(A);
        CHECK(std::abs(lhs - rhs) <= 1e-9 * std::max(1.0, std::abs(rhs)));
    }
}

TEST_CASE("complex pfaffian squared equals determinant")
{
    std::mt19937_64 rng(15);
    std::normal_distribution<double> nd(0.0, 1.0);
    for (int n = 2; n <= 10; n += 2) {
        CMat A = CMat::Zero(n, n);
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j) {
                A(i, j) = cplx(nd(rng), nd(rng));
                A(j, i) = -A(i, j);
            }
        const cplx pf = pfaffian_complex(A);
        const cplx det = A.determinant();
        CHECK(std::abs(pf * pf - det) <= 1e-9 * std::abs(det));
    }
}

TEST_CASE("symplectic check")
{
    CHECK(symplectic_check(Mat::Identity(4, 4)));
    Mat S = Mat::Zero(2, 2);
    S(0, 0) = std::exp(0.7);
    S(1, 1) = std::exp(-0.7);
    CHECK(symplectic_check(S));
    CHECK_FALSE(symplectic_check(2.0 * Mat::Identity(2, 2)));
    std::mt19937_64 rng(16);
    CHECK(symplectic_check(fock::random_symplectic(3, 0.4, rng)));
    const Mat sig = symplectic_form(3);
    CHECK((sig.transpose() + sig).norm() == 0.0);
    CHECK((sig * sig + Mat::Identity(6, 6)).norm() == 0.0);
}

TEST_CASE("digamma reference values")
{
    const double euler = 0.57721566490153286061;
    CHECK(std::abs(digamma(1.0) + euler) < 1e-14);
    CHECK(std::abs(digamma(2.0) - (1.0 - euler)) < 1e-14);
    CHECK(std::abs(digamma(0.5) + 1.9635100260214234794) < 1e-13);
    CHECK(std::abs(digamma(3.7) - 1.1671535393615114409) < 1e-13);
    CHECK(std::abs(digamma(201.0) - 5.3008152832199116155) < 1e-12);
    CHECK(std::abs(digamma(57.25) - 4.0386685933571269338) < 1e-12);
    CHECK_THROWS_AS(digamma(0.0), Error);
    CHECK_THROWS_AS(digamma(-1.5), Error);
}

TEST_CASE("digamma recurrence on a grid")
{
    for (double z = 0.5; z <= 100.0; z += 0.37)
        CHECK(std::abs(digamma(z + 1.0) - digamma(z) - 1.0 / z) < 1e-12);
}

TEST_CASE("matrix square root of SPD matrices")
{
    CHECK((matrix_sqrt_posdef(Mat::Identity(3, 3)) - Mat::Identity(3, 3)).norm() < 1e-15);
    Mat D = Mat::Zero(2, 2);
    D(0, 0) = 4;
    D(1, 1) = 9;
    const Mat X = matrix_sqrt_posdef(D);
    CHECK(X(0, 0) == doctest::Approx(2.0));
    CHECK(X(1, 1) == doctest::Approx(3.0));

    std::mt19937_64 rng(17);
    std::normal_distribution<double> nd(0.0, 1.0);
    Mat B(10, 10);
    for (int i = 0; i < 10; ++i)
        for (int j = 0; j < 10; ++j) B(i, j) = nd(rng);
    const Mat M = B * B.transpose() + 0.1 * Mat::Identity(10, 10);
    const Mat R = matrix_sqrt_posdef(M);
    CHECK((R * R - M).norm() < 1e-10 * M.norm());
    CHECK((R - R.transpose()).norm() < 1e-14 * R.norm());

    Mat S = Mat::Zero(2, 2);
    S(0, 0) = 1.0;
    try {
        matrix_sqrt_posdef(S);
        CHECK(false);
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::SingularGram);
    }
}
