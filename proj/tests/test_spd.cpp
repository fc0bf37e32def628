#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "helpers.hpp"
#include "qsb/spd.hpp"

using namespace qsb;
using test::random_spd;
using test::rel_frobenius;

TEST_CASE("SymMatrix enforces exact symmetry") {
    Matrix a(2, 2);
    a << 1.0, 2.0, 3.0, 4.0;
    const SymMatrix s(a);
    CHECK(s(0, 1) == s(1, 0));
    CHECK(s(0, 1) == doctest::Approx(2.5));
    CHECK_THROWS_AS(SymMatrix(Matrix::Zero(2, 3)), std::invalid_argument);
}

TEST_CASE("SpdMatrix construction validates and clamps") {
    CHECK_NOTHROW(SpdMatrix(Matrix::Identity(3, 3)));
    Matrix neg = Matrix::Identity(2, 2);
    neg(1, 1) = -1.0;
    CHECK_THROWS_AS(SpdMatrix{neg}, std::invalid_argument);

    // A tiny negative eigenvalue inside the tolerance window is clamped up.
    Matrix nearly = Matrix::Identity(2, 2);
    nearly(1, 1) = -1e-14;
    const SpdMatrix clamped(nearly);
    CHECK(spd_eigen(clamped).eigenvalues(0) >= spd_clamp_floor * 0.999);
}

TEST_CASE("spd_eigen identity and diagonal cases") {
    const SpdEigen id = spd_eigen(SpdMatrix::identity(3));
    for (int i = 0; i < 3; ++i) CHECK(id.eigenvalues(i) == doctest::Approx(1.0));

    Matrix d = Matrix::Zero(2, 2);
    d(0, 0) = 4.0;
    d(1, 1) = 9.0;
    const SpdEigen de = spd_eigen(SpdMatrix(d));
    CHECK(de.eigenvalues(0) == doctest::Approx(4.0));
    CHECK(de.eigenvalues(1) == doctest::Approx(9.0));
}

TEST_CASE("spd_eigen reconstructs random SPD matrices") {
    Rng rng = make_rng(7);
    for (int trial = 0; trial < 20; ++trial) {
        const Matrix m = random_spd(5, rng);
        const SpdEigen e = spd_eigen(SpdMatrix(m));
        const Matrix rebuilt = e.basis * e.eigenvalues.asDiagonal() * e.basis.transpose();
        CHECK(rel_frobenius(rebuilt, m) < 1e-12);
        CHECK(rel_frobenius(e.basis * e.basis.transpose(), Matrix::Identity(5, 5)) < 1e-12);
    }
}

TEST_CASE("spd_sqrt trivial cases") {
    const SpdMatrix root_id = spd_sqrt(SpdMatrix::identity(3));
    CHECK(rel_frobenius(root_id.mat(), Matrix::Identity(3, 3)) < 1e-14);

    Matrix d = Matrix::Zero(2, 2);
    d(0, 0) = 4.0;
    d(1, 1) = 9.0;
    const SpdMatrix root = spd_sqrt(SpdMatrix(d));
    CHECK(root(0, 0) == doctest::Approx(2.0));
    CHECK(root(1, 1) == doctest::Approx(3.0));
    CHECK(root(0, 1) == doctest::Approx(0.0));
}

TEST_CASE("spd_sqrt squares back over random matrices and sizes") {
    Rng rng = make_rng(11);
    for (const Eigen::Index n : {1, 2, 5, 10}) {
        for (int trial = 0; trial < 25; ++trial) {
            const Matrix m = random_spd(n, rng);
            const Matrix root = spd_sqrt(SpdMatrix(m)).mat();
            CHECK(rel_frobenius(root * root, m) < 1e-10);
        }
    }
}

TEST_CASE("spd_sqrt scaling property") {
    Rng rng = make_rng(13);
    const Matrix m = random_spd(4, rng);
    const double c = 3.7;
    const Matrix lhs = spd_sqrt(SpdMatrix(c * m)).mat();
    const Matrix rhs = std::sqrt(c) * spd_sqrt(SpdMatrix(m)).mat();
    CHECK(rel_frobenius(lhs, rhs) < 1e-12);
}

TEST_CASE("Lyapunov solve identity case gives R/2") {
    Rng rng = make_rng(17);
    const SymMatrix r(draw_standard_normal(3, 3, rng));
    const SymMatrix c = spd_solve_sym_lyapunov(SpdMatrix::identity(3), r);
    CHECK(rel_frobenius(c.mat(), 0.5 * r.mat()) < 1e-13);
}

TEST_CASE("Lyapunov solve diagonal case R_ii / (2 lambda_i)") {
    Matrix sigma = Matrix::Zero(2, 2);
    sigma(0, 0) = 1.0;
    sigma(1, 1) = 3.0;
    Matrix r = Matrix::Zero(2, 2);
    r(0, 0) = 2.0;
    r(1, 1) = 6.0;
    const SymMatrix c = spd_solve_sym_lyapunov(SpdMatrix(sigma), SymMatrix(r));
    CHECK(c(0, 0) == doctest::Approx(1.0));
    CHECK(c(1, 1) == doctest::Approx(1.0));
    CHECK(c(0, 1) == doctest::Approx(0.0));
}

TEST_CASE("Lyapunov solve substitutes back on random pairs") {
    Rng rng = make_rng(19);
    for (int trial = 0; trial < 20; ++trial) {
        const SpdMatrix sigma(random_spd(4, rng));
        const SymMatrix r(draw_standard_normal(4, 4, rng));
        const Matrix c = spd_solve_sym_lyapunov(sigma, r).mat();
        const Matrix residual = c * sigma.mat() + sigma.mat() * c - r.mat();
        CHECK(residual.norm() <= 1e-10 * r.mat().norm());
        CHECK(rel_frobenius(c, c.transpose()) < 1e-13);
    }
}

TEST_CASE("Lyapunov solution is unique across repeated solves") {
    Rng rng = make_rng(23);
    const SpdMatrix sigma(random_spd(5, rng));
    const SymMatrix r(draw_standard_normal(5, 5, rng));
    const Matrix c1 = spd_solve_sym_lyapunov(sigma, r).mat();
    const Matrix c2 = spd_solve_sym_lyapunov(sigma, r).mat();
    CHECK(rel_frobenius(c1, c2) < 1e-12);
}
