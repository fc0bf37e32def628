#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "helpers.hpp"
#include "qsb/metrics.hpp"

using namespace qsb;
using test::random_gaussian;

TEST_CASE("w2_gaussian closed cases") {
    const Gaussian std1(Vector::Zero(1), SpdMatrix::identity(1));
    CHECK(w2_gaussian(std1, std1) == doctest::Approx(0.0));

    Vector two(1);
    two << 2.0;
    const Gaussian shifted(two, SpdMatrix::identity(1));
    CHECK(w2_gaussian(std1, shifted) == doctest::Approx(2.0));

    const Gaussian wide(Vector::Zero(1), SpdMatrix(4.0 * Matrix::Identity(1, 1)));
    CHECK(w2_gaussian(std1, wide) == doctest::Approx(1.0));
}

TEST_CASE("w2_gaussian symmetry and positivity") {
    Rng rng = make_rng(149);
    for (int trial = 0; trial < 10; ++trial) {
        const Gaussian a = random_gaussian(3, rng);
        const Gaussian b = random_gaussian(3, rng);
        const double ab = w2_gaussian(a, b);
        CHECK(ab >= 0.0);
        CHECK(ab == doctest::Approx(w2_gaussian(b, a)).epsilon(1e-10));
    }
}

TEST_CASE("emd_samples closed cases") {
    Matrix x(3, 2);
    x << 0.0, 0.0, 1.0, 1.0, 2.0, 0.5;
    CHECK(emd_samples(x, x) == doctest::Approx(0.0));

    Matrix a(1, 1), b(1, 1);
    a << 0.0;
    b << 3.0;
    CHECK(emd_samples(a, b) == doctest::Approx(3.0));
}

TEST_CASE("emd_samples errors") {
    Matrix a(2, 1), b(3, 1);
    a.setZero();
    b.setZero();
    CHECK_THROWS_AS(emd_samples(a, b), std::invalid_argument);
    Matrix big(2001, 1);
    big.setZero();
    CHECK_THROWS_WITH_AS(emd_samples(big, big), doctest::Contains("subsample"),
                         std::invalid_argument);
}

TEST_CASE("emd_samples is exactly symmetric and respects triangles") {
    Rng rng = make_rng(151);
    const Matrix x = draw_standard_normal(40, 2, rng);
    const Matrix y = draw_standard_normal(40, 2, rng).array() + 0.5;
    const Matrix z = 1.3 * draw_standard_normal(40, 2, rng);
    CHECK(emd_samples(x, y) == emd_samples(y, x));  // bitwise
    CHECK(emd_samples(x, z) <= emd_samples(x, y) + emd_samples(y, z) + 1e-12);
}

TEST_CASE("emd_samples approaches the closed-form Gaussian distance") {
    Rng rng = make_rng(157);
    Vector m1(2);
    m1 << 2.0, -1.0;
    const Gaussian a(Vector::Zero(2), SpdMatrix::identity(2));
    const Gaussian b(m1, SpdMatrix(0.5 * Matrix::Identity(2, 2)));
    const double closed = w2_gaussian(a, b);

    const Matrix xa = gaussian_sample_n(a, 1000, rng);
    const Matrix xb = gaussian_sample_n(b, 1000, rng);
    CHECK(emd_samples(xa, xb) == doctest::Approx(closed).epsilon(0.10));

    // The gap to the closed form shrinks as the sample size grows.
    double prev_gap = std::numeric_limits<double>::infinity();
    for (const Eigen::Index n : {100, 400, 1600}) {
        const Matrix sa = gaussian_sample_n(a, n, rng);
        const Matrix sb = gaussian_sample_n(b, n, rng);
        const double gap = std::abs(emd_samples(sa, sb) - closed);
        CHECK(gap < prev_gap + 0.05);  // allow sampling noise, demand the trend
        prev_gap = gap;
    }
}

TEST_CASE("min_cost_assignment solves a known matrix") {
    Matrix cost(3, 3);
    cost << 4.0, 1.0, 3.0,
            2.0, 0.0, 5.0,
            3.0, 2.0, 2.0;
    const auto assign = min_cost_assignment(cost);
    double total = 0.0;
    for (int i = 0; i < 3; ++i) total += cost(i, assign[i]);
    CHECK(total == doctest::Approx(5.0));  // 1 + 2 + 2
}

TEST_CASE("moment_check closed cases") {
    Matrix two(2, 1);
    two << -1.0, 1.0;
    const Moments m = moment_check(two);
    CHECK(m.mean(0) == doctest::Approx(0.0));
    CHECK(m.cov(0, 0) == doctest::Approx(2.0));  // unbiased n-1 divisor

    Matrix constant(5, 2);
    constant.rowwise() = Eigen::RowVector2d(3.0, 4.0);
    CHECK(moment_check(constant).cov.mat().norm() == doctest::Approx(0.0));
}

TEST_CASE("moment_check on a large normal sample") {
    Rng rng = make_rng(163);
    const Matrix draws = draw_standard_normal(100000, 1, rng);
    const Moments m = moment_check(draws);
    CHECK(std::abs(m.mean(0)) < 0.02);
    CHECK(std::abs(m.cov(0, 0) - 1.0) < 0.02);
}
