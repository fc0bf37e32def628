#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "helpers.hpp"
#include "qsb/bridge.hpp"
#include "qsb/bohm.hpp"

using namespace qsb;
using test::random_spd;
using test::rel_frobenius;

namespace {

Gaussian scalar_gaussian(double mean, double variance) {
    Vector mu(1);
    mu << mean;
    Matrix cov(1, 1);
    cov << variance;
    return Gaussian(mu, SpdMatrix(cov));
}

BridgeProblem scalar_problem(double v0, double v1, double beta,
                             BridgeKind kind = BridgeKind::Quantum) {
    return BridgeProblem(scalar_gaussian(0.0, v0), scalar_gaussian(0.0, v1), beta, kind);
}

BridgeProblem random_feasible(Eigen::Index n, Rng& rng, double beta_fraction = 0.5) {
    const Gaussian g0(draw_standard_normal(n, rng), SpdMatrix(random_spd(n, rng)));
    const Gaussian g1(draw_standard_normal(n, rng), SpdMatrix(random_spd(n, rng)));
    const double beta = beta_fraction * beta_max(g0.cov, g1.cov);
    return BridgeProblem(g0, g1, beta, BridgeKind::Quantum);
}

}  // namespace

TEST_CASE("beta_max closed cases") {
    CHECK(beta_max(SpdMatrix::identity(2), SpdMatrix(4.0 * Matrix::Identity(2, 2))) ==
          doctest::Approx(2.0));
    CHECK(beta_max(SpdMatrix::identity(3), SpdMatrix::identity(3)) == doctest::Approx(1.0));

    Matrix s0 = Matrix::Zero(2, 2);
    s0(0, 0) = 1.0;
    s0(1, 1) = 2.0;
    Matrix s1 = Matrix::Zero(2, 2);
    s1(0, 0) = 3.0;
    s1(1, 1) = 1.0;
    // Brute-force oracle: eigenvalues of S0^{1/2} S1 S0^{1/2}.
    const Matrix root0 = spd_sqrt(SpdMatrix(s0)).mat();
    const Vector evals = spd_eigen(SpdMatrix(root0 * s1 * root0)).eigenvalues;
    CHECK(beta_max(SpdMatrix(s0), SpdMatrix(s1)) == doctest::Approx(std::sqrt(evals(0))));
}

TEST_CASE("bridge_mean interpolates linearly") {
    Vector mu0(2), mu1(2);
    mu0 << 0.0, 0.0;
    mu1 << 2.0, 4.0;
    const Vector mid = bridge_mean(mu0, mu1, 0.5);
    CHECK(mid(0) == doctest::Approx(1.0));
    CHECK(mid(1) == doctest::Approx(2.0));
    CHECK((bridge_mean(mu0, mu1, 0.0) - mu0).norm() == doctest::Approx(0.0));
    CHECK((bridge_mean(mu0, mu1, 1.0) - mu1).norm() == doctest::Approx(0.0));

    Vector fixed(1);
    fixed << 1.0;
    CHECK(bridge_mean(fixed, fixed, 0.37)(0) == doctest::Approx(1.0));
}

TEST_CASE("bridge problem construction rejects infeasible quantum beta") {
    CHECK_THROWS_WITH_AS(scalar_problem(1.0, 4.0, 2.5), doctest::Contains("beta_max"),
                         std::invalid_argument);
    CHECK_THROWS_AS(
        BridgeProblem(scalar_gaussian(0, 1), scalar_gaussian(0, 1), 0.1,
                      BridgeKind::BenamouBrenierOT),
        std::invalid_argument);
}

TEST_CASE("bridge_covariance scalar values") {
    // Stationary identity.
    const BridgeProblem stationary = scalar_problem(1.0, 1.0, 0.0);
    CHECK(bridge_covariance(stationary, 0.37)(0, 0) == doctest::Approx(1.0));

    // Boundary condition at t=1.
    const BridgeProblem expanding = scalar_problem(1.0, 4.0, 1.0);
    CHECK(bridge_covariance(expanding, 1.0)(0, 0) == doctest::Approx(4.0));

    // Scalar evaluation of the quantum closed form at the midpoint:
    // ((1-t) + t sqrt(3))^2 + (t beta)^2 at t = 1/2.
    const double expected = std::pow(0.5 + 0.5 * std::sqrt(3.0), 2) + 0.25;
    CHECK(bridge_covariance(expanding, 0.5)(0, 0) == doctest::Approx(expected).epsilon(1e-12));

    // The same path satisfies the scalar quantum Riccati identity
    // sigma_ddot * sigma - sigma_dot^2 / 2 == 2 beta^2 exactly.
    for (const double t : {0.2, 0.5, 0.8}) {
        const double h = 1e-5;
        const double sigma = bridge_covariance(expanding, t)(0, 0);
        const double sigma_dot = bridge_covariance_dot(expanding, t)(0, 0);
        const double sigma_ddot = (bridge_covariance_dot(expanding, t + h)(0, 0) -
                                   bridge_covariance_dot(expanding, t - h)(0, 0)) /
                                  (2.0 * h);
        CHECK(sigma_ddot * sigma - 0.5 * sigma_dot * sigma_dot == doctest::Approx(2.0).epsilon(1e-6));
    }
}

TEST_CASE("boundary conditions hold for all kinds on random pairs") {
    Rng rng = make_rng(53);
    for (const Eigen::Index n : {1, 2, 5, 10}) {
        for (int trial = 0; trial < 5; ++trial) {
            const SpdMatrix s0(random_spd(n, rng));
            const SpdMatrix s1(random_spd(n, rng));
            const Gaussian g0(draw_standard_normal(n, rng), s0);
            const Gaussian g1(draw_standard_normal(n, rng), s1);
            const double beta = 0.5 * beta_max(s0, s1);
            for (const BridgeKind kind :
                 {BridgeKind::Quantum, BridgeKind::ClassicalSB, BridgeKind::BenamouBrenierOT}) {
                const double b = kind == BridgeKind::BenamouBrenierOT ? 0.0 : beta;
                const BridgeProblem problem(g0, g1, b, kind);
                CHECK(rel_frobenius(bridge_covariance(problem, 0.0).mat(), s0.mat()) < 1e-10);
                CHECK(rel_frobenius(bridge_covariance(problem, 1.0).mat(), s1.mat()) < 1e-10);
            }
        }
    }
}

TEST_CASE("beta zero collapses quantum and classical onto the OT solution") {
    Rng rng = make_rng(59);
    for (int trial = 0; trial < 10; ++trial) {
        const Gaussian g0(draw_standard_normal(3, rng), SpdMatrix(random_spd(3, rng)));
        const Gaussian g1(draw_standard_normal(3, rng), SpdMatrix(random_spd(3, rng)));
        const BridgeProblem quantum(g0, g1, 0.0, BridgeKind::Quantum);
        const BridgeProblem classical(g0, g1, 0.0, BridgeKind::ClassicalSB);
        const BridgeProblem ot(g0, g1, 0.0, BridgeKind::BenamouBrenierOT);
        for (const double t : {0.25, 0.5, 0.8}) {
            const Matrix reference = bridge_covariance(ot, t).mat();
            CHECK(rel_frobenius(bridge_covariance(quantum, t).mat(), reference) < 1e-10);
            CHECK(rel_frobenius(bridge_covariance(classical, t).mat(), reference) < 1e-10);
        }
    }
}

TEST_CASE("quantum and classical marginals differ at order beta^2") {
    Rng rng = make_rng(61);
    const Gaussian g0(draw_standard_normal(3, rng), SpdMatrix(random_spd(3, rng)));
    const Gaussian g1(draw_standard_normal(3, rng), SpdMatrix(random_spd(3, rng)));
    const double t = 0.7;
    auto gap = [&](double beta) {
        const BridgeProblem q(g0, g1, beta, BridgeKind::Quantum);
        const BridgeProblem c(g0, g1, beta, BridgeKind::ClassicalSB);
        return (bridge_covariance(q, t).mat() - bridge_covariance(c, t).mat()).norm();
    };
    const double ratio = gap(1e-2) / gap(1e-3);
    CHECK(ratio > 80.0);
    CHECK(ratio < 120.0);
}

TEST_CASE("bridge_covariance_dot matches finite differences and scalar oracle") {
    // Constant path.
    const BridgeProblem stationary = scalar_problem(1.0, 1.0, 0.0);
    CHECK(std::abs(bridge_covariance_dot(stationary, 0.4)(0, 0)) < 1e-12);

    // d/dt (1+t)^2 = 2 (1+t) for the scalar 1 -> 4 OT bridge.
    const BridgeProblem ot =
        scalar_problem(1.0, 4.0, 0.0, BridgeKind::BenamouBrenierOT);
    for (const double t : {0.1, 0.5, 0.9})
        CHECK(bridge_covariance_dot(ot, t)(0, 0) == doctest::Approx(2.0 * (1.0 + t)));

    Rng rng = make_rng(67);
    for (int trial = 0; trial < 8; ++trial) {
        const BridgeProblem problem = random_feasible(3, rng);
        const double t = draw_uniform(rng, 0.1, 0.9);
        const double h = 1e-5;
        const Matrix fd =
            (bridge_covariance(problem, t + h).mat() - bridge_covariance(problem, t - h).mat()) /
            (2.0 * h);
        const Matrix analytic = bridge_covariance_dot(problem, t).mat();
        CHECK((analytic - fd).cwiseAbs().maxCoeff() < 1e-6);
    }
    CHECK_THROWS_AS(
        bridge_covariance_dot(scalar_problem(1.0, 2.0, 0.1, BridgeKind::ClassicalSB), 0.5),
        std::invalid_argument);
}

TEST_CASE("drift matrix solves the symmetric continuity equation") {
    // Stationary bridge: C = 0.
    const BridgeProblem stationary = scalar_problem(2.0, 2.0, 0.0);
    CHECK(std::abs(drift_matrix_C(stationary, 0.3)(0, 0)) < 1e-12);

    // Commuting diagonal case: C = Sigma_dot Sigma^{-1}.
    Matrix d0 = Matrix::Zero(2, 2), d1 = Matrix::Zero(2, 2);
    d0(0, 0) = 1.0;
    d0(1, 1) = 2.0;
    d1(0, 0) = 3.0;
    d1(1, 1) = 1.5;
    const BridgeProblem diag(Gaussian(Vector::Zero(2), SpdMatrix(d0)),
                             Gaussian(Vector::Zero(2), SpdMatrix(d1)), 0.4,
                             BridgeKind::Quantum);
    const double t = 0.6;
    const Matrix c = drift_matrix_C(diag, t).mat();
    const Matrix oracle =
        bridge_covariance_dot(diag, t).mat() * spd_inverse(bridge_covariance(diag, t)).mat();
    CHECK(rel_frobenius(c, oracle) < 1e-9);

    Rng rng = make_rng(71);
    for (int trial = 0; trial < 8; ++trial) {
        const BridgeProblem problem = random_feasible(3, rng);
        const double s = draw_uniform(rng, 0.05, 0.95);
        const Matrix cs = drift_matrix_C(problem, s).mat();
        const Matrix sigma = bridge_covariance(problem, s).mat();
        const Matrix residual =
            0.5 * (cs * sigma + sigma * cs) - bridge_covariance_dot(problem, s).mat();
        CHECK(residual.norm() < 1e-9);
    }
}

TEST_CASE("drift velocity is affine with value mu_dot at the mean") {
    Rng rng = make_rng(73);
    const BridgeProblem problem = random_feasible(2, rng);
    const Vector mu_dot = problem.g1.mean - problem.g0.mean;
    const double t = 0.45;
    CHECK((drift_velocity(problem, bridge_mean(problem, t), t) - mu_dot).norm() < 1e-12);

    // Stationary bridge: v = 0 everywhere.
    const Gaussian g(Vector::Zero(2), SpdMatrix::identity(2));
    const BridgeProblem stationary(g, g, 0.0, BridgeKind::Quantum);
    CHECK(drift_velocity(stationary, draw_standard_normal(2, rng), 0.5).norm() < 1e-12);

    // C symmetric means the field is curl-free.
    const Matrix c = drift_matrix_C(problem, t).mat();
    CHECK(rel_frobenius(c, c.transpose()) < 1e-13);
}

TEST_CASE("phase_S closed cases") {
    // All terms vanish for the stationary problem at the mean.
    const Gaussian g(Vector::Zero(1), SpdMatrix::identity(1));
    const BridgeProblem stationary(g, g, 0.0, BridgeKind::Quantum);
    CHECK(std::abs(phase_S(stationary, Vector::Zero(1), 0.5)) < 1e-12);

    // Pure translation with constant unit variance:
    // S = mu_dot (x - mu(t)) + mu_dot^2 t / 2.
    const double a = 1.7;
    const BridgeProblem translate(scalar_gaussian(0.0, 1.0), scalar_gaussian(a, 1.0), 0.0,
                                  BridgeKind::Quantum);
    for (const double t : {0.2, 0.6, 0.9}) {
        Vector x(1);
        x << 0.8;
        const double expected = a * (x(0) - a * t) + 0.5 * a * a * t;
        CHECK(phase_S(translate, x, t) == doctest::Approx(expected).epsilon(1e-9));
    }
}

TEST_CASE("phase gradient equals the drift velocity") {
    Rng rng = make_rng(79);
    for (int trial = 0; trial < 6; ++trial) {
        const BridgeProblem problem = random_feasible(2, rng);
        const double t = draw_uniform(rng, 0.1, 0.9);
        const Vector x = bridge_mean(problem, t) + draw_standard_normal(2, rng);
        const Vector v = drift_velocity(problem, x, t);
        Vector probe = x;
        for (Eigen::Index i = 0; i < 2; ++i) {
            const double h = 1e-6;
            probe(i) = x(i) + h;
            const double fp = phase_S(problem, probe, t);
            probe(i) = x(i) - h;
            const double fm = phase_S(problem, probe, t);
            probe(i) = x(i);
            CHECK(std::abs((fp - fm) / (2.0 * h) - v(i)) < 1e-8 * std::max(1.0, std::abs(v(i))));
        }
    }
}

TEST_CASE("wavefunction definitional identities") {
    const BridgeProblem problem = scalar_problem(1.0, 4.0, 1.0);
    const double t = 0.4;
    Vector x(1);
    x << 0.3;
    const Wavefunction psi = wavefunction(problem, x, t);
    const Gaussian marginal(bridge_mean(problem, t), bridge_covariance(problem, t));
    CHECK(psi.magnitude * psi.magnitude == doctest::Approx(gaussian_pdf(marginal, x)));
    CHECK(psi.phase * 2.0 * problem.beta == doctest::Approx(phase_S(problem, x, t)));

    // Gaussian mode magnitude: (2 pi)^{-n/4} det(Sigma)^{-1/4}.
    const Wavefunction at_mode = wavefunction(problem, bridge_mean(problem, t), t);
    const double det = bridge_covariance(problem, t)(0, 0);
    CHECK(at_mode.magnitude ==
          doctest::Approx(std::pow(2.0 * M_PI, -0.25) * std::pow(det, -0.25)));

    CHECK_THROWS_AS(wavefunction(scalar_problem(1.0, 4.0, 0.0), x, t), std::invalid_argument);
}

TEST_CASE("continuity residual vanishes on closed-form marginals") {
    const Gaussian g(Vector::Zero(1), SpdMatrix::identity(1));
    const BridgeProblem stationary(g, g, 0.0, BridgeKind::Quantum);
    CHECK(continuity_residual(stationary, Vector::Zero(1), 0.5, 1e-4) < 1e-14);

    const BridgeProblem scalar = scalar_problem(1.0, 4.0, 1.0);
    Vector x(1);
    x << 0.3;
    const Gaussian marginal(bridge_mean(scalar, 0.5), bridge_covariance(scalar, 0.5));
    CHECK(continuity_residual(scalar, x, 0.5, 1e-4) < 1e-5 * gaussian_pdf(marginal, x));

    CHECK_THROWS_AS(continuity_residual(scalar, x, 1e-6, 1e-4), std::invalid_argument);

    Rng rng = make_rng(83);
    const BridgeProblem problem = random_feasible(2, rng);
    for (int trial = 0; trial < 50; ++trial) {
        const double t = draw_uniform(rng, 0.05, 0.95);
        Rng sample_rng = make_rng(derive_seed(83, trial));
        const Vector y = sample_marginal(problem, t, 1, sample_rng).row(0).transpose();
        const Gaussian m(bridge_mean(problem, t), bridge_covariance(problem, t));
        CHECK(continuity_residual(problem, y, t, 1e-4) < 1e-4 * gaussian_pdf(m, y));
    }
}

TEST_CASE("hamilton-jacobi residual stays small") {
    // beta = 0 pure translation: classical HJ with zero potential.
    const BridgeProblem translate(scalar_gaussian(0.0, 1.0), scalar_gaussian(2.0, 1.0), 0.0,
                                  BridgeKind::Quantum);
    Vector x(1);
    x << 0.4;
    CHECK(hje_residual(translate, x, 0.5, 1e-4) < 1e-7);

    const BridgeProblem scalar = scalar_problem(1.0, 4.0, 1.0);
    Rng rng = make_rng(89);
    for (int trial = 0; trial < 10; ++trial) {
        const double t = draw_uniform(rng, 0.05, 0.95);
        const Vector y = bridge_mean(scalar, t) + draw_standard_normal(1, rng);
        CHECK(hje_residual(scalar, y, t, 1e-4) < 1e-4);
    }

    // Commuting diagonal 2d problem.
    Matrix d0 = Matrix::Zero(2, 2), d1 = Matrix::Zero(2, 2);
    d0(0, 0) = 1.0;
    d0(1, 1) = 0.8;
    d1(0, 0) = 2.0;
    d1(1, 1) = 1.1;
    const BridgeProblem diag(Gaussian(Vector::Zero(2), SpdMatrix(d0)),
                             Gaussian(Vector::Ones(2), SpdMatrix(d1)), 0.5,
                             BridgeKind::Quantum);
    for (int trial = 0; trial < 10; ++trial) {
        const double t = draw_uniform(rng, 0.05, 0.95);
        const Vector y = bridge_mean(diag, t) + draw_standard_normal(2, rng);
        CHECK(hje_residual(diag, y, t, 1e-4) < 1e-4);
    }
}

TEST_CASE("quantum riccati residual stays small") {
    const Gaussian g(Vector::Zero(1), SpdMatrix::identity(1));
    const BridgeProblem stationary(g, g, 0.0, BridgeKind::Quantum);
    CHECK(riccati_residual(stationary, 0.5, 1e-4) < 1e-12);

    const BridgeProblem scalar = scalar_problem(1.0, 4.0, 1.0);
    CHECK(riccati_residual(scalar, 0.5, 1e-4) < 1e-4);

    Matrix d0 = Matrix::Zero(2, 2), d1 = Matrix::Zero(2, 2);
    d0(0, 0) = 1.0;
    d0(1, 1) = 2.0;
    d1(0, 0) = 1.5;
    d1(1, 1) = 0.9;
    const BridgeProblem diag(Gaussian(Vector::Zero(2), SpdMatrix(d0)),
                             Gaussian(Vector::Zero(2), SpdMatrix(d1)), 0.3,
                             BridgeKind::Quantum);
    for (const double t : {0.2, 0.5, 0.8}) CHECK(riccati_residual(diag, t, 1e-4) < 1e-4);

    CHECK_THROWS_AS(riccati_residual(scalar, 0.0, 1e-4), std::invalid_argument);
}

TEST_CASE("sample_marginal moments and determinism") {
    Rng rng = make_rng(97);
    const BridgeProblem problem = random_feasible(2, rng);
    const double t = 0.6;
    const Eigen::Index n = 100000;

    Rng sample_rng = make_rng(12345);
    const Matrix draws = sample_marginal(problem, t, n, sample_rng);
    const Vector mu = bridge_mean(problem, t);
    const Matrix sigma = bridge_covariance(problem, t).mat();

    const Vector emp_mean = draws.colwise().mean();
    for (Eigen::Index i = 0; i < 2; ++i) {
        const double bound = 4.0 * std::sqrt(sigma(i, i) / static_cast<double>(n));
        CHECK(std::abs(emp_mean(i) - mu(i)) < bound);
    }
    const Matrix centered = draws.rowwise() - emp_mean.transpose();
    const Matrix emp_cov = centered.transpose() * centered / static_cast<double>(n - 1);
    CHECK(rel_frobenius(emp_cov, sigma) < 0.05);

    Rng rng_a = make_rng(7);
    Rng rng_b = make_rng(7);
    const Matrix one_a = sample_marginal(problem, t, 1, rng_a);
    const Matrix one_b = sample_marginal(problem, t, 1, rng_b);
    CHECK((one_a - one_b).norm() == 0.0);
}
