#include "qsb/bridge.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "qsb/bohm.hpp"

namespace qsb {

std::string to_string(BridgeKind kind) {
    switch (kind) {
        case BridgeKind::Quantum: return "quantum";
        case BridgeKind::ClassicalSB: return "classical_sb";
        case BridgeKind::BenamouBrenierOT: return "bb_ot";
    }
    throw std::logic_error("to_string: unknown BridgeKind");
}

BridgeKind bridge_kind_from_string(const std::string& name) {
    if (name == "quantum") return BridgeKind::Quantum;
    if (name == "classical_sb") return BridgeKind::ClassicalSB;
    if (name == "bb_ot") return BridgeKind::BenamouBrenierOT;
    throw std::invalid_argument("unknown bridge kind '" + name +
                                "' (expected quantum, classical_sb, or bb_ot)");
}

double beta_max(const SpdMatrix& sigma0, const SpdMatrix& sigma1) {
    if (sigma0.dim() != sigma1.dim())
        throw std::invalid_argument("beta_max: dimension mismatch " + std::to_string(sigma0.dim()) +
                                    " vs " + std::to_string(sigma1.dim()));
    const Matrix root0 = spd_sqrt(sigma0).mat();
    // The raw eigenvalue, not an SpdMatrix construction: the SPD clamp floor
    // would silently inflate the bound for near-degenerate covariances.
    const SymMatrix middle(root0 * sigma1.mat() * root0);
    Eigen::SelfAdjointEigenSolver<Matrix> es(middle.mat());
    if (es.info() != Eigen::Success)
        throw std::runtime_error("beta_max: eigensolver failed to converge");
    return std::sqrt(std::max(es.eigenvalues()(0), 0.0));
}

BridgeProblem::BridgeProblem(Gaussian start, Gaussian end, double diffusion, BridgeKind k)
    : g0(std::move(start)), g1(std::move(end)), beta(diffusion), kind(k) {
    if (g0.dim() != g1.dim())
        throw std::invalid_argument("BridgeProblem: endpoint dimensions differ: " +
                                    std::to_string(g0.dim()) + " vs " + std::to_string(g1.dim()));
    if (beta < 0.0) throw std::invalid_argument("BridgeProblem: beta must be nonnegative");
    if (kind == BridgeKind::BenamouBrenierOT && beta != 0.0)
        throw std::invalid_argument("BridgeProblem: Benamou-Brenier kind requires beta == 0");
    if (kind == BridgeKind::Quantum) {
        const double bmax = beta_max(g0.cov, g1.cov);
        if (beta > bmax) {
            std::ostringstream msg;
            msg << "BridgeProblem: infeasible quantum bridge, beta=" << beta
                << " exceeds beta_max=" << bmax;
            throw std::invalid_argument(msg.str());
        }
    }
}

Vector bridge_mean(const Vector& mu0, const Vector& mu1, double t) {
    if (mu0.size() != mu1.size())
        throw std::invalid_argument("bridge_mean: dimension mismatch");
    return mu0 + (mu1 - mu0) * t;
}

Vector bridge_mean(const BridgeProblem& problem, double t) {
    return bridge_mean(problem.g0.mean, problem.g1.mean, t);
}

namespace {

// Shared pieces of the closed-form covariance: the square roots of Sigma0 and
// of the kind-dependent inner matrix. All three kinds share the sandwich
// Sigma0^{-1/2} [(1-t) Sigma0 + t G]^2 Sigma0^{-1/2}. The Quantum kind adds
// +t^2 beta^2 Sigma0^{-1}: the complex-matrix construction
// Sigma = W Sigma0 W - 2 i beta t W with W = (1-t)I + t Omega expands to a
// quadratic correction in t, which is the form that solves the quantum
// Riccati and Hamilton-Jacobi systems (a linear-in-t correction does not).
// The ClassicalSB kind subtracts t beta^2 Sigma0^{-1}.
struct CovarianceParts {
    Matrix root0;      // Sigma0^{1/2}
    Matrix root0_inv;  // Sigma0^{-1/2}
    Matrix inner_root; // G
    Matrix sigma0_inv;
    BridgeKind kind;
    double beta_sq;
};

double correction_coeff(const CovarianceParts& parts, double t) {
    switch (parts.kind) {
        case BridgeKind::Quantum: return t * t * parts.beta_sq;
        case BridgeKind::ClassicalSB: return -t * parts.beta_sq;
        case BridgeKind::BenamouBrenierOT: return 0.0;
    }
    return 0.0;
}

double correction_coeff_dot(const CovarianceParts& parts, double t) {
    switch (parts.kind) {
        case BridgeKind::Quantum: return 2.0 * t * parts.beta_sq;
        case BridgeKind::ClassicalSB: return -parts.beta_sq;
        case BridgeKind::BenamouBrenierOT: return 0.0;
    }
    return 0.0;
}

CovarianceParts covariance_parts(const BridgeProblem& p) {
    CovarianceParts parts;
    const SpdMatrix root0 = spd_sqrt(p.g0.cov);
    parts.root0 = root0.mat();
    parts.root0_inv = spd_inverse(root0).mat();
    parts.sigma0_inv = spd_inverse(p.g0.cov).mat();
    parts.kind = p.kind;
    parts.beta_sq = p.beta * p.beta;
    const Matrix middle = parts.root0 * p.g1.cov.mat() * parts.root0;
    const Eigen::Index n = p.dim();
    Matrix inner;
    switch (p.kind) {
        case BridgeKind::Quantum:
            inner = middle - parts.beta_sq * Matrix::Identity(n, n);
            break;
        case BridgeKind::ClassicalSB:
            inner = middle + parts.beta_sq * Matrix::Identity(n, n);
            break;
        case BridgeKind::BenamouBrenierOT:
            inner = middle;
            break;
    }
    parts.inner_root = spd_sqrt(SpdMatrix(inner)).mat();
    return parts;
}

Matrix covariance_from_parts(const CovarianceParts& parts, const BridgeProblem& p, double t) {
    const Matrix a = (1.0 - t) * p.g0.cov.mat() + t * parts.inner_root;
    Matrix sigma = parts.root0_inv * a * a * parts.root0_inv;
    sigma += correction_coeff(parts, t) * parts.sigma0_inv;
    return sigma;
}

void require_drift_kind(const BridgeProblem& p, const char* op) {
    if (p.kind == BridgeKind::ClassicalSB)
        throw std::invalid_argument(std::string(op) +
                                    ": classical SB drift machinery is not supported; "
                                    "use the quantum or bb_ot kinds");
}

void require_interior(double t, double h, const char* op) {
    if (t < h || t > 1.0 - h)
        throw std::invalid_argument(std::string(op) + ": t=" + std::to_string(t) +
                                    " is too close to the boundary for step h=" +
                                    std::to_string(h));
}

// Integral of f_dot(s) = |mu_dot|^2/2 - beta^2 Tr(Sigma(s)^{-1}) over [0, t],
// composite trapezoid on a 1000-interval grid. The gauge is f(0) = 0.
double phase_offset(const BridgeProblem& p, const CovarianceParts& parts, double t) {
    constexpr int intervals = 1000;
    const double mu_dot_sq = (p.g1.mean - p.g0.mean).squaredNorm();
    const double b2 = p.beta * p.beta;
    auto f_dot = [&](double s) {
        const SpdMatrix sigma(covariance_from_parts(parts, p, s));
        return 0.5 * mu_dot_sq - b2 * spd_inverse(sigma).trace();
    };
    if (t == 0.0) return 0.0;
    const double step = t / intervals;
    double acc = 0.5 * (f_dot(0.0) + f_dot(t));
    for (int i = 1; i < intervals; ++i) acc += f_dot(i * step);
    return acc * step;
}

double phase_quadratic(const BridgeProblem& p, const CovarianceParts& parts, const Vector& x,
                       double t) {
    const Vector y = x - bridge_mean(p, t);
    const SpdMatrix sigma(covariance_from_parts(parts, p, t));
    const Matrix sigma_dot = [&] {
        const Matrix a = (1.0 - t) * p.g0.cov.mat() + t * parts.inner_root;
        const Matrix a_dot = parts.inner_root - p.g0.cov.mat();
        Matrix d = parts.root0_inv * (a_dot * a + a * a_dot) * parts.root0_inv;
        d += correction_coeff_dot(parts, t) * parts.sigma0_inv;
        return d;
    }();
    const SymMatrix c = spd_solve_sym_lyapunov(sigma, SymMatrix(2.0 * sigma_dot));
    return 0.25 * y.dot(c.mat() * y) + (p.g1.mean - p.g0.mean).dot(y);
}

}  // namespace

SpdMatrix bridge_covariance(const BridgeProblem& problem, double t) {
    const CovarianceParts parts = covariance_parts(problem);
    return SpdMatrix(covariance_from_parts(parts, problem, t));
}

SymMatrix bridge_covariance_dot(const BridgeProblem& problem, double t) {
    require_drift_kind(problem, "bridge_covariance_dot");
    const CovarianceParts parts = covariance_parts(problem);
    const Matrix a = (1.0 - t) * problem.g0.cov.mat() + t * parts.inner_root;
    const Matrix a_dot = parts.inner_root - problem.g0.cov.mat();
    Matrix d = parts.root0_inv * (a_dot * a + a * a_dot) * parts.root0_inv;
    d += correction_coeff_dot(parts, t) * parts.sigma0_inv;
    return SymMatrix(d);
}

SymMatrix drift_matrix_C(const BridgeProblem& problem, double t) {
    require_drift_kind(problem, "drift_matrix_C");
    const SpdMatrix sigma = bridge_covariance(problem, t);
    const SymMatrix sigma_dot = bridge_covariance_dot(problem, t);
    return spd_solve_sym_lyapunov(sigma, SymMatrix(2.0 * sigma_dot.mat()));
}

Vector drift_velocity(const BridgeProblem& problem, const Vector& x, double t) {
    require_drift_kind(problem, "drift_velocity");
    const Vector mu_dot = problem.g1.mean - problem.g0.mean;
    const SymMatrix c = drift_matrix_C(problem, t);
    return mu_dot + 0.5 * c.mat() * (x - bridge_mean(problem, t));
}

double phase_S(const BridgeProblem& problem, const Vector& x, double t) {
    require_drift_kind(problem, "phase_S");
    const CovarianceParts parts = covariance_parts(problem);
    return phase_quadratic(problem, parts, x, t) + phase_offset(problem, parts, t);
}

Wavefunction wavefunction(const BridgeProblem& problem, const Vector& x, double t) {
    require_drift_kind(problem, "wavefunction");
    if (problem.beta <= 0.0)
        throw std::invalid_argument("wavefunction: phase S/(2 beta) is undefined at beta == 0");
    const Gaussian marginal(bridge_mean(problem, t), bridge_covariance(problem, t));
    const double magnitude = std::sqrt(gaussian_pdf(marginal, x));
    const double phase = phase_S(problem, x, t) / (2.0 * problem.beta);
    return Wavefunction{magnitude, phase};
}

double continuity_residual(const BridgeProblem& problem, const Vector& x, double t, double h) {
    require_drift_kind(problem, "continuity_residual");
    require_interior(t, h, "continuity_residual");

    auto density = [&](const Vector& p, double s) {
        const Gaussian marginal(bridge_mean(problem, s), bridge_covariance(problem, s));
        return gaussian_pdf(marginal, p);
    };
    const double dp_dt = (density(x, t + h) - density(x, t - h)) / (2.0 * h);

    double divergence = 0.0;
    Vector probe = x;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        const double hx = 1e-5 * (1.0 + std::abs(x(i)));
        probe(i) = x(i) + hx;
        const double plus = drift_velocity(problem, probe, t)(i) * density(probe, t);
        probe(i) = x(i) - hx;
        const double minus = drift_velocity(problem, probe, t)(i) * density(probe, t);
        probe(i) = x(i);
        divergence += (plus - minus) / (2.0 * hx);
    }
    return std::abs(dp_dt + divergence);
}

double hje_residual(const BridgeProblem& problem, const Vector& x, double t, double h) {
    require_drift_kind(problem, "hje_residual");
    require_interior(t, h, "hje_residual");

    const double ds_dt = (phase_S(problem, x, t + h) - phase_S(problem, x, t - h)) / (2.0 * h);

    // The offset f(t) cancels in spatial differences, so the gradient only
    // needs the quadratic part.
    const CovarianceParts parts = covariance_parts(problem);
    double grad_sq = 0.0;
    Vector probe = x;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        const double hx = 1e-5 * (1.0 + std::abs(x(i)));
        probe(i) = x(i) + hx;
        const double plus = phase_quadratic(problem, parts, probe, t);
        probe(i) = x(i) - hx;
        const double minus = phase_quadratic(problem, parts, probe, t);
        probe(i) = x(i);
        const double gi = (plus - minus) / (2.0 * hx);
        grad_sq += gi * gi;
    }

    const Gaussian marginal(bridge_mean(problem, t), bridge_covariance(problem, t));
    const double q = bohm_gaussian(marginal, problem.beta, x);
    return std::abs(ds_dt + 0.5 * grad_sq + q);
}

double riccati_residual(const BridgeProblem& problem, double t, double h) {
    require_drift_kind(problem, "riccati_residual");
    require_interior(t, h, "riccati_residual");

    auto c_at = [&](double s) { return drift_matrix_C(problem, s).mat(); };
    auto sigma_inv_at = [&](double s) {
        return spd_inverse(bridge_covariance(problem, s)).mat();
    };

    const Matrix c = c_at(t);
    const Matrix sigma_inv = sigma_inv_at(t);
    const Matrix c_dot = (c_at(t + h) - c_at(t - h)) / (2.0 * h);
    const Matrix sigma_inv_dot = (sigma_inv_at(t + h) - sigma_inv_at(t - h)) / (2.0 * h);

    const double beta = problem.beta;
    // C_Q = C + 2 i beta Sigma^{-1}; residual of C_Q_dot + C_Q^2 / 2.
    const Matrix real_part = c_dot + 0.5 * c * c - 2.0 * beta * beta * sigma_inv * sigma_inv;
    const Matrix imag_part = 2.0 * beta * sigma_inv_dot + beta * (c * sigma_inv + sigma_inv * c);
    return std::sqrt(real_part.squaredNorm() + imag_part.squaredNorm());
}

Matrix sample_marginal(const BridgeProblem& problem, double t, Eigen::Index n, Rng& rng) {
    if (n < 1) throw std::invalid_argument("sample_marginal: need n >= 1");
    const Gaussian marginal(bridge_mean(problem, t), bridge_covariance(problem, t));
    return gaussian_sample_n(marginal, n, rng);
}

}  // namespace qsb
