#pragma once

#include <string>

#include "qsb/gaussian.hpp"

namespace qsb {

enum class BridgeKind { Quantum, ClassicalSB, BenamouBrenierOT };

std::string to_string(BridgeKind kind);
BridgeKind bridge_kind_from_string(const std::string& name);

// Feasibility bound for the quantum bridge: sqrt of the smallest eigenvalue
// of Sigma0^{1/2} Sigma1 Sigma0^{1/2}.
double beta_max(const SpdMatrix& sigma0, const SpdMatrix& sigma1);

// Endpoint Gaussians plus diffusion coefficient; validated at construction.
struct BridgeProblem {
    Gaussian g0;
    Gaussian g1;
    double beta = 0.0;
    BridgeKind kind = BridgeKind::Quantum;

    BridgeProblem() = default;
    BridgeProblem(Gaussian start, Gaussian end, double diffusion, BridgeKind k);

    Eigen::Index dim() const { return g0.dim(); }
};

// mu(t) = mu0 + (mu1 - mu0) t; identical for all three bridge kinds.
Vector bridge_mean(const Vector& mu0, const Vector& mu1, double t);
Vector bridge_mean(const BridgeProblem& problem, double t);

// Closed-form covariance marginal Sigma(t) for the problem's kind.
SpdMatrix bridge_covariance(const BridgeProblem& problem, double t);

// Analytic d/dt of bridge_covariance (Quantum and Benamou-Brenier kinds).
SymMatrix bridge_covariance_dot(const BridgeProblem& problem, double t);

// Symmetric C(t) with Sigma_dot = (C Sigma + Sigma C) / 2; fixes the drift
// as a gradient field.
SymMatrix drift_matrix_C(const BridgeProblem& problem, double t);

// v(x,t) = mu_dot + C(t) (x - mu(t)) / 2.
Vector drift_velocity(const BridgeProblem& problem, const Vector& x, double t);

// Quadratic phase S with grad S = v:
//   S = 1/4 (x-mu)^T C (x-mu) + mu_dot . (x-mu) + f(t),
//   f_dot = |mu_dot|^2 / 2 - beta^2 Tr(Sigma(t)^{-1}),  f(0) = 0.
double phase_S(const BridgeProblem& problem, const Vector& x, double t);

struct Wavefunction {
    double magnitude;  // sqrt(p(x,t))
    double phase;      // S(x,t) / (2 beta)
};
Wavefunction wavefunction(const BridgeProblem& problem, const Vector& x, double t);

// |d_t p + div(v p)| by central finite differences of the closed forms.
double continuity_residual(const BridgeProblem& problem, const Vector& x, double t, double h = 1e-4);

// |d_t S + |grad S|^2 / 2 + Q| with S by finite differences and the
// closed-form Gaussian quantum potential Q.
double hje_residual(const BridgeProblem& problem, const Vector& x, double t, double h = 1e-4);

// Frobenius norm of C_Q_dot + C_Q^2 / 2 for C_Q = C + 2 i beta Sigma^{-1},
// with the time derivative taken by central finite differences.
double riccati_residual(const BridgeProblem& problem, double t, double h = 1e-4);

// n i.i.d. draws (rows) from the marginal at time t.
Matrix sample_marginal(const BridgeProblem& problem, double t, Eigen::Index n, Rng& rng);

}  // namespace qsb
