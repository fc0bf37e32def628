#pragma once

#include <optional>
#include <vector>

#include "qsb/gaussian.hpp"

namespace qsb {

struct GaussianMixture {
    Vector weights;                    // K nonnegative entries summing to 1
    std::vector<Gaussian> components;  // K components, equal dimension

    GaussianMixture() = default;
    GaussianMixture(Vector w, std::vector<Gaussian> comps);

    Eigen::Index size() const { return weights.size(); }
    Eigen::Index dim() const { return components.empty() ? 0 : components.front().dim(); }
};

struct EmConfig {
    int max_iters = 200;
    double tol = 1e-6;   // relative change of mean log-likelihood
    double ridge = -1.0; // < 0 selects 1e-6 * (mean per-axis sample variance)
    std::optional<GaussianMixture> warm_start;  // absent = k-means++ init
    int restarts = 10;   // k-means++ restarts, best likelihood kept
    std::uint64_t seed = 42;
};

// log p(x) via log-sum-exp over log(alpha_k) + log N_k(x).
double gmm_logpdf(const GaussianMixture& mix, const Vector& x);

// Posterior component weights w_k(x); nonnegative, sum to 1.
Vector responsibilities(const GaussianMixture& mix, const Vector& x);

struct EmResult {
    GaussianMixture mixture;
    std::vector<double> mean_loglik;  // one entry per EM iteration
    int iterations = 0;
    int reseeds = 0;
};

// Standard EM over samples (one point per row). Deterministic given the seed.
EmResult gmm_fit_em(const Matrix& samples, int k, const EmConfig& config);

// Ancestral sampling: categorical on weights, then the component Gaussian.
Matrix gmm_sample(const GaussianMixture& mix, Eigen::Index n, Rng& rng);

// Quantum potential of the mixture: responsibility-weighted single-Gaussian
// potentials plus the mixing term
//   beta^2/2 [ |grad log p|^2 - sum_k w_k |grad log N_k|^2 ],
// which callers may omit (Algorithm-style contexts drop it).
double bohm_mixture(const GaussianMixture& mix, double beta, const Vector& x,
                    bool include_mixing = true);

}  // namespace qsb
