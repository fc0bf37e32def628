#pragma once

#include <vector>

#include "qsb/bridge.hpp"
#include "qsb/gmm.hpp"

namespace qsb {

// Mixture bridge with shared weights and index-paired endpoint components.
// component_betas holds the effective per-component diffusion after
// feasibility clamping; beta is the requested value.
struct CoupledMixtureBridge {
    Vector weights;
    std::vector<Gaussian> start;
    std::vector<Gaussian> end;
    double beta = 0.0;
    Vector component_betas;

    CoupledMixtureBridge() = default;
    CoupledMixtureBridge(Vector w, std::vector<Gaussian> s, std::vector<Gaussian> e,
                         double requested_beta, Vector effective_betas);

    Eigen::Index size() const { return weights.size(); }
    Eigen::Index dim() const { return start.empty() ? 0 : start.front().dim(); }
};

struct TrainConfig {
    int n_components = 10;
    double beta = 0.1;
    int em_steps_per_phase = 25;
    int outer_iters = 10;
    int batch = 1000;
    double clamp_factor = 0.95;  // eta in (0,1)
    std::uint64_t seed = 42;
    double tol = 1e-4;  // max absolute parameter change between outer iterations
};

// Mixture of the per-component quantum bridge marginals at time t.
GaussianMixture mixture_marginal(const CoupledMixtureBridge& bridge, double t);

struct TrainResult {
    CoupledMixtureBridge bridge;
    // Mean log-likelihood trace per EM phase, alternating pi0/pi1 phases.
    std::vector<std::vector<double>> phase_logliks;
    int outer_iters_run = 0;
    int clamped_components = 0;
};

// Alternating warm-started EM refits of the two endpoint mixtures with
// shared weights; components are paired by index.
TrainResult train_bridge(const Matrix& samples0, const Matrix& samples1,
                         const TrainConfig& config);

// Per-sample propagation through the bridge along t_grid. Each sample is
// assigned one component at the first grid time by responsibility sampling.
// With the default covariance-shaped noise the per-step marginals are exact:
//   x' = mu(t') + sqrt(1-2b) S(t') S(t)^{-1} (x - mu(t)) + sqrt(2b) S(t') xi.
// isotropic_noise switches to unit-covariance noise instead.
// Returns one n-by-dim matrix per grid time.
std::vector<Matrix> propagate_samples(const CoupledMixtureBridge& bridge, const Matrix& x0,
                                      const std::vector<double>& t_grid, Rng& rng,
                                      bool isotropic_noise = false);

}  // namespace qsb
