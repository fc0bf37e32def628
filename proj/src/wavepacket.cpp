#include "qsb/wavepacket.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "qsb/log.hpp"

namespace qsb {

CoupledMixtureBridge::CoupledMixtureBridge(Vector w, std::vector<Gaussian> s,
                                           std::vector<Gaussian> e, double requested_beta,
                                           Vector effective_betas)
    : weights(std::move(w)),
      start(std::move(s)),
      end(std::move(e)),
      beta(requested_beta),
      component_betas(std::move(effective_betas)) {
    const auto k = weights.size();
    if (k == 0) throw std::invalid_argument("CoupledMixtureBridge: need at least one component");
    if (static_cast<Eigen::Index>(start.size()) != k ||
        static_cast<Eigen::Index>(end.size()) != k || component_betas.size() != k)
        throw std::invalid_argument("CoupledMixtureBridge: endpoint/weight count mismatch");
    if (std::abs(weights.sum() - 1.0) > 1e-12)
        throw std::invalid_argument("CoupledMixtureBridge: weights sum to " +
                                    std::to_string(weights.sum()) + ", expected 1");
    for (Eigen::Index i = 0; i < k; ++i)
        if (start[i].dim() != end[i].dim() || start[i].dim() != start[0].dim())
            throw std::invalid_argument("CoupledMixtureBridge: component dimensions differ");
}

namespace {

BridgeProblem component_problem(const CoupledMixtureBridge& bridge, Eigen::Index k) {
    try {
        return BridgeProblem(bridge.start[k], bridge.end[k], bridge.component_betas(k),
                             BridgeKind::Quantum);
    } catch (const std::invalid_argument& err) {
        throw std::invalid_argument("component " + std::to_string(k) + ": " + err.what());
    }
}

}  // namespace

GaussianMixture mixture_marginal(const CoupledMixtureBridge& bridge, double t) {
    if (t < 0.0 || t > 1.0)
        throw std::invalid_argument("mixture_marginal: t must lie in [0,1]");
    std::vector<Gaussian> comps;
    comps.reserve(bridge.size());
    for (Eigen::Index k = 0; k < bridge.size(); ++k) {
        const BridgeProblem problem = component_problem(bridge, k);
        comps.emplace_back(bridge_mean(problem, t), bridge_covariance(problem, t));
    }
    return GaussianMixture(bridge.weights, std::move(comps));
}

namespace {

Matrix draw_batch(const Matrix& samples, int batch, Rng& rng) {
    const Eigen::Index n = samples.rows();
    if (batch >= n) return samples;
    // Uniform without replacement: partial Fisher-Yates over the index set.
    std::vector<Eigen::Index> idx(n);
    std::iota(idx.begin(), idx.end(), Eigen::Index{0});
    for (int i = 0; i < batch; ++i) {
        const Eigen::Index j =
            i + static_cast<Eigen::Index>(draw_uniform(rng) * static_cast<double>(n - i));
        std::swap(idx[i], idx[std::min(j, n - 1)]);
    }
    Matrix out(batch, samples.cols());
    for (int i = 0; i < batch; ++i) out.row(i) = samples.row(idx[i]);
    return out;
}

double max_param_change(const GaussianMixture& a, const GaussianMixture& b) {
    double delta = (a.weights - b.weights).cwiseAbs().maxCoeff();
    for (Eigen::Index k = 0; k < a.size(); ++k) {
        delta = std::max(delta, (a.components[k].mean - b.components[k].mean)
                                    .cwiseAbs()
                                    .maxCoeff());
        delta = std::max(delta, (a.components[k].cov.mat() - b.components[k].cov.mat())
                                    .cwiseAbs()
                                    .maxCoeff());
    }
    return delta;
}

GaussianMixture with_weights(const GaussianMixture& mix, const Vector& weights) {
    return GaussianMixture(weights, mix.components);
}

}  // namespace

TrainResult train_bridge(const Matrix& samples0, const Matrix& samples1,
                         const TrainConfig& config) {
    if (samples0.rows() == 0 || samples1.rows() == 0)
        throw std::invalid_argument("train_bridge: both sample sets must be nonempty");
    if (samples0.cols() != samples1.cols())
        throw std::invalid_argument("train_bridge: sample dimensions differ");
    if (config.n_components > config.batch)
        throw std::invalid_argument("train_bridge: n_components " +
                                    std::to_string(config.n_components) + " exceeds batch " +
                                    std::to_string(config.batch));
    if (config.clamp_factor <= 0.0 || config.clamp_factor >= 1.0)
        throw std::invalid_argument("train_bridge: clamp_factor must lie in (0,1)");

    const int k = config.n_components;
    Rng rng = make_rng(config.seed);

    TrainResult result;
    std::optional<GaussianMixture> theta0;
    std::optional<GaussianMixture> theta1;

    EmConfig em;
    em.max_iters = config.em_steps_per_phase;
    em.seed = derive_seed(config.seed, 0xe0);

    for (int outer = 0; outer < config.outer_iters; ++outer) {
        const GaussianMixture prev0 = theta0.value_or(GaussianMixture());
        const GaussianMixture prev1 = theta1.value_or(GaussianMixture());

        // Phase (a): refit {alpha, start} on a fresh pi0 batch.
        {
            EmConfig phase = em;
            phase.seed = derive_seed(config.seed, 2 * outer + 1);
            if (theta0.has_value())
                phase.warm_start = theta1.has_value()
                                       ? with_weights(*theta0, theta1->weights)
                                       : *theta0;
            EmResult fit = gmm_fit_em(draw_batch(samples0, config.batch, rng), k, phase);
            theta0 = std::move(fit.mixture);
            result.phase_logliks.push_back(std::move(fit.mean_loglik));
        }

        // Phase (b): refit {alpha, end} on a fresh pi1 batch; the first pass
        // warm-starts from theta0, which establishes the index pairing.
        {
            EmConfig phase = em;
            phase.seed = derive_seed(config.seed, 2 * outer + 2);
            phase.warm_start = theta1.has_value() ? with_weights(*theta1, theta0->weights)
                                                  : *theta0;
            EmResult fit = gmm_fit_em(draw_batch(samples1, config.batch, rng), k, phase);
            theta1 = std::move(fit.mixture);
            result.phase_logliks.push_back(std::move(fit.mean_loglik));
        }

        result.outer_iters_run = outer + 1;
        if (outer > 0) {
            const double delta = std::max(max_param_change(prev0, *theta0),
                                          max_param_change(prev1, *theta1));
            if (delta < config.tol) break;
        }
    }

    // Shared weights: the final alpha is the last phase's result.
    const Vector alpha = theta1->weights;
    Vector betas(k);
    for (int c = 0; c < k; ++c) {
        const double bmax = beta_max(theta0->components[c].cov, theta1->components[c].cov);
        if (config.beta > bmax) {
            betas(c) = config.clamp_factor * bmax;
            ++result.clamped_components;
            log_info("train_bridge: clamped component " + std::to_string(c) + " beta from " +
                     std::to_string(config.beta) + " to " + std::to_string(betas(c)));
        } else {
            betas(c) = config.beta;
        }
    }
    result.bridge = CoupledMixtureBridge(alpha, theta0->components, theta1->components,
                                         config.beta, betas);
    return result;
}

std::vector<Matrix> propagate_samples(const CoupledMixtureBridge& bridge, const Matrix& x0,
                                      const std::vector<double>& t_grid, Rng& rng,
                                      bool isotropic_noise) {
    if (!x0.allFinite()) throw std::invalid_argument("propagate_samples: x0 has non-finite values");
    if (x0.cols() != bridge.dim())
        throw std::invalid_argument("propagate_samples: sample dimension mismatch");
    if (t_grid.size() < 1) throw std::invalid_argument("propagate_samples: empty time grid");
    for (std::size_t i = 0; i + 1 < t_grid.size(); ++i)
        if (t_grid[i + 1] <= t_grid[i])
            throw std::invalid_argument("propagate_samples: t_grid must be increasing");
    if (t_grid.front() < 0.0 || t_grid.back() > 1.0)
        throw std::invalid_argument("propagate_samples: t_grid must lie in [0,1]");
    for (Eigen::Index k = 0; k < bridge.size(); ++k)
        if (2.0 * bridge.component_betas(k) > 1.0)
            throw std::invalid_argument(
                "propagate_samples: component " + std::to_string(k) + " has 2*beta=" +
                std::to_string(2.0 * bridge.component_betas(k)) +
                " > 1, making sqrt(1-2*beta) imaginary");

    const Eigen::Index n = x0.rows();
    const Eigen::Index d = bridge.dim();
    const std::size_t steps = t_grid.size();

    // Per-component marginal parameters along the grid.
    std::vector<std::vector<Vector>> mu(bridge.size());
    std::vector<std::vector<Matrix>> root(bridge.size());      // Sigma(t)^{1/2}
    std::vector<std::vector<Matrix>> root_inv(bridge.size());  // Sigma(t)^{-1/2}
    for (Eigen::Index k = 0; k < bridge.size(); ++k) {
        const BridgeProblem problem = component_problem(bridge, k);
        mu[k].reserve(steps);
        root[k].reserve(steps);
        root_inv[k].reserve(steps);
        for (double t : t_grid) {
            mu[k].push_back(bridge_mean(problem, t));
            const SpdMatrix r = spd_sqrt(bridge_covariance(problem, t));
            root[k].push_back(r.mat());
            root_inv[k].push_back(spd_inverse(r).mat());
        }
    }

    // One-time component assignment at the first grid time.
    const GaussianMixture mix0 = mixture_marginal(bridge, t_grid.front());
    std::vector<Eigen::Index> comp(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const Vector w = responsibilities(mix0, x0.row(i).transpose());
        double u = draw_uniform(rng);
        Eigen::Index k = 0;
        for (; k < w.size() - 1; ++k) {
            u -= w(k);
            if (u <= 0.0) break;
        }
        comp[i] = k;
    }

    std::vector<Matrix> paths(steps);
    paths[0] = x0;
    for (std::size_t s = 0; s + 1 < steps; ++s) {
        paths[s + 1].resize(n, d);
        for (Eigen::Index i = 0; i < n; ++i) {
            const Eigen::Index k = comp[i];
            const double b = bridge.component_betas(k);
            const Vector y = paths[s].row(i).transpose() - mu[k][s];
            Vector next = mu[k][s + 1] +
                          std::sqrt(1.0 - 2.0 * b) * (root[k][s + 1] * (root_inv[k][s] * y));
            const Vector xi = draw_standard_normal(d, rng);
            next += std::sqrt(2.0 * b) * (isotropic_noise ? xi : Vector(root[k][s + 1] * xi));
            paths[s + 1].row(i) = next.transpose();
        }
    }
    return paths;
}

}  // namespace qsb
