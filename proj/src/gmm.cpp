#include "qsb/gmm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "qsb/log.hpp"

namespace qsb {

GaussianMixture::GaussianMixture(Vector w, std::vector<Gaussian> comps)
    : weights(std::move(w)), components(std::move(comps)) {
    if (weights.size() == 0 || components.empty())
        throw std::invalid_argument("GaussianMixture: need at least one component");
    if (weights.size() != static_cast<Eigen::Index>(components.size()))
        throw std::invalid_argument("GaussianMixture: weight/component count mismatch");
    if (weights.minCoeff() < 0.0)
        throw std::invalid_argument("GaussianMixture: weights must be nonnegative");
    if (std::abs(weights.sum() - 1.0) > 1e-12)
        throw std::invalid_argument("GaussianMixture: weights sum to " +
                                    std::to_string(weights.sum()) + ", expected 1");
    for (const Gaussian& g : components)
        if (g.dim() != components.front().dim())
            throw std::invalid_argument("GaussianMixture: component dimensions differ");
}

namespace {

// log(alpha_k) + log N_k(x) for all k.
Vector component_logliks(const GaussianMixture& mix, const Vector& x) {
    Vector out(mix.size());
    for (Eigen::Index k = 0; k < mix.size(); ++k)
        out(k) = std::log(mix.weights(k)) + gaussian_logpdf(mix.components[k], x);
    return out;
}

double logsumexp(const Vector& v) {
    const double m = v.maxCoeff();
    if (!std::isfinite(m)) return m;
    return m + std::log((v.array() - m).exp().sum());
}

}  // namespace

double gmm_logpdf(const GaussianMixture& mix, const Vector& x) {
    return logsumexp(component_logliks(mix, x));
}

Vector responsibilities(const GaussianMixture& mix, const Vector& x) {
    const Vector ll = component_logliks(mix, x);
    const double total = logsumexp(ll);
    Vector w = (ll.array() - total).exp();
    return w / w.sum();  // renormalize away rounding
}

namespace {

double data_variance_scale(const Matrix& samples) {
    const Vector mean = samples.colwise().mean();
    const Matrix centered = samples.rowwise() - mean.transpose();
    const double denom = std::max<Eigen::Index>(samples.rows() - 1, 1);
    return centered.array().square().colwise().sum().mean() / static_cast<double>(denom);
}

// k-means++ seeding followed by a hard-assignment moment init.
GaussianMixture kmeanspp_init(const Matrix& samples, int k, double ridge, Rng& rng) {
    const Eigen::Index n = samples.rows();
    const Eigen::Index d = samples.cols();

    std::vector<Eigen::Index> centers;
    centers.push_back(static_cast<Eigen::Index>(draw_uniform(rng) * n) % n);
    Vector dist2 = (samples.rowwise() - samples.row(centers[0])).rowwise().squaredNorm();
    while (static_cast<int>(centers.size()) < k) {
        const double total = dist2.sum();
        Eigen::Index pick = 0;
        if (total > 0.0) {
            double u = draw_uniform(rng) * total;
            for (; pick < n - 1; ++pick) {
                u -= dist2(pick);
                if (u <= 0.0) break;
            }
        } else {
            pick = static_cast<Eigen::Index>(draw_uniform(rng) * n) % n;
        }
        centers.push_back(pick);
        dist2 = dist2.cwiseMin(
            (samples.rowwise() - samples.row(pick)).rowwise().squaredNorm());
    }

    // Hard assignment to the nearest center, then per-cluster moments.
    std::vector<std::vector<Eigen::Index>> clusters(k);
    for (Eigen::Index i = 0; i < n; ++i) {
        Eigen::Index best = 0;
        double best_d = std::numeric_limits<double>::infinity();
        for (int c = 0; c < k; ++c) {
            const double dd = (samples.row(i) - samples.row(centers[c])).squaredNorm();
            if (dd < best_d) { best_d = dd; best = c; }
        }
        clusters[best].push_back(i);
    }

    const Vector global_mean = samples.colwise().mean();
    const Matrix global_centered = samples.rowwise() - global_mean.transpose();
    const Matrix global_cov =
        global_centered.transpose() * global_centered / std::max<double>(n - 1, 1) +
        ridge * Matrix::Identity(d, d);

    Vector weights(k);
    std::vector<Gaussian> comps;
    comps.reserve(k);
    for (int c = 0; c < k; ++c) {
        if (clusters[c].empty()) {
            weights(c) = 1.0;
            comps.emplace_back(samples.row(centers[c]).transpose(), SpdMatrix(global_cov));
            continue;
        }
        weights(c) = static_cast<double>(clusters[c].size());
        Vector mu = Vector::Zero(d);
        for (Eigen::Index i : clusters[c]) mu += samples.row(i).transpose();
        mu /= static_cast<double>(clusters[c].size());
        Matrix scatter = ridge * Matrix::Identity(d, d);
        for (Eigen::Index i : clusters[c]) {
            const Vector y = samples.row(i).transpose() - mu;
            scatter += y * y.transpose() / static_cast<double>(clusters[c].size());
        }
        comps.emplace_back(mu, SpdMatrix(scatter));
    }
    weights /= weights.sum();
    return GaussianMixture(weights, std::move(comps));
}

struct EmRun {
    GaussianMixture mixture;
    std::vector<double> mean_loglik;
    int iterations = 0;
    int reseeds = 0;
};

EmRun run_em(const Matrix& samples, int k, GaussianMixture mixture, const EmConfig& config,
             double ridge, Rng& rng) {
    const Eigen::Index n = samples.rows();
    const Eigen::Index d = samples.cols();

    EmRun run;
    run.mixture = std::move(mixture);
    Matrix resp(n, k);

    double prev_ll = -std::numeric_limits<double>::infinity();
    for (int iter = 0; iter < config.max_iters; ++iter) {
        // E-step, in log space.
        double ll_sum = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            const Vector logliks = component_logliks(run.mixture, samples.row(i).transpose());
            const double total = logsumexp(logliks);
            ll_sum += total;
            resp.row(i) = (logliks.array() - total).exp().transpose();
        }
        const double mean_ll = ll_sum / static_cast<double>(n);
        run.mean_loglik.push_back(mean_ll);
        run.iterations = iter + 1;

        // M-step.
        Vector counts = resp.colwise().sum();
        for (int c = 0; c < k; ++c) {
            if (counts(c) < 1e-10 * static_cast<double>(n)) {
                // Empty component: reseed at a random sample and continue.
                const Eigen::Index pick = static_cast<Eigen::Index>(draw_uniform(rng) * n) % n;
                resp.col(c).setZero();
                resp(pick, c) = 1.0;
                resp.row(pick) /= resp.row(pick).sum();
                counts = resp.colwise().sum();
                ++run.reseeds;
                log_info("gmm_fit_em: reseeded empty component " + std::to_string(c) +
                         " at sample " + std::to_string(pick));
            }
        }
        Vector new_weights = counts / static_cast<double>(n);
        new_weights /= new_weights.sum();
        std::vector<Gaussian> new_comps;
        new_comps.reserve(k);
        for (int c = 0; c < k; ++c) {
            const Vector mu = (resp.col(c).transpose() * samples).transpose() / counts(c);
            const Matrix centered = samples.rowwise() - mu.transpose();
            Matrix scatter = ridge * Matrix::Identity(d, d);
            scatter += centered.transpose() * resp.col(c).asDiagonal() * centered / counts(c);
            new_comps.emplace_back(mu, SpdMatrix(scatter));
        }
        run.mixture = GaussianMixture(new_weights, std::move(new_comps));

        if (iter > 0) {
            const double denom = std::max(std::abs(prev_ll), 1.0);
            if (std::abs(mean_ll - prev_ll) / denom < config.tol) break;
        }
        prev_ll = mean_ll;
    }
    return run;
}

}  // namespace

EmResult gmm_fit_em(const Matrix& samples, int k, const EmConfig& config) {
    if (k < 1) throw std::invalid_argument("gmm_fit_em: need k >= 1");
    if (samples.rows() < k)
        throw std::invalid_argument("gmm_fit_em: " + std::to_string(samples.rows()) +
                                    " samples cannot support " + std::to_string(k) +
                                    " components");
    if (!samples.allFinite())
        throw std::invalid_argument("gmm_fit_em: samples contain non-finite values");
    if (config.tol <= 0.0) throw std::invalid_argument("gmm_fit_em: tol must be positive");

    const double ridge =
        config.ridge >= 0.0 ? config.ridge : 1e-6 * data_variance_scale(samples);

    if (config.warm_start.has_value()) {
        const GaussianMixture& ws = *config.warm_start;
        if (ws.size() != k || ws.dim() != samples.cols())
            throw std::invalid_argument("gmm_fit_em: warm start shape mismatch");
        Rng rng = make_rng(config.seed);
        EmRun run = run_em(samples, k, ws, config, ridge, rng);
        return EmResult{std::move(run.mixture), std::move(run.mean_loglik), run.iterations,
                        run.reseeds};
    }

    EmRun best;
    double best_ll = -std::numeric_limits<double>::infinity();
    const int restarts = std::max(config.restarts, 1);
    for (int r = 0; r < restarts; ++r) {
        Rng rng = make_rng(derive_seed(config.seed, static_cast<std::uint64_t>(r)));
        GaussianMixture init = kmeanspp_init(samples, k, ridge, rng);
        EmRun run = run_em(samples, k, std::move(init), config, ridge, rng);
        if (run.mean_loglik.back() > best_ll) {
            best_ll = run.mean_loglik.back();
            best = std::move(run);
        }
    }
    return EmResult{std::move(best.mixture), std::move(best.mean_loglik), best.iterations,
                    best.reseeds};
}

Matrix gmm_sample(const GaussianMixture& mix, Eigen::Index n, Rng& rng) {
    if (n < 1) throw std::invalid_argument("gmm_sample: need n >= 1");
    std::vector<Matrix> roots;
    roots.reserve(mix.size());
    for (const Gaussian& g : mix.components) roots.push_back(spd_sqrt(g.cov).mat());

    Matrix out(n, mix.dim());
    for (Eigen::Index i = 0; i < n; ++i) {
        double u = draw_uniform(rng);
        Eigen::Index k = 0;
        for (; k < mix.size() - 1; ++k) {
            u -= mix.weights(k);
            if (u <= 0.0) break;
        }
        out.row(i) =
            (mix.components[k].mean + roots[k] * draw_standard_normal(mix.dim(), rng)).transpose();
    }
    return out;
}

double bohm_mixture(const GaussianMixture& mix, double beta, const Vector& x,
                    bool include_mixing) {
    if (beta < 0.0) throw std::invalid_argument("bohm_mixture: beta must be nonnegative");
    if (x.size() != mix.dim()) throw std::invalid_argument("bohm_mixture: dimension mismatch");

    const Vector w = responsibilities(mix, x);
    double q = 0.0;
    double weighted_score_sq = 0.0;
    Vector mix_score = Vector::Zero(mix.dim());
    for (Eigen::Index k = 0; k < mix.size(); ++k) {
        const Gaussian& g = mix.components[k];
        const Matrix inv = spd_inverse(g.cov).mat();
        const Vector score_k = -inv * (x - g.mean);
        q += w(k) * beta * beta * (inv.trace() - 0.5 * score_k.squaredNorm());
        mix_score += w(k) * score_k;
        weighted_score_sq += w(k) * score_k.squaredNorm();
    }
    if (include_mixing)
        q += 0.5 * beta * beta * (mix_score.squaredNorm() - weighted_score_sq);
    return q;
}

}  // namespace qsb
