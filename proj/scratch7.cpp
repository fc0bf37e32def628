// scratch: criterion 7 diagnosis
#include <cstdio>
#include "helpers.hpp"
#include "qsb/gmm.hpp"
#include "qsb/metrics.hpp"
#include "qsb/wavepacket.hpp"

using namespace qsb;
using test::random_spd;

GaussianMixture synthetic_mixture_5d(double offset, Rng& rng) {
    Vector w(3);
    w << 0.3, 0.3, 0.4;
    std::vector<Gaussian> comps;
    for (int k = 0; k < 3; ++k) {
        Vector mean = 2.5 * draw_standard_normal(5, rng);
        mean(0) += offset;
        comps.emplace_back(mean, SpdMatrix(random_spd(5, rng, 0.3, 0.8)));
    }
    return GaussianMixture(w, std::move(comps));
}

int main() {
    const std::uint64_t seed = 1001;
    Rng data_rng = make_rng(derive_seed(seed, 0xd));
    const GaussianMixture pi0 = synthetic_mixture_5d(-6.0, data_rng);
    const GaussianMixture pi1 = synthetic_mixture_5d(6.0, data_rng);
    const Matrix train0 = gmm_sample(pi0, 2000, data_rng);
    const Matrix train1 = gmm_sample(pi1, 2000, data_rng);
    const Matrix held1 = gmm_sample(pi1, 1000, data_rng);
    const Matrix fresh1 = gmm_sample(pi1, 1000, data_rng);

    Rng eval = make_rng(derive_seed(seed, 0xe));
    std::printf("baseline emd(fresh1, held1) = %.4f\n", emd_samples(fresh1, held1));

    // Direct EM fit on train1 with kmeans++ init.
    EmConfig em;
    em.max_iters = 200;
    em.seed = 9;
    const EmResult direct = gmm_fit_em(train1, 6, em);
    const Matrix gen_direct = gmm_sample(direct.mixture, 1000, eval);
    std::printf("direct-EM emd(gen, held1)  = %.4f (final ll %.4f)\n",
                emd_samples(gen_direct, held1), direct.mean_loglik.back());

    // Trained bridge end marginal.
    TrainConfig cfg;
    cfg.n_components = 6;
    cfg.beta = 0.05;
    cfg.em_steps_per_phase = 120;
    cfg.outer_iters = 10;
    cfg.batch = 2000;
    cfg.seed = seed;
    const TrainResult result = train_bridge(train0, train1, cfg);
    const Matrix gen_bridge = gmm_sample(mixture_marginal(result.bridge, 1.0), 1000, eval);
    std::printf("bridge emd(gen@1, held1)   = %.4f (outer %d, clamped %d)\n",
                emd_samples(gen_bridge, held1), result.outer_iters_run,
                result.clamped_components);

    // End-mixture log-likelihood on held-out pi1 vs the direct fit.
    const GaussianMixture end_mix = mixture_marginal(result.bridge, 1.0);
    double ll_end = 0.0, ll_direct = 0.0, ll_truth = 0.0;
    for (Eigen::Index i = 0; i < held1.rows(); ++i) {
        ll_end += gmm_logpdf(end_mix, held1.row(i).transpose());
        ll_direct += gmm_logpdf(direct.mixture, held1.row(i).transpose());
        ll_truth += gmm_logpdf(pi1, held1.row(i).transpose());
    }
    std::printf("held-out mean ll: bridge-end %.4f, direct %.4f, truth %.4f\n",
                ll_end / held1.rows(), ll_direct / held1.rows(), ll_truth / held1.rows());
    return 0;
}
