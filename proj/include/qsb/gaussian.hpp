#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

#include "qsb/rng.hpp"
#include "qsb/spd.hpp"

namespace qsb {

struct Gaussian {
    Vector mean;
    SpdMatrix cov;

    Gaussian() = default;
    Gaussian(Vector mu, SpdMatrix sigma) : mean(std::move(mu)), cov(std::move(sigma)) {
        if (mean.size() != cov.dim())
            throw std::invalid_argument("Gaussian: mean dimension " + std::to_string(mean.size()) +
                                        " does not match covariance dimension " +
                                        std::to_string(cov.dim()));
    }

    Eigen::Index dim() const { return mean.size(); }
};

inline double gaussian_logpdf(const Gaussian& g, const Vector& x) {
    if (x.size() != g.dim())
        throw std::invalid_argument("gaussian_logpdf: point dimension " + std::to_string(x.size()) +
                                    " does not match Gaussian dimension " + std::to_string(g.dim()));
    const Eigen::LLT<Matrix> llt(g.cov.mat());
    const Vector y = x - g.mean;
    const Vector z = llt.solve(y);
    double logdet = 0.0;
    for (Eigen::Index i = 0; i < g.dim(); ++i) logdet += std::log(llt.matrixL()(i, i));
    logdet *= 2.0;
    constexpr double log2pi = 1.8378770664093454836;
    return -0.5 * (static_cast<double>(g.dim()) * log2pi + logdet + y.dot(z));
}

inline double gaussian_pdf(const Gaussian& g, const Vector& x) {
    return std::exp(gaussian_logpdf(g, x));
}

// Draws via the principal covariance square root: x = mean + cov^{1/2} * xi.
inline Vector gaussian_sample(const Gaussian& g, Rng& rng) {
    const Matrix root = spd_sqrt(g.cov).mat();
    return g.mean + root * draw_standard_normal(g.dim(), rng);
}

// n draws, one per row.
inline Matrix gaussian_sample_n(const Gaussian& g, Eigen::Index n, Rng& rng) {
    const Matrix root = spd_sqrt(g.cov).mat();
    Matrix out(n, g.dim());
    for (Eigen::Index i = 0; i < n; ++i)
        out.row(i) = (g.mean + root * draw_standard_normal(g.dim(), rng)).transpose();
    return out;
}

}  // namespace qsb
