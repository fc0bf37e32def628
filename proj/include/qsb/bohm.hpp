#pragma once

#include <cmath>
#include <functional>
#include <sstream>
#include <stdexcept>

#include "qsb/gaussian.hpp"

namespace qsb {

// Gradient of the Gaussian log-density: -Sigma^{-1} (x - mu).
inline Vector score_gaussian(const Gaussian& g, const Vector& x) {
    if (x.size() != g.dim())
        throw std::invalid_argument("score_gaussian: dimension mismatch");
    return -spd_inverse(g.cov).mat() * (x - g.mean);
}

// Closed-form quantum potential of a Gaussian:
//   Q(x) = beta^2 [ Tr(Sigma^{-1}) - 1/2 (x-mu)^T (Sigma^{-1})^2 (x-mu) ].
inline double bohm_gaussian(const Gaussian& g, double beta, const Vector& x) {
    if (beta < 0.0) throw std::invalid_argument("bohm_gaussian: beta must be nonnegative");
    if (x.size() != g.dim()) throw std::invalid_argument("bohm_gaussian: dimension mismatch");
    const Matrix inv = spd_inverse(g.cov).mat();
    const Vector y = x - g.mean;
    const Vector z = inv * y;
    return beta * beta * (inv.trace() - 0.5 * z.squaredNorm());
}

// Expected quantum potential under the distribution itself:
//   E[Q] = beta^2 / 2 * Tr(Sigma^{-1}).
inline double internal_energy(const Gaussian& g, double beta) {
    if (beta < 0.0) throw std::invalid_argument("internal_energy: beta must be nonnegative");
    return 0.5 * beta * beta * spd_inverse(g.cov).trace();
}

using LogDensity = std::function<double(const Vector&)>;

// Finite-difference quantum potential -beta^2 (lap log p + 1/2 |grad log p|^2)
// for an arbitrary log-density. Per-axis step h*(1+|x_i|) keeps relative
// accuracy away from the origin. Second-order accurate in h.
inline double bohm_generic_fd(const LogDensity& logp, double beta, const Vector& x,
                              double h = 1e-4) {
    if (beta < 0.0) throw std::invalid_argument("bohm_generic_fd: beta must be nonnegative");
    if (h <= 0.0) throw std::invalid_argument("bohm_generic_fd: step must be positive");

    auto eval = [&](const Vector& p, Eigen::Index axis, int offset) {
        const double v = logp(p);
        if (!std::isfinite(v)) {
            std::ostringstream msg;
            msg << "bohm_generic_fd: non-finite log-density at stencil point (axis " << axis
                << ", offset " << offset << "h): [";
            for (Eigen::Index i = 0; i < p.size(); ++i) msg << (i ? "," : "") << p(i);
            msg << "]";
            throw std::runtime_error(msg.str());
        }
        return v;
    };

    const double center = eval(x, -1, 0);
    double laplacian = 0.0;
    double grad_sq = 0.0;
    Vector probe = x;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        const double hi = h * (1.0 + std::abs(x(i)));
        probe(i) = x(i) + hi;
        const double fp = eval(probe, i, +1);
        probe(i) = x(i) - hi;
        const double fm = eval(probe, i, -1);
        probe(i) = x(i);
        laplacian += (fp - 2.0 * center + fm) / (hi * hi);
        const double gi = (fp - fm) / (2.0 * hi);
        grad_sq += gi * gi;
    }
    return -beta * beta * (laplacian + 0.5 * grad_sq);
}

}  // namespace qsb
