#pragma once

#include <cmath>
#include <vector>

#include "qsb/gaussian.hpp"
#include "qsb/rng.hpp"

namespace qsb::test {

// Random SPD matrix with eigenvalues in [lo, hi].
inline Matrix random_spd(Eigen::Index n, Rng& rng, double lo = 0.5, double hi = 2.5) {
    const Matrix a = draw_standard_normal(n, n, rng);
    const Eigen::HouseholderQR<Matrix> qr(a);
    const Matrix q = qr.householderQ();
    Vector evals(n);
    for (Eigen::Index i = 0; i < n; ++i) evals(i) = draw_uniform(rng, lo, hi);
    return q * evals.asDiagonal() * q.transpose();
}

inline Gaussian random_gaussian(Eigen::Index n, Rng& rng, double mean_scale = 2.0) {
    return Gaussian(mean_scale * draw_standard_normal(n, rng), SpdMatrix(random_spd(n, rng)));
}

inline double rel_frobenius(const Matrix& a, const Matrix& b) {
    const double denom = b.norm();
    return denom > 0.0 ? (a - b).norm() / denom : (a - b).norm();
}

// Two-dimensional two-moons point cloud.
inline Matrix make_moons(Eigen::Index n, Rng& rng, double noise = 0.05) {
    Matrix out(n, 2);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double angle = draw_uniform(rng, 0.0, M_PI);
        if (i % 2 == 0) {
            out(i, 0) = std::cos(angle);
            out(i, 1) = std::sin(angle);
        } else {
            out(i, 0) = 1.0 - std::cos(angle);
            out(i, 1) = 0.5 - std::sin(angle);
        }
        out(i, 0) += noise * draw_normal(rng);
        out(i, 1) += noise * draw_normal(rng);
    }
    return out;
}

// Two-dimensional swiss-roll spiral, scaled to roughly unit size.
inline Matrix make_swiss_roll(Eigen::Index n, Rng& rng, double noise = 0.05) {
    Matrix out(n, 2);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double t = 1.5 * M_PI * (1.0 + 2.0 * draw_uniform(rng));
        out(i, 0) = t * std::cos(t) / (4.5 * M_PI) + noise * draw_normal(rng);
        out(i, 1) = t * std::sin(t) / (4.5 * M_PI) + noise * draw_normal(rng);
    }
    return out;
}

}  // namespace qsb::test
