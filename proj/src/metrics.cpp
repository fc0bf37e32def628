#include "qsb/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace qsb {

double w2_gaussian(const Gaussian& g0, const Gaussian& g1) {
    if (g0.dim() != g1.dim())
        throw std::invalid_argument("w2_gaussian: dimension mismatch " +
                                    std::to_string(g0.dim()) + " vs " + std::to_string(g1.dim()));
    const Matrix root0 = spd_sqrt(g0.cov).mat();
    const SpdMatrix middle(root0 * g1.cov.mat() * root0);
    const double cross = spd_sqrt(middle).trace();
    const double bures = g0.cov.trace() + g1.cov.trace() - 2.0 * cross;
    const double w2_sq = (g0.mean - g1.mean).squaredNorm() + std::max(bures, 0.0);
    return std::sqrt(w2_sq);
}

std::vector<Eigen::Index> min_cost_assignment(const Matrix& cost) {
    if (cost.rows() != cost.cols())
        throw std::invalid_argument("min_cost_assignment: cost matrix must be square");
    const Eigen::Index n = cost.rows();
    constexpr double inf = std::numeric_limits<double>::infinity();

    // Shortest augmenting path formulation with dual potentials (1-indexed
    // columns, column 0 is the virtual root).
    std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
    std::vector<Eigen::Index> match(n + 1, 0);  // match[j] = row assigned to column j
    std::vector<Eigen::Index> way(n + 1, 0);

    for (Eigen::Index i = 1; i <= n; ++i) {
        match[0] = i;
        Eigen::Index j0 = 0;
        std::vector<double> minv(n + 1, inf);
        std::vector<char> used(n + 1, 0);
        do {
            used[j0] = 1;
            const Eigen::Index i0 = match[j0];
            double delta = inf;
            Eigen::Index j1 = 0;
            for (Eigen::Index j = 1; j <= n; ++j) {
                if (used[j]) continue;
                const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (Eigen::Index j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[match[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (match[j0] != 0);
        do {
            const Eigen::Index j1 = way[j0];
            match[j0] = match[j1];
            j0 = j1;
        } while (j0 != 0);
    }

    std::vector<Eigen::Index> assignment(n, -1);
    for (Eigen::Index j = 1; j <= n; ++j) assignment[match[j] - 1] = j - 1;
    return assignment;
}

double emd_samples(const Matrix& x, const Matrix& y) {
    if (x.rows() != y.rows())
        throw std::invalid_argument("emd_samples: point sets differ in size: " +
                                    std::to_string(x.rows()) + " vs " + std::to_string(y.rows()));
    if (x.cols() != y.cols())
        throw std::invalid_argument("emd_samples: point dimensions differ");
    if (x.rows() > 2000)
        throw std::invalid_argument(
            "emd_samples: " + std::to_string(x.rows()) +
            " points exceed the exact-assignment regime (2000); subsample the inputs");
    const Eigen::Index n = x.rows();

    Matrix cost(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        cost.row(i) = (y.rowwise() - x.row(i)).rowwise().squaredNorm().transpose();

    const std::vector<Eigen::Index> assignment = min_cost_assignment(cost);

    // Order-independent summation keeps emd(x, y) == emd(y, x) exact.
    std::vector<double> matched(n);
    for (Eigen::Index i = 0; i < n; ++i) matched[i] = cost(i, assignment[i]);
    std::sort(matched.begin(), matched.end());
    const double total = std::accumulate(matched.begin(), matched.end(), 0.0);
    return std::sqrt(total / static_cast<double>(n));
}

Moments moment_check(const Matrix& x) {
    if (x.rows() < 2) throw std::invalid_argument("moment_check: need at least two points");
    const Vector mean = x.colwise().mean();
    const Matrix centered = x.rowwise() - mean.transpose();
    const Matrix cov = centered.transpose() * centered / static_cast<double>(x.rows() - 1);
    return Moments{mean, SymMatrix(cov)};
}

}  // namespace qsb
