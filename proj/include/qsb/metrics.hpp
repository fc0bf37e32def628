#pragma once

#include <vector>

#include "qsb/gaussian.hpp"

namespace qsb {

// Bures-Wasserstein distance between Gaussians:
//   W2^2 = |mu0 - mu1|^2 + Tr(S0 + S1 - 2 (S0^{1/2} S1 S0^{1/2})^{1/2}).
double w2_gaussian(const Gaussian& g0, const Gaussian& g1);

// Exact W2 between equal-size point multisets (rows are points) via
// minimal-cost perfect matching on squared Euclidean costs, square-rooted.
// Sizes must agree and stay within the exact-assignment regime (<= 2000).
double emd_samples(const Matrix& x, const Matrix& y);

// Minimal-cost assignment for a square cost matrix (Jonker-Volgenant style
// shortest augmenting paths); assignment[i] = column matched to row i.
std::vector<Eigen::Index> min_cost_assignment(const Matrix& cost);

struct Moments {
    Vector mean;
    SymMatrix cov;  // unbiased (n-1 divisor)
};
Moments moment_check(const Matrix& x);

}  // namespace qsb
