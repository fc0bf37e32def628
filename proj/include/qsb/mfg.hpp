#pragma once

#include <array>
#include <vector>

#include "qsb/gaussian.hpp"

namespace qsb {

struct Ellipse {
    Eigen::Vector2d center;
    double a = 1.0;  // x semi-axis
    double b = 1.0;  // y semi-axis
};

struct Bounds2 {
    Eigen::Vector2d min;
    Eigen::Vector2d max;
};

struct Environment {
    Bounds2 bounds;
    std::vector<Ellipse> obstacles;
};

// Built-in crowd-navigation environments (by name: s_tunnel, u_tunnel),
// together with their endpoint populations.
struct NamedEnvironment {
    Environment env;
    Gaussian p0;
    Gaussian p1;
};
NamedEnvironment builtin_environment(const std::string& name);

// True iff p lies inside any obstacle or outside the bounds.
bool collision(const Environment& env, const Eigen::Vector2d& p);

struct RrtConfig {
    double step = 0.5;
    double radius = 2.0;  // rewiring radius
    double goal_bias = 0.05;
    int max_nodes = 5000;
};

// Asymptotically optimal sampling-based planner; returns a collision-free
// polyline from start to goal. Deterministic per generator state.
std::vector<Eigen::Vector2d> rrt_star(const Environment& env, const Eigen::Vector2d& start,
                                      const Eigen::Vector2d& goal, const RrtConfig& cfg,
                                      Rng& rng);

// Time-discretized diagonal-Gaussian trajectory. Row i holds the values at
// t_i = i/T; log_sigma stores log per-axis variances. mu.row(0) and
// mu.row(T) are fixed during optimization.
struct TrajectoryParams {
    Matrix mu;         // (T+1) x 2
    Matrix log_sigma;  // (T+1) x 2

    int timesteps() const { return static_cast<int>(mu.rows()) - 1; }
    Matrix variances() const { return log_sigma.array().exp(); }
};

// Arc-length-uniform resampling of the polyline into T+1 points, with
// constant per-axis variance sigma0.
TrajectoryParams init_trajectory(const std::vector<Eigen::Vector2d>& path, int T,
                                 const Eigen::Vector2d& sigma0);

struct Derivatives {
    Matrix mu_dot;     // T x 2, forward differences
    Matrix sigma_dot;  // T x 2, forward differences of the variances
};
Derivatives trajectory_derivatives(const TrajectoryParams& params, double dt);

// K = sum_{i<T} [ |mu_dot(t_i)|^2 + 1/4 Tr(Sigma^{-1} Sigma_dot Sigma_dot) ].
double kinetic_energy(const TrajectoryParams& params, double dt);

// U = beta^2 sum_{i<=T} Tr(Sigma(t_i)^{-1}).
double potential_energy(const TrajectoryParams& params, double beta);

struct EnergyGradients {
    Matrix d_mu;         // (T+1) x 2
    Matrix d_log_sigma;  // (T+1) x 2
};
EnergyGradients kinetic_energy_gradients(const TrajectoryParams& params, double dt);
EnergyGradients potential_energy_gradients(const TrajectoryParams& params, double beta);

// Mean over (timestep, sample) of the quadratic hinge
//   s(p) = max(0, 1 - min_o d_o(p))^2,  d_o(p) = ((x-cx)/a)^2 + ((y-cy)/b)^2;
// zero iff no sample penetrates any obstacle.
double obstacle_penalty(const TrajectoryParams& params, const Environment& env,
                        const std::vector<Matrix>& paths);

// Population update along the trajectory grid (diagonal specialization of
// the bridge sample update); one n-by-2 matrix per grid time.
std::vector<Matrix> propagate_population(const TrajectoryParams& params, const Matrix& x0,
                                         double beta, Rng& rng);

struct MfgConfig {
    double beta = 0.05;
    double lambda_obs = 5000.0;
    double lr = 1e-3;
    int iters = 2000;
    int batch = 1000;
    int T = 100;
    RrtConfig rrt;
    std::uint64_t seed = 42;
    double weight_decay = 0.0;
    bool pin_endpoint_variance = false;
};

struct MfgResult {
    TrajectoryParams params;
    std::vector<Eigen::Vector2d> rrt_path;
    // One row per evaluation: iter, kinetic, potential, penalty, total.
    std::vector<std::array<double, 5>> loss_curve;
};

// RRT* warm start, then AdamW descent on (mu[1..T-1], log_sigma) of
// K - U + lambda_obs * penalty with analytic energy gradients and a
// frozen-noise pathwise penalty gradient. Endpoint means stay fixed.
MfgResult optimize(const Environment& env, const Gaussian& p0, const Gaussian& p1,
                   const MfgConfig& cfg);

}  // namespace qsb
