#include "qsb/mfg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "qsb/log.hpp"

namespace qsb {

NamedEnvironment builtin_environment(const std::string& name) {
    const Bounds2 bounds{Eigen::Vector2d(0.0, -10.0), Eigen::Vector2d(20.0, 10.0)};
    const Matrix var = 0.25 * Matrix::Identity(2, 2);
    if (name == "s_tunnel") {
        Environment env{bounds,
                        {Ellipse{Eigen::Vector2d(6.0, -4.5), 2.0, 10.0},
                         Ellipse{Eigen::Vector2d(14.0, 4.0), 2.0, 10.0}}};
        return NamedEnvironment{env,
                                Gaussian(Eigen::Vector2d(0.0, 0.0), SpdMatrix(var)),
                                Gaussian(Eigen::Vector2d(20.0, 0.0), SpdMatrix(var))};
    }
    if (name == "u_tunnel") {
        Environment env{bounds,
                        {Ellipse{Eigen::Vector2d(10.0, 8.0), 5.0, 5.0},
                         Ellipse{Eigen::Vector2d(10.0, -4.0), 5.0, 5.0}}};
        return NamedEnvironment{env,
                                Gaussian(Eigen::Vector2d(0.0, 0.0), SpdMatrix(var)),
                                Gaussian(Eigen::Vector2d(20.0, 4.0), SpdMatrix(var))};
    }
    throw std::invalid_argument("unknown environment '" + name +
                                "' (expected s_tunnel or u_tunnel)");
}

namespace {

double ellipse_functional(const Ellipse& e, const Eigen::Vector2d& p) {
    const double dx = (p.x() - e.center.x()) / e.a;
    const double dy = (p.y() - e.center.y()) / e.b;
    return dx * dx + dy * dy;
}

}  // namespace

bool collision(const Environment& env, const Eigen::Vector2d& p) {
    if (p.x() < env.bounds.min.x() || p.x() > env.bounds.max.x() || p.y() < env.bounds.min.y() ||
        p.y() > env.bounds.max.y())
        return true;
    for (const Ellipse& e : env.obstacles)
        if (ellipse_functional(e, p) <= 1.0) return true;
    return false;
}

namespace {

bool segment_free(const Environment& env, const Eigen::Vector2d& a, const Eigen::Vector2d& b,
                  double resolution) {
    const double len = (b - a).norm();
    const int checks = std::max(1, static_cast<int>(std::ceil(len / resolution)));
    for (int i = 0; i <= checks; ++i) {
        const double s = static_cast<double>(i) / checks;
        if (collision(env, a + s * (b - a))) return false;
    }
    return true;
}

}  // namespace

std::vector<Eigen::Vector2d> rrt_star(const Environment& env, const Eigen::Vector2d& start,
                                      const Eigen::Vector2d& goal, const RrtConfig& cfg,
                                      Rng& rng) {
    if (collision(env, start)) throw std::invalid_argument("rrt_star: start is in collision");
    if (collision(env, goal)) throw std::invalid_argument("rrt_star: goal is in collision");
    if ((goal - start).norm() < 1e-12) return {start};

    const double resolution = cfg.step / 4.0;

    struct Node {
        Eigen::Vector2d pos;
        int parent;
        double cost;
        std::vector<int> children;
    };
    std::vector<Node> nodes;
    nodes.push_back(Node{start, -1, 0.0, {}});

    int best_goal_parent = -1;
    double best_goal_cost = std::numeric_limits<double>::infinity();

    // Propagate a cost change to all descendants after rewiring.
    auto update_subtree = [&](int root) {
        std::vector<int> stack{root};
        while (!stack.empty()) {
            const int v = stack.back();
            stack.pop_back();
            for (int c : nodes[v].children) {
                nodes[c].cost = nodes[v].cost + (nodes[c].pos - nodes[v].pos).norm();
                stack.push_back(c);
            }
        }
    };

    while (static_cast<int>(nodes.size()) < cfg.max_nodes) {
        Eigen::Vector2d target;
        if (draw_uniform(rng) < cfg.goal_bias) {
            target = goal;
        } else {
            target = Eigen::Vector2d(
                draw_uniform(rng, env.bounds.min.x(), env.bounds.max.x()),
                draw_uniform(rng, env.bounds.min.y(), env.bounds.max.y()));
        }

        int nearest = 0;
        double nearest_d = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < nodes.size(); ++i) {
            const double d = (nodes[i].pos - target).squaredNorm();
            if (d < nearest_d) {
                nearest_d = d;
                nearest = static_cast<int>(i);
            }
        }
        const Eigen::Vector2d offset = target - nodes[nearest].pos;
        const double len = offset.norm();
        if (len < 1e-12) continue;
        const Eigen::Vector2d pos =
            nodes[nearest].pos + offset * std::min(1.0, cfg.step / len);
        if (collision(env, pos) || !segment_free(env, nodes[nearest].pos, pos, resolution))
            continue;

        // Choose the lowest-cost parent among neighbors within the rewiring radius.
        std::vector<int> near;
        for (std::size_t i = 0; i < nodes.size(); ++i)
            if ((nodes[i].pos - pos).norm() <= cfg.radius) near.push_back(static_cast<int>(i));
        int parent = nearest;
        double cost = nodes[nearest].cost + (pos - nodes[nearest].pos).norm();
        for (int i : near) {
            const double c = nodes[i].cost + (pos - nodes[i].pos).norm();
            if (c < cost && segment_free(env, nodes[i].pos, pos, resolution)) {
                cost = c;
                parent = i;
            }
        }
        const int node_id = static_cast<int>(nodes.size());
        nodes.push_back(Node{pos, parent, cost, {}});
        nodes[parent].children.push_back(node_id);

        // Rewire neighbors through the new node where that shortens them.
        for (int i : near) {
            const double c = cost + (nodes[i].pos - pos).norm();
            if (c + 1e-12 < nodes[i].cost && segment_free(env, pos, nodes[i].pos, resolution)) {
                auto& siblings = nodes[nodes[i].parent].children;
                siblings.erase(std::find(siblings.begin(), siblings.end(), i));
                nodes[i].parent = node_id;
                nodes[i].cost = c;
                nodes[node_id].children.push_back(i);
                update_subtree(i);
            }
        }

        if ((pos - goal).norm() <= cfg.step && segment_free(env, pos, goal, resolution)) {
            const double goal_cost = cost + (pos - goal).norm();
            if (goal_cost < best_goal_cost) {
                best_goal_cost = goal_cost;
                best_goal_parent = node_id;
            }
        }
    }

    if (best_goal_parent < 0)
        throw std::runtime_error("rrt_star: no path found within " +
                                 std::to_string(nodes.size()) + " tree nodes");

    // Re-read the best connection cost: rewiring may have improved it.
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        const double d = (nodes[i].pos - goal).norm();
        if (d <= cfg.step && nodes[i].cost + d < best_goal_cost &&
            segment_free(env, nodes[i].pos, goal, resolution)) {
            best_goal_cost = nodes[i].cost + d;
            best_goal_parent = static_cast<int>(i);
        }
    }

    std::vector<Eigen::Vector2d> path{goal};
    for (int v = best_goal_parent; v >= 0; v = nodes[v].parent) path.push_back(nodes[v].pos);
    std::reverse(path.begin(), path.end());
    return path;
}

TrajectoryParams init_trajectory(const std::vector<Eigen::Vector2d>& path, int T,
                                 const Eigen::Vector2d& sigma0) {
    if (path.size() < 2) throw std::invalid_argument("init_trajectory: need at least two points");
    if (T < 1) throw std::invalid_argument("init_trajectory: need T >= 1");
    if (sigma0.minCoeff() <= 0.0)
        throw std::invalid_argument("init_trajectory: variances must be positive");

    std::vector<double> cumulative(path.size(), 0.0);
    for (std::size_t i = 1; i < path.size(); ++i)
        cumulative[i] = cumulative[i - 1] + (path[i] - path[i - 1]).norm();
    const double total = cumulative.back();

    TrajectoryParams params;
    params.mu.resize(T + 1, 2);
    params.log_sigma.resize(T + 1, 2);
    params.log_sigma.rowwise() = sigma0.array().log().matrix().transpose();

    for (int i = 0; i <= T; ++i) {
        const double target = total * static_cast<double>(i) / T;
        if (total == 0.0) {
            params.mu.row(i) = path.front().transpose();
            continue;
        }
        std::size_t seg = 0;
        while (seg + 2 < path.size() && cumulative[seg + 1] < target) ++seg;
        const double seg_len = cumulative[seg + 1] - cumulative[seg];
        const double s = seg_len > 0.0 ? (target - cumulative[seg]) / seg_len : 0.0;
        params.mu.row(i) =
            (path[seg] + std::clamp(s, 0.0, 1.0) * (path[seg + 1] - path[seg])).transpose();
    }
    return params;
}

Derivatives trajectory_derivatives(const TrajectoryParams& params, double dt) {
    const int T = params.timesteps();
    if (T < 1) throw std::invalid_argument("trajectory_derivatives: need T >= 1");
    const Matrix var = params.variances();
    Derivatives d;
    d.mu_dot = (params.mu.bottomRows(T) - params.mu.topRows(T)) / dt;
    d.sigma_dot = (var.bottomRows(T) - var.topRows(T)) / dt;
    return d;
}

double kinetic_energy(const TrajectoryParams& params, double dt) {
    const Derivatives d = trajectory_derivatives(params, dt);
    const Matrix var = params.variances();
    const int T = params.timesteps();
    double k = 0.0;
    for (int i = 0; i < T; ++i) {
        k += d.mu_dot.row(i).squaredNorm();
        k += 0.25 * (d.sigma_dot.row(i).array().square() / var.row(i).array()).sum();
    }
    return k;
}

double potential_energy(const TrajectoryParams& params, double beta) {
    const Matrix var = params.variances();
    return beta * beta * var.array().inverse().sum();
}

EnergyGradients kinetic_energy_gradients(const TrajectoryParams& params, double dt) {
    const int T = params.timesteps();
    const Matrix var = params.variances();
    const double inv_dt2 = 1.0 / (dt * dt);

    EnergyGradients g;
    g.d_mu = Matrix::Zero(T + 1, 2);
    g.d_log_sigma = Matrix::Zero(T + 1, 2);

    for (int i = 0; i < T; ++i) {
        const Eigen::RowVector2d dmu = params.mu.row(i + 1) - params.mu.row(i);
        g.d_mu.row(i + 1) += 2.0 * inv_dt2 * dmu;
        g.d_mu.row(i) -= 2.0 * inv_dt2 * dmu;

        for (int ax = 0; ax < 2; ++ax) {
            const double s = var(i, ax);
            const double sn = var(i + 1, ax);
            const double ds = sn - s;
            // d/ds_i of (ds^2 / s_i): -2 ds / s_i - ds^2 / s_i^2; d/ds_{i+1}: 2 ds / s_i.
            const double d_si = 0.25 * inv_dt2 * (-2.0 * ds / s - ds * ds / (s * s));
            const double d_sn = 0.25 * inv_dt2 * (2.0 * ds / s);
            g.d_log_sigma(i, ax) += d_si * s;
            g.d_log_sigma(i + 1, ax) += d_sn * sn;
        }
    }
    return g;
}

EnergyGradients potential_energy_gradients(const TrajectoryParams& params, double beta) {
    const Matrix var = params.variances();
    EnergyGradients g;
    g.d_mu = Matrix::Zero(var.rows(), 2);
    // dU/ds = -beta^2 / s^2, chained through s = exp(log_sigma).
    g.d_log_sigma = (-beta * beta * var.array().inverse()).matrix();
    return g;
}

namespace {

// Hinge value and its gradient at a point.
double penalty_at(const Environment& env, const Eigen::Vector2d& p, Eigen::Vector2d* grad) {
    double dmin = std::numeric_limits<double>::infinity();
    const Ellipse* closest = nullptr;
    for (const Ellipse& e : env.obstacles) {
        const double d = ellipse_functional(e, p);
        if (d < dmin) {
            dmin = d;
            closest = &e;
        }
    }
    if (closest == nullptr || dmin >= 1.0) {
        if (grad != nullptr) grad->setZero();
        return 0.0;
    }
    const double hinge = 1.0 - dmin;
    if (grad != nullptr) {
        const Eigen::Vector2d d_grad(2.0 * (p.x() - closest->center.x()) / (closest->a * closest->a),
                                     2.0 * (p.y() - closest->center.y()) / (closest->b * closest->b));
        *grad = -2.0 * hinge * d_grad;
    }
    return hinge * hinge;
}

}  // namespace

double obstacle_penalty(const TrajectoryParams& params, const Environment& env,
                        const std::vector<Matrix>& paths) {
    if (static_cast<int>(paths.size()) != params.timesteps() + 1)
        throw std::invalid_argument("obstacle_penalty: paths do not span the trajectory grid");
    double total = 0.0;
    std::size_t count = 0;
    for (const Matrix& step : paths) {
        for (Eigen::Index i = 0; i < step.rows(); ++i)
            total += penalty_at(env, step.row(i).transpose(), nullptr);
        count += static_cast<std::size_t>(step.rows());
    }
    return total / static_cast<double>(count);
}

std::vector<Matrix> propagate_population(const TrajectoryParams& params, const Matrix& x0,
                                         double beta, Rng& rng) {
    if (2.0 * beta > 1.0)
        throw std::invalid_argument("propagate_population: 2*beta=" + std::to_string(2.0 * beta) +
                                    " > 1 makes sqrt(1-2*beta) imaginary");
    if (x0.cols() != 2) throw std::invalid_argument("propagate_population: points must be 2d");
    const int T = params.timesteps();
    const Matrix var = params.variances();
    const Matrix stddev = var.array().sqrt();
    const Eigen::Index n = x0.rows();

    std::vector<Matrix> paths(T + 1);
    paths[0] = x0;
    const double shrink = std::sqrt(1.0 - 2.0 * beta);
    const double noise_scale = std::sqrt(2.0 * beta);
    for (int i = 0; i < T; ++i) {
        paths[i + 1].resize(n, 2);
        for (Eigen::Index s = 0; s < n; ++s) {
            const Eigen::RowVector2d y = paths[i].row(s) - params.mu.row(i);
            Eigen::RowVector2d next =
                params.mu.row(i + 1) +
                shrink * (stddev.row(i + 1).array() / stddev.row(i).array() * y.array()).matrix();
            const Eigen::RowVector2d xi(draw_normal(rng), draw_normal(rng));
            next += noise_scale * (stddev.row(i + 1).array() * xi.array()).matrix();
            paths[i + 1].row(s) = next;
        }
    }
    return paths;
}

MfgResult optimize(const Environment& env, const Gaussian& p0, const Gaussian& p1,
                   const MfgConfig& cfg) {
    if (p0.dim() != 2 || p1.dim() != 2)
        throw std::invalid_argument("optimize: endpoint Gaussians must be 2d");
    if (2.0 * cfg.beta > 1.0)
        throw std::invalid_argument("optimize: config requires 2*beta <= 1");
    if (cfg.lambda_obs < 0.0) throw std::invalid_argument("optimize: lambda_obs must be >= 0");
    if (collision(env, p0.mean)) throw std::invalid_argument("optimize: p0 mean is in collision");
    if (collision(env, p1.mean)) throw std::invalid_argument("optimize: p1 mean is in collision");

    const int T = cfg.T;
    const double dt = 1.0 / T;
    Rng rng = make_rng(cfg.seed);

    MfgResult result;
    result.rrt_path = rrt_star(env, p0.mean, p1.mean, cfg.rrt, rng);
    if (result.rrt_path.size() < 2)
        result.rrt_path.push_back(result.rrt_path.front());  // degenerate start == goal
    TrajectoryParams params =
        init_trajectory(result.rrt_path, T, p0.cov.mat().diagonal());

    // AdamW moments over both parameter blocks.
    Matrix m_mu = Matrix::Zero(T + 1, 2), v_mu = Matrix::Zero(T + 1, 2);
    Matrix m_ls = Matrix::Zero(T + 1, 2), v_ls = Matrix::Zero(T + 1, 2);
    constexpr double b1 = 0.9, b2 = 0.999, adam_eps = 1e-8;

    TrajectoryParams best = params;
    double best_total = std::numeric_limits<double>::infinity();

    const double shrink = std::sqrt(1.0 - 2.0 * cfg.beta);
    const double noise_scale = std::sqrt(2.0 * cfg.beta);

    for (int iter = 0; iter <= cfg.iters; ++iter) {
        const Matrix var = params.variances();
        const Matrix stddev = var.array().sqrt();

        // Frozen noise for this iteration; reparameterized forward pass.
        std::vector<Matrix> eps(T + 1);
        for (int i = 0; i <= T; ++i) eps[i] = draw_standard_normal(cfg.batch, 2, rng);
        std::vector<Matrix> paths(T + 1);
        const Eigen::RowVector2d sd0 = stddev.row(0);
        paths[0] = eps[0] * sd0.asDiagonal();
        paths[0].rowwise() += params.mu.row(0);
        for (int i = 0; i < T; ++i) {
            const Eigen::RowVector2d ratio =
                (stddev.row(i + 1).array() / stddev.row(i).array()).matrix();
            const Eigen::RowVector2d sd_next = stddev.row(i + 1);
            const Matrix y = paths[i].rowwise() - params.mu.row(i);
            Matrix next = shrink * (y * ratio.asDiagonal());
            next += noise_scale * (eps[i + 1] * sd_next.asDiagonal());
            next.rowwise() += params.mu.row(i + 1);
            paths[i + 1] = std::move(next);
        }

        const double kinetic = kinetic_energy(params, dt);
        const double potential = potential_energy(params, cfg.beta);
        const double penalty = obstacle_penalty(params, env, paths);
        const double total = kinetic - potential + cfg.lambda_obs * penalty;
        result.loss_curve.push_back({static_cast<double>(iter), kinetic, potential, penalty, total});
        if (!std::isfinite(total))
            throw std::runtime_error("optimize: loss diverged to a non-finite value at iteration " +
                                     std::to_string(iter));
        if (total < best_total) {
            best_total = total;
            best = params;
        }
        if (iter == cfg.iters) break;

        // Pathwise penalty gradient: reverse pass over the frozen-noise recursion.
        Matrix pen_d_mu = Matrix::Zero(T + 1, 2);
        Matrix pen_d_var = Matrix::Zero(T + 1, 2);
        {
            const double scale = 1.0 / (static_cast<double>(cfg.batch) * (T + 1));
            std::vector<Matrix> pgrad(T + 1);
            for (int i = 0; i <= T; ++i) {
                pgrad[i].resize(cfg.batch, 2);
                for (Eigen::Index s = 0; s < cfg.batch; ++s) {
                    Eigen::Vector2d grad;
                    penalty_at(env, paths[i].row(s).transpose(), &grad);
                    pgrad[i].row(s) = scale * grad.transpose();
                }
            }
            // lambda holds dpen/dx_out while walking out = T .. 0.
            Matrix lambda = pgrad[T];
            for (int out = T; out >= 0; --out) {
                for (int ax = 0; ax < 2; ++ax) {
                    pen_d_mu(out, ax) += lambda.col(ax).sum();
                    const double dev_dot =
                        (paths[out].col(ax).array() - params.mu(out, ax)).matrix().dot(
                            lambda.col(ax));
                    pen_d_var(out, ax) += dev_dot / (2.0 * var(out, ax));
                }
                if (out == 0) break;
                const int in = out - 1;
                Matrix a_lambda(cfg.batch, 2);
                for (int ax = 0; ax < 2; ++ax) {
                    const double a = shrink * stddev(out, ax) / stddev(in, ax);
                    a_lambda.col(ax) = a * lambda.col(ax);
                    pen_d_mu(in, ax) -= a_lambda.col(ax).sum();
                    const double dev_dot =
                        (paths[in].col(ax).array() - params.mu(in, ax)).matrix().dot(
                            a_lambda.col(ax));
                    pen_d_var(in, ax) -= dev_dot / (2.0 * var(in, ax));
                }
                lambda = pgrad[in] + a_lambda;
            }
        }
        const Matrix pen_d_ls = (pen_d_var.array() * var.array()).matrix();

        const EnergyGradients kg = kinetic_energy_gradients(params, dt);
        const EnergyGradients ug = potential_energy_gradients(params, cfg.beta);
        Matrix g_mu = kg.d_mu - ug.d_mu + cfg.lambda_obs * pen_d_mu;
        Matrix g_ls = kg.d_log_sigma - ug.d_log_sigma + cfg.lambda_obs * pen_d_ls;

        // Endpoint means are fixed; endpoint variances optionally pinned.
        g_mu.row(0).setZero();
        g_mu.row(T).setZero();
        if (cfg.pin_endpoint_variance) {
            g_ls.row(0).setZero();
            g_ls.row(T).setZero();
        }

        const double t_step = iter + 1;
        const double bias1 = 1.0 - std::pow(b1, t_step);
        const double bias2 = 1.0 - std::pow(b2, t_step);
        auto adamw = [&](Matrix& theta, Matrix& m, Matrix& v, const Matrix& g, bool skip_first,
                         bool skip_last) {
            m = b1 * m + (1.0 - b1) * g;
            v = b2 * v + (1.0 - b2) * g.array().square().matrix();
            Matrix update =
                ((m.array() / bias1) / ((v.array() / bias2).sqrt() + adam_eps)).matrix() +
                cfg.weight_decay * theta;
            if (skip_first) update.row(0).setZero();
            if (skip_last) update.row(update.rows() - 1).setZero();
            theta -= cfg.lr * update;
        };
        adamw(params.mu, m_mu, v_mu, g_mu, true, true);
        adamw(params.log_sigma, m_ls, v_ls, g_ls, cfg.pin_endpoint_variance,
              cfg.pin_endpoint_variance);
    }

    result.params = best;
    return result;
}

}  // namespace qsb
