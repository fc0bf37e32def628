// Command-line surface for the Gaussian bridge library: closed-form bridge
// marginals, Bohm-potential grids, mixture wavepacket training, MFG
// trajectory optimization, and sample metrics. Every command is a pure
// function of (config file, seed); reruns write byte-identical outputs.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "qsb/bohm.hpp"
#include "qsb/bridge.hpp"
#include "qsb/io.hpp"
#include "qsb/log.hpp"
#include "qsb/metrics.hpp"
#include "qsb/mfg.hpp"
#include "qsb/wavepacket.hpp"

namespace {

using qsb::Json;
using qsb::Matrix;
using qsb::Vector;

constexpr std::uint64_t kDefaultSeed = 42;

std::string out_path(const std::string& dir, const std::string& name) {
    std::filesystem::create_directories(dir);
    return (std::filesystem::path(dir) / name).string();
}

std::uint64_t effective_seed(const Json& config, const std::optional<std::uint64_t>& cli_seed) {
    if (cli_seed.has_value()) return *cli_seed;  // --seed overrides config
    if (config.contains("seed")) return config.at("seed").get<std::uint64_t>();
    return kDefaultSeed;
}

std::vector<double> doubles_from(const Json& j, const std::string& where) {
    if (!j.is_array() || j.empty())
        throw std::invalid_argument(where + ": expected a nonempty array");
    std::vector<double> out;
    out.reserve(j.size());
    for (const Json& v : j) out.push_back(v.get<double>());
    return out;
}

Matrix subsample_rows(const Matrix& m, Eigen::Index n, qsb::Rng& rng) {
    if (n >= m.rows()) return m;
    std::vector<Eigen::Index> idx(m.rows());
    std::iota(idx.begin(), idx.end(), Eigen::Index{0});
    for (Eigen::Index i = 0; i < n; ++i) {
        const Eigen::Index j =
            i + static_cast<Eigen::Index>(qsb::draw_uniform(rng) * double(m.rows() - i));
        std::swap(idx[i], idx[std::min<Eigen::Index>(j, m.rows() - 1)]);
    }
    Matrix out(n, m.cols());
    for (Eigen::Index i = 0; i < n; ++i) out.row(i) = m.row(idx[i]);
    return out;
}

// ---------------------------------------------------------------------------
// bridge: closed-form marginals over a time grid, optional residual check.

int run_bridge(const std::string& config_path, const std::string& out_dir,
               const std::optional<std::uint64_t>& cli_seed, bool verify) {
    const Json config = qsb::load_json(config_path);
    const std::uint64_t seed = effective_seed(config, cli_seed);

    const qsb::Gaussian g0 = qsb::gaussian_from_json(config.at("g0"));
    const qsb::Gaussian g1 = qsb::gaussian_from_json(config.at("g1"));
    const double beta = config.at("beta").get<double>();
    const qsb::BridgeKind kind =
        qsb::bridge_kind_from_string(config.value("kind", std::string("quantum")));
    const std::vector<double> t_grid = doubles_from(config.at("t_grid"), "bridge.t_grid");
    const qsb::BridgeProblem problem(g0, g1, beta, kind);

    const Eigen::Index n = problem.dim();
    std::vector<std::string> header{"t"};
    for (Eigen::Index i = 0; i < n; ++i) header.push_back("mu_" + std::to_string(i));
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = i; j < n; ++j)
            header.push_back("cov_" + std::to_string(i) + "_" + std::to_string(j));

    Matrix rows(t_grid.size(), header.size());
    for (std::size_t r = 0; r < t_grid.size(); ++r) {
        const double t = t_grid[r];
        const Vector mu = qsb::bridge_mean(problem, t);
        const qsb::SpdMatrix cov = qsb::bridge_covariance(problem, t);
        Eigen::Index c = 0;
        rows(r, c++) = t;
        for (Eigen::Index i = 0; i < n; ++i) rows(r, c++) = mu(i);
        for (Eigen::Index i = 0; i < n; ++i)
            for (Eigen::Index j = i; j < n; ++j) rows(r, c++) = cov(i, j);
    }
    qsb::write_csv(out_path(out_dir, "marginals.csv"), header, rows);
    qsb::log_info("bridge: wrote marginals for " + std::to_string(t_grid.size()) + " times");

    if (!verify) return 0;
    if (kind == qsb::BridgeKind::ClassicalSB)
        throw std::invalid_argument(
            "bridge --verify: residuals are defined for the quantum and bb_ot kinds only");

    const double h = config.value("fd_step", 1e-4);
    const int probes = config.value("residual_probes", 8);
    std::vector<std::array<double, 4>> residual_rows;
    double worst = 0.0;
    for (std::size_t r = 0; r < t_grid.size(); ++r) {
        const double t = t_grid[r];
        if (t < h || t > 1.0 - h) continue;  // residuals need interior t
        qsb::Rng rng = qsb::make_rng(qsb::derive_seed(seed, r));
        const Matrix points = qsb::sample_marginal(problem, t, probes, rng);
        const qsb::Gaussian marginal(qsb::bridge_mean(problem, t),
                                     qsb::bridge_covariance(problem, t));
        double continuity = 0.0, hje = 0.0;
        for (Eigen::Index i = 0; i < points.rows(); ++i) {
            const Vector x = points.row(i).transpose();
            const double density = qsb::gaussian_pdf(marginal, x);
            continuity =
                std::max(continuity, qsb::continuity_residual(problem, x, t, h) / density);
            hje = std::max(hje, qsb::hje_residual(problem, x, t, h));
        }
        const double riccati = qsb::riccati_residual(problem, t, h);
        residual_rows.push_back({t, continuity, hje, riccati});
        worst = std::max({worst, continuity, hje, riccati});
    }
    Matrix res(residual_rows.size(), 4);
    for (std::size_t r = 0; r < residual_rows.size(); ++r)
        for (int c = 0; c < 4; ++c) res(r, c) = residual_rows[r][c];
    qsb::write_csv(out_path(out_dir, "residuals.csv"), {"t", "continuity", "hje", "riccati"}, res);

    const double tolerance = 1e-4;
    if (worst >= tolerance) {
        std::cerr << Json{{"error", "residual verification failed"},
                          {"worst_residual", worst},
                          {"tolerance", tolerance}}
                         .dump()
                  << '\n';
        return 2;
    }
    qsb::log_info("bridge: residual verification passed (worst " + qsb::format_double(worst) + ")");
    return 0;
}

// ---------------------------------------------------------------------------
// bohm: quantum-potential values of a mixture over a regular grid.

int run_bohm(const std::string& config_path, const std::string& out_dir) {
    const Json config = qsb::load_json(config_path);
    const Json& mix_field = config.at("mixture");
    const qsb::GaussianMixture mix = mix_field.is_string()
                                         ? qsb::mixture_from_json(qsb::load_json(mix_field))
                                         : qsb::mixture_from_json(mix_field);
    const double beta = config.at("beta").get<double>();
    const bool include_mixing = config.value("include_mixing", true);

    const Json& grid = config.at("grid");
    const std::vector<double> lo = doubles_from(grid.at("min"), "bohm.grid.min");
    const std::vector<double> hi = doubles_from(grid.at("max"), "bohm.grid.max");
    std::vector<int> points;
    for (const Json& v : grid.at("points")) points.push_back(v.get<int>());
    const std::size_t dims = lo.size();
    if (hi.size() != dims || points.size() != dims ||
        dims != static_cast<std::size_t>(mix.dim()))
        throw std::invalid_argument("bohm: grid axes do not match the mixture dimension");
    for (int p : points)
        if (p < 2) throw std::invalid_argument("bohm: each grid axis needs at least 2 points");

    const bool clamp = config.contains("clamp");
    const double clamp_value = clamp ? config.at("clamp").get<double>() : 0.0;

    std::size_t total = 1;
    for (int p : points) total *= static_cast<std::size_t>(p);
    Matrix rows(total, dims + 1);
    std::vector<int> index(dims, 0);
    Vector x(dims);
    for (std::size_t r = 0; r < total; ++r) {
        for (std::size_t d = 0; d < dims; ++d)
            x(static_cast<Eigen::Index>(d)) =
                lo[d] + (hi[d] - lo[d]) * index[d] / (points[d] - 1);
        double q = qsb::bohm_mixture(mix, beta, x, include_mixing);
        if (clamp && q < clamp_value) q = clamp_value;  // display clamp only
        for (std::size_t d = 0; d < dims; ++d) rows(r, static_cast<Eigen::Index>(d)) = x(d);
        rows(r, static_cast<Eigen::Index>(dims)) = q;
        for (std::size_t d = dims; d-- > 0;) {
            if (++index[d] < points[d]) break;
            index[d] = 0;
        }
    }
    std::vector<std::string> header;
    for (std::size_t d = 0; d < dims; ++d) header.push_back("x_" + std::to_string(d));
    header.push_back("Q");
    qsb::write_csv(out_path(out_dir, "bohm_grid.csv"), header, rows);
    return 0;
}

// ---------------------------------------------------------------------------
// wavepacket: train the coupled mixture bridge between two sample files.

int run_wavepacket(const std::string& config_path, const std::string& out_dir,
                   const std::optional<std::uint64_t>& cli_seed) {
    const Json config = qsb::load_json(config_path);
    const std::uint64_t seed = effective_seed(config, cli_seed);

    const Matrix all0 = qsb::read_csv(config.at("samples0").get<std::string>());
    const Matrix all1 = qsb::read_csv(config.at("samples1").get<std::string>());

    qsb::TrainConfig train;
    train.n_components = config.at("n_components").get<int>();
    train.beta = config.at("beta").get<double>();
    train.em_steps_per_phase = config.value("em_steps_per_phase", train.em_steps_per_phase);
    train.outer_iters = config.value("outer_iters", train.outer_iters);
    train.batch = config.value("batch", train.batch);
    train.clamp_factor = config.value("clamp_factor", train.clamp_factor);
    train.tol = config.value("tol", train.tol);
    train.seed = seed;

    // Held-out split for the evaluation report.
    const double holdout = config.value("holdout_fraction", 0.5);
    if (holdout <= 0.0 || holdout >= 1.0)
        throw std::invalid_argument("wavepacket: holdout_fraction must lie in (0,1)");
    auto shuffle_split = [&](const Matrix& all, std::uint64_t stream) {
        qsb::Rng rng = qsb::make_rng(qsb::derive_seed(seed, stream));
        std::vector<Eigen::Index> idx(all.rows());
        std::iota(idx.begin(), idx.end(), Eigen::Index{0});
        for (Eigen::Index i = all.rows() - 1; i > 0; --i) {
            const Eigen::Index j =
                static_cast<Eigen::Index>(qsb::draw_uniform(rng) * double(i + 1));
            std::swap(idx[i], idx[std::min(j, i)]);
        }
        const Eigen::Index n_train =
            std::max<Eigen::Index>(1, static_cast<Eigen::Index>(all.rows() * (1.0 - holdout)));
        Matrix train_rows(n_train, all.cols());
        Matrix held_rows(all.rows() - n_train, all.cols());
        for (Eigen::Index i = 0; i < all.rows(); ++i) {
            if (i < n_train)
                train_rows.row(i) = all.row(idx[i]);
            else
                held_rows.row(i - n_train) = all.row(idx[i]);
        }
        return std::pair<Matrix, Matrix>(std::move(train_rows), std::move(held_rows));
    };
    const auto [train0, held0] = shuffle_split(all0, 0xa0);
    const auto [train1, held1] = shuffle_split(all1, 0xa1);

    const qsb::TrainResult result = qsb::train_bridge(train0, train1, train);
    qsb::write_text(out_path(out_dir, "bridge.json"), qsb::bridge_to_json(result.bridge).dump(2) + "\n");

    if (config.contains("t_values")) {
        const std::vector<double> ts = doubles_from(config.at("t_values"), "wavepacket.t_values");
        for (std::size_t i = 0; i < ts.size(); ++i) {
            Json j = qsb::mixture_to_json(qsb::mixture_marginal(result.bridge, ts[i]));
            j["t"] = ts[i];
            qsb::write_text(out_path(out_dir, "marginal_" + std::to_string(i) + ".json"),
                            j.dump(2) + "\n");
        }
    }

    // Evaluation: EMD of generated marginals against the held-out splits.
    const Eigen::Index emd_n = std::min<Eigen::Index>(
        {config.value("emd_subsample", Eigen::Index{1000}), held0.rows(), held1.rows()});
    qsb::Rng eval_rng = qsb::make_rng(qsb::derive_seed(seed, 0xeba1));
    const Matrix gen0 = qsb::gmm_sample(qsb::mixture_marginal(result.bridge, 0.0), emd_n, eval_rng);
    const Matrix gen1 = qsb::gmm_sample(qsb::mixture_marginal(result.bridge, 1.0), emd_n, eval_rng);
    const Matrix ref0 = subsample_rows(held0, emd_n, eval_rng);
    const Matrix ref1 = subsample_rows(held1, emd_n, eval_rng);
    const Matrix src = subsample_rows(train0, emd_n, eval_rng);
    const Matrix base1 = subsample_rows(train1, emd_n, eval_rng);

    Json report{{"emd_t0", qsb::emd_samples(gen0, ref0)},
                {"emd_t1", qsb::emd_samples(gen1, ref1)},
                {"emd_input_to_target", qsb::emd_samples(src, ref1)},
                {"emd_train_test_baseline_t1", qsb::emd_samples(base1, ref1)},
                {"outer_iters_run", result.outer_iters_run},
                {"clamped_components", result.clamped_components},
                {"evaluation_points", emd_n}};
    qsb::write_text(out_path(out_dir, "report.json"), report.dump(2) + "\n");

    if (config.contains("propagate")) {
        const Json& prop = config.at("propagate");
        const int n = prop.at("n").get<int>();
        const std::vector<double> grid = doubles_from(prop.at("t_grid"), "propagate.t_grid");
        qsb::Rng rng = qsb::make_rng(qsb::derive_seed(seed, 0xbeef));
        const Matrix x0 =
            qsb::gmm_sample(qsb::mixture_marginal(result.bridge, grid.front()), n, rng);
        const auto paths = qsb::propagate_samples(result.bridge, x0, grid, rng);
        const Eigen::Index d = result.bridge.dim();
        Matrix rows(static_cast<Eigen::Index>(n) * grid.size(), d + 2);
        Eigen::Index r = 0;
        for (int s = 0; s < n; ++s)
            for (std::size_t g = 0; g < grid.size(); ++g) {
                rows(r, 0) = s;
                rows(r, 1) = grid[g];
                rows.block(r, 2, 1, d) = paths[g].row(s);
                ++r;
            }
        std::vector<std::string> header{"sample_id", "t"};
        for (Eigen::Index i = 0; i < d; ++i) header.push_back("x" + std::to_string(i));
        qsb::write_csv(out_path(out_dir, "paths.csv"), header, rows);
    }
    return 0;
}

// ---------------------------------------------------------------------------
// mfg: trajectory optimization through one of the obstacle environments.

int run_mfg(const std::string& config_path, const std::string& env_name,
            const std::string& out_dir, const std::optional<std::uint64_t>& cli_seed) {
    Json config = Json::object();
    if (!config_path.empty()) config = qsb::load_json(config_path);

    qsb::Environment env;
    qsb::Gaussian p0, p1;
    if (!env_name.empty()) {
        const qsb::NamedEnvironment named = qsb::builtin_environment(env_name);
        env = named.env;
        p0 = named.p0;
        p1 = named.p1;
    } else {
        if (config.empty())
            throw std::invalid_argument("mfg: pass --env <s_tunnel|u_tunnel> or --config <file>");
        env = qsb::environment_from_json(config);
        auto endpoint = [&](const char* key) {
            const Json& j = config.at(key);
            const Vector mean = Vector::Map(
                std::vector<double>{j.at("mean").at(0).get<double>(),
                                    j.at("mean").at(1).get<double>()}.data(), 2);
            Matrix cov = Matrix::Zero(2, 2);
            cov(0, 0) = j.at("var").at(0).get<double>();
            cov(1, 1) = j.at("var").at(1).get<double>();
            return qsb::Gaussian(mean, qsb::SpdMatrix(cov));
        };
        p0 = endpoint("p0");
        p1 = endpoint("p1");
    }

    qsb::MfgConfig cfg;
    const Json mfg_json = config.value("mfg", Json::object());
    cfg.beta = mfg_json.value("beta", cfg.beta);
    cfg.lambda_obs = mfg_json.value("lambda_obs", cfg.lambda_obs);
    cfg.lr = mfg_json.value("lr", cfg.lr);
    cfg.iters = mfg_json.value("iters", cfg.iters);
    cfg.batch = mfg_json.value("batch", cfg.batch);
    cfg.T = mfg_json.value("T", cfg.T);
    cfg.weight_decay = mfg_json.value("weight_decay", cfg.weight_decay);
    cfg.pin_endpoint_variance = mfg_json.value("pin_endpoint_variance", cfg.pin_endpoint_variance);
    if (mfg_json.contains("rrt")) {
        const Json& rrt = mfg_json.at("rrt");
        cfg.rrt.step = rrt.value("step", cfg.rrt.step);
        cfg.rrt.radius = rrt.value("radius", cfg.rrt.radius);
        cfg.rrt.goal_bias = rrt.value("goal_bias", cfg.rrt.goal_bias);
        cfg.rrt.max_nodes = rrt.value("max_nodes", cfg.rrt.max_nodes);
    }
    cfg.seed = cli_seed.has_value() ? *cli_seed
                                    : mfg_json.value("seed", kDefaultSeed);

    const qsb::MfgResult result = qsb::optimize(env, p0, p1, cfg);

    const int T = result.params.timesteps();
    const Matrix var = result.params.variances();
    Matrix traj(T + 1, 6);
    for (int i = 0; i <= T; ++i) {
        traj(i, 0) = i;
        traj(i, 1) = static_cast<double>(i) / T;
        traj(i, 2) = result.params.mu(i, 0);
        traj(i, 3) = result.params.mu(i, 1);
        traj(i, 4) = var(i, 0);
        traj(i, 5) = var(i, 1);
    }
    qsb::write_csv(out_path(out_dir, "trajectory.csv"),
                   {"i", "t", "mu_x", "mu_y", "var_x", "var_y"}, traj);

    Matrix losses(result.loss_curve.size(), 5);
    for (std::size_t r = 0; r < result.loss_curve.size(); ++r)
        for (int c = 0; c < 5; ++c) losses(r, c) = result.loss_curve[r][c];
    qsb::write_csv(out_path(out_dir, "loss.csv"),
                   {"iter", "kinetic", "potential", "penalty", "total"}, losses);

    // Sampled population paths through the optimized trajectory.
    qsb::Rng rng = qsb::make_rng(qsb::derive_seed(cfg.seed, 0x9a7b5));
    const int n_paths = std::min(cfg.batch, 200);
    Matrix x0(n_paths, 2);
    for (int i = 0; i < n_paths; ++i) {
        x0(i, 0) = result.params.mu(0, 0) + std::sqrt(var(0, 0)) * qsb::draw_normal(rng);
        x0(i, 1) = result.params.mu(0, 1) + std::sqrt(var(0, 1)) * qsb::draw_normal(rng);
    }
    const auto paths = qsb::propagate_population(result.params, x0, cfg.beta, rng);
    Matrix rows(static_cast<Eigen::Index>(n_paths) * (T + 1), 4);
    Eigen::Index r = 0;
    for (int s = 0; s < n_paths; ++s)
        for (int i = 0; i <= T; ++i) {
            rows(r, 0) = s;
            rows(r, 1) = static_cast<double>(i) / T;
            rows(r, 2) = paths[i](s, 0);
            rows(r, 3) = paths[i](s, 1);
            ++r;
        }
    qsb::write_csv(out_path(out_dir, "paths.csv"), {"sample_id", "t", "x0", "x1"}, rows);

    const double initial = result.loss_curve.front()[4];
    const double final = result.loss_curve.back()[4];
    qsb::log_info("mfg: total loss " + qsb::format_double(initial) + " -> " +
                  qsb::format_double(final));
    return 0;
}

// ---------------------------------------------------------------------------
// metrics: EMD (and optionally Gaussian-fit W2) between two sample files.

int run_metrics(const std::string& file_a, const std::string& file_b, int subsample,
                const std::optional<std::uint64_t>& cli_seed, bool gaussian_fit) {
    Matrix a = qsb::read_csv(file_a);
    Matrix b = qsb::read_csv(file_b);
    if (subsample > 0) {
        qsb::Rng rng = qsb::make_rng(cli_seed.value_or(kDefaultSeed));
        a = subsample_rows(a, subsample, rng);
        b = subsample_rows(b, subsample, rng);
    }
    std::printf("emd %s\n", qsb::format_double(qsb::emd_samples(a, b)).c_str());
    if (gaussian_fit) {
        const qsb::Moments ma = qsb::moment_check(a);
        const qsb::Moments mb = qsb::moment_check(b);
        const qsb::Gaussian ga(ma.mean, qsb::SpdMatrix(ma.cov.mat()));
        const qsb::Gaussian gb(mb.mean, qsb::SpdMatrix(mb.cov.mat()));
        std::printf("w2_gaussian_fit %s\n", qsb::format_double(qsb::w2_gaussian(ga, gb)).c_str());
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Gaussian quantum bridge toolkit"};
    app.require_subcommand(1);

    std::string config_path, out_dir = ".", env_name;
    std::optional<std::uint64_t> seed;
    bool verify = false, gaussian_fit = false;
    int subsample = 0;
    std::string file_a, file_b;

    CLI::App* bridge = app.add_subcommand("bridge", "closed-form bridge marginals");
    bridge->add_option("--config", config_path, "JSON config")->required();
    bridge->add_option("--out", out_dir, "output directory");
    bridge->add_option("--seed", seed, "seed override (default 42)");
    bridge->add_flag("--verify", verify, "emit residuals.csv and gate on 1e-4");

    CLI::App* bohm = app.add_subcommand("bohm", "quantum-potential grid of a mixture");
    bohm->add_option("--config", config_path, "JSON config")->required();
    bohm->add_option("--out", out_dir, "output directory");

    CLI::App* wavepacket = app.add_subcommand("wavepacket", "train a mixture bridge");
    wavepacket->add_option("--config", config_path, "JSON config")->required();
    wavepacket->add_option("--out", out_dir, "output directory");
    wavepacket->add_option("--seed", seed, "seed override (default 42)");

    CLI::App* mfg = app.add_subcommand("mfg", "trajectory optimization with obstacles");
    mfg->add_option("--config", config_path, "JSON config");
    mfg->add_option("--env", env_name, "built-in environment: s_tunnel or u_tunnel");
    mfg->add_option("--out", out_dir, "output directory");
    mfg->add_option("--seed", seed, "seed override (default 42)");

    CLI::App* metrics = app.add_subcommand("metrics", "EMD between two sample CSVs");
    metrics->add_option("file_a", file_a, "first sample CSV")->required();
    metrics->add_option("file_b", file_b, "second sample CSV")->required();
    metrics->add_option("--subsample", subsample, "subsample both files to this size");
    metrics->add_option("--seed", seed, "subsampling seed (default 42)");
    metrics->add_flag("--gaussian-fit", gaussian_fit, "also print moment-fitted Gaussian W2");

    CLI11_PARSE(app, argc, argv);

    try {
        if (bridge->parsed()) return run_bridge(config_path, out_dir, seed, verify);
        if (bohm->parsed()) return run_bohm(config_path, out_dir);
        if (wavepacket->parsed()) return run_wavepacket(config_path, out_dir, seed);
        if (mfg->parsed()) return run_mfg(config_path, env_name, out_dir, seed);
        if (metrics->parsed()) return run_metrics(file_a, file_b, subsample, seed, gaussian_fit);
    } catch (const std::exception& err) {
        std::cerr << Json{{"error", err.what()}}.dump() << '\n';
        return 1;
    }
    return 1;
}
