#pragma once

// Bayesian logistic regression: MSE of the SGLD / mSGLD time average of beta
// against a random-walk Metropolis estimate of the posterior mean.

#include "sgld/experiments/common.hpp"
#include "sgld/parallel.hpp"

namespace sgld {

struct LogisticConfig {
  std::size_t N = 1000;
  std::size_t covariates = 2;  // plus an intercept column
  std::vector<double> beta_true{1.0, -1.0, 0.5};
  double prior_precision = 1.0;
  std::uint64_t data_seed = 1;
  std::string data_file;
  std::vector<std::string> methods{"sgld", "msgld"};
  std::vector<std::size_t> n{10, 50, 150};
  std::string sampling = "without";
  double h = 0.002;
  std::string msgld_covariance_scale = "gradient";
  std::uint64_t steps = 10000;
  double checkpoints_per_decade = 10;
  std::vector<double> theta0;  // empty = zero vector
  std::size_t replicates = 100;
  std::uint64_t rwm_steps = 500000;
  std::uint64_t rwm_burn_in = 20000;
  std::uint64_t rwm_batches = 50;
  double rwm_target_acceptance = 0.3;

  void register_params(ConfigSchema& s) {
    s.add("N", &N, "number of data points", positive<std::size_t>());
    s.add("covariates", &covariates, "standard normal covariate columns (an intercept is appended)");
    s.add("beta_true", &beta_true, "coefficients generating the labels (covariates + 1 entries)");
    s.add("prior_precision", &prior_precision, "prior N(0, I / prior_precision)", positive<double>());
    s.add("data_seed", &data_seed, "seed of the synthetic dataset");
    s.add("data_file", &data_file, "CSV with columns x1..xd,y (empty = generate)");
    s.add("methods", &methods, "subset of euler, sgld, msgld", method_list());
    s.add("n", &n, "minibatch sizes", nonempty_positive<std::size_t>());
    s.add("sampling", &sampling, "minibatch sampling: with or without replacement",
          std::function<void(const std::string&)>([](const std::string& v) { parse_sampling(v); }));
    s.add("h", &h, "step size", positive<double>());
    s.add("msgld_covariance_scale", &msgld_covariance_scale,
          "gradient: noise multiplier I - (h/2) Cov(grad log pi_hat); drift: uses Cov(grad log pi_hat / 2)",
          std::function<void(const std::string&)>([](const std::string& v) {
            if (v != "gradient" && v != "drift") throw ConfigError("must be gradient or drift");
          }));
    s.add("steps", &steps, "iterations per replicate", positive<std::uint64_t>());
    s.add("checkpoints_per_decade", &checkpoints_per_decade, "density of the reported iteration grid",
          positive<double>());
    s.add("theta0", &theta0, "initial state (empty = zeros)");
    s.add("replicates", &replicates, "independent runs per (method, n)");
    s.add("rwm_steps", &rwm_steps, "length of each of the two reference RWM runs", positive<std::uint64_t>());
    s.add("rwm_burn_in", &rwm_burn_in, "RWM burn-in, during which the proposal scale is tuned");
    s.add("rwm_batches", &rwm_batches, "batches for the RWM batch-means standard error", positive<std::uint64_t>());
    s.add("rwm_target_acceptance", &rwm_target_acceptance, "acceptance rate targeted while tuning",
          std::function<void(const double&)>([](const double& v) {
            if (!(v > 0.0 && v < 1.0)) throw ConfigError("must lie in (0, 1)");
          }));
  }

  LogisticRegressionModel build() const {
    const auto d = Eigen::Index(covariates + 1);
    const Eigen::MatrixXd P = prior_precision * Eigen::MatrixXd::Identity(d, d);
    if (!data_file.empty()) {
      auto m = load_logistic_data(data_file);
      if (m.dim() != std::size_t(d)) throw ConfigError("data_file has the wrong number of columns");
      return LogisticRegressionModel(m.covariates(), m.labels(), P);
    }
    if (beta_true.size() != std::size_t(d)) throw ConfigError("beta_true needs covariates + 1 entries");
    const Eigen::VectorXd b = Eigen::Map<const Eigen::VectorXd>(beta_true.data(), d);
    auto m = generate_logistic_data(N, std::size_t(d), data_seed, b);
    return LogisticRegressionModel(m.covariates(), m.labels(), P);
  }
};

struct RwmReference {
  Eigen::VectorXd mean;
  std::array<Eigen::VectorXd, 2> run_mean, run_se;
  std::array<double, 2> acceptance{};
  std::array<double, 2> scale{};
  double max_z = 0.0;  // max over coordinates of |m1 - m2| / sqrt(se1^2 + se2^2)
  bool consistent = false;
};

/// Two independent RWM runs (replicates 0 and 1); the proposal scale is tuned
/// toward the target acceptance during burn-in and frozen afterwards.
template <Model M>
RwmReference rwm_reference(const M& model, const Eigen::VectorXd& theta0, std::uint64_t steps,
                           std::uint64_t burn_in, std::uint64_t batches, double target, std::uint64_t seed,
                           unsigned threads) {
  RwmReference ref;
  parallel_for(2, threads, [&](std::size_t run) {
    ChainSpec spec;
    spec.theta0 = theta0;
    spec.seed = seed;
    spec.replicate = run;
    RwmChain<M> chain(model, 0.1 / std::sqrt(double(model.dim())), spec);
    const std::uint64_t window = 200;
    for (std::uint64_t k = 1; k <= burn_in; ++k) {
      chain.step();
      if (k % window == 0) {
        chain.set_scale(chain.scale() * std::exp(chain.acceptance_rate() - target));
        chain.reset_counters();
      }
    }
    chain.reset_counters();
    BatchMeans bm(model.dim(), std::max<std::uint64_t>(1, steps / batches));
    for (std::uint64_t k = 1; k <= steps; ++k) {
      chain.step();
      bm.add(chain.state());
    }
    ref.run_mean[run] = bm.mean();
    ref.run_se[run] = bm.standard_error();
    ref.acceptance[run] = chain.acceptance_rate();
    ref.scale[run] = chain.scale();
  });
  ref.mean = 0.5 * (ref.run_mean[0] + ref.run_mean[1]);
  for (Eigen::Index j = 0; j < ref.mean.size(); ++j) {
    const double se = std::hypot(ref.run_se[0][j], ref.run_se[1][j]);
    ref.max_z = std::max(ref.max_z, std::abs(ref.run_mean[0][j] - ref.run_mean[1][j]) / se);
  }
  ref.consistent = ref.max_z <= 3.0;
  return ref;
}

inline std::vector<std::uint64_t> checkpoint_grid(std::uint64_t steps, double per_decade) {
  std::vector<std::uint64_t> out;
  for (std::size_t v : log_int_grid(1, std::size_t(steps), per_decade))
    if (out.empty() || v != out.back()) out.push_back(v);
  if (out.back() != steps) out.push_back(steps);
  return out;
}

inline ExperimentResult run_logistic(const LogisticConfig& cfg, const RunContext& ctx) {
  const std::size_t R = resolve_replicates(cfg.replicates, ctx);
  const auto model = cfg.build();
  const auto d = Eigen::Index(model.dim());
  const Sampling mode = parse_sampling(cfg.sampling);
  for (std::size_t n : cfg.n) {
    if (n > model.size()) throw ConfigError("n = " + std::to_string(n) + " exceeds N");
  }
  Eigen::VectorXd theta0 = Eigen::VectorXd::Zero(d);
  if (!cfg.theta0.empty()) {
    if (cfg.theta0.size() != std::size_t(d)) throw ConfigError("theta0 has the wrong dimension");
    theta0 = Eigen::Map<const Eigen::VectorXd>(cfg.theta0.data(), d);
  }
  if (cfg.rwm_steps < 2 * cfg.rwm_batches) throw ConfigError("rwm_steps must cover at least two steps per batch");

  ExperimentResult res;
  Stopwatch ref_clock;
  const auto ref = rwm_reference(model, theta0, cfg.rwm_steps, cfg.rwm_burn_in, cfg.rwm_batches,
                                 cfg.rwm_target_acceptance, derive_seed(ctx.seed, 0x52574d), ctx.threads);
  const double ref_seconds = ref_clock.seconds();
  for (int run = 0; run < 2; ++run)
    if (ref.acceptance[std::size_t(run)] < 0.05 || ref.acceptance[std::size_t(run)] > 0.70)
      res.warnings.push_back("RWM reference run " + std::to_string(run) + " acceptance " +
                             format_double(ref.acceptance[std::size_t(run)]) + " outside [0.05, 0.70] (scale " +
                             format_double(ref.scale[std::size_t(run)]) + ")");
  if (!ref.consistent)
    res.warnings.push_back("RWM reference runs disagree: max |z| = " + format_double(ref.max_z));

  const auto checkpoints = checkpoint_grid(cfg.steps, cfg.checkpoints_per_decade);
  res.table.header = {"method", "n", "iteration", "effective_passes", "mse", "mse_se", "replicates", "diverged",
                      "noise_collapses", "wall_time_s"};
  nlohmann::json final_mse = nlohmann::json::object();
  std::size_t cells = 0, dead_cells = 0;

  for (const auto& name : cfg.methods) {
    const Method method = parse_method(name);
    const std::vector<std::size_t> ns = method == Method::Euler ? std::vector<std::size_t>{model.size()} : cfg.n;
    for (std::size_t n : ns) {
      Stopwatch sw;
      KernelConfig kernel;
      kernel.method = method;
      kernel.scheme = {n, mode};
      kernel.covariance = CovarianceSource::Estimated;
      kernel.estimated_covariance_factor = cfg.msgld_covariance_scale == "gradient" ? 1.0 : 0.25;
      ChainSpec spec;
      spec.h = cfg.h;
      spec.K = cfg.steps;
      spec.theta0 = theta0;
      spec.seed = ctx.seed;

      struct Run {
        std::vector<double> sq_err;  // per checkpoint
        bool diverged = false;
        std::uint64_t collapses = 0;
      };
      std::vector<Run> runs(R);
      parallel_for(R, ctx.threads, [&](std::size_t i) {
        ChainSpec s = spec;
        s.replicate = i;
        LangevinChain<LogisticRegressionModel> chain(model, kernel, s);
        Eigen::VectorXd sum = Eigen::VectorXd::Zero(d);
        std::size_t next = 0;
        try {
          for (std::uint64_t k = 1; k <= s.K; ++k) {
            chain.step();
            sum += chain.state();
            if (next < checkpoints.size() && k == checkpoints[next]) {
              runs[i].sq_err.push_back((sum / double(k) - ref.mean).squaredNorm());
              ++next;
            }
          }
        } catch (const DivergenceError&) {
          runs[i].diverged = true;
        }
        runs[i].collapses = chain.noise_collapses();
      });

      std::size_t diverged = 0;
      std::uint64_t collapses = 0;
      for (const auto& r : runs) {
        diverged += r.diverged;
        collapses += r.collapses;
      }
      const double seconds = sw.seconds();
      ++cells;
      if (diverged == R) ++dead_cells;
      for (std::size_t c = 0; c < checkpoints.size(); ++c) {
        std::vector<double> v;
        for (const auto& r : runs)
          if (!r.diverged) v.push_back(r.sq_err[c]);
        const auto m = detail::mean_se(v);
        res.table.rows.push_back({Cell(name), integer(n), integer(checkpoints[c]),
                                  Cell(double(checkpoints[c]) * double(n) / double(model.size())), num(m.mean),
                                  num(m.se), integer(R), integer(diverged), integer(collapses), Cell(seconds)});
        if (c + 1 == checkpoints.size())
          final_mse[name][std::to_string(n)] = {{"mse", m.mean}, {"mse_se", m.se}, {"diverged", diverged}};
      }
    }
  }

  std::vector<double> rm(ref.mean.data(), ref.mean.data() + d);
  nlohmann::json runs_json = nlohmann::json::array();
  for (std::size_t k = 0; k < 2; ++k)
    runs_json.push_back({{"mean", std::vector<double>(ref.run_mean[k].data(), ref.run_mean[k].data() + d)},
                         {"se", std::vector<double>(ref.run_se[k].data(), ref.run_se[k].data() + d)},
                         {"acceptance", ref.acceptance[k]},
                         {"scale", ref.scale[k]}});
  res.summary = {{"experiment", "logistic"},
                 {"schema_version", kSchemaVersion},
                 {"N", model.size()},
                 {"dim", model.dim()},
                 {"h", cfg.h},
                 {"steps", cfg.steps},
                 {"replicates", R},
                 {"msgld_covariance_scale", cfg.msgld_covariance_scale},
                 {"reference",
                  {{"mean", rm},
                   {"runs", runs_json},
                   {"max_z", ref.max_z},
                   {"consistent", ref.consistent},
                   {"wall_time_s", ref_seconds}}},
                 {"final_mse", final_mse},
                 {"warnings", res.warnings}};
  if (cells > 0 && dead_cells == cells) res.status = ExitStatus::Infeasible;
  return res;
}

}  // namespace sgld
