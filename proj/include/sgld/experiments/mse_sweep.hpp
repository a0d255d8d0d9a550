#pragma once

// MSE of the sample average of theta^2 against the number of steps, on a
// fixed dataset or over a grid of dataset sizes N = 10^i with n = N^p.

#include "sgld/estimators.hpp"
#include "sgld/experiments/common.hpp"
#include "sgld/toy_analytic.hpp"

namespace sgld {

struct MseSweepConfig {
  ToyDataConfig data;
  std::string mode = "fixed-n";
  std::vector<std::string> methods{"euler", "sgld", "msgld"};
  std::string sampling = "without";
  double r = 0.05;
  double theta0 = 0.0;
  // fixed-n mode
  std::vector<std::size_t> n{10, 50, 200};
  // grow-n mode: N = 10^e, n = round(N^p)
  std::vector<double> N_exponents{1, 2, 3, 4};
  std::vector<double> n_powers{0.1, 0.5, 0.9};
  std::vector<std::uint64_t> steps{1,     3,     10,     30,     100,     300,     1000,    3000,
                                   10000, 30000, 100000, 300000, 1000000, 3000000, 10000000};
  bool empirical = false;
  std::uint64_t empirical_max_steps = 10000;
  std::size_t replicates = 200;

  void register_params(ConfigSchema& s) {
    data.register_params(s);
    s.add("mode", &mode, "fixed-n (one dataset) or grow-n (N = 10^e, n = N^p)",
          std::function<void(const std::string&)>([](const std::string& v) {
            if (v != "fixed-n" && v != "grow-n") throw ConfigError("mode must be fixed-n or grow-n");
          }));
    s.add("methods", &methods, "subset of euler, sgld, msgld", method_list());
    s.add("sampling", &sampling, "minibatch sampling: with or without replacement",
          std::function<void(const std::string&)>([](const std::string& v) { parse_sampling(v); }));
    s.add("r", &r, "scaled step size r = h A in (0, 1)", std::function<void(const double&)>([](const double& v) {
            if (!(v > 0.0 && v < 1.0)) throw ConfigError("must lie in (0, 1)");
          }));
    s.add("theta0", &theta0, "initial state");
    s.add("n", &n, "minibatch sizes (fixed-n mode)", nonempty_positive<std::size_t>());
    s.add("N_exponents", &N_exponents, "dataset sizes N = 10^e (grow-n mode)", nonempty_positive<double>());
    s.add("n_powers", &n_powers, "minibatch sizes n = N^p (grow-n mode)",
          std::function<void(const std::vector<double>&)>([](const std::vector<double>& v) {
            if (v.empty()) throw ConfigError("grid must be nonempty");
            for (double p : v)
              if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("powers must lie in [0, 1]");
          }));
    s.add("steps", &steps, "numbers of steps M", nonempty_positive<std::uint64_t>());
    s.add("empirical", &empirical, "add Monte Carlo estimates for short runs");
    s.add("empirical_max_steps", &empirical_max_steps, "longest M simulated when empirical = true");
    s.add("replicates", &replicates, "Monte Carlo replicates per simulated row");
  }
};

inline ExperimentResult run_mse_sweep(const MseSweepConfig& cfg, const RunContext& ctx) {
  const Sampling mode = parse_sampling(cfg.sampling);
  const std::size_t R = cfg.empirical ? resolve_replicates(cfg.replicates, ctx) : 0;

  struct Dataset {
    GaussianConjugateModel model;
    std::vector<std::pair<std::size_t, double>> ns;  // (n, power or NaN)
  };
  std::vector<Dataset> datasets;
  if (cfg.mode == "fixed-n") {
    auto model = cfg.data.build();
    std::vector<std::pair<std::size_t, double>> ns;
    for (std::size_t n : cfg.n) {
      if (n > model.size()) throw ConfigError("n = " + std::to_string(n) + " exceeds N");
      ns.emplace_back(n, nan());
    }
    datasets.push_back({std::move(model), std::move(ns)});
  } else {
    for (std::size_t i = 0; i < cfg.N_exponents.size(); ++i) {
      ToyDataConfig d = cfg.data;
      d.data_file.clear();
      d.N = std::size_t(std::llround(std::pow(10.0, cfg.N_exponents[i])));
      d.data_seed = derive_seed(cfg.data.data_seed, i);
      auto model = d.build();
      std::vector<std::pair<std::size_t, double>> ns;
      for (double p : cfg.n_powers)
        ns.emplace_back(std::clamp<std::size_t>(std::size_t(std::llround(std::pow(double(d.N), p))), 1, d.N), p);
      datasets.push_back({std::move(model), std::move(ns)});
    }
  }

  ExperimentResult res;
  res.table.header = {"mode",           "N",           "n",
                      "n_power",        "method",      "r",
                      "h",              "steps",       "effective_passes",
                      "analytic_mse",   "analytic_bias", "analytic_variance",
                      "empirical_mse",  "empirical_mse_se", "replicates",
                      "diverged",       "noise_collapses", "wall_time_s"};
  std::size_t simulated = 0, failed = 0;
  for (const auto& ds : datasets) {
    const auto& model = ds.model;
    const auto post = toy_posterior_params(model);
    const double h = cfg.r / post.A;
    const double truth = post.mu_p * post.mu_p + post.sigma_p_sq;
    for (const auto& name : cfg.methods) {
      const Method method = parse_method(name);
      auto ns = ds.ns;
      if (method == Method::Euler) ns = {{model.size(), nan()}};
      for (const auto& [n, power] : ns) {
        const MinibatchScheme scheme{method == Method::Euler ? model.size() : n, mode};
        const ToyAnalytic ta(model, scheme);
        const KernelConfig kernel = toy_kernel(model, method, n, mode, CovarianceSource::Exact);
        for (std::uint64_t M : cfg.steps) {
          Stopwatch sw;
          const auto an = analytic_mse2_breakdown(ta, method, h, M, Start(cfg.theta0));
          double emse = nan(), ese = nan();
          std::size_t reps = 0, diverged = 0;
          std::uint64_t collapses = 0;
          if (cfg.empirical && M <= cfg.empirical_max_steps) {
            ChainSpec spec;
            spec.h = h;
            spec.K = M;
            spec.theta0 = scalar_state(cfg.theta0);
            spec.seed = ctx.seed;
            const auto ids = replicate_ids(R);
            const auto s = estimate_toy_mse(model, kernel, spec, 2, truth, ids, ctx.threads);
            emse = s.mse();
            ese = s.mse_se();
            reps = R;
            diverged = s.diverged;
            collapses = s.noise_collapses;
            ++simulated;
            if (s.count() == 0) ++failed;
          }
          const std::size_t used = method == Method::Euler ? model.size() : n;
          res.table.rows.push_back(
              {Cell(cfg.mode), integer(model.size()), integer(used), num(power), Cell(name), Cell(cfg.r), Cell(h),
               integer(M), Cell(double(M) * double(used) / double(model.size())), Cell(an.mse()), Cell(an.bias),
               Cell(an.variance), num(emse), num(ese), integer(reps), integer(diverged), integer(collapses),
               Cell(sw.seconds())});
        }
      }
    }
  }
  res.summary = {{"experiment", "mse-sweep"},
                 {"schema_version", kSchemaVersion},
                 {"mode", cfg.mode},
                 {"r", cfg.r},
                 {"replicates", R},
                 {"seed", ctx.seed}};
  if (simulated > 0 && failed == simulated) res.status = ExitStatus::Infeasible;
  return res;
}

}  // namespace sgld
