#pragma once

// Asymptotic bias of theta^2 against the step size for Euler, SGLD and mSGLD
// on the toy model: analytic values and long-chain estimates.

#include "sgld/experiments/common.hpp"
#include "sgld/parallel.hpp"
#include "sgld/toy_analytic.hpp"
#include "sgld/toy_chain.hpp"

#include <optional>

namespace sgld {

struct BiasSweepConfig {
  ToyDataConfig data;
  std::vector<std::string> methods{"euler", "sgld", "msgld"};
  std::vector<std::size_t> n{10, 200};
  std::string sampling = "without";
  std::vector<double> r{0.005, 0.01, 0.02, 0.05, 0.1, 0.2, 0.4};
  std::string msgld_covariance = "exact";
  bool empirical = true;
  std::uint64_t steps = 1000000;
  std::uint64_t burn_in = 1000;
  std::size_t replicates = 8;

  void register_params(ConfigSchema& s) {
    data.register_params(s);
    s.add("methods", &methods, "subset of euler, sgld, msgld", method_list());
    s.add("n", &n, "minibatch sizes", nonempty_positive<std::size_t>());
    s.add("sampling", &sampling, "minibatch sampling: with or without replacement",
          std::function<void(const std::string&)>([](const std::string& v) { parse_sampling(v); }));
    s.add("r", &r, "scaled step sizes r = h A, each in (0, 1)", open_unit_interval());
    s.add("msgld_covariance", &msgld_covariance, "mSGLD gradient variance: exact or estimated",
          std::function<void(const std::string&)>([](const std::string& v) { parse_covariance(v); }));
    s.add("empirical", &empirical, "run long chains next to the analytic values");
    s.add("steps", &steps, "chain length K per replicate", positive<std::uint64_t>());
    s.add("burn_in", &burn_in, "discarded initial steps");
    s.add("replicates", &replicates, "independent chains per grid point");
  }
};

namespace detail {

struct PairedRun {
  std::optional<double> centred;  // (1/K) sum (theta - mu_p)^2
  std::uint64_t collapses = 0;
};

inline std::vector<PairedRun> run_centred(const GaussianConjugateModel& model, const KernelConfig& kernel,
                                          const ChainSpec& spec, double mu, std::size_t R,
                                          unsigned threads) {
  std::vector<PairedRun> out(R);
  parallel_for(R, threads, [&](std::size_t i) {
    ChainSpec s = spec;
    s.replicate = i;
    ToyChain chain(model, kernel, s);
    try {
      double sum = 0.0;
      std::uint64_t count = 0;
      for (std::uint64_t k = 1; k <= s.K; ++k) {
        chain.step();
        if (k <= s.burn_in) continue;
        const double d = chain.state() - mu;
        sum += d * d;
        ++count;
      }
      out[i].centred = sum / double(count);
    } catch (const DivergenceError&) {
    }
    out[i].collapses = chain.noise_collapses();
  });
  return out;
}

}  // namespace detail

inline ExperimentResult run_bias_sweep(const BiasSweepConfig& cfg, const RunContext& ctx) {
  const std::size_t R = resolve_replicates(cfg.replicates, ctx);
  const auto model = cfg.data.build();
  const Sampling mode = parse_sampling(cfg.sampling);
  const CovarianceSource cov = parse_covariance(cfg.msgld_covariance);
  for (std::size_t n : cfg.n)
    if (n > model.size()) throw ConfigError("n = " + std::to_string(n) + " exceeds N");
  if (cfg.empirical && cfg.burn_in >= cfg.steps) throw ConfigError("burn_in must be < steps");

  const auto post = toy_posterior_params(model);
  const double A = post.A;
  const double mu = post.mu_p;

  ExperimentResult res;
  res.table.header = {"method", "n", "sampling", "r", "h", "analytic_bias", "analytic_excess_bias",
                      "empirical_bias", "empirical_bias_se", "empirical_excess_bias",
                      "empirical_excess_bias_se", "replicates", "diverged", "noise_collapses",
                      "wall_time_s"};
  std::size_t rows = 0, failed_rows = 0;

  for (double r : cfg.r) {
    const double h = r / A;
    ChainSpec spec;
    spec.h = h;
    spec.K = cfg.steps;
    spec.burn_in = cfg.burn_in;
    spec.theta0 = scalar_state(mu);
    spec.seed = ctx.seed;

    // Euler replicates double as the common-random-number control for the excess bias.
    std::vector<detail::PairedRun> euler;
    double euler_time = 0.0;
    if (cfg.empirical) {
      Stopwatch sw;
      euler = detail::run_centred(model, toy_kernel(model, Method::Euler, model.size(), mode, cov), spec, mu,
                                  R, ctx.threads);
      euler_time = sw.seconds();
    }

    for (const auto& name : cfg.methods) {
      const Method method = parse_method(name);
      const std::vector<std::size_t> ns = method == Method::Euler ? std::vector<std::size_t>{model.size()} : cfg.n;
      for (std::size_t n : ns) {
        Stopwatch sw;
        const MinibatchScheme scheme{n, mode};
        const double var_b = method == Method::Euler || scheme.is_full_batch(model.size())
                                 ? 0.0
                                 : toy_var_b(model, scheme);
        const double bias = asymptotic_bias_theta_sq(method, A, var_b, h);
        const double excess = method == Method::Euler ? 0.0 : excess_bias(method, A, var_b, h);

        detail::MeanSe emp, exc;
        std::size_t diverged = 0;
        std::uint64_t collapses = 0;
        if (cfg.empirical) {
          const auto runs = method == Method::Euler
                                ? euler
                                : detail::run_centred(model, toy_kernel(model, method, n, mode, cov), spec, mu, R,
                                                      ctx.threads);
          std::vector<double> vals, diffs;
          for (std::size_t i = 0; i < R; ++i) {
            collapses += runs[i].collapses;
            if (!runs[i].centred) {
              ++diverged;
              continue;
            }
            vals.push_back(*runs[i].centred - post.sigma_p_sq);
            if (euler[i].centred) diffs.push_back(*runs[i].centred - *euler[i].centred);
          }
          emp = detail::mean_se(vals);
          exc = detail::mean_se(diffs);
          if (diverged == R) ++failed_rows;
        }
        ++rows;
        const double elapsed = sw.seconds() + (method == Method::Euler ? euler_time : 0.0);
        res.table.rows.push_back({Cell(name), integer(n), Cell(std::string(sampling_name(mode))), Cell(r), Cell(h),
                                  Cell(bias), Cell(excess), num(emp.mean), num(emp.se), num(exc.mean),
                                  num(exc.se), integer(cfg.empirical ? R : 0), integer(diverged),
                                  integer(collapses), Cell(elapsed)});
      }
    }
  }

  res.summary = {{"experiment", "bias-sweep"},
                 {"schema_version", kSchemaVersion},
                 {"N", model.size()},
                 {"A", A},
                 {"mu_p", mu},
                 {"sigma_p_sq", post.sigma_p_sq},
                 {"replicates", cfg.empirical ? R : 0},
                 {"seed", ctx.seed}};
  if (cfg.empirical && rows > 0 && failed_rows == rows) res.status = ExitStatus::Infeasible;
  return res;
}

}  // namespace sgld
