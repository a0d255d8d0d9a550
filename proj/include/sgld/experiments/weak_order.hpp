#pragma once

// Stationary bias of the second moment of Euler-Maruyama on an OU process,
// bias(h) ~ lambda h^p: exact values and long coupled chains.

#include "sgld/experiments/common.hpp"
#include "sgld/parallel.hpp"
#include "sgld/random.hpp"
#include "sgld/toy_analytic.hpp"

namespace sgld {

struct WeakOrderConfig {
  double mu = 0.0;
  double sigma_sq = 1.0;
  std::vector<double> analytic_h{0.0025, 0.005, 0.01, 0.02, 0.04, 0.08};
  std::vector<double> empirical_h{0.02, 0.05, 0.1};
  std::uint64_t steps = 1000000;
  std::uint64_t burn_in = 2000;
  std::size_t replicates = 10;
  double pass_low = 0.23;
  double pass_high = 0.27;

  void register_params(ConfigSchema& s) {
    s.add("mu", &mu, "mean of the OU target");
    s.add("sigma_sq", &sigma_sq, "variance of the OU target", positive<double>());
    s.add("analytic_h", &analytic_h, "step sizes for the exact bias", nonempty_positive<double>());
    s.add("empirical_h", &empirical_h, "step sizes for simulated chains (empty = none)",
          std::function<void(const std::vector<double>&)>([](const std::vector<double>& v) {
            for (double h : v)
              if (!(h > 0.0)) throw ConfigError("step sizes must be positive");
          }));
    s.add("steps", &steps, "chain length per replicate", positive<std::uint64_t>());
    s.add("burn_in", &burn_in, "discarded initial steps");
    s.add("replicates", &replicates, "independent coupled chain pairs per step size");
    s.add("pass_low", &pass_low, "lower end of the accepted coefficient band");
    s.add("pass_high", &pass_high, "upper end of the accepted coefficient band");
  }
};

/// Mean over steps b+1..K of (X - mu)^2 - (Y - mu)^2, where X is Euler and Y
/// the exact OU transition driven by the same normals, Y_0 = X_0 ~ N(mu, sigma^2).
/// Y is stationary throughout, so this estimates E_h[(X - mu)^2] - sigma^2.
inline double coupled_ou_bias(double mu, double sigma_sq, double h, std::uint64_t K, std::uint64_t burn_in,
                              std::uint64_t seed, std::uint64_t replicate) {
  Engine noise = make_engine(seed, replicate, Stream::Noise);
  Engine init = make_engine(seed, replicate, Stream::Data);
  std::normal_distribution<double> normal(0.0, 1.0);
  const double sd = std::sqrt(sigma_sq);
  const double rho = std::exp(-0.5 * h / sigma_sq);
  const double s_exact = std::sqrt(sigma_sq * -std::expm1(-h / sigma_sq));
  const double sqrt_h = std::sqrt(h);
  double x = mu + sd * normal(init);
  double y = x;
  double acc = 0.0;
  for (std::uint64_t k = 1; k <= K; ++k) {
    const double xi = normal(noise);
    const double drift = 0.5 * (-(x - mu) / sigma_sq);
    x = x + (h * drift + sqrt_h * xi);
    y = mu + rho * (y - mu) + s_exact * xi;
    if (k > burn_in) acc += (x - mu) * (x - mu) - (y - mu) * (y - mu);
  }
  if (!std::isfinite(x)) throw DivergenceError(K);
  return acc / double(K - burn_in);
}

inline ExperimentResult run_weak_order(const WeakOrderConfig& cfg, const RunContext& ctx) {
  if (!(cfg.pass_low < cfg.pass_high)) throw ConfigError("pass_low must be < pass_high");
  for (double h : cfg.analytic_h)
    if (h >= 4.0 * cfg.sigma_sq) throw ConfigError("analytic_h must stay below 4 sigma_sq");
  for (double h : cfg.empirical_h)
    if (h >= 4.0 * cfg.sigma_sq) throw ConfigError("empirical_h must stay below 4 sigma_sq");
  const bool empirical = !cfg.empirical_h.empty();
  const std::size_t R = empirical ? resolve_replicates(cfg.replicates, ctx) : 0;
  if (empirical && cfg.burn_in >= cfg.steps) throw ConfigError("burn_in must be < steps");

  ExperimentResult res;
  res.table.header = {"path", "h", "bias", "bias_se", "bias_over_h", "bias_over_h_se", "replicates",
                      "wall_time_s"};
  auto band = [&](double c) { return c >= cfg.pass_low && c <= cfg.pass_high; };

  std::vector<double> ah, ab;
  for (double h : cfg.analytic_h) {
    Stopwatch sw;
    const double b = ou_euler_stationary_variance(cfg.sigma_sq, h) - cfg.sigma_sq;
    ah.push_back(h);
    ab.push_back(b);
    res.table.rows.push_back(
        {Cell("analytic"), Cell(h), Cell(b), blank(), Cell(b / h), blank(), integer(0), Cell(sw.seconds())});
  }
  nlohmann::json analytic;
  if (ah.size() >= 3) {
    const auto f = fit_bias_coefficient(ah, ab);
    analytic = {{"lambda", f.lambda},           {"lambda_signed", f.lambda_signed},
                {"order", f.order},             {"leading_order", f.leading_order},
                {"r_squared", f.r_squared},     {"pass", band(f.lambda)}};
  }

  nlohmann::json emp_summary;
  if (empirical) {
    const std::size_t H = cfg.empirical_h.size();
    std::vector<std::vector<double>> v(H, std::vector<double>(R));
    std::vector<double> secs(H);
    for (std::size_t j = 0; j < H; ++j) {
      Stopwatch sw;
      parallel_for(R, ctx.threads, [&](std::size_t i) {
        v[j][i] = coupled_ou_bias(cfg.mu, cfg.sigma_sq, cfg.empirical_h[j], cfg.steps, cfg.burn_in, ctx.seed, i);
      });
      secs[j] = sw.seconds();
    }
    std::vector<double> means(H);
    for (std::size_t j = 0; j < H; ++j) {
      const auto m = detail::mean_se(v[j]);
      means[j] = m.mean;
      const double h = cfg.empirical_h[j];
      res.table.rows.push_back({Cell("empirical"), Cell(h), Cell(m.mean), num(m.se), Cell(m.mean / h), num(m.se / h),
                                integer(R), Cell(secs[j])});
    }
    if (H >= 3) {
      const auto f = fit_bias_coefficient(cfg.empirical_h, means);
      // Jackknife over replicates for the Monte Carlo error of the fitted values.
      std::vector<double> jl(R), jo(R);
      for (std::size_t i = 0; i < R; ++i) {
        std::vector<double> loo(H);
        for (std::size_t j = 0; j < H; ++j) {
          double s = 0.0;
          for (std::size_t k = 0; k < R; ++k)
            if (k != i) s += v[j][k];
          loo[j] = s / double(R - 1);
        }
        const auto fi = fit_bias_coefficient(cfg.empirical_h, loo);
        jl[i] = fi.lambda;
        jo[i] = fi.order;
      }
      auto jk_se = [&](const std::vector<double>& x) {
        double m = 0.0;
        for (double t : x) m += t;
        m /= double(x.size());
        double ss = 0.0;
        for (double t : x) ss += (t - m) * (t - m);
        return std::sqrt(double(x.size() - 1) / double(x.size()) * ss);
      };
      const double lse = jk_se(jl), ose = jk_se(jo);
      emp_summary = {{"lambda", f.lambda},
                     {"lambda_signed", f.lambda_signed},
                     {"lambda_se", lse},
                     {"lambda_ci95", {f.lambda - 1.96 * lse, f.lambda + 1.96 * lse}},
                     {"order", f.order},
                     {"order_se", ose},
                     {"order_ci95", {f.order - 1.96 * ose, f.order + 1.96 * ose}},
                     {"leading_order", f.leading_order},
                     {"pass", band(f.lambda)}};
    }
  }

  res.summary = {{"experiment", "weak-order"},
                 {"schema_version", kSchemaVersion},
                 {"mu", cfg.mu},
                 {"sigma_sq", cfg.sigma_sq},
                 {"pass_band", {cfg.pass_low, cfg.pass_high}},
                 {"analytic", analytic},
                 {"empirical", emp_summary},
                 {"replicates", R},
                 {"seed", ctx.seed}};
  return res;
}

}  // namespace sgld
