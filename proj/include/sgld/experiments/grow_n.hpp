#pragma once

// Dataset-averaged MSE and ERE of the toy sample averages as N grows, with
// step size, subset size and run length tied to N.

#include "sgld/estimators.hpp"
#include "sgld/experiments/common.hpp"
#include "sgld/toy_analytic.hpp"

namespace sgld {

struct GrowNConfig {
  std::vector<std::size_t> N{10, 30, 100, 300, 1000, 3000};
  double sigma_theta_sq = 1.0;
  double sigma_x_sq = 1.0;
  double theta_true = 1.0;
  double theta0 = 1.0;
  std::string sampling = "without";
  // SGLD: h = N^(-1-eps), M = N^(1+2 eps), n = 1. Euler: r = N^(-eps), M = N^(1+2 eps).
  double eps = 0.25;
  // ERE: r = N^(-alpha), n = N^beta, M = N^gamma.
  double alpha = 0.25;
  double beta = 0.5;
  double gamma = 1.5;
  std::string ere_method = "sgld";
  std::size_t replicates = 20;

  void register_params(ConfigSchema& s) {
    s.add("N", &N, "dataset sizes", nonempty_positive<std::size_t>());
    s.add("sigma_theta_sq", &sigma_theta_sq, "prior variance", positive<double>());
    s.add("sigma_x_sq", &sigma_x_sq, "observation variance", positive<double>());
    s.add("theta_true", &theta_true, "parameter generating the datasets");
    s.add("theta0", &theta0, "initial state");
    s.add("sampling", &sampling, "minibatch sampling: with or without replacement",
          std::function<void(const std::string&)>([](const std::string& v) { parse_sampling(v); }));
    s.add("eps", &eps, "exponent tying h, r and M to N in the MSE configurations", positive<double>());
    s.add("alpha", &alpha, "ERE configuration: r = N^-alpha", positive<double>());
    s.add("beta", &beta, "ERE configuration: n = N^beta",
          std::function<void(const double&)>([](const double& v) {
            if (!(v >= 0.0 && v <= 1.0)) throw ConfigError("must lie in [0, 1]");
          }));
    s.add("gamma", &gamma, "ERE configuration: M = N^gamma", positive<double>());
    s.add("ere_method", &ere_method, "sampler of the ERE configuration (sgld or msgld)",
          std::function<void(const std::string&)>([](const std::string& v) {
            if (parse_method(v) == Method::Euler) throw ConfigError("ERE configuration needs sgld or msgld");
          }));
    s.add("replicates", &replicates, "datasets drawn per N");
  }
};

inline ExperimentResult run_grow_n(const GrowNConfig& cfg, const RunContext& ctx) {
  const std::size_t D = resolve_replicates(cfg.replicates, ctx);
  const Sampling mode = parse_sampling(cfg.sampling);
  const Method ere_method = parse_method(cfg.ere_method);
  for (std::size_t N : cfg.N)
    if (N < 2) throw ConfigError("N must be >= 2");

  struct Setting {
    std::string name;
    std::string quantity;
    Method method;
  };
  const std::vector<Setting> settings{{"sgld-mse", "mse", Method::Sgld},
                                      {"euler-mse", "mse", Method::Euler},
                                      {std::string(to_string(ere_method)) + "-ere", "ere", ere_method}};

  ExperimentResult res;
  res.table.header = {"N", "configuration", "quantity", "method", "n", "r", "h", "steps", "expected_value",
                      "expected_value_se", "datasets", "wall_time_s"};
  nlohmann::json trends = nlohmann::json::object();
  std::vector<std::vector<double>> series(settings.size());

  for (std::size_t iN = 0; iN < cfg.N.size(); ++iN) {
    const std::size_t N = cfg.N[iN];
    const double Nd = double(N);
    const double A = 0.5 * (1.0 / cfg.sigma_theta_sq + Nd / cfg.sigma_x_sq);
    struct Plan {
      std::size_t n;
      double h;
      std::uint64_t M;
    };
    auto round_u = [](double v) { return std::max<std::uint64_t>(1, std::uint64_t(std::llround(v))); };
    const std::vector<Plan> plans{
        {1, std::pow(Nd, -1.0 - cfg.eps), round_u(std::pow(Nd, 1.0 + 2.0 * cfg.eps))},
        {N, std::pow(Nd, -cfg.eps) / A, round_u(std::pow(Nd, 1.0 + 2.0 * cfg.eps))},
        {std::clamp<std::size_t>(std::size_t(std::llround(std::pow(Nd, cfg.beta))), 1, N),
         std::pow(Nd, -cfg.alpha) / A, round_u(std::pow(Nd, cfg.gamma))}};
    for (const auto& p : plans)
      if (!(p.h * A < 1.0)) throw ConfigError("step size at N = " + std::to_string(N) + " violates h < 1/A");

    std::vector<std::vector<double>> values(settings.size(), std::vector<double>(D));
    std::vector<std::vector<double>> timing(D, std::vector<double>(settings.size()));
    parallel_for(D, ctx.threads, [&](std::size_t d) {
      const GaussianConjugateModel model(cfg.sigma_theta_sq, cfg.sigma_x_sq,
                                         generate_toy_data(cfg.theta_true, cfg.sigma_x_sq, N,
                                                           derive_seed(ctx.seed, d, N)));
      for (std::size_t s = 0; s < settings.size(); ++s) {
        Stopwatch sw;
        const auto& p = plans[s];
        const ToyAnalytic ta(model, MinibatchScheme{p.n, mode});
        values[s][d] = settings[s].quantity == "mse"
                           ? analytic_mse2_breakdown(ta, settings[s].method, p.h, p.M, Start(cfg.theta0)).mse()
                           : analytic_ere(ta, settings[s].method, p.h, p.M, Start(cfg.theta0));
        timing[d][s] = sw.seconds();
      }
    });
    for (std::size_t s = 0; s < settings.size(); ++s) {
      double t = 0.0;
      for (std::size_t d = 0; d < D; ++d) t += timing[d][s];
      const auto m = detail::mean_se(values[s]);
      series[s].push_back(m.mean);
      const auto& p = plans[s];
      res.table.rows.push_back({integer(N), Cell(settings[s].name), Cell(settings[s].quantity),
                                Cell(std::string(to_string(settings[s].method))), integer(p.n), Cell(p.h * A),
                                Cell(p.h), integer(p.M), Cell(m.mean), num(m.se), integer(D), Cell(t)});
    }
  }

  for (std::size_t s = 0; s < settings.size(); ++s) {
    const auto& v = series[s];
    bool decreasing = true, nondecreasing = true;
    for (std::size_t i = 1; i < v.size(); ++i) {
      decreasing = decreasing && v[i] < v[i - 1];
      nondecreasing = nondecreasing && v[i] >= v[i - 1];
    }
    trends[settings[s].name] = {{"values", v}, {"decreasing", decreasing}, {"nondecreasing", nondecreasing}};
  }
  res.summary = {{"experiment", "grow-n"},
                 {"schema_version", kSchemaVersion},
                 {"datasets", D},
                 {"eps", cfg.eps},
                 {"alpha", cfg.alpha},
                 {"beta", cfg.beta},
                 {"gamma", cfg.gamma},
                 {"alpha_plus_beta_below_one", cfg.alpha + cfg.beta < 1.0},
                 {"trends", trends}};
  return res;
}

}  // namespace sgld
