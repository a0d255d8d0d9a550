#pragma once

// Minimal cost M n subject to MSE(theta^2 average) <= eps^2 on the toy model,
// over log grids in n and r and a doubling/bisection search in M.

#include "sgld/estimators.hpp"
#include "sgld/experiments/common.hpp"
#include "sgld/toy_analytic.hpp"

namespace sgld {

struct CostMinimizeConfig {
  ToyDataConfig data;
  std::vector<std::string> methods{"euler", "sgld", "msgld"};
  std::string sampling = "without";
  std::vector<double> epsilon{1e-3, 5e-4, 2e-4, 1e-4, 5e-5, 2e-5, 1e-5};
  double theta0 = 0.0;
  double n_per_decade = 8;
  double r_min = 1e-4;
  double r_max = 0.99;
  double r_per_decade = 40;
  std::uint64_t max_steps = 1000000000000000ULL;

  void register_params(ConfigSchema& s) {
    data.register_params(s);
    s.add("methods", &methods, "subset of euler, sgld, msgld", method_list());
    s.add("sampling", &sampling, "minibatch sampling: with or without replacement",
          std::function<void(const std::string&)>([](const std::string& v) { parse_sampling(v); }));
    s.add("epsilon", &epsilon, "accuracy targets, MSE <= epsilon^2", nonempty_positive<double>());
    s.add("theta0", &theta0, "initial state");
    s.add("n_per_decade", &n_per_decade, "density of the log grid over n in [1, N]", positive<double>());
    s.add("r_min", &r_min, "smallest scaled step size", positive<double>());
    s.add("r_max", &r_max, "largest scaled step size (< 1)",
          std::function<void(const double&)>([](const double& v) {
            if (!(v > 0.0 && v < 1.0)) throw ConfigError("must lie in (0, 1)");
          }));
    s.add("r_per_decade", &r_per_decade, "density of the log grid over r", positive<double>());
    s.add("max_steps", &max_steps, "largest M considered", positive<std::uint64_t>());
  }
};

struct CostOptimum {
  bool feasible = false;
  std::size_t n = 0;
  double r = 0.0;
  std::uint64_t M = 0;
  double mse = 0.0;
  double plateau = 0.0;
  double cost() const { return double(M) * double(n); }
};

/// Smallest M <= max_M with mse(M) <= target, assuming mse is decreasing past
/// the first success; 0 if none or if M n would exceed cost_cap.
template <class F>
std::uint64_t smallest_feasible_steps(F&& mse, double target, std::uint64_t max_M, double n,
                                      double cost_cap) {
  std::uint64_t lo = 0, hi = 1;
  while (mse(hi) > target) {
    if (hi >= max_M || double(hi) * n >= cost_cap) return 0;
    lo = hi;
    hi = std::min(max_M, hi * 2);
  }
  while (hi - lo > 1) {
    const std::uint64_t mid = lo + (hi - lo) / 2;
    (mse(mid) <= target ? hi : lo) = mid;
  }
  return double(hi) * n < cost_cap ? hi : 0;
}

inline ExperimentResult run_cost_minimize(const CostMinimizeConfig& cfg, const RunContext& ctx) {
  if (cfg.r_min >= cfg.r_max) throw ConfigError("r_min must be < r_max");
  const auto model = cfg.data.build();
  const Sampling mode = parse_sampling(cfg.sampling);
  const auto post = toy_posterior_params(model);
  const auto rs = log_grid(cfg.r_min, cfg.r_max, cfg.r_per_decade);
  const auto n_grid = log_int_grid(1, model.size(), cfg.n_per_decade);
  const Start start(cfg.theta0);

  ExperimentResult res;
  res.table.header = {"epsilon", "method", "feasible", "n", "r", "h", "steps", "cost", "mse", "plateau_mse",
                      "wall_time_s"};

  struct Key {
    std::size_t e;
    Method method;
  };
  std::vector<Key> keys;
  for (std::size_t e = 0; e < cfg.epsilon.size(); ++e)
    for (const auto& name : cfg.methods) keys.push_back({e, parse_method(name)});
  std::vector<CostOptimum> best(keys.size());
  std::vector<double> seconds(keys.size());

  std::vector<std::vector<ToyAnalytic>> oracles;
  std::vector<std::vector<std::size_t>> sizes;
  for (const auto& name : cfg.methods) {
    const Method method = parse_method(name);
    std::vector<std::size_t> ns = method == Method::Euler ? std::vector<std::size_t>{model.size()} : n_grid;
    std::vector<ToyAnalytic> tas;
    for (std::size_t n : ns) tas.emplace_back(model, MinibatchScheme{n, mode});
    oracles.push_back(std::move(tas));
    sizes.push_back(std::move(ns));
  }

  parallel_for(keys.size(), ctx.threads, [&](std::size_t k) {
    Stopwatch sw;
    const double eps = cfg.epsilon[keys[k].e];
    const double target = eps * eps;
    const Method method = keys[k].method;
    const std::size_t mi = k % cfg.methods.size();
    CostOptimum opt;
    double cap = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < sizes[mi].size(); ++j) {
      const auto& ta = oracles[mi][j];
      const std::size_t n = sizes[mi][j];
      for (double r : rs) {
        const double h = r / ta.A;
        const double plateau = analytic_mse2_limit(ta, method, h);
        if (plateau >= target) continue;
        auto mse = [&](std::uint64_t M) { return analytic_mse2_breakdown(ta, method, h, M, start).mse(); };
        const std::uint64_t M = smallest_feasible_steps(mse, target, cfg.max_steps, double(n), cap);
        if (M == 0) continue;
        opt = {true, n, r, M, mse(M), plateau};
        cap = opt.cost();
      }
    }
    best[k] = opt;
    seconds[k] = sw.seconds();
  });

  std::size_t feasible = 0;
  nlohmann::json per_method = nlohmann::json::object();
  for (std::size_t k = 0; k < keys.size(); ++k) {
    const auto& o = best[k];
    const double eps = cfg.epsilon[keys[k].e];
    const std::string name = to_string(keys[k].method);
    if (o.feasible) {
      ++feasible;
      const double h = o.r / post.A;
      res.table.rows.push_back({Cell(eps), Cell(name), integer(1), integer(o.n), Cell(o.r), Cell(h), integer(o.M),
                                Cell(o.cost()), Cell(o.mse), Cell(o.plateau), Cell(seconds[k])});
      auto& m = per_method[name];
      m["epsilon"].push_back(eps);
      m["n"].push_back(o.n);
      m["r"].push_back(o.r);
      m["steps"].push_back(o.M);
      m["cost"].push_back(o.cost());
    } else {
      res.table.rows.push_back({Cell(eps), Cell(name), integer(0), blank(), blank(), blank(), blank(), blank(),
                                blank(), blank(), Cell(seconds[k])});
      res.warnings.push_back(name + ": epsilon = " + format_double(eps) + " is infeasible on the search grid");
    }
  }

  res.summary = {{"experiment", "cost-minimize"},
                 {"schema_version", kSchemaVersion},
                 {"N", model.size()},
                 {"theta0", cfg.theta0},
                 {"r_grid_points", rs.size()},
                 {"n_grid_points", n_grid.size()},
                 {"optima", per_method}};
  if (per_method.contains("euler")) {
    const auto& e = per_method["euler"];
    std::vector<double> eps = e["epsilon"], M, r;
    for (const auto& v : e["steps"]) M.push_back(v.get<double>());
    for (const auto& v : e["r"]) r.push_back(v.get<double>());
    if (eps.size() >= 3) {
      const auto fm = fit_power_law(eps, M);
      const auto fr = fit_power_law(eps, r);
      res.summary["euler_fit"] = {{"steps_exponent", fm.exponent},
                                  {"steps_exponent_se", fm.exponent_se},
                                  {"steps_r_squared", fm.r_squared},
                                  {"r_exponent", fr.exponent},
                                  {"r_exponent_se", fr.exponent_se},
                                  {"r_r_squared", fr.r_squared}};
    }
  }
  if (feasible == 0) res.status = ExitStatus::Infeasible;
  return res;
}

}  // namespace sgld
