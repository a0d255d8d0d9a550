#pragma once

// Replicated Monte Carlo estimates of bias, variance, MSE and ERE of sample
// averages, plus the scaling-law utilities used by the sweeps.

#include "sgld/errors.hpp"
#include "sgld/parallel.hpp"
#include "sgld/samplers.hpp"
#include "sgld/toy_analytic.hpp"
#include "sgld/toy_chain.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace sgld {

/// Per-replicate values of one estimator and their summary against a truth.
/// Diverged replicates are not in `values`; they are counted in `diverged`.
struct ReplicateSummary {
  std::vector<double> values;
  double truth = 0.0;
  std::size_t requested = 0;
  std::size_t diverged = 0;
  std::uint64_t noise_collapses = 0;
  /// Set when every replicate average is over a single state (K = 1).
  bool degenerate = false;

  std::size_t count() const { return values.size(); }

  double mean() const {
    if (values.empty()) return std::numeric_limits<double>::quiet_NaN();
    double s = 0.0;
    for (double v : values) s += v;
    return s / double(values.size());
  }

  /// Spread of the replicate values, divisor R (so that mse = bias^2 + variance).
  double variance() const {
    const double m = mean();
    double s = 0.0;
    for (double v : values) s += (v - m) * (v - m);
    return s / double(values.size());
  }

  double bias() const { return mean() - truth; }

  double mse() const {
    if (values.empty()) return std::numeric_limits<double>::quiet_NaN();
    double s = 0.0;
    for (double v : values) s += (v - truth) * (v - truth);
    return s / double(values.size());
  }

  double mean_se() const {
    const std::size_t R = values.size();
    if (R < 2) return std::numeric_limits<double>::quiet_NaN();
    return std::sqrt(variance() / double(R - 1));
  }

  /// Jackknife standard error of mse(): leave-one-out recomputation,
  /// sqrt((R-1)/R sum (mse_(i) - mse_(.))^2).
  double mse_se() const {
    const std::size_t R = values.size();
    if (R < 2) return std::numeric_limits<double>::quiet_NaN();
    double total = 0.0;
    for (double v : values) total += (v - truth) * (v - truth);
    std::vector<double> loo(R);
    double loo_mean = 0.0;
    for (std::size_t i = 0; i < R; ++i) {
      const double e = (values[i] - truth) * (values[i] - truth);
      loo[i] = (total - e) / double(R - 1);
      loo_mean += loo[i];
    }
    loo_mean /= double(R);
    double ss = 0.0;
    for (double v : loo) ss += (v - loo_mean) * (v - loo_mean);
    return std::sqrt(double(R - 1) / double(R) * ss);
  }

  /// Concatenates replicate sets estimated against the same truth.
  void merge(const ReplicateSummary& other) {
    if (other.truth != truth && !other.values.empty() && !values.empty())
      throw std::invalid_argument("cannot merge summaries with different truths");
    if (values.empty() && requested == 0) truth = other.truth;
    values.insert(values.end(), other.values.begin(), other.values.end());
    requested += other.requested;
    diverged += other.diverged;
    noise_collapses += other.noise_collapses;
    degenerate = degenerate || other.degenerate;
  }
};

/// 0, 1, ..., R-1.
inline std::vector<std::uint64_t> replicate_ids(std::size_t R, std::uint64_t first = 0) {
  std::vector<std::uint64_t> ids(R);
  for (std::size_t r = 0; r < R; ++r) ids[r] = first + r;
  return ids;
}

inline void validate_replicates(std::span<const std::uint64_t> ids) {
  if (ids.size() < 2) throw std::invalid_argument("need at least 2 replicates");
  std::set<std::uint64_t> seen(ids.begin(), ids.end());
  if (seen.size() != ids.size())
    throw std::invalid_argument("replicate ids must be distinct (identical seeds give identical chains)");
}

/// Runs one chain per replicate id (seed-split through ChainSpec::replicate)
/// and records one scalar per replicate. `run` returns the value and the
/// noise-collapse count of a chain; a DivergenceError excludes the replicate.
template <class Run>
ReplicateSummary run_replicates(const ChainSpec& spec, std::span<const std::uint64_t> ids,
                                double truth, unsigned threads, Run&& run) {
  validate_replicates(ids);
  struct Slot {
    std::optional<double> value;
    std::uint64_t collapses = 0;
  };
  std::vector<Slot> slots(ids.size());
  parallel_for(ids.size(), threads, [&](std::size_t i) {
    ChainSpec s = spec;
    s.replicate = ids[i];
    try {
      auto [v, c] = run(s);
      slots[i].value = v;
      slots[i].collapses = c;
    } catch (const DivergenceError&) {
      slots[i].value.reset();
    }
  });
  ReplicateSummary out;
  out.truth = truth;
  out.requested = ids.size();
  out.degenerate = spec.K - std::min(spec.K, spec.burn_in) == 1;
  for (const auto& s : slots) {
    if (s.value && std::isfinite(*s.value))
      out.values.push_back(*s.value);
    else
      ++out.diverged;
    out.noise_collapses += s.collapses;
  }
  return out;
}

/// MSE of the sample average of phi over R chains of a generic model.
template <Model M>
ReplicateSummary estimate_mse(const M& model, const KernelConfig& kernel, const ChainSpec& spec,
                              const TestFunction& phi, double truth,
                              std::span<const std::uint64_t> ids, unsigned threads = 1) {
  RunOptions opt;
  opt.phis = {phi};
  return run_replicates(spec, ids, truth, threads, [&](const ChainSpec& s) {
    const auto r = run_chain(model, kernel, s, opt);
    return std::pair{r.stats.phi_mean(std::size_t{0}), r.noise_collapses};
  });
}

template <Model M>
ReplicateSummary estimate_mse(const M& model, const KernelConfig& kernel, const ChainSpec& spec,
                              const TestFunction& phi, double truth, std::size_t R,
                              unsigned threads = 1) {
  const auto ids = replicate_ids(R);
  return estimate_mse(model, kernel, spec, phi, truth, ids, threads);
}

/// Relative error of the within-chain variance of coordinate `coord`,
/// averaged over replicates: the values are (S2 - S1^2) / sigma^2 - 1 and the
/// truth is 0, so mean() is the ERE estimate.
template <Model M>
ReplicateSummary estimate_ere(const M& model, const KernelConfig& kernel, const ChainSpec& spec,
                              double posterior_variance, std::span<const std::uint64_t> ids,
                              unsigned threads = 1, std::size_t coord = 0) {
  if (!(posterior_variance > 0.0)) throw std::invalid_argument("posterior variance must be > 0");
  return run_replicates(spec, ids, 0.0, threads, [&](const ChainSpec& s) {
    const auto r = run_chain(model, kernel, s);
    const double v = r.stats.variance()[Eigen::Index(coord)];
    return std::pair{v / posterior_variance - 1.0, r.noise_collapses};
  });
}

template <Model M>
ReplicateSummary estimate_ere(const M& model, const KernelConfig& kernel, const ChainSpec& spec,
                              double posterior_variance, std::size_t R, unsigned threads = 1) {
  const auto ids = replicate_ids(R);
  return estimate_ere(model, kernel, spec, posterior_variance, ids, threads);
}

// Toy-model versions on the scalar fast path.

/// MSE of (1/K) sum theta^p, p in {1, 2}, for the toy model.
inline ReplicateSummary estimate_toy_mse(const GaussianConjugateModel& model, const KernelConfig& kernel,
                                         const ChainSpec& spec, int power, double truth,
                                         std::span<const std::uint64_t> ids, unsigned threads = 1) {
  if (power != 1 && power != 2) throw std::invalid_argument("toy MSE supports theta and theta^2");
  return run_replicates(spec, ids, truth, threads, [&](const ChainSpec& s) {
    const auto r = run_toy_chain(model, kernel, s);
    return std::pair{power == 1 ? r.mean1() : r.mean2(), r.noise_collapses};
  });
}

inline ReplicateSummary estimate_toy_ere(const GaussianConjugateModel& model, const KernelConfig& kernel,
                                         const ChainSpec& spec, std::span<const std::uint64_t> ids,
                                         unsigned threads = 1) {
  const double var = toy_posterior_params(model).sigma_p_sq;
  return run_replicates(spec, ids, 0.0, threads, [&](const ChainSpec& s) {
    const auto r = run_toy_chain(model, kernel, s);
    return std::pair{r.within_variance() / var - 1.0, r.noise_collapses};
  });
}

// ---------------------------------------------------------------------------
// Power laws and step-size optimisation

struct PowerLawFit {
  double exponent = 0.0;
  double prefactor = 0.0;
  double r_squared = 0.0;
  double exponent_se = 0.0;
  std::size_t points = 0;
};

/// y = prefactor * x^exponent by least squares on (log x, log y); pairs with
/// a non-positive coordinate are dropped.
inline PowerLawFit fit_power_law(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw std::invalid_argument("x and y differ in length");
  std::vector<double> lx, ly;
  for (std::size_t i = 0; i < x.size(); ++i)
    if (x[i] > 0.0 && y[i] > 0.0 && std::isfinite(x[i]) && std::isfinite(y[i])) {
      lx.push_back(std::log(x[i]));
      ly.push_back(std::log(y[i]));
    }
  if (lx.size() < 3) throw std::invalid_argument("power-law fit needs at least 3 positive pairs");
  const auto f = detail::fit_line(lx, ly);
  return {f.slope, std::exp(f.intercept), f.r_squared, f.slope_se, lx.size()};
}

struct GoldenResult {
  double x = 0.0;
  double fx = 0.0;
  int iterations = 0;
};

/// Golden-section minimisation of f on [lo, hi] until hi - lo <= tol.
template <class F>
GoldenResult golden_section_minimize(F&& f, double lo, double hi, double tol, int max_iter = 500) {
  const double g = 0.5 * (std::sqrt(5.0) - 1.0);
  double c = hi - g * (hi - lo), d = lo + g * (hi - lo);
  double fc = f(c), fd = f(d);
  int it = 0;
  while (hi - lo > tol && it < max_iter) {
    ++it;
    if (fc <= fd) {
      hi = d;
      d = c;
      fd = fc;
      c = hi - g * (hi - lo);
      fc = f(c);
    } else {
      lo = c;
      c = d;
      fc = fd;
      d = lo + g * (hi - lo);
      fd = f(d);
    }
  }
  return fc <= fd ? GoldenResult{c, fc, it} : GoldenResult{d, fd, it};
}

struct OptimalStep {
  std::uint64_t K = 0;
  double h = 0.0;
  double mse = 0.0;
  bool unimodal = true;      // coarse scan had a single descent/ascent
  bool at_boundary = false;  // minimiser sits at the edge of the search range
  bool degenerate = false;   // K = 1
  int iterations = 0;
};

struct OptimalStepOptions {
  Method method = Method::Sgld;
  /// Law of theta_0; unset means the exact posterior N(mu_p, sigma_p^2).
  std::optional<Start> start;
  double r_min = 1e-8;  // search over r = A h in [r_min, r_max]
  double r_max = 1.0 - 1e-9;
  std::size_t coarse_points = 121;
  std::size_t fine_points = 4001;
  double rel_tol = 1e-6;
};

/// argmin_h of the exact MSE of (1/K) sum theta^2 for each K, by golden
/// section in log h on (0, 1/A). A coarse log grid first brackets the
/// minimum; if its values are not unimodal the search falls back to a fine
/// grid and the result is flagged.
inline std::vector<OptimalStep> optimal_h_curve(const ToyAnalytic& ta, std::span<const std::uint64_t> Ks,
                                                const OptimalStepOptions& opt = {}) {
  std::vector<OptimalStep> out;
  const double lr0 = std::log(opt.r_min), lr1 = std::log(opt.r_max);
  const Start start = opt.start.value_or(Start(ta.mu_p, ta.sigma_p_sq));
  for (std::uint64_t K : Ks) {
    if (K < 1) throw std::invalid_argument("K must be >= 1");
    auto f = [&](double log_r) {
      return analytic_mse2_breakdown(ta, opt.method, std::exp(log_r) / ta.A, K, start).mse();
    };
    auto scan = [&](std::size_t n, std::vector<double>& xs, std::vector<double>& ys) {
      xs.resize(n);
      ys.resize(n);
      for (std::size_t i = 0; i < n; ++i) {
        xs[i] = lr0 + (lr1 - lr0) * double(i) / double(n - 1);
        ys[i] = f(xs[i]);
      }
    };
    std::vector<double> xs, ys;
    scan(opt.coarse_points, xs, ys);
    OptimalStep s;
    s.K = K;
    s.degenerate = K == 1;
    std::size_t turns = 0;
    for (std::size_t i = 1; i + 1 < ys.size(); ++i)
      if ((ys[i] - ys[i - 1]) * (ys[i + 1] - ys[i]) < 0.0) ++turns;
    s.unimodal = turns <= 1;
    if (!s.unimodal) scan(opt.fine_points, xs, ys);
    const std::size_t k = std::size_t(std::min_element(ys.begin(), ys.end()) - ys.begin());
    s.at_boundary = k == 0 || k + 1 == ys.size();
    const double lo = xs[k == 0 ? 0 : k - 1], hi = xs[std::min(k + 1, xs.size() - 1)];
    // |d log h| <= rel_tol gives a relative accuracy of rel_tol in h.
    const auto g = golden_section_minimize(f, lo, hi, opt.rel_tol);
    const double best_x = g.fx <= ys[k] ? g.x : xs[k];
    s.h = std::exp(best_x) / ta.A;
    s.mse = std::min(g.fx, ys[k]);
    s.iterations = g.iterations;
    out.push_back(s);
  }
  return out;
}

}  // namespace sgld
