#pragma once

// Shared plumbing for the experiment drivers: run context, results, toy
// dataset options and name parsing.

#include "sgld/config.hpp"
#include "sgld/csv.hpp"
#include "sgld/models.hpp"
#include "sgld/samplers.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <string>
#include <vector>

namespace sgld {

/// CSV header version; bumped whenever a column is added, removed or renamed.
inline constexpr int kSchemaVersion = 1;

enum class ExitStatus { Ok = 0, ConfigError = 2, Infeasible = 3 };

struct RunContext {
  std::uint64_t seed = 1;
  std::size_t replicates = 0;  // 0 = take the config value
  unsigned threads = 1;
};

struct ExperimentResult {
  Table table;
  nlohmann::json summary = nlohmann::json::object();
  ExitStatus status = ExitStatus::Ok;
  std::vector<std::string> warnings;
};

/// Columns whose values legitimately differ between identical runs.
inline bool is_timing_column(const std::string& name) {
  return name.size() >= 11 && name.compare(name.size() - 11, 11, "wall_time_s") == 0;
}

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

inline Method parse_method(const std::string& s) {
  if (s == "euler") return Method::Euler;
  if (s == "sgld") return Method::Sgld;
  if (s == "msgld") return Method::Msgld;
  throw ConfigError("unknown method '" + s + "' (expected euler, sgld or msgld)");
}

inline Sampling parse_sampling(const std::string& s) {
  if (s == "without") return Sampling::WithoutReplacement;
  if (s == "with") return Sampling::WithReplacement;
  throw ConfigError("unknown sampling mode '" + s + "' (expected with or without)");
}

inline const char* sampling_name(Sampling s) {
  return s == Sampling::WithReplacement ? "with" : "without";
}

inline CovarianceSource parse_covariance(const std::string& s) {
  if (s == "exact") return CovarianceSource::Exact;
  if (s == "estimated") return CovarianceSource::Estimated;
  throw ConfigError("unknown covariance source '" + s + "' (expected exact or estimated)");
}

inline std::function<void(const std::vector<std::string>&)> method_list() {
  return [](const std::vector<std::string>& v) {
    if (v.empty()) throw ConfigError("method list must be nonempty");
    for (const auto& m : v) parse_method(m);
  };
}

inline std::size_t resolve_replicates(std::size_t configured, const RunContext& ctx) {
  const std::size_t R = ctx.replicates ? ctx.replicates : configured;
  if (R < 2) throw ConfigError("replicates must be >= 2");
  return R;
}

/// Seed for an auxiliary stream identified by (seed, a, b), e.g. dataset d at grid point i.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0) {
  std::seed_seq seq{std::uint32_t(seed), std::uint32_t(seed >> 32), std::uint32_t(a),
                    std::uint32_t(a >> 32), std::uint32_t(b), std::uint32_t(b >> 32)};
  std::array<std::uint32_t, 2> out{};
  seq.generate(out.begin(), out.end());
  return (std::uint64_t(out[0]) << 32) | out[1];
}

/// Gaussian toy model: prior N(0, sigma_theta^2), data N(theta_true, sigma_x^2).
struct ToyDataConfig {
  std::size_t N = 1000;
  double sigma_theta_sq = 1.0;
  double sigma_x_sq = 1.0;
  double theta_true = 1.0;
  std::uint64_t data_seed = 1;
  std::string data_file;  // one-column CSV; overrides N and data_seed when set

  void register_params(ConfigSchema& s) {
    s.add("N", &N, "number of data points", positive<std::size_t>());
    s.add("sigma_theta_sq", &sigma_theta_sq, "prior variance", positive<double>());
    s.add("sigma_x_sq", &sigma_x_sq, "observation variance", positive<double>());
    s.add("theta_true", &theta_true, "parameter generating the synthetic data");
    s.add("data_seed", &data_seed, "seed of the synthetic dataset");
    s.add("data_file", &data_file, "CSV file with one column x (empty = generate)");
  }

  GaussianConjugateModel build() const {
    auto x = data_file.empty() ? generate_toy_data(theta_true, sigma_x_sq, N, data_seed)
                               : load_toy_data(data_file);
    return GaussianConjugateModel(sigma_theta_sq, sigma_x_sq, std::move(x));
  }
};

inline KernelConfig toy_kernel(const GaussianConjugateModel& model, Method method, std::size_t n,
                               Sampling mode, CovarianceSource cov) {
  KernelConfig k;
  k.method = method;
  k.scheme = method == Method::Euler ? MinibatchScheme{model.size(), Sampling::WithoutReplacement}
                                     : MinibatchScheme{n, mode};
  k.covariance = cov;
  if (method == Method::Msgld && cov == CovarianceSource::Exact) {
    k.drift_covariance.resize(1, 1);
    k.drift_covariance(0, 0) = k.scheme.is_full_batch(model.size()) ? 0.0 : toy_var_b(model, k.scheme);
  }
  return k;
}

inline Eigen::VectorXd scalar_state(double v) {
  Eigen::VectorXd t(1);
  t[0] = v;
  return t;
}

/// Empty cell for quantities that do not apply to a row.
inline Cell blank() { return Cell(std::string()); }

inline double nan() { return std::numeric_limits<double>::quiet_NaN(); }

/// Numeric cell; NaN (not computed) becomes an empty field.
inline Cell num(double v) { return std::isnan(v) ? blank() : Cell(v); }

inline Cell integer(std::uint64_t v) { return Cell(static_cast<long long>(v)); }

/// log-spaced integers in [lo, hi], `per_decade` points per factor of ten, deduplicated.
inline std::vector<std::size_t> log_int_grid(std::size_t lo, std::size_t hi, double per_decade) {
  std::vector<std::size_t> out;
  const double l0 = std::log10(double(lo)), l1 = std::log10(double(hi));
  const std::size_t pts = std::max<std::size_t>(2, std::size_t(std::ceil((l1 - l0) * per_decade)) + 1);
  for (std::size_t i = 0; i < pts; ++i) {
    const auto v = std::size_t(std::llround(std::pow(10.0, l0 + (l1 - l0) * double(i) / double(pts - 1))));
    if (out.empty() || v != out.back()) out.push_back(std::clamp(v, lo, hi));
  }
  return out;
}

inline std::vector<double> log_grid(double lo, double hi, double per_decade) {
  const double l0 = std::log10(lo), l1 = std::log10(hi);
  const std::size_t pts = std::max<std::size_t>(2, std::size_t(std::ceil((l1 - l0) * per_decade)) + 1);
  std::vector<double> out(pts);
  for (std::size_t i = 0; i < pts; ++i) out[i] = std::pow(10.0, l0 + (l1 - l0) * double(i) / double(pts - 1));
  return out;
}

namespace detail {

struct MeanSe {
  double mean = std::numeric_limits<double>::quiet_NaN();
  double se = std::numeric_limits<double>::quiet_NaN();
  std::size_t count = 0;
};

inline MeanSe mean_se(const std::vector<double>& v) {
  MeanSe m;
  m.count = v.size();
  if (v.empty()) return m;
  double s = 0.0;
  for (double x : v) s += x;
  m.mean = s / double(v.size());
  if (v.size() < 2) return m;
  double ss = 0.0;
  for (double x : v) ss += (x - m.mean) * (x - m.mean);
  m.se = std::sqrt(ss / double(v.size() - 1) / double(v.size()));
  return m;
}

}  // namespace detail

}  // namespace sgld
