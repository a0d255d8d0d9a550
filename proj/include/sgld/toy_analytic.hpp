#pragma once

// Closed-form oracle for the Gaussian toy model. The SGLD-family chain is the
// scalar AR(1) recursion
//
//   theta_{j+1} = a theta_j + h B_j + c sqrt(h) xi_j,   a = 1 - A h,
//
// with i.i.d. minibatch statistics B_j, xi_j ~ N(0, 1) and noise multiplier
// c = 1 (Euler, SGLD) or c = 1 - (h/2) Var(B) (mSGLD). Every moment needed
// for the MSE of the sample average of theta^2 follows from the moments of
// B, which are written in power sums and elementary symmetric polynomials of
// the data.

#include "sgld/errors.hpp"
#include "sgld/gradients.hpp"
#include "sgld/models.hpp"
#include "sgld/samplers.hpp"

#include <array>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

namespace sgld {

// ---------------------------------------------------------------------------
// Symmetric polynomials

/// Power sums p_k = sum_i x_i^k and elementary symmetric polynomials e_k,
/// k = 0..4, with e_k from Newton's identities.
struct SymmetricSums {
  std::size_t N = 0;
  std::array<double, 5> p{};
  std::array<double, 5> e{};
};

inline SymmetricSums symmetric_sums(std::span<const double> x) {
  SymmetricSums s;
  s.N = x.size();
  s.p[0] = double(x.size());
  for (double v : x) {
    const double v2 = v * v;
    s.p[1] += v;
    s.p[2] += v2;
    s.p[3] += v2 * v;
    s.p[4] += v2 * v2;
  }
  const auto& p = s.p;
  auto& e = s.e;
  e[0] = 1.0;
  e[1] = p[1];
  e[2] = (e[1] * p[1] - p[2]) / 2.0;
  e[3] = (e[2] * p[1] - e[1] * p[2] + p[3]) / 3.0;
  e[4] = (e[3] * p[1] - e[2] * p[2] + e[1] * p[3] - p[4]) / 4.0;
  return s;
}

/// Mixed moments of data values at q minibatch positions. Naming follows the
/// partition of the power: mom21 = E X_a X_b, mom22 = E X_a^2, mom31 = E X_a X_b X_c,
/// mom32 = E X_a^2 X_b, mom33 = E X_a^3, mom41 = E X_a X_b X_c X_d,
/// mom42 = E X_a^2 X_b X_c, mom43 = E X_a^2 X_b^2, mom44 = E X_a^3 X_b, mom45 = E X_a^4,
/// where a, b, c, d are distinct positions. Without replacement distinct
/// positions hold distinct data items; with replacement they are independent
/// uniform draws. Entries whose positions cannot be distinct (N too small)
/// are zero; their multiplicity in any minibatch sum is zero as well.
struct MomentTable {
  double mom21 = 0, mom22 = 0;
  double mom31 = 0, mom32 = 0, mom33 = 0;
  double mom41 = 0, mom42 = 0, mom43 = 0, mom44 = 0, mom45 = 0;
};

inline MomentTable moment_table(const SymmetricSums& s, Sampling mode) {
  const double N = double(s.N);
  const auto& p = s.p;
  const auto& e = s.e;
  MomentTable m;
  if (s.N == 0) return m;
  if (mode == Sampling::WithReplacement) {
    const double m1 = p[1] / N, m2 = p[2] / N, m3 = p[3] / N, m4 = p[4] / N;
    m.mom21 = m1 * m1;
    m.mom22 = m2;
    m.mom31 = m1 * m1 * m1;
    m.mom32 = m2 * m1;
    m.mom33 = m3;
    m.mom41 = m1 * m1 * m1 * m1;
    m.mom42 = m2 * m1 * m1;
    m.mom43 = m2 * m2;
    m.mom44 = m3 * m1;
    m.mom45 = m4;
    return m;
  }
  const double f2 = N * (N - 1.0), f3 = f2 * (N - 2.0), f4 = f3 * (N - 3.0);
  m.mom22 = p[2] / N;
  m.mom33 = p[3] / N;
  m.mom45 = p[4] / N;
  if (s.N >= 2) {
    m.mom21 = 2.0 * e[2] / f2;
    m.mom32 = (p[1] * p[2] - p[3]) / f2;
    m.mom43 = (p[2] * p[2] - p[4]) / f2;
    m.mom44 = (p[3] * p[1] - p[4]) / f2;
  }
  if (s.N >= 3) {
    m.mom31 = 6.0 * e[3] / f3;
    m.mom42 = (2.0 * e[2] * p[2] - 2.0 * p[3] * p[1] + 2.0 * p[4]) / f3;
  }
  if (s.N >= 4) m.mom41 = 24.0 * e[4] / f4;
  return m;
}

/// E[S^k], k = 0..4, for S = sum of the n minibatch values.
inline std::array<double, 5> minibatch_sum_moments(const MomentTable& m, std::size_t n_,
                                                   const SymmetricSums& s) {
  const double n = double(n_);
  const double n2 = n * (n - 1.0), n3 = n2 * (n - 2.0), n4 = n3 * (n - 3.0);
  std::array<double, 5> out{};
  out[0] = 1.0;
  out[1] = n * s.p[1] / double(s.N);
  out[2] = n2 * m.mom21 + n * m.mom22;
  out[3] = n3 * m.mom31 + 3.0 * n2 * m.mom32 + n * m.mom33;
  out[4] = n4 * m.mom41 + 6.0 * n3 * m.mom42 + 3.0 * n2 * m.mom43 + 4.0 * n2 * m.mom44 +
           n * m.mom45;
  return out;
}

/// E[S^k] by visiting every minibatch (all n-subsets or all N^n tuples).
/// Exponential cost; used where the closed form has no distinct-index terms
/// to offer (N < 4) and as a cross-check.
inline std::array<double, 5> enumerate_sum_moments(std::span<const double> x,
                                                   const MinibatchScheme& scheme) {
  const std::size_t N = x.size(), n = scheme.n;
  scheme.validate(N);
  std::array<double, 5> acc{};
  double count = 0.0;
  std::vector<std::size_t> idx(n, 0);
  auto visit = [&] {
    double s = 0.0;
    for (auto i : idx) s += x[i];
    double t = 1.0;
    for (auto& a : acc) {
      a += t;
      t *= s;
    }
    count += 1.0;
  };
  if (scheme.mode == Sampling::WithReplacement) {
    while (true) {
      visit();
      std::size_t k = 0;
      while (k < n && ++idx[k] == N) idx[k++] = 0;
      if (k == n) break;
    }
  } else {
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    while (true) {
      visit();
      std::size_t k = n;
      while (k > 0 && idx[k - 1] == N - n + (k - 1)) --k;
      if (k == 0) break;
      ++idx[k - 1];
      for (std::size_t j = k; j < n; ++j) idx[j] = idx[j - 1] + 1;
    }
  }
  for (auto& a : acc) a /= count;
  return acc;
}

namespace detail {

inline std::array<double, 5> sum_moments(std::span<const double> x, const MinibatchScheme& scheme) {
  if (x.size() < 4) return enumerate_sum_moments(x, scheme);
  const SymmetricSums s = symmetric_sums(x);
  return minibatch_sum_moments(moment_table(s, scheme.mode), scheme.n, s);
}

inline std::array<double, 5> scale_moments(std::array<double, 5> m, double c) {
  double t = 1.0;
  for (auto& v : m) {
    v *= t;
    t *= c;
  }
  return m;
}

}  // namespace detail

/// (E B, E B^2, E B^3, E B^4) for B = (N/n) sum_i X_{tau_i} / (2 sigma_x^2); index 0 holds 1.
inline std::array<double, 5> b_moments(std::span<const double> data, double sigma_x_sq,
                                       const MinibatchScheme& scheme) {
  scheme.validate(data.size());
  const double c = double(data.size()) / (double(scheme.n) * 2.0 * sigma_x_sq);
  return detail::scale_moments(detail::sum_moments(data, scheme), c);
}

/// Central moments E (B - E B)^k. Computed on mean-centred data, which
/// avoids the cancellation of expanding raw moments when Var(B) << (E B)^2.
inline std::array<double, 5> b_central_moments(std::span<const double> data, double sigma_x_sq,
                                               const MinibatchScheme& scheme) {
  scheme.validate(data.size());
  if (scheme.is_full_batch(data.size())) return {1.0, 0.0, 0.0, 0.0, 0.0};
  const double mean = std::accumulate(data.begin(), data.end(), 0.0) / double(data.size());
  std::vector<double> centred(data.begin(), data.end());
  for (auto& v : centred) v -= mean;
  auto m = b_moments(centred, sigma_x_sq, scheme);
  m[1] = 0.0;
  return m;
}

// ---------------------------------------------------------------------------
// Toy oracle

/// Precomputed constants of one (dataset, minibatch scheme) pair.
struct ToyAnalytic {
  double A = 0, mu_p = 0, sigma_p_sq = 0;
  double mean_b = 0, var_b = 0;
  SymmetricSums sums;
  MomentTable moments;
  std::array<double, 5> b_raw{};
  std::array<double, 5> b_central{};
  MinibatchScheme scheme;

  ToyAnalytic(const GaussianConjugateModel& model, const MinibatchScheme& s) : scheme(s) {
    const auto post = toy_posterior_params(model);
    A = post.A;
    mu_p = post.mu_p;
    sigma_p_sq = post.sigma_p_sq;
    scheme.validate(model.size());
    sums = symmetric_sums(model.data());
    moments = moment_table(sums, scheme.mode);
    b_raw = b_moments(model.data(), model.sigma_x_sq(), scheme);
    b_central = b_central_moments(model.data(), model.sigma_x_sq(), scheme);
    mean_b = model.data_sum() / (2.0 * model.sigma_x_sq());
    var_b = scheme.is_full_batch(model.size()) ? 0.0 : toy_var_b(model, scheme);
  }
};

/// Law of theta_0: N(mean, variance); variance 0 is a fixed starting point.
struct Start {
  double mean = 0.0;
  double variance = 0.0;

  Start(double theta0 = 0.0) : mean(theta0) {}
  Start(double m, double v) : mean(m), variance(v) {
    if (!(v >= 0.0)) throw std::invalid_argument("start variance must be >= 0");
  }

  /// E[(theta_0 - c)^p], p = 0..4.
  std::array<double, 5> moments_about(double c) const {
    const double d = mean - c, v = variance;
    return {1.0, d, d * d + v, d * d * d + 3.0 * d * v, d * d * d * d + 6.0 * d * d * v + 3.0 * v * v};
  }
};

/// Noise multiplier c of theta_{j+1} = a theta_j + h B_j + c sqrt(h) xi_j.
inline double noise_multiplier(Method method, double h, double var_b) {
  return method == Method::Msgld ? 1.0 - 0.5 * h * var_b : 1.0;
}

/// E[theta_j^p], p = 0..4, for j = 0..M (index 0 is the deterministic start;
/// M = 0 gives an empty trajectory).
struct MomentTrajectory {
  std::vector<std::array<double, 5>> moments;
  bool contracting = true;  // false when h >= 1/A; values are still computed

  std::size_t size() const { return moments.size(); }
  double operator()(std::size_t j, int p) const { return moments.at(j).at(std::size_t(p)); }
};

namespace detail {

inline constexpr double binom[5][5] = {{1, 0, 0, 0, 0},
                                       {1, 1, 0, 0, 0},
                                       {1, 2, 1, 0, 0},
                                       {1, 3, 3, 1, 0},
                                       {1, 4, 6, 4, 1}};

/// Moments of the innovation h B + c sqrt(h) xi from moments of B.
inline std::array<double, 5> innovation_moments(const std::array<double, 5>& b, double h, double c) {
  constexpr double xi[5] = {1.0, 0.0, 1.0, 0.0, 3.0};
  const double s = c * std::sqrt(h);
  std::array<double, 5> z{};
  for (int p = 0; p <= 4; ++p)
    for (int l = 0; l <= p; ++l)
      z[p] += binom[p][l] * std::pow(h, l) * b[l] * std::pow(s, p - l) * xi[p - l];
  return z;
}

inline void check_step(const ToyAnalytic& ta, double h, double limit_in_units_of_1_over_A) {
  if (!(h > 0.0)) throw DomainError("step size must be positive");
  if (h * ta.A >= limit_in_units_of_1_over_A)
    throw DomainError("step size outside the stable range of the toy recursion");
}

}  // namespace detail

/// Exact E[theta_j^p] by iterating the moment recursion, with B_j independent
/// of theta_j.
inline MomentTrajectory moment_trajectory(const ToyAnalytic& ta, Method method, double h,
                                          std::size_t M, Start theta0 = {}) {
  if (!(h > 0.0)) throw DomainError("step size must be positive");
  if (M == 0) return {};
  const double a = 1.0 - ta.A * h;
  std::array<double, 5> b = ta.b_raw;
  if (method == Method::Euler)
    for (int p = 1; p <= 4; ++p) b[p] = b[p - 1] * ta.mean_b;
  const auto z = detail::innovation_moments(b, h, noise_multiplier(method, h, ta.var_b));
  MomentTrajectory t;
  t.contracting = h * ta.A < 1.0;
  t.moments.reserve(M + 1);
  std::array<double, 5> m = theta0.moments_about(0.0);
  t.moments.push_back(m);
  std::array<double, 5> apow{1.0, a, a * a, a * a * a, a * a * a * a};
  for (std::size_t j = 0; j < M; ++j) {
    std::array<double, 5> next{};
    for (int p = 0; p <= 4; ++p)
      for (int l = 0; l <= p; ++l) next[p] += detail::binom[p][l] * apow[l] * m[l] * z[p - l];
    m = next;
    t.moments.push_back(m);
  }
  return t;
}

/// Stationary Var(theta) of SGLD: (1 + h Var(B)) / (2A - A^2 h). Var(B) = 0 is Euler.
inline double asymptotic_var_sgld(double A, double var_b, double h) {
  if (!(h > 0.0) || h * A >= 2.0) throw DomainError("need 0 < h < 2/A");
  return (1.0 + h * var_b) / (2.0 * A - A * A * h);
}

/// Stationary Var(theta) of mSGLD: (1 + h^2 Var(B)^2 / 4) / (2A - A^2 h).
inline double asymptotic_var_msgld(double A, double var_b, double h) {
  if (!(h > 0.0) || h * A >= 2.0) throw DomainError("need 0 < h < 2/A");
  return (1.0 + 0.25 * h * h * var_b * var_b) / (2.0 * A - A * A * h);
}

inline double asymptotic_var_euler(double A, double h) { return asymptotic_var_sgld(A, 0.0, h); }

inline double asymptotic_var_sgld(const ToyAnalytic& ta, double h) {
  return asymptotic_var_sgld(ta.A, ta.var_b, h);
}
inline double asymptotic_var_msgld(const ToyAnalytic& ta, double h) {
  return asymptotic_var_msgld(ta.A, ta.var_b, h);
}

inline double asymptotic_var(Method method, double A, double var_b, double h) {
  switch (method) {
    case Method::Euler: return asymptotic_var_euler(A, h);
    case Method::Sgld: return asymptotic_var_sgld(A, var_b, h);
    case Method::Msgld: return asymptotic_var_msgld(A, var_b, h);
  }
  return 0.0;
}

/// Asymptotic bias of the sample average of theta^2, i.e. Var(theta_inf) - sigma_p^2
/// (the mean is unbiased for every method). Written without the cancellation
/// of subtracting 1/(2A).
inline double asymptotic_bias_theta_sq(Method method, double A, double var_b, double h) {
  asymptotic_var(method, A, var_b, h);  // domain check
  const double denom = 2.0 * A - A * A * h;
  const double euler_part = 0.5 * h / (2.0 - A * h);  // 1/(2A-A^2h) - 1/(2A)
  switch (method) {
    case Method::Euler: return euler_part;
    case Method::Sgld: return euler_part + h * var_b / denom;
    case Method::Msgld: return euler_part + 0.25 * h * h * var_b * var_b / denom;
  }
  return 0.0;
}

/// Leading-order SGLD excess bias over Euler, h Var(B) / (2A).
inline double excess_bias_leading_sgld(double A, double var_b, double h) {
  return h * var_b / (2.0 * A);
}
inline double excess_bias_leading_sgld(const ToyAnalytic& ta, double h) {
  return excess_bias_leading_sgld(ta.A, ta.var_b, h);
}

/// Exact excess (method minus Euler) of the asymptotic variance.
inline double excess_bias(Method method, double A, double var_b, double h) {
  return asymptotic_bias_theta_sq(method, A, var_b, h) - asymptotic_bias_theta_sq(Method::Euler, A, var_b, h);
}

// ---------------------------------------------------------------------------
// Closed-form MSE of the sample average of theta^2

namespace detail {

/// Sums of powers of a = 1 - r, 0 < r < 1, evaluated without forming large
/// differences of nearly equal numbers (expm1/log1p throughout). When |log a|
/// is below 1e-12 the arithmetic-series limits are used.
class GeometricSums {
 public:
  explicit GeometricSums(double r) : log_a_(std::log1p(-r)), flat_(std::abs(std::log1p(-r)) < 1e-12) {}

  double log_a() const { return log_a_; }

  /// a^(k t)
  double pow(int k, double t) const { return std::exp(double(k) * t * log_a_); }

  /// a^k - a^l
  double diff(int k, int l) const { return pow(l, 1.0) * std::expm1(double(k - l) * log_a_); }

  /// sum_{i=1}^M a^(k i)
  double sum(int k, double M) const {
    if (k == 0 || flat_) return M;
    return pow(k, 1.0) * std::expm1(double(k) * M * log_a_) / std::expm1(double(k) * log_a_);
  }

  /// sum_{i=1}^M a^(k i) a^(l (M - i)); the larger base is factored out so
  /// that nothing overflows for large M.
  double mixed(int k, int l, double M) const {
    if (k == l || flat_) return M * pow(k, M);
    if (k < l) {
      const double d = double(l - k) * log_a_;
      return pow(k, M) * std::expm1(d * M) / std::expm1(d);
    }
    return pow(l, M) * sum(k - l, M);
  }

  /// sum_{1 <= i < j <= M} a^(k i) a^(l (j - i)), l >= 1
  double pairs(int k, int l, double M) const {
    if (flat_) return 0.5 * M * (M - 1.0);
    const double y = pow(l, 1.0);
    return y / -std::expm1(double(l) * log_a_) * (sum(k, M) - mixed(k, l, M));
  }

 private:
  double log_a_;
  bool flat_;
};

/// f(j) = sum_k c[k] a^(k j), k = 0..4.
struct ExpPoly {
  std::array<double, 5> c{};

  ExpPoly operator+(const ExpPoly& o) const {
    ExpPoly r;
    for (int k = 0; k < 5; ++k) r.c[k] = c[k] + o.c[k];
    return r;
  }
  ExpPoly operator-(const ExpPoly& o) const {
    ExpPoly r;
    for (int k = 0; k < 5; ++k) r.c[k] = c[k] - o.c[k];
    return r;
  }
  ExpPoly operator*(double s) const {
    ExpPoly r;
    for (int k = 0; k < 5; ++k) r.c[k] = c[k] * s;
    return r;
  }
  ExpPoly operator*(const ExpPoly& o) const {
    ExpPoly r;
    for (int i = 0; i < 5; ++i)
      for (int j = 0; j < 5; ++j) {
        if (c[i] == 0.0 || o.c[j] == 0.0) continue;
        if (i + j > 4) throw std::logic_error("ExpPoly product exceeds degree 4");
        r.c[i + j] += c[i] * o.c[j];
      }
    return r;
  }
  double at(const GeometricSums& g, double j) const {
    double v = 0.0;
    for (int k = 0; k < 5; ++k) v += c[k] * g.pow(k, j);
    return v;
  }
};

/// Solves x(j+1) = a^p x(j) + f(j), x(0) = x0, for f without an a^(p j) term.
inline ExpPoly solve_linear_recursion(const GeometricSums& g, int p, double x0, const ExpPoly& f) {
  ExpPoly x;
  double particular_at_0 = 0.0;
  for (int k = 0; k < 5; ++k) {
    if (k == p || f.c[k] == 0.0) continue;
    x.c[k] = f.c[k] / g.diff(k, p);
    particular_at_0 += x.c[k];
  }
  x.c[p] = x0 - particular_at_0;
  return x;
}

/// Centred moments E[(theta_j - mu_p)^p], p = 0..4, as exponential polynomials in j.
struct CentredMoments {
  std::array<ExpPoly, 5> m;
  double excess_const = 0.0;  // stationary E(theta - mu_p)^2 - sigma_p^2
};

inline CentredMoments centred_moments(const ToyAnalytic& ta, Method method, double h,
                                      const Start& theta0, const GeometricSums& g) {
  const double c = noise_multiplier(method, h, ta.var_b);
  std::array<double, 5> b = method == Method::Euler ? std::array<double, 5>{1, 0, 0, 0, 0} : ta.b_central;
  const double var_b = method == Method::Euler ? 0.0 : ta.var_b;
  auto z = innovation_moments(b, h, c);
  z[1] = 0.0;
  const double a = 1.0 - ta.A * h;
  const auto start = theta0.moments_about(ta.mu_p);

  CentredMoments out;
  out.m[0].c[0] = 1.0;
  for (int p = 1; p <= 4; ++p) {
    ExpPoly forcing;
    for (int l = 0; l < p; ++l) {
      const double coeff = binom[p][l] * std::pow(a, l) * z[p - l];
      if (coeff != 0.0) forcing = forcing + out.m[l] * coeff;
    }
    out.m[p] = solve_linear_recursion(g, p, start[p], forcing);
  }
  // z2 - sigma_p^2 (1 - a^2) = h^2 Var(B) + h (c^2 - 1) + A h^2 / 2, with
  // c^2 - 1 = -(h/2) Var(B) (2 - (h/2) Var(B)) for mSGLD.
  const double c2m1 = method == Method::Msgld ? -0.5 * h * var_b * (2.0 - 0.5 * h * var_b) : 0.0;
  const double num = h * h * var_b + h * c2m1 + 0.5 * ta.A * h * h;
  out.excess_const = num / -std::expm1(2.0 * g.log_a());
  return out;
}

}  // namespace detail

/// Bias and variance parts of the MSE of S = (1/M) sum_{j=1}^M theta_j^2
/// against mu_p^2 + sigma_p^2.
struct Mse2Breakdown {
  double bias = 0.0;      // E S - (mu_p^2 + sigma_p^2)
  double variance = 0.0;  // Var S
  double mse() const { return bias * bias + variance; }
};

/// Exact MSE decomposition in O(1): the centred moments are exponential
/// polynomials in j, so every sum over (i, j) is a finite geometric sum.
inline Mse2Breakdown analytic_mse2_breakdown(const ToyAnalytic& ta, Method method, double h,
                                             std::uint64_t M, Start theta0 = {}) {
  if (M < 1) throw std::invalid_argument("M must be >= 1");
  detail::check_step(ta, h, 1.0);
  const detail::GeometricSums g(ta.A * h);
  const auto cm = detail::centred_moments(ta, method, h, theta0, g);
  const auto& m = cm.m;
  const double mu = ta.mu_p;
  const double Md = double(M);

  detail::ExpPoly u = m[2] + m[1] * (2.0 * mu);
  u.c[0] = cm.excess_const;
  double mean_u = 0.0;
  for (int k = 0; k < 5; ++k) mean_u += u.c[k] * g.sum(k, Md);
  mean_u /= Md;

  // Cov(q_i, q_j), q = delta^2 + 2 mu delta, j = i + d:
  //   a^(2d) Cov(q_i, delta_i^2) + 2 mu a^d Cov(q_i, delta_i).
  const detail::ExpPoly m1m2 = m[1] * m[2];
  const detail::ExpPoly cov_q_d2 = (m[4] - m[2] * m[2]) + (m[3] - m1m2) * (2.0 * mu);
  const detail::ExpPoly cov_q_d1 = (m[3] - m1m2) + (m[2] - m[1] * m[1]) * (2.0 * mu);
  double total = 0.0;
  for (int k = 0; k < 5; ++k) {
    const double c2 = cov_q_d2.c[k], c1 = cov_q_d1.c[k];
    if (c2 == 0.0 && c1 == 0.0) continue;
    total += (c2 + 2.0 * mu * c1) * g.sum(k, Md);
    total += 2.0 * c2 * g.pairs(k, 2, Md) + 4.0 * mu * c1 * g.pairs(k, 1, Md);
  }
  return {mean_u, std::max(0.0, total / (Md * Md))};
}

/// MSE of (1/M) sum_{j=1}^M theta_j^2 for SGLD (or Euler / mSGLD via method).
inline double analytic_mse2(const ToyAnalytic& ta, double h, std::uint64_t M, Start theta0 = {},
                            Method method = Method::Sgld) {
  return analytic_mse2_breakdown(ta, method, h, M, theta0).mse();
}

/// Same as analytic_mse2 with the mSGLD noise multiplier 1 - (h/2) Var(B).
inline double analytic_mse2_msgld(const ToyAnalytic& ta, double h, std::uint64_t M,
                                  Start theta0 = {}) {
  return analytic_mse2_breakdown(ta, Method::Msgld, h, M, theta0).mse();
}

/// Limit of the MSE as M -> infinity: squared asymptotic bias of theta^2.
inline double analytic_mse2_limit(const ToyAnalytic& ta, Method method, double h) {
  const double b = asymptotic_bias_theta_sq(method, ta.A, method == Method::Euler ? 0.0 : ta.var_b, h);
  return b * b;
}

/// Expected relative error of the within-chain variance,
/// E[(1/M) sum theta^2 - ((1/M) sum theta)^2] / sigma_p^2 - 1, over theta_1..theta_M.
inline double analytic_ere(const ToyAnalytic& ta, Method method, double h, std::uint64_t M,
                           Start theta0 = {}) {
  if (M < 1) throw std::invalid_argument("M must be >= 1");
  detail::check_step(ta, h, 1.0);
  const detail::GeometricSums g(ta.A * h);
  const auto cm = detail::centred_moments(ta, method, h, theta0, g);
  const auto& m2 = cm.m[2];
  const double Md = double(M);
  double mean_sq_excess = cm.excess_const * Md;
  double sq_mean = 0.0;
  for (int k = 0; k < 5; ++k) {
    if (k > 0) mean_sq_excess += m2.c[k] * g.sum(k, Md);
    sq_mean += m2.c[k] * (g.sum(k, Md) + 2.0 * g.pairs(k, 1, Md));
  }
  return (mean_sq_excess / Md - sq_mean / (Md * Md)) / ta.sigma_p_sq;
}

// ---------------------------------------------------------------------------
// Ornstein-Uhlenbeck / Euler

/// Stationary variance of Euler-Maruyama applied to the OU process with target
/// N(mu, sigma^2): sigma^2 / (1 - h / (4 sigma^2)).
inline double ou_euler_stationary_variance(double sigma_sq, double h) {
  if (!(sigma_sq > 0.0)) throw DomainError("sigma^2 must be positive");
  if (!(h >= 0.0) || h >= 4.0 * sigma_sq) throw DomainError("need 0 <= h < 4 sigma^2");
  return sigma_sq / (1.0 - 0.25 * h / sigma_sq);
}

// ---------------------------------------------------------------------------
// Bias-coefficient extraction

struct BiasFit {
  double order = 0.0;             // slope of log|bias| against log h
  double order_se = 0.0;
  double loglog_coefficient = 0;  // exp(intercept) of the log-log fit
  int leading_order = 0;          // order rounded to the nearest integer >= 1
  double lambda_signed = 0.0;     // lim bias / h^leading_order (intercept of bias/h^p vs h)
  double lambda = 0.0;            // |lambda_signed|
  double lambda_se = 0.0;
  double r_squared = 0.0;
  std::size_t points = 0;
};

namespace detail {

struct LineFit {
  double intercept, slope, intercept_se, slope_se, r_squared;
};

/// Ordinary least squares y = intercept + slope x with classical standard errors.
inline LineFit fit_line(std::span<const double> x, std::span<const double> y) {
  const std::size_t n = x.size();
  if (n < 2 || y.size() != n) throw std::invalid_argument("line fit needs >= 2 paired points");
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / double(n);
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / double(n);
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0) throw std::invalid_argument("line fit needs distinct x values");
  LineFit f{};
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  double sse = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = y[i] - f.intercept - f.slope * x[i];
    sse += r * r;
  }
  f.r_squared = syy > 0 ? 1.0 - sse / syy : 1.0;
  const double s2 = n > 2 ? sse / double(n - 2) : 0.0;
  f.slope_se = std::sqrt(s2 / sxx);
  f.intercept_se = std::sqrt(s2 * (1.0 / double(n) + mx * mx / sxx));
  return f;
}

}  // namespace detail

/// Fits |bias(h)| = c h^p by log-log regression (order), then recovers the
/// leading coefficient as the h -> 0 intercept of bias(h) / h^p against h,
/// with p the rounded order. Points with zero or non-finite bias are dropped.
inline BiasFit fit_bias_coefficient(std::span<const double> hs, std::span<const double> biases) {
  if (hs.size() != biases.size()) throw std::invalid_argument("h and bias lists differ in length");
  std::vector<double> lx, ly, h_kept, b_kept;
  for (std::size_t i = 0; i < hs.size(); ++i) {
    if (!(hs[i] > 0.0) || !(std::abs(biases[i]) > 0.0) || !std::isfinite(biases[i])) continue;
    lx.push_back(std::log(hs[i]));
    ly.push_back(std::log(std::abs(biases[i])));
    h_kept.push_back(hs[i]);
    b_kept.push_back(biases[i]);
  }
  if (lx.size() < 3) throw std::invalid_argument("bias fit needs at least 3 usable step sizes");
  const auto ll = detail::fit_line(lx, ly);
  BiasFit fit;
  fit.points = lx.size();
  fit.order = ll.slope;
  fit.order_se = ll.slope_se;
  fit.loglog_coefficient = std::exp(ll.intercept);
  fit.r_squared = ll.r_squared;
  fit.leading_order = std::max(1, int(std::lround(ll.slope)));
  std::vector<double> scaled(b_kept.size());
  for (std::size_t i = 0; i < b_kept.size(); ++i)
    scaled[i] = b_kept[i] / std::pow(h_kept[i], fit.leading_order);
  const auto lin = detail::fit_line(h_kept, scaled);
  fit.lambda_signed = lin.intercept;
  fit.lambda = std::abs(lin.intercept);
  fit.lambda_se = lin.intercept_se;
  return fit;
}

}  // namespace sgld
