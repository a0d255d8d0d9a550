#pragma once

// Minibatch index sampling and unbiased gradient / gradient-covariance
// estimators.
//
// Scale convention: GradientEstimate::value estimates grad log pi(theta) and
// CovarianceEstimate::matrix estimates Cov of that estimator. The Langevin
// drift is f = grad log pi / 2, so Var(f_hat) = Cov / 4. For the Gaussian toy
// model f_hat = -A theta + B, i.e. Var(f_hat) = Var(B).

#include "sgld/errors.hpp"
#include "sgld/random.hpp"

#include <Eigen/Dense>

#include <concepts>
#include <cstddef>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace sgld {

enum class Sampling { WithReplacement, WithoutReplacement };

inline const char* to_string(Sampling mode) {
  return mode == Sampling::WithReplacement ? "with" : "without";
}

struct MinibatchScheme {
  std::size_t n = 1;
  Sampling mode = Sampling::WithoutReplacement;

  void validate(std::size_t N) const {
    if (n == 0) throw InvalidScheme("subsample size n must be >= 1");
    if (N == 0) throw InvalidScheme("dataset is empty");
    if (n > N && mode == Sampling::WithoutReplacement)
      throw InvalidScheme("n = " + std::to_string(n) + " exceeds N = " + std::to_string(N) +
                          " under sampling without replacement");
  }

  /// True when every draw returns the whole dataset.
  bool is_full_batch(std::size_t N) const {
    return mode == Sampling::WithoutReplacement && n == N;
  }
};

/// Posterior with a prior and N conditionally independent data terms.
template <class M>
concept Model = requires(const M& m, const Eigen::VectorXd& theta, Eigen::VectorXd& out,
                         std::size_t i, double scale) {
  { m.dim() } -> std::convertible_to<std::size_t>;
  { m.size() } -> std::convertible_to<std::size_t>;
  m.add_prior_gradient(theta, out);
  m.add_datum_gradient(i, theta, scale, out);
  m.add_likelihood_gradient(theta, out);
  { m.log_density(theta) } -> std::convertible_to<double>;
};

/// Draws minibatch index lists. Without replacement it keeps a permutation
/// buffer and runs a partial Fisher-Yates shuffle, O(n) per draw after the
/// O(N) setup. A full batch (n = N, without replacement) is returned in the
/// natural order 0..N-1 and consumes no randomness.
class MinibatchSampler {
 public:
  MinibatchSampler(std::size_t N, MinibatchScheme scheme) : N_(N), scheme_(scheme) {
    scheme_.validate(N_);
    if (scheme_.mode == Sampling::WithoutReplacement) {
      buffer_.resize(N_);
      std::iota(buffer_.begin(), buffer_.end(), std::size_t{0});
    } else {
      buffer_.resize(scheme_.n);
    }
  }

  std::size_t dataset_size() const { return N_; }
  const MinibatchScheme& scheme() const { return scheme_; }

  template <class Urbg>
  std::span<const std::size_t> draw(Urbg& rng) {
    const std::size_t n = scheme_.n;
    if (scheme_.mode == Sampling::WithReplacement) {
      std::uniform_int_distribution<std::size_t> pick(0, N_ - 1);
      for (std::size_t i = 0; i < n; ++i) buffer_[i] = pick(rng);
      return {buffer_.data(), n};
    }
    if (n == N_) return {buffer_.data(), n};
    for (std::size_t i = 0; i < n; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, N_ - 1);
      std::swap(buffer_[i], buffer_[pick(rng)]);
    }
    return {buffer_.data(), n};
  }

 private:
  std::size_t N_;
  MinibatchScheme scheme_;
  std::vector<std::size_t> buffer_;
};

/// One minibatch of indices; a fresh sampler is built per call.
template <class Urbg>
std::vector<std::size_t> sample_minibatch(std::size_t N, const MinibatchScheme& scheme,
                                          Urbg& rng) {
  MinibatchSampler sampler(N, scheme);
  auto idx = sampler.draw(rng);
  return {idx.begin(), idx.end()};
}

struct GradientEstimate {
  Eigen::VectorXd value;
  std::vector<std::size_t> indices;

  /// Langevin drift estimate f_hat = value / 2.
  Eigen::VectorXd drift() const { return 0.5 * value; }
};

struct CovarianceEstimate {
  Eigen::MatrixXd matrix;

  /// Cov(f_hat) = Cov(grad log pi hat) / 4.
  Eigen::MatrixXd drift_covariance() const { return 0.25 * matrix; }
};

/// Exact grad log pi(theta), written into out. Shares its arithmetic with
/// the full-batch branch of accumulate_gradient so that Euler and full-batch
/// SGLD agree bit for bit.
template <Model M>
void full_gradient(const M& model, const Eigen::VectorXd& theta, Eigen::VectorXd& out) {
  out.setZero(static_cast<Eigen::Index>(model.dim()));
  model.add_likelihood_gradient(theta, out);
  model.add_prior_gradient(theta, out);
}

/// grad log pi0(theta) + (N/n) sum_i grad log pi(x_{tau_i} | theta) into out.
template <Model M>
void accumulate_gradient(const M& model, const Eigen::VectorXd& theta,
                         std::span<const std::size_t> indices, Sampling mode,
                         Eigen::VectorXd& out) {
  const std::size_t N = model.size();
  const std::size_t n = indices.size();
  if (n == 0) throw std::invalid_argument("estimate_gradient: empty index list");
  if (mode == Sampling::WithoutReplacement && n == N) {
    full_gradient(model, theta, out);
    return;
  }
  out.setZero(static_cast<Eigen::Index>(model.dim()));
  for (std::size_t i : indices) model.add_datum_gradient(i, theta, 1.0, out);
  out *= static_cast<double>(N) / static_cast<double>(n);
  model.add_prior_gradient(theta, out);
}

template <Model M>
GradientEstimate estimate_gradient(const M& model, const Eigen::VectorXd& theta,
                                   std::span<const std::size_t> indices,
                                   Sampling mode = Sampling::WithoutReplacement) {
  GradientEstimate est;
  accumulate_gradient(model, theta, indices, mode, est.value);
  est.indices.assign(indices.begin(), indices.end());
  return est;
}

/// Scale that turns the scatter matrix sum_i (g_i - g_bar)(g_i - g_bar)^T of
/// the sampled per-datum gradients into an unbiased estimate of
/// Cov(grad log pi hat).
inline double covariance_scale(std::size_t N, std::size_t n, Sampling mode) {
  const double Nd = static_cast<double>(N), nd = static_cast<double>(n);
  if (mode == Sampling::WithoutReplacement) return Nd * (Nd - nd) / (nd * (nd - 1.0));
  return Nd * Nd / (nd * (nd - 1.0));
}

/// Reusable workspace version; writes the estimate into cov.
template <Model M>
void accumulate_gradient_covariance(const M& model, const Eigen::VectorXd& theta,
                                    std::span<const std::size_t> indices, Sampling mode,
                                    Eigen::MatrixXd& grads, Eigen::MatrixXd& cov) {
  const std::size_t n = indices.size();
  if (n < 2) throw InsufficientSample("gradient covariance needs at least 2 indices");
  const auto d = static_cast<Eigen::Index>(model.dim());
  grads.setZero(d, static_cast<Eigen::Index>(n));
  Eigen::VectorXd g(d);
  for (std::size_t k = 0; k < n; ++k) {
    g.setZero();
    model.add_datum_gradient(indices[k], theta, 1.0, g);
    grads.col(static_cast<Eigen::Index>(k)) = g;
  }
  const Eigen::VectorXd mean = grads.rowwise().mean();
  grads.colwise() -= mean;
  cov.noalias() = grads * grads.transpose();
  cov *= covariance_scale(model.size(), n, mode);
}

template <Model M>
CovarianceEstimate estimate_gradient_covariance(const M& model, const Eigen::VectorXd& theta,
                                                std::span<const std::size_t> indices,
                                                Sampling mode = Sampling::WithoutReplacement) {
  Eigen::MatrixXd grads;
  CovarianceEstimate est;
  accumulate_gradient_covariance(model, theta, indices, mode, grads, est.matrix);
  return est;
}

}  // namespace sgld
