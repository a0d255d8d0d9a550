#pragma once

// One-step Langevin kernels (Euler, SGLD, mSGLD), random-walk Metropolis and
// a deterministic chain runner that streams sample-average statistics.

#include "sgld/errors.hpp"
#include "sgld/gradients.hpp"
#include "sgld/random.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace sgld {

enum class Method { Euler, Sgld, Msgld };

inline const char* to_string(Method m) {
  switch (m) {
    case Method::Euler: return "euler";
    case Method::Sgld: return "sgld";
    case Method::Msgld: return "msgld";
  }
  return "?";
}

/// Where mSGLD takes Cov(f_hat) from.
enum class CovarianceSource { Exact, Estimated };

struct KernelConfig {
  Method method = Method::Sgld;
  MinibatchScheme scheme{};
  CovarianceSource covariance = CovarianceSource::Estimated;
  /// Cov(f_hat) for CovarianceSource::Exact (d x d). For the toy model this is Var(B).
  Eigen::MatrixXd drift_covariance;
  /// CovarianceSource::Estimated: Cov(f_hat) = factor * (subsampled covariance of
  /// grad log pi_hat). 1/4 matches f_hat = grad / 2; 1 feeds the gradient-scale
  /// estimate straight into the noise multiplier.
  double estimated_covariance_factor = 0.25;
};

enum class StabilityPolicy { Warn, Fail };

struct ChainSpec {
  double h = 0.0;
  std::uint64_t K = 0;
  Eigen::VectorXd theta0;
  std::uint64_t seed = 0;
  std::uint64_t replicate = 0;
  /// Steps excluded from statistics (they still advance the chain).
  std::uint64_t burn_in = 0;
  StabilityPolicy stability = StabilityPolicy::Warn;

  void validate(std::size_t dim) const {
    if (!(h > 0.0) || !std::isfinite(h)) throw std::invalid_argument("step size h must be > 0");
    if (K < 1) throw std::invalid_argument("K must be >= 1");
    if (std::size_t(theta0.size()) != dim) throw std::invalid_argument("theta0 has wrong dimension");
    if (!theta0.allFinite()) throw std::invalid_argument("theta0 must be finite");
  }
};

template <class M>
concept HasStabilityLimit = requires(const M& m) {
  { m.stability_limit() } -> std::convertible_to<double>;
};

// ---------------------------------------------------------------------------
// Kernels

/// theta += h * drift + sqrt(h) * noise, in place. Shared by every Langevin
/// kernel so that equal drifts give bitwise-equal updates.
inline void langevin_update(Eigen::VectorXd& theta, const Eigen::VectorXd& drift, double h,
                            const Eigen::VectorXd& noise) {
  theta += h * drift + std::sqrt(h) * noise;
}

inline void check_finite(const Eigen::VectorXd& theta, std::uint64_t step) {
  if (!theta.allFinite()) throw DivergenceError(step);
}

/// theta' = theta + (h/2) grad log pi(theta) + sqrt(h) xi, exact full-data gradient.
template <Model M>
Eigen::VectorXd euler_step(const M& model, const Eigen::VectorXd& theta, double h,
                           const Eigen::VectorXd& xi, std::uint64_t step = 0) {
  Eigen::VectorXd grad;
  full_gradient(model, theta, grad);
  const Eigen::VectorXd drift = 0.5 * grad;
  Eigen::VectorXd next = theta;
  langevin_update(next, drift, h, xi);
  check_finite(next, step);
  return next;
}

/// theta' = theta + h f_hat + sqrt(h) xi, with f_hat = grad log pi hat / 2.
inline Eigen::VectorXd sgld_step(const Eigen::VectorXd& drift, const Eigen::VectorXd& theta,
                                 double h, const Eigen::VectorXd& xi, std::uint64_t step = 0) {
  Eigen::VectorXd next = theta;
  langevin_update(next, drift, h, xi);
  check_finite(next, step);
  return next;
}

/// True if I - (h/2) C has an eigenvalue <= 0, i.e. the injected noise is
/// switched off or reflected in some direction.
inline bool noise_collapses(const Eigen::MatrixXd& drift_cov, double h) {
  if (drift_cov.size() == 0) return false;
  if (drift_cov.rows() == 1) return 1.0 - 0.5 * h * drift_cov(0, 0) <= 0.0;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(drift_cov, Eigen::EigenvaluesOnly);
  return 1.0 - 0.5 * h * es.eigenvalues().maxCoeff() <= 0.0;
}

/// noise = (I - (h/2) C) xi.
inline void msgld_noise(const Eigen::MatrixXd& drift_cov, double h, const Eigen::VectorXd& xi,
                        Eigen::VectorXd& noise) {
  noise = xi;
  noise.noalias() -= (0.5 * h) * (drift_cov * xi);
}

struct MsgldResult {
  Eigen::VectorXd theta;
  bool noise_collapse = false;
};

/// theta' = theta + h f_hat + sqrt(h) (I - (h/2) Cov f_hat) xi. A non-positive
/// eigenvalue of the multiplier is flagged, not clamped.
inline MsgldResult msgld_step(const Eigen::VectorXd& drift, const Eigen::MatrixXd& drift_cov,
                              const Eigen::VectorXd& theta, double h, const Eigen::VectorXd& xi,
                              std::uint64_t step = 0) {
  if (drift_cov.rows() != drift_cov.cols() || drift_cov.rows() != theta.size())
    throw std::invalid_argument("mSGLD covariance has wrong shape");
  if (!drift_cov.isApprox(drift_cov.transpose(), 1e-12))
    throw std::invalid_argument("mSGLD covariance must be symmetric");
  MsgldResult r{theta, noise_collapses(drift_cov, h)};
  Eigen::VectorXd noise;
  msgld_noise(drift_cov, h, xi, noise);
  langevin_update(r.theta, drift, h, noise);
  check_finite(r.theta, step);
  return r;
}

/// Gaussian random-walk Metropolis with exact full-data log density.
class RandomWalkMetropolis {
 public:
  explicit RandomWalkMetropolis(double proposal_scale) : scale_(proposal_scale) {
    if (!(proposal_scale > 0.0) || !std::isfinite(proposal_scale))
      throw std::invalid_argument("RWM proposal scale must be > 0");
  }

  double scale() const { return scale_; }
  void set_scale(double s) { *this = RandomWalkMetropolis(s); }

  /// Log acceptance probability min(0, log pi(prop) - log pi(cur)).
  static double log_accept_probability(double log_current, double log_proposal) {
    return std::min(0.0, log_proposal - log_current);
  }

  /// Advances (theta, log_density) in place; returns whether the move was accepted.
  template <Model M>
  bool step(const M& model, Eigen::VectorXd& theta, double& log_density, Engine& proposal_rng,
            Engine& accept_rng) const {
    Eigen::VectorXd prop(theta.size());
    for (Eigen::Index i = 0; i < prop.size(); ++i) prop[i] = theta[i] + scale_ * normal_(proposal_rng);
    const double lp = model.log_density(prop);
    const double u = uniform_(accept_rng);
    if (std::isfinite(lp) && std::log(u) < log_accept_probability(log_density, lp)) {
      theta = std::move(prop);
      log_density = lp;
      return true;
    }
    return false;
  }

 private:
  double scale_;
  mutable std::normal_distribution<double> normal_{0.0, 1.0};
  mutable std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

/// Convenience single RWM step; rng drives both proposal and acceptance.
template <Model M>
Eigen::VectorXd rwm_step(const M& model, const Eigen::VectorXd& theta, double proposal_scale,
                         Engine& rng) {
  RandomWalkMetropolis rwm(proposal_scale);
  Eigen::VectorXd next = theta;
  double lp = model.log_density(theta);
  rwm.step(model, next, lp, rng, rng);
  return next;
}

// ---------------------------------------------------------------------------
// Statistics

struct TestFunction {
  std::string name;
  std::function<double(const Eigen::VectorXd&)> fn;
};

/// Streaming sums of theta^p (p = 1..4, per coordinate), theta theta^T and
/// registered test functions. Averages are sum / count.
class RunningStats {
 public:
  RunningStats() = default;
  explicit RunningStats(std::size_t dim, std::vector<TestFunction> phis = {})
      : phis_(std::move(phis)) {
    const auto d = Eigen::Index(dim);
    for (auto& s : power_) s = Eigen::VectorXd::Zero(d);
    cross_ = Eigen::MatrixXd::Zero(d, d);
    phi_sums_ = Eigen::VectorXd::Zero(Eigen::Index(phis_.size()));
  }

  void add(const Eigen::VectorXd& theta) {
    ++count_;
    Eigen::VectorXd t = theta;
    for (auto& s : power_) {
      s += t;
      t = t.cwiseProduct(theta);
    }
    if (theta.size() == 1)
      cross_(0, 0) += theta[0] * theta[0];
    else
      cross_.noalias() += theta * theta.transpose();
    for (std::size_t k = 0; k < phis_.size(); ++k) phi_sums_[Eigen::Index(k)] += phis_[k].fn(theta);
  }

  /// Stats of the concatenation of the two sample ranges.
  void merge(const RunningStats& other) {
    if (other.count_ == 0) return;
    if (count_ == 0) {
      *this = other;
      return;
    }
    count_ += other.count_;
    for (std::size_t p = 0; p < power_.size(); ++p) power_[p] += other.power_[p];
    cross_ += other.cross_;
    phi_sums_ += other.phi_sums_;
  }

  std::uint64_t count() const { return count_; }
  std::size_t dim() const { return std::size_t(power_[0].size()); }

  /// Sample average of theta^p (p in 1..4), per coordinate.
  Eigen::VectorXd mean(int p = 1) const { return power_.at(std::size_t(p - 1)) / double(count_); }
  Eigen::VectorXd sum(int p = 1) const { return power_.at(std::size_t(p - 1)); }
  Eigen::MatrixXd cross_mean() const { return cross_ / double(count_); }
  /// Within-sample (biased, divisor count) variance per coordinate.
  Eigen::VectorXd variance() const {
    const Eigen::VectorXd m = mean(1);
    return mean(2) - m.cwiseProduct(m);
  }
  double phi_mean(std::size_t k) const { return phi_sums_[Eigen::Index(k)] / double(count_); }
  double phi_mean(const std::string& name) const {
    for (std::size_t k = 0; k < phis_.size(); ++k)
      if (phis_[k].name == name) return phi_mean(k);
    throw std::out_of_range("no test function named " + name);
  }
  const std::vector<TestFunction>& test_functions() const { return phis_; }

 private:
  std::uint64_t count_ = 0;
  std::array<Eigen::VectorXd, 4> power_;
  Eigen::MatrixXd cross_;
  std::vector<TestFunction> phis_;
  Eigen::VectorXd phi_sums_;
};

/// Non-overlapping batch means of an observation vector, for standard
/// errors of time averages of correlated chains.
class BatchMeans {
 public:
  BatchMeans() = default;
  BatchMeans(std::size_t width, std::uint64_t batch_size)
      : batch_size_(batch_size), current_(Eigen::VectorXd::Zero(Eigen::Index(width))) {
    if (batch_size_ == 0) throw std::invalid_argument("batch size must be >= 1");
  }

  bool enabled() const { return batch_size_ > 0; }

  void add(const Eigen::VectorXd& obs) {
    current_ += obs;
    if (++in_batch_ == batch_size_) {
      means_.push_back(current_ / double(batch_size_));
      current_.setZero();
      in_batch_ = 0;
    }
  }

  std::size_t batches() const { return means_.size(); }
  const std::vector<Eigen::VectorXd>& means() const { return means_; }

  /// Grand mean over completed batches.
  Eigen::VectorXd mean() const {
    Eigen::VectorXd m = Eigen::VectorXd::Zero(current_.size());
    for (const auto& b : means_) m += b;
    return m / double(means_.size());
  }

  /// Standard error of the grand mean, sd(batch means) / sqrt(#batches).
  Eigen::VectorXd standard_error() const {
    if (means_.size() < 2) throw std::logic_error("need at least two batches for a standard error");
    const Eigen::VectorXd m = mean();
    Eigen::VectorXd ss = Eigen::VectorXd::Zero(m.size());
    for (const auto& b : means_) ss += (b - m).cwiseAbs2();
    const double B = double(means_.size());
    return (ss / (B - 1.0) / B).cwiseSqrt();
  }

 private:
  std::uint64_t batch_size_ = 0;
  std::uint64_t in_batch_ = 0;
  Eigen::VectorXd current_;
  std::vector<Eigen::VectorXd> means_;
};

// ---------------------------------------------------------------------------
// Chain runner

struct RunOptions {
  std::vector<TestFunction> phis;
  /// Number of batches for batch-means standard errors (0 = off). Batch size is
  /// (K - burn_in) / batch_count; trailing remainder steps are left out of batches.
  /// Each batch mean is taken over the observation [theta, theta^2, phi_1..phi_m].
  std::uint64_t batch_count = 0;
  /// Record every thin-th post-burn-in state (0 = no trace).
  std::uint64_t thin = 0;
};

struct ChainResult {
  RunningStats stats;
  BatchMeans batches;
  std::vector<std::pair<std::uint64_t, Eigen::VectorXd>> trace;
  Eigen::VectorXd final_state;
  std::uint64_t noise_collapses = 0;
  bool unstable_step_size = false;
};

/// SGLD-family chain. Step k draws the minibatch (minibatch stream) and then
/// xi (noise stream); the two engines never share state.
template <Model M, NoiseSource Noise = GaussianNoise>
class LangevinChain {
 public:
  LangevinChain(const M& model, KernelConfig kernel, const ChainSpec& spec)
      : LangevinChain(model, std::move(kernel), spec,
                      Noise(make_engine(spec.seed, spec.replicate, Stream::Noise))) {}

  LangevinChain(const M& model, KernelConfig kernel, const ChainSpec& spec, Noise noise)
      : model_(model),
        kernel_(std::move(kernel)),
        h_(spec.h),
        theta_(spec.theta0),
        noise_(std::move(noise)),
        minibatch_rng_(make_engine(spec.seed, spec.replicate, Stream::Minibatch)),
        sampler_(model.size(), kernel_.method == Method::Euler
                                   ? MinibatchScheme{model.size(), Sampling::WithoutReplacement}
                                   : kernel_.scheme) {
    spec.validate(model.dim());
    const auto d = Eigen::Index(model.dim());
    grad_.resize(d);
    drift_.resize(d);
    xi_.resize(d);
    noise_buf_.resize(d);
    if (kernel_.method == Method::Msgld) {
      if (kernel_.covariance == CovarianceSource::Exact) {
        if (kernel_.drift_covariance.rows() != d || kernel_.drift_covariance.cols() != d)
          throw std::invalid_argument("exact mSGLD covariance must be d x d");
        exact_collapse_ = sgld::noise_collapses(kernel_.drift_covariance, h_);
      } else if (kernel_.scheme.n < 2) {
        throw InsufficientSample("estimated mSGLD covariance needs n >= 2");
      }
    }
    if constexpr (HasStabilityLimit<M>) {
      unstable_ = h_ >= model.stability_limit();
      if (unstable_ && spec.stability == StabilityPolicy::Fail)
        throw DomainError("step size h >= 1/A: the chain is not contractive");
    }
  }

  /// Performs one transition; step_index is reported on divergence.
  void step() {
    ++steps_;
    if (kernel_.method == Method::Euler) {
      full_gradient(model_, theta_, grad_);
    } else {
      const auto idx = sampler_.draw(minibatch_rng_);
      accumulate_gradient(model_, theta_, idx, kernel_.scheme.mode, grad_);
      if (kernel_.method == Method::Msgld && kernel_.covariance == CovarianceSource::Estimated) {
        accumulate_gradient_covariance(model_, theta_, idx, kernel_.scheme.mode, grads_ws_, cov_);
        cov_ *= kernel_.estimated_covariance_factor;
      }
    }
    drift_ = 0.5 * grad_;
    noise_.fill(xi_);
    if (kernel_.method == Method::Msgld) {
      const Eigen::MatrixXd& c =
          kernel_.covariance == CovarianceSource::Exact ? kernel_.drift_covariance : cov_;
      const bool collapse =
          kernel_.covariance == CovarianceSource::Exact ? exact_collapse_ : sgld::noise_collapses(c, h_);
      if (collapse) ++collapses_;
      msgld_noise(c, h_, xi_, noise_buf_);
      langevin_update(theta_, drift_, h_, noise_buf_);
    } else {
      langevin_update(theta_, drift_, h_, xi_);
    }
    check_finite(theta_, steps_);
  }

  const Eigen::VectorXd& state() const { return theta_; }
  std::uint64_t steps_taken() const { return steps_; }
  std::uint64_t noise_collapses() const { return collapses_; }
  bool unstable_step_size() const { return unstable_; }

 private:
  const M& model_;
  KernelConfig kernel_;
  double h_;
  Eigen::VectorXd theta_;
  Noise noise_;
  Engine minibatch_rng_;
  MinibatchSampler sampler_;
  Eigen::VectorXd grad_, drift_, xi_, noise_buf_;
  Eigen::MatrixXd grads_ws_, cov_;
  std::uint64_t steps_ = 0;
  std::uint64_t collapses_ = 0;
  bool exact_collapse_ = false;
  bool unstable_ = false;
};

inline Eigen::VectorXd observation(const Eigen::VectorXd& theta, const std::vector<TestFunction>& phis) {
  const Eigen::Index d = theta.size();
  Eigen::VectorXd obs(2 * d + Eigen::Index(phis.size()));
  obs.head(d) = theta;
  obs.segment(d, d) = theta.cwiseAbs2();
  for (std::size_t k = 0; k < phis.size(); ++k) obs[2 * d + Eigen::Index(k)] = phis[k].fn(theta);
  return obs;
}

/// Drives any chain exposing step()/state() for K steps, accumulating the
/// post-update states theta_{b+1}..theta_K (b = burn-in).
template <class Chain>
ChainResult collect(Chain& chain, const ChainSpec& spec, const RunOptions& opt) {
  ChainResult out;
  out.stats = RunningStats(std::size_t(spec.theta0.size()), opt.phis);
  const std::uint64_t kept = spec.K > spec.burn_in ? spec.K - spec.burn_in : 0;
  if (opt.batch_count > 0 && kept >= opt.batch_count)
    out.batches = BatchMeans(2 * std::size_t(spec.theta0.size()) + opt.phis.size(),
                             kept / opt.batch_count);
  for (std::uint64_t k = 1; k <= spec.K; ++k) {
    chain.step();
    if (k <= spec.burn_in) continue;
    const auto& th = chain.state();
    out.stats.add(th);
    if (out.batches.enabled()) out.batches.add(observation(th, opt.phis));
    if (opt.thin > 0 && (k - spec.burn_in) % opt.thin == 0) out.trace.emplace_back(k, th);
  }
  out.final_state = chain.state();
  return out;
}

/// Runs one Langevin chain (Euler / SGLD / mSGLD) per spec.
template <Model M>
ChainResult run_chain(const M& model, const KernelConfig& kernel, const ChainSpec& spec,
                      const RunOptions& opt = {}) {
  LangevinChain<M> chain(model, kernel, spec);
  ChainResult r = collect(chain, spec, opt);
  r.noise_collapses = chain.noise_collapses();
  r.unstable_step_size = chain.unstable_step_size();
  return r;
}

/// Random-walk Metropolis chain with the same step()/state() surface.
template <Model M>
class RwmChain {
 public:
  RwmChain(const M& model, double proposal_scale, const ChainSpec& spec)
      : model_(model),
        rwm_(proposal_scale),
        theta_(spec.theta0),
        log_density_(model.log_density(spec.theta0)),
        proposal_rng_(make_engine(spec.seed, spec.replicate, Stream::Proposal)),
        accept_rng_(make_engine(spec.seed, spec.replicate, Stream::Accept)) {
    if (std::size_t(theta_.size()) != model.dim()) throw std::invalid_argument("theta0 has wrong dimension");
  }

  void step() {
    ++steps_;
    if (rwm_.step(model_, theta_, log_density_, proposal_rng_, accept_rng_)) ++accepted_;
  }

  const Eigen::VectorXd& state() const { return theta_; }
  std::uint64_t steps_taken() const { return steps_; }
  double acceptance_rate() const { return steps_ ? double(accepted_) / double(steps_) : 0.0; }
  double scale() const { return rwm_.scale(); }
  /// Changes the proposal scale (used during burn-in tuning).
  void set_scale(double s) { rwm_.set_scale(s); }
  void reset_counters() { steps_ = accepted_ = 0; }

 private:
  const M& model_;
  RandomWalkMetropolis rwm_;
  Eigen::VectorXd theta_;
  double log_density_;
  Engine proposal_rng_, accept_rng_;
  std::uint64_t steps_ = 0, accepted_ = 0;
};

}  // namespace sgld
