#pragma once

// Scalar fast path for the Gaussian toy model. Same kernels, same random
// streams and the same floating-point operation order as LangevinChain on a
// GaussianConjugateModel, without the dynamic-size vector machinery; the
// Monte Carlo sweeps run hundreds of millions of toy steps.

#include "sgld/errors.hpp"
#include "sgld/gradients.hpp"
#include "sgld/models.hpp"
#include "sgld/random.hpp"
#include "sgld/samplers.hpp"

#include <cmath>
#include <cstdint>
#include <random>

namespace sgld {

class ToyChain {
 public:
  ToyChain(const GaussianConjugateModel& model, const KernelConfig& kernel, const ChainSpec& spec)
      : x_(model.data().data()),
        N_(model.size()),
        sum_(model.data_sum()),
        s_th_(model.sigma_theta_sq()),
        s_x_(model.sigma_x_sq()),
        method_(kernel.method),
        mode_(kernel.scheme.mode),
        estimated_(kernel.covariance == CovarianceSource::Estimated),
        h_(spec.h),
        sqrt_h_(std::sqrt(spec.h)),
        theta_(spec.theta0.size() == 1 ? spec.theta0[0] : 0.0),
        noise_rng_(make_engine(spec.seed, spec.replicate, Stream::Noise)),
        minibatch_rng_(make_engine(spec.seed, spec.replicate, Stream::Minibatch)),
        sampler_(model.size(), kernel.method == Method::Euler
                                   ? MinibatchScheme{model.size(), Sampling::WithoutReplacement}
                                   : kernel.scheme) {
    spec.validate(1);
    full_ = method_ == Method::Euler || kernel.scheme.is_full_batch(N_);
    scale_ = double(N_) / double(kernel.scheme.n);
    n_ = kernel.scheme.n;
    if (method_ == Method::Msgld) {
      if (!estimated_) {
        if (kernel.drift_covariance.rows() != 1 || kernel.drift_covariance.cols() != 1)
          throw std::invalid_argument("exact mSGLD covariance must be 1 x 1");
        exact_var_ = kernel.drift_covariance(0, 0);
        exact_collapse_ = 1.0 - 0.5 * h_ * exact_var_ <= 0.0;
      } else if (n_ < 2) {
        throw InsufficientSample("estimated mSGLD covariance needs n >= 2");
      }
      cov_scale_ = covariance_scale(N_, n_, mode_);
      factor_ = kernel.estimated_covariance_factor;
    }
    unstable_ = h_ >= model.stability_limit();
    if (unstable_ && spec.stability == StabilityPolicy::Fail)
      throw DomainError("step size h >= 1/A: the chain is not contractive");
  }

  void step() {
    ++steps_;
    double grad = 0.0;
    double var = 0.0;
    if (method_ == Method::Euler) {
      grad += (sum_ - double(N_) * theta_) / s_x_;
      grad -= theta_ / s_th_;
    } else {
      const auto idx = sampler_.draw(minibatch_rng_);
      if (full_) {
        grad += (sum_ - double(N_) * theta_) / s_x_;
      } else {
        for (std::size_t i : idx) grad += 1.0 * (x_[i] - theta_) / s_x_;
        grad *= scale_;
      }
      grad -= theta_ / s_th_;
      if (method_ == Method::Msgld && estimated_) {
        double mean = 0.0;
        for (std::size_t i : idx) mean += (x_[i] - theta_) / s_x_;
        mean /= double(n_);
        for (std::size_t i : idx) {
          const double g = (x_[i] - theta_) / s_x_ - mean;
          var += g * g;
        }
        var *= cov_scale_;
        var *= factor_;
      }
    }
    const double drift = 0.5 * grad;
    const double xi = normal_(noise_rng_);
    double noise = xi;
    if (method_ == Method::Msgld) {
      const double c = estimated_ ? var : exact_var_;
      if (estimated_ ? 1.0 - 0.5 * h_ * c <= 0.0 : exact_collapse_) ++collapses_;
      noise -= (0.5 * h_) * (c * xi);
    }
    theta_ = theta_ + (h_ * drift + sqrt_h_ * noise);
    if (!std::isfinite(theta_)) throw DivergenceError(steps_);
  }

  double state() const { return theta_; }
  std::uint64_t steps_taken() const { return steps_; }
  std::uint64_t noise_collapses() const { return collapses_; }
  bool unstable_step_size() const { return unstable_; }

 private:
  const double* x_;
  std::size_t N_, n_ = 1;
  double sum_, s_th_, s_x_;
  Method method_;
  Sampling mode_;
  bool estimated_;
  bool full_ = false;
  double h_, sqrt_h_, scale_ = 1.0, cov_scale_ = 0.0;
  double factor_ = 0.25;
  double exact_var_ = 0.0;
  bool exact_collapse_ = false;
  bool unstable_ = false;
  double theta_;
  Engine noise_rng_;
  Engine minibatch_rng_;
  MinibatchSampler sampler_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uint64_t steps_ = 0;
  std::uint64_t collapses_ = 0;
};

/// Post-burn-in sums of theta and theta^2 for one toy chain.
struct ToyRun {
  std::uint64_t count = 0;
  double sum1 = 0.0;
  double sum2 = 0.0;
  double final_state = 0.0;
  std::uint64_t noise_collapses = 0;

  double mean1() const { return sum1 / double(count); }
  double mean2() const { return sum2 / double(count); }
  /// Within-chain variance (1/K) sum theta^2 - ((1/K) sum theta)^2.
  double within_variance() const { return mean2() - mean1() * mean1(); }
};

inline ToyRun run_toy_chain(const GaussianConjugateModel& model, const KernelConfig& kernel,
                            const ChainSpec& spec) {
  ToyChain chain(model, kernel, spec);
  ToyRun r;
  for (std::uint64_t k = 1; k <= spec.K; ++k) {
    chain.step();
    if (k <= spec.burn_in) continue;
    const double t = chain.state();
    ++r.count;
    r.sum1 += t;
    r.sum2 += t * t;
  }
  r.final_state = chain.state();
  r.noise_collapses = chain.noise_collapses();
  return r;
}

}  // namespace sgld
