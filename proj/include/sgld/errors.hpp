#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace sgld {

/// Minibatch scheme incompatible with the dataset (n = 0, or n > N without replacement).
class InvalidScheme : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Fewer samples than an estimator needs (e.g. covariance from n < 2 indices).
class InsufficientSample : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Dataset too small or degenerate for the requested statistic.
class DegenerateData : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Argument outside the domain where a closed form is defined (e.g. h >= 2/A).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// A chain produced a non-finite state.
class DivergenceError : public std::runtime_error {
 public:
  explicit DivergenceError(std::uint64_t step)
      : std::runtime_error("chain diverged at step " + std::to_string(step)), step_(step) {}

  std::uint64_t step() const noexcept { return step_; }

 private:
  std::uint64_t step_;
};

}  // namespace sgld
