#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <random>

namespace sgld {

using Engine = std::mt19937_64;

/// Identifies an independent random substream of one chain.
///
/// Each chain owns one engine per stream. Minibatch indices and Gaussian
/// increments come from different engines, so changing the subsample size n
/// leaves the noise sequence xi_1, xi_2, ... untouched.
enum class Stream : std::uint32_t {
  Minibatch = 1,
  Noise = 2,
  Proposal = 3,
  Accept = 4,
  Data = 5,
};

/// Seeds a 64-bit Mersenne Twister from (seed, replicate, stream) through
/// std::seed_seq. Distinct triples give statistically independent engines.
inline Engine make_engine(std::uint64_t seed, std::uint64_t replicate, Stream stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed),
                    static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(replicate),
                    static_cast<std::uint32_t>(replicate >> 32),
                    static_cast<std::uint32_t>(stream),
                    0x5367'4c44u};
  return Engine(seq);
}

/// Standard normal increments for the Langevin kernels.
class GaussianNoise {
 public:
  explicit GaussianNoise(Engine engine) : engine_(std::move(engine)) {}

  void fill(Eigen::Ref<Eigen::VectorXd> xi) {
    for (Eigen::Index i = 0; i < xi.size(); ++i) xi[i] = normal_(engine_);
  }

 private:
  Engine engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

/// Noise source that always yields xi = 0. Turns a kernel into its drift map.
struct ZeroNoise {
  void fill(Eigen::Ref<Eigen::VectorXd> xi) { xi.setZero(); }
};

template <class N>
concept NoiseSource = requires(N& noise, Eigen::VectorXd& xi) { noise.fill(xi); };

}  // namespace sgld
