#include "sgld/gradients.hpp"
#include "sgld/models.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <functional>
#include <map>
#include <set>
#include <vector>

using namespace sgld;

namespace {

// All n-subsets (without replacement) or all n-tuples (with replacement) of [N].
std::vector<std::vector<std::size_t>> all_batches(std::size_t N, std::size_t n, Sampling mode) {
  std::vector<std::vector<std::size_t>> out;
  std::vector<std::size_t> cur;
  std::function<void(std::size_t)> rec = [&](std::size_t start) {
    if (cur.size() == n) {
      out.push_back(cur);
      return;
    }
    for (std::size_t i = mode == Sampling::WithoutReplacement ? start : 0; i < N; ++i) {
      cur.push_back(i);
      rec(i + 1);
      cur.pop_back();
    }
  };
  rec(0);
  return out;
}

GaussianConjugateModel toy(std::vector<double> x, double s_th = 1.0, double s_x = 1.0) {
  return GaussianConjugateModel(s_th, s_x, std::move(x));
}

Eigen::VectorXd vec(std::initializer_list<double> v) {
  Eigen::VectorXd out(Eigen::Index(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

}  // namespace

TEST(SampleMinibatch, SingletonDataset) {
  Engine rng = make_engine(1, 0, Stream::Minibatch);
  for (auto mode : {Sampling::WithReplacement, Sampling::WithoutReplacement})
    EXPECT_EQ(sample_minibatch(1, {1, mode}, rng), std::vector<std::size_t>{0});
}

TEST(SampleMinibatch, FullBatchIsPermutation) {
  Engine rng = make_engine(2, 0, Stream::Minibatch);
  auto idx = sample_minibatch(4, {4, Sampling::WithoutReplacement}, rng);
  std::sort(idx.begin(), idx.end());
  EXPECT_EQ(idx, (std::vector<std::size_t>{0, 1, 2, 3}));
}

TEST(SampleMinibatch, UniformOverTwoPoints) {
  Engine rng = make_engine(3, 0, Stream::Minibatch);
  MinibatchSampler s(2, {1, Sampling::WithoutReplacement});
  int zeros = 0;
  const int draws = 100000;
  for (int i = 0; i < draws; ++i) zeros += s.draw(rng)[0] == 0;
  EXPECT_NEAR(double(zeros) / draws, 0.5, 0.01);
}

TEST(SampleMinibatch, SubsetsAreDistinctAndUniform) {
  // Each of the C(5,2) = 10 subsets should appear with frequency 1/10.
  Engine rng = make_engine(4, 0, Stream::Minibatch);
  MinibatchSampler s(5, {2, Sampling::WithoutReplacement});
  std::map<std::pair<std::size_t, std::size_t>, int> counts;
  const int draws = 200000;
  for (int i = 0; i < draws; ++i) {
    auto b = s.draw(rng);
    ASSERT_NE(b[0], b[1]);
    counts[{std::min(b[0], b[1]), std::max(b[0], b[1])}]++;
  }
  ASSERT_EQ(counts.size(), 10u);
  double chi2 = 0.0;
  for (const auto& [k, c] : counts) chi2 += (c - draws / 10.0) * (c - draws / 10.0) / (draws / 10.0);
  EXPECT_LT(chi2, 27.88);  // chi-square, 9 dof, p = 0.001
}

TEST(SampleMinibatch, WithReplacementCanRepeat) {
  Engine rng = make_engine(5, 0, Stream::Minibatch);
  MinibatchSampler s(3, {3, Sampling::WithReplacement});
  bool repeated = false;
  for (int i = 0; i < 100 && !repeated; ++i) {
    auto b = s.draw(rng);
    repeated = std::set<std::size_t>(b.begin(), b.end()).size() < 3;
  }
  EXPECT_TRUE(repeated);
  MinibatchSampler big(3, {7, Sampling::WithReplacement});
  EXPECT_EQ(big.draw(rng).size(), 7u);
}

TEST(SampleMinibatch, InvalidScheme) {
  Engine rng = make_engine(6, 0, Stream::Minibatch);
  EXPECT_THROW(sample_minibatch(3, {4, Sampling::WithoutReplacement}, rng), InvalidScheme);
  EXPECT_THROW(sample_minibatch(3, {0, Sampling::WithReplacement}, rng), InvalidScheme);
}

TEST(SampleMinibatch, DeterministicInSeed) {
  Engine a = make_engine(7, 3, Stream::Minibatch), b = make_engine(7, 3, Stream::Minibatch);
  MinibatchSampler sa(50, {5, Sampling::WithoutReplacement}), sb(50, {5, Sampling::WithoutReplacement});
  for (int i = 0; i < 100; ++i) {
    auto x = sa.draw(a);
    auto y = sb.draw(b);
    ASSERT_TRUE(std::equal(x.begin(), x.end(), y.begin(), y.end()));
  }
}

TEST(EstimateGradient, FullBatchIsExact) {
  const auto m = toy({0.3, -1.2, 2.5, 0.7});
  const Eigen::VectorXd th = vec({0.4});
  const std::vector<std::size_t> all{0, 1, 2, 3};
  Eigen::VectorXd exact;
  full_gradient(m, th, exact);
  EXPECT_EQ(estimate_gradient(m, th, all).value[0], exact[0]);
  const auto post = toy_posterior_params(m);
  EXPECT_NEAR(exact[0], -(0.4 - post.mu_p) / post.sigma_p_sq, 1e-12);
}

TEST(EstimateGradient, ToyDriftIsAffineInTheta) {
  const std::vector<double> x{0.3, -1.2, 2.5, 0.7, 1.9};
  const double s_x = 0.7, s_th = 2.0;
  const auto m = toy(x, s_th, s_x);
  const double A = m.A();
  const std::vector<std::size_t> idx{1, 4};
  const double th = -0.8;
  const double B = (5.0 / 2.0) * (x[1] + x[4]) / (2.0 * s_x);
  const auto g = estimate_gradient(m, vec({th}), idx);
  EXPECT_NEAR(g.value[0], -2.0 * A * th + 2.0 * B, 1e-12);
  EXPECT_NEAR(g.drift()[0], -A * th + B, 1e-12);
  EXPECT_EQ(g.indices, idx);
}

TEST(EstimateGradient, LogisticAtZero) {
  const auto m = generate_logistic_data(20, 3, 11);
  const auto g = model_gradients(m, Eigen::VectorXd::Zero(3));
  EXPECT_EQ(g.prior.norm(), 0.0);
  for (Eigen::Index i = 0; i < 20; ++i)
    for (Eigen::Index j = 0; j < 3; ++j)
      EXPECT_DOUBLE_EQ(g.per_datum(j, i), m.labels()[i] * m.covariates()(i, j) / 2.0);
}

TEST(EstimateGradient, EmptyIndexListThrows) {
  const auto m = toy({1.0, 2.0});
  EXPECT_THROW(estimate_gradient(m, vec({0.0}), std::vector<std::size_t>{}), std::invalid_argument);
}

TEST(EstimateGradient, UnbiasedOverAllBatches) {
  const auto lm = generate_logistic_data(6, 3, 5, vec({0.5, -1.0, 0.2}));
  const Eigen::VectorXd beta = vec({0.3, 0.1, -0.4});
  Eigen::VectorXd exact;
  full_gradient(lm, beta, exact);
  for (auto mode : {Sampling::WithoutReplacement, Sampling::WithReplacement})
    for (std::size_t n = 1; n <= 4; ++n) {
      Eigen::VectorXd avg = Eigen::VectorXd::Zero(3);
      const auto batches = all_batches(6, n, mode);
      for (const auto& b : batches) avg += estimate_gradient(lm, beta, b, mode).value;
      avg /= double(batches.size());
      EXPECT_LT((avg - exact).norm(), 1e-12 * exact.norm()) << "n=" << n << " mode=" << to_string(mode);
    }
}

TEST(GradientCovariance, IdenticalGradientsGiveZero) {
  const auto m = toy({1.5, 1.5, 1.5, 1.5});
  const auto c = estimate_gradient_covariance(m, vec({0.2}), std::vector<std::size_t>{0, 2});
  EXPECT_EQ(c.matrix(0, 0), 0.0);
}

TEST(GradientCovariance, FullBatchHasZeroScale) {
  // N = 2, X = [1, -1], n = N without replacement: the estimator is the full gradient.
  const auto m = toy({1.0, -1.0});
  const auto c = estimate_gradient_covariance(m, vec({0.0}), std::vector<std::size_t>{0, 1});
  EXPECT_EQ(c.matrix(0, 0), 0.0);
}

TEST(GradientCovariance, NeedsTwoIndices) {
  const auto m = toy({1.0, 2.0, 3.0});
  EXPECT_THROW(estimate_gradient_covariance(m, vec({0.0}), std::vector<std::size_t>{1}), InsufficientSample);
}

TEST(GradientCovariance, ToyFourPointsMatchesEnumeration) {
  const std::vector<double> x{0.5, -1.0, 2.0, 3.5};
  const auto m = toy(x);
  const Eigen::VectorXd th = vec({0.25});
  const auto batches = all_batches(4, 2, Sampling::WithoutReplacement);
  ASSERT_EQ(batches.size(), 6u);
  double mean = 0, sq = 0, est = 0;
  for (const auto& b : batches) {
    const double f = estimate_gradient(m, th, b).drift()[0];
    mean += f;
    sq += f * f;
    est += estimate_gradient_covariance(m, th, b).drift_covariance()(0, 0);
  }
  mean /= 6;
  const double exact_var = sq / 6 - mean * mean;
  EXPECT_NEAR(est / 6, exact_var, 1e-10 * exact_var);
  // Var(f_hat) = Var(B) for the toy model.
  EXPECT_NEAR(exact_var, toy_var_b(m, {2, Sampling::WithoutReplacement}), 1e-10 * exact_var);
}

TEST(GradientCovariance, UnbiasedOverAllBatchesBothModes) {
  const auto lm = generate_logistic_data(6, 3, 9, vec({1.0, -0.5, 0.3}));
  const Eigen::VectorXd beta = vec({-0.2, 0.4, 0.1});
  for (auto mode : {Sampling::WithoutReplacement, Sampling::WithReplacement})
    for (std::size_t n = 2; n <= 4; ++n) {
      const auto batches = all_batches(6, n, mode);
      Eigen::VectorXd mean = Eigen::VectorXd::Zero(3);
      Eigen::MatrixXd second = Eigen::MatrixXd::Zero(3, 3), est = Eigen::MatrixXd::Zero(3, 3);
      for (const auto& b : batches) {
        const Eigen::VectorXd g = estimate_gradient(lm, beta, b, mode).value;
        mean += g;
        second += g * g.transpose();
        est += estimate_gradient_covariance(lm, beta, b, mode).matrix;
      }
      const double B = double(batches.size());
      mean /= B;
      const Eigen::MatrixXd exact = second / B - mean * mean.transpose();
      EXPECT_LT((est / B - exact).norm(), 1e-10 * exact.norm()) << "n=" << n << " mode=" << to_string(mode);
    }
}

TEST(GradientCovariance, SymmetricPositiveSemidefinite) {
  const auto lm = generate_logistic_data(200, 4, 13);
  Engine rng = make_engine(13, 0, Stream::Minibatch);
  MinibatchSampler s(200, {10, Sampling::WithoutReplacement});
  const Eigen::VectorXd beta = vec({0.5, -0.5, 1.0, 0.0});
  for (int i = 0; i < 50; ++i) {
    const auto c = estimate_gradient_covariance(lm, beta, s.draw(rng)).matrix;
    EXPECT_EQ((c - c.transpose()).norm(), 0.0);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(c);
    EXPECT_GT(es.eigenvalues().minCoeff(), -1e-10 * std::max(1.0, es.eigenvalues().maxCoeff()));
  }
}

TEST(CovarianceScale, Values) {
  EXPECT_DOUBLE_EQ(covariance_scale(4, 2, Sampling::WithoutReplacement), 4.0 * 2.0 / 2.0);
  EXPECT_DOUBLE_EQ(covariance_scale(4, 2, Sampling::WithReplacement), 16.0 / 2.0);
  EXPECT_EQ(covariance_scale(5, 5, Sampling::WithoutReplacement), 0.0);
}
