#include "sgld/models.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <random>

using namespace sgld;

namespace {

Eigen::VectorXd vec(std::initializer_list<double> v) {
  Eigen::VectorXd out(Eigen::Index(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

template <class M>
double fd_relative_error(const M& m, const Eigen::VectorXd& theta) {
  Eigen::VectorXd g;
  full_gradient(m, theta, g);
  Eigen::VectorXd fd(theta.size());
  const double eps = 1e-6;
  for (Eigen::Index j = 0; j < theta.size(); ++j) {
    Eigen::VectorXd p = theta, q = theta;
    p[j] += eps;
    q[j] -= eps;
    fd[j] = (m.log_density(p) - m.log_density(q)) / (2 * eps);
  }
  return (g - fd).norm() / std::max(1.0, g.norm());
}

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST(ToyPosterior, SymmetricData) {
  const auto p = toy_posterior_params(GaussianConjugateModel(1, 1, {1, -1}));
  EXPECT_NEAR(p.mu_p, 0.0, 1e-15);
  EXPECT_NEAR(p.sigma_p_sq, 1.0 / 3.0, 1e-15);
  EXPECT_NEAR(p.A, 1.5, 1e-15);
}

TEST(ToyPosterior, ShiftedData) {
  const auto p = toy_posterior_params(GaussianConjugateModel(1, 1, {1, 3}));
  EXPECT_NEAR(p.mu_p, 4.0 / 3.0, 1e-15);
  EXPECT_NEAR(p.sigma_p_sq, 1.0 / 3.0, 1e-15);
  EXPECT_NEAR(p.A, 1.5, 1e-15);
}

TEST(ToyPosterior, EmptyDataRecoversPrior) {
  const auto p = toy_posterior_params(GaussianConjugateModel(2.5, 1, {}));
  EXPECT_EQ(p.mu_p, 0.0);
  EXPECT_DOUBLE_EQ(p.sigma_p_sq, 2.5);
  EXPECT_DOUBLE_EQ(p.A, 1.0 / 5.0);
}

TEST(ToyPosterior, ATimesVarianceIsHalf) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.1, 5.0);
  for (int i = 0; i < 50; ++i) {
    const GaussianConjugateModel m(u(rng), u(rng), generate_toy_data(u(rng), 1.0, 1 + i, i));
    const auto p = toy_posterior_params(m);
    EXPECT_NEAR(p.A * p.sigma_p_sq, 0.5, 1e-15);
    EXPECT_DOUBLE_EQ(p.A, m.A());
  }
}

TEST(ToyPosterior, InvalidVariances) {
  EXPECT_THROW(GaussianConjugateModel(0, 1, {1}), std::invalid_argument);
  EXPECT_THROW(GaussianConjugateModel(1, -1, {1}), std::invalid_argument);
}

TEST(ToyVarB, FullBatchIsZero) {
  const GaussianConjugateModel m(1, 1, {0.3, 1.7, -0.2});
  EXPECT_EQ(toy_var_b(m, {3, Sampling::WithoutReplacement}), 0.0);
}

TEST(ToyVarB, TwoPointExamples) {
  const GaussianConjugateModel m(1, 1, {1, -1});
  EXPECT_DOUBLE_EQ(toy_var_b(m, {1, Sampling::WithoutReplacement}), 1.0);
  EXPECT_DOUBLE_EQ(toy_var_b(m, {1, Sampling::WithReplacement}), 1.0);
}

TEST(ToyVarB, DegenerateData) {
  const GaussianConjugateModel m(1, 1, {2.0});
  EXPECT_THROW(toy_var_b(m, {1, Sampling::WithReplacement}), DegenerateData);
}

TEST(ToyVarB, MatchesSampledBVariance) {
  // Empirical variance of B over many minibatches, both modes.
  const GaussianConjugateModel m(1, 0.5, generate_toy_data(0.5, 0.5, 30, 4));
  Engine rng = make_engine(4, 0, Stream::Minibatch);
  for (auto mode : {Sampling::WithoutReplacement, Sampling::WithReplacement}) {
    MinibatchSampler s(30, {7, mode});
    double sum = 0, sq = 0;
    const int draws = 400000;
    for (int i = 0; i < draws; ++i) {
      double b = 0;
      for (auto j : s.draw(rng)) b += m.data()[j];
      b *= (30.0 / 7.0) / (2 * 0.5);
      sum += b;
      sq += b * b;
    }
    const double var = sq / draws - (sum / draws) * (sum / draws);
    const double exact = toy_var_b(m, {7, mode});
    // Var of a sample variance is about 2 var^2 / draws for near-Gaussian B.
    EXPECT_NEAR(var, exact, 5 * exact * std::sqrt(2.0 / draws));
  }
}

TEST(ModelGradients, ToyVanishesAtPosteriorMean) {
  const GaussianConjugateModel m(1.3, 0.8, {0.4, 2.2, -0.1, 1.0});
  const auto p = toy_posterior_params(m);
  EXPECT_NEAR(model_gradients(m, vec({p.mu_p})).total()[0], 0.0, 1e-14);
  const double th = 0.9;
  EXPECT_NEAR(model_gradients(m, vec({th})).total()[0], -(th - p.mu_p) / p.sigma_p_sq, 1e-13);
}

TEST(ModelGradients, SumEqualsFullGradient) {
  const auto lm = generate_logistic_data(40, 3, 2, vec({1, -1, 0.5}));
  const Eigen::VectorXd beta = vec({0.2, 0.7, -1.1});
  Eigen::VectorXd full;
  full_gradient(lm, beta, full);
  EXPECT_LT((model_gradients(lm, beta).total() - full).norm(), 1e-12 * full.norm());
}

TEST(ModelGradients, LogisticSingleDatum) {
  LogisticRegressionModel::RowMatrix x(1, 1);
  x(0, 0) = 2.0;
  const LogisticRegressionModel m(x, vec({-1.0}));
  const auto g = model_gradients(m, vec({1.0}));
  EXPECT_NEAR(g.per_datum(0, 0), -2.0 / (1.0 + std::exp(-2.0)), 1e-12);
  EXPECT_NEAR(g.per_datum(0, 0), -1.76159, 1e-5);
  // Finite difference of log sigmoid(y beta x).
  const double e = 1e-6;
  const double fd = (log_sigmoid(-1.0 * (1 + e) * 2.0) - log_sigmoid(-1.0 * (1 - e) * 2.0)) / (2 * e);
  EXPECT_NEAR(g.per_datum(0, 0), fd, 1e-8);
}

TEST(ModelGradients, FiniteDifferences) {
  std::mt19937_64 rng(17);
  std::normal_distribution<double> normal(0.0, 1.5);
  const GaussianConjugateModel toy(2.0, 0.7, generate_toy_data(0.3, 0.7, 50, 1));
  const auto lm = generate_logistic_data(100, 3, 6, vec({1, -1, 0.5}));
  const OuProcess ou(0.4, 2.0);
  for (int i = 0; i < 100; ++i) {
    EXPECT_LT(fd_relative_error(toy, vec({normal(rng)})), 1e-5);
    EXPECT_LT(fd_relative_error(ou, vec({normal(rng)})), 1e-5);
    EXPECT_LT(fd_relative_error(lm, vec({normal(rng), normal(rng), normal(rng)})), 1e-5);
  }
}

TEST(Logistic, StableForLargeMargins) {
  EXPECT_EQ(sigmoid(-800.0), 0.0);
  EXPECT_EQ(sigmoid(800.0), 1.0);
  EXPECT_NEAR(log_sigmoid(-800.0), -800.0, 1e-12);
  EXPECT_EQ(log_sigmoid(800.0), 0.0);
  const auto lm = generate_logistic_data(10, 2, 1);
  Eigen::VectorXd g;
  full_gradient(lm, vec({500, -500}), g);
  EXPECT_TRUE(g.allFinite());
  EXPECT_TRUE(std::isfinite(lm.log_density(vec({500, -500}))));
}

TEST(Logistic, Validation) {
  LogisticRegressionModel::RowMatrix x(2, 1);
  x << 1, 2;
  EXPECT_THROW(LogisticRegressionModel(x, vec({1, 0})), std::invalid_argument);
  EXPECT_THROW(LogisticRegressionModel(x, vec({1})), std::invalid_argument);
  x(1, 0) = std::nan("");
  EXPECT_THROW(LogisticRegressionModel(x, vec({1, -1})), std::invalid_argument);
}

TEST(OuProcess, DriftAndValidation) {
  const OuProcess ou(1.0, 2.0);
  Eigen::VectorXd g;
  full_gradient(ou, vec({3.0}), g);
  EXPECT_DOUBLE_EQ(0.5 * g[0], -(3.0 - 1.0) / (2 * 2.0));
  EXPECT_DOUBLE_EQ(ou.A(), 0.25);
  EXPECT_THROW(OuProcess(0, 0), std::invalid_argument);
}

TEST(GenerateToyData, MeanAndDeterminism) {
  const auto x = generate_toy_data(1.0, 1.0, 10000, 5);
  double mean = 0;
  for (double v : x) mean += v;
  mean /= double(x.size());
  EXPECT_NEAR(mean, 1.0, 0.04);
  EXPECT_EQ(x, generate_toy_data(1.0, 1.0, 10000, 5));
  EXPECT_NE(x, generate_toy_data(1.0, 1.0, 10000, 6));
  EXPECT_THROW(generate_toy_data(1.0, 0.0, 10, 5), std::invalid_argument);
  EXPECT_THROW(generate_toy_data(1.0, 1.0, 0, 5), std::invalid_argument);
}

TEST(GenerateLogisticData, ShapeBalanceAndDeterminism) {
  const auto m = generate_logistic_data(1000, 3, 8);
  EXPECT_EQ(m.covariates().rows(), 1000);
  EXPECT_EQ(m.covariates().cols(), 3);
  EXPECT_TRUE((m.covariates().col(2).array() == 1.0).all());
  const auto big = generate_logistic_data(10000, 3, 8);
  EXPECT_NEAR((big.labels().array() > 0).cast<double>().mean(), 0.5, 0.02);
  const auto again = generate_logistic_data(1000, 3, 8);
  EXPECT_EQ(m.covariates(), again.covariates());
  EXPECT_EQ(m.labels(), again.labels());
  EXPECT_THROW(generate_logistic_data(10, 3, 8, vec({1, 2})), std::invalid_argument);
}

TEST(GenerateLogisticData, LabelsFollowTrueBeta) {
  // A strongly positive intercept makes most labels +1.
  const auto m = generate_logistic_data(5000, 2, 9, vec({0.0, 3.0}));
  const double frac = (m.labels().array() > 0).cast<double>().mean();
  EXPECT_NEAR(frac, 1.0 / (1.0 + std::exp(-3.0)), 0.02);
}

TEST(DatasetFiles, ToyRoundTrip) {
  const auto x = generate_toy_data(0.2, 3.0, 25, 2);
  const auto path = temp_path("sgld_toy_roundtrip.csv");
  save_toy_data(path, x);
  EXPECT_EQ(load_toy_data(path), x);
  std::filesystem::remove(path);
}

TEST(DatasetFiles, LogisticRoundTrip) {
  const auto m = generate_logistic_data(30, 3, 4, vec({1, -1, 0.5}));
  const auto path = temp_path("sgld_logistic_roundtrip.csv");
  save_logistic_data(path, m);
  const auto back = load_logistic_data(path);
  EXPECT_EQ(back.covariates(), m.covariates());
  EXPECT_EQ(back.labels(), m.labels());
  std::filesystem::remove(path);
}
