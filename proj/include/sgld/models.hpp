#pragma once

#include "sgld/csv.hpp"
#include "sgld/errors.hpp"
#include "sgld/gradients.hpp"
#include "sgld/random.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace sgld {

inline double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

inline double log_sigmoid(double z) {
  if (z >= 0.0) return -std::log1p(std::exp(-z));
  return z - std::log1p(std::exp(z));
}

/// theta ~ N(0, sigma_theta^2), X_i | theta ~ N(theta, sigma_x^2).
class GaussianConjugateModel {
 public:
  GaussianConjugateModel(double sigma_theta_sq, double sigma_x_sq, std::vector<double> data)
      : sigma_theta_sq_(sigma_theta_sq), sigma_x_sq_(sigma_x_sq), data_(std::move(data)) {
    if (!(sigma_theta_sq_ > 0.0) || !(sigma_x_sq_ > 0.0))
      throw std::invalid_argument("Gaussian model variances must be positive");
    sum_ = std::accumulate(data_.begin(), data_.end(), 0.0);
  }

  std::size_t dim() const { return 1; }
  std::size_t size() const { return data_.size(); }
  double sigma_theta_sq() const { return sigma_theta_sq_; }
  double sigma_x_sq() const { return sigma_x_sq_; }
  const std::vector<double>& data() const { return data_; }
  double data_sum() const { return sum_; }

  /// A = (1/sigma_theta^2 + N/sigma_x^2) / 2; the SGLD map is theta -> (1 - A h) theta + h B.
  double A() const { return 0.5 * (1.0 / sigma_theta_sq_ + double(size()) / sigma_x_sq_); }
  double stability_limit() const { return 1.0 / A(); }

  void add_prior_gradient(const Eigen::VectorXd& theta, Eigen::VectorXd& out) const {
    out[0] -= theta[0] / sigma_theta_sq_;
  }
  void add_datum_gradient(std::size_t i, const Eigen::VectorXd& theta, double scale,
                          Eigen::VectorXd& out) const {
    out[0] += scale * (data_[i] - theta[0]) / sigma_x_sq_;
  }
  void add_likelihood_gradient(const Eigen::VectorXd& theta, Eigen::VectorXd& out) const {
    out[0] += (sum_ - double(size()) * theta[0]) / sigma_x_sq_;
  }
  double log_density(const Eigen::VectorXd& theta) const {
    const double t = theta[0];
    return -0.5 * t * t / sigma_theta_sq_ - 0.5 * (double(size()) * t * t - 2.0 * t * sum_) / sigma_x_sq_;
  }

 private:
  double sigma_theta_sq_;
  double sigma_x_sq_;
  std::vector<double> data_;
  double sum_ = 0.0;
};

struct ToyPosterior {
  double mu_p;
  double sigma_p_sq;
  double A;
};

inline ToyPosterior toy_posterior_params(const GaussianConjugateModel& m) {
  const double N = double(m.size());
  const double precision = 1.0 / m.sigma_theta_sq() + N / m.sigma_x_sq();
  return {m.data_sum() / (m.sigma_x_sq() / m.sigma_theta_sq() + N), 1.0 / precision,
          0.5 * precision};
}

/// Unbiased (divisor N-1) sample variance, two-pass.
inline double unbiased_variance(std::span<const double> x) {
  if (x.size() < 2) throw DegenerateData("variance needs at least two data points");
  const double mean = std::accumulate(x.begin(), x.end(), 0.0) / double(x.size());
  double ss = 0.0;
  for (double v : x) ss += (v - mean) * (v - mean);
  return ss / double(x.size() - 1);
}

/// Var(B) of the toy minibatch statistic B = (N/n) sum_i X_{tau_i} / (2 sigma_x^2).
inline double toy_var_b(const GaussianConjugateModel& m, const MinibatchScheme& scheme) {
  const std::size_t N = m.size();
  if (N < 2) throw DegenerateData("Var(B) needs N >= 2");
  scheme.validate(N);
  const double Nd = double(N), n = double(scheme.n);
  const double var_x = unbiased_variance(m.data());
  const double factor = scheme.mode == Sampling::WithoutReplacement ? Nd * (Nd - n) / n
                                                                    : Nd * (Nd - 1.0) / n;
  return factor * var_x / (4.0 * m.sigma_x_sq() * m.sigma_x_sq());
}

/// Bayesian logistic regression, p(y_i | x_i, beta) = sigmoid(y_i beta^T x_i),
/// prior N(0, P^{-1}).
class LogisticRegressionModel {
 public:
  using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

  LogisticRegressionModel(RowMatrix covariates, Eigen::VectorXd labels,
                          std::optional<Eigen::MatrixXd> prior_precision = std::nullopt)
      : x_(std::move(covariates)), y_(std::move(labels)) {
    if (x_.rows() != y_.size()) throw std::invalid_argument("covariate/label count mismatch");
    if (x_.rows() == 0 || x_.cols() == 0) throw std::invalid_argument("empty logistic dataset");
    if (!x_.allFinite()) throw std::invalid_argument("non-finite covariate");
    for (Eigen::Index i = 0; i < y_.size(); ++i)
      if (y_[i] != 1.0 && y_[i] != -1.0) throw std::invalid_argument("labels must be +1 or -1");
    precision_ = prior_precision.value_or(Eigen::MatrixXd::Identity(x_.cols(), x_.cols()));
    if (precision_.rows() != x_.cols() || precision_.cols() != x_.cols())
      throw std::invalid_argument("prior precision has wrong shape");
  }

  std::size_t dim() const { return std::size_t(x_.cols()); }
  std::size_t size() const { return std::size_t(x_.rows()); }
  const RowMatrix& covariates() const { return x_; }
  const Eigen::VectorXd& labels() const { return y_; }
  const Eigen::MatrixXd& prior_precision() const { return precision_; }

  void add_prior_gradient(const Eigen::VectorXd& beta, Eigen::VectorXd& out) const {
    out.noalias() -= precision_ * beta;
  }
  /// d/dbeta log sigmoid(y x^T beta) = y x sigmoid(-y x^T beta).
  void add_datum_gradient(std::size_t i, const Eigen::VectorXd& beta, double scale,
                          Eigen::VectorXd& out) const {
    const auto row = x_.row(Eigen::Index(i));
    const double yi = y_[Eigen::Index(i)];
    const double w = scale * yi * sigmoid(-yi * row.dot(beta));
    out += w * row.transpose();
  }
  void add_likelihood_gradient(const Eigen::VectorXd& beta, Eigen::VectorXd& out) const {
    for (std::size_t i = 0; i < size(); ++i) add_datum_gradient(i, beta, 1.0, out);
  }
  double log_density(const Eigen::VectorXd& beta) const {
    double lp = -0.5 * beta.dot(precision_ * beta);
    const Eigen::VectorXd z = x_ * beta;
    for (Eigen::Index i = 0; i < z.size(); ++i) lp += log_sigmoid(y_[i] * z[i]);
    return lp;
  }

 private:
  RowMatrix x_;
  Eigen::VectorXd y_;
  Eigen::MatrixXd precision_;
};

/// Gaussian target N(mu, sigma^2) viewed as a model with one pseudo-datum,
/// so that grad log pi / 2 = -(theta - mu) / (2 sigma^2) is the OU drift.
class OuProcess {
 public:
  OuProcess(double mu, double sigma_sq) : mu_(mu), sigma_sq_(sigma_sq) {
    if (!(sigma_sq_ > 0.0)) throw std::invalid_argument("OU variance must be positive");
  }

  std::size_t dim() const { return 1; }
  std::size_t size() const { return 1; }
  double mu() const { return mu_; }
  double sigma_sq() const { return sigma_sq_; }
  double A() const { return 0.5 / sigma_sq_; }
  double stability_limit() const { return 1.0 / A(); }

  void add_prior_gradient(const Eigen::VectorXd&, Eigen::VectorXd&) const {}
  void add_datum_gradient(std::size_t, const Eigen::VectorXd& theta, double scale,
                          Eigen::VectorXd& out) const {
    out[0] -= scale * (theta[0] - mu_) / sigma_sq_;
  }
  void add_likelihood_gradient(const Eigen::VectorXd& theta, Eigen::VectorXd& out) const {
    add_datum_gradient(0, theta, 1.0, out);
  }
  double log_density(const Eigen::VectorXd& theta) const {
    const double d = theta[0] - mu_;
    return -0.5 * d * d / sigma_sq_;
  }

 private:
  double mu_;
  double sigma_sq_;
};

/// Prior gradient plus the d x N matrix of per-datum likelihood gradients.
struct ModelGradients {
  Eigen::VectorXd prior;
  Eigen::MatrixXd per_datum;

  Eigen::VectorXd total() const { return prior + per_datum.rowwise().sum(); }
};

template <Model M>
ModelGradients model_gradients(const M& model, const Eigen::VectorXd& theta) {
  const auto d = Eigen::Index(model.dim());
  ModelGradients g{Eigen::VectorXd::Zero(d), Eigen::MatrixXd::Zero(d, Eigen::Index(model.size()))};
  model.add_prior_gradient(theta, g.prior);
  Eigen::VectorXd col(d);
  for (std::size_t i = 0; i < model.size(); ++i) {
    col.setZero();
    model.add_datum_gradient(i, theta, 1.0, col);
    g.per_datum.col(Eigen::Index(i)) = col;
  }
  return g;
}

/// N i.i.d. draws from N(theta_true, sigma_x^2).
inline std::vector<double> generate_toy_data(double theta_true, double sigma_x_sq, std::size_t N,
                                             std::uint64_t seed) {
  if (!(sigma_x_sq > 0.0)) throw std::invalid_argument("sigma_x^2 must be positive");
  if (N == 0) throw std::invalid_argument("N must be >= 1");
  Engine eng = make_engine(seed, 0, Stream::Data);
  std::normal_distribution<double> normal(theta_true, std::sqrt(sigma_x_sq));
  std::vector<double> x(N);
  for (auto& v : x) v = normal(eng);
  return x;
}

/// Standard-normal covariates with a trailing intercept column of ones;
/// labels drawn from the logistic model at beta_true (zero if empty).
inline LogisticRegressionModel generate_logistic_data(std::size_t N, std::size_t d,
                                                      std::uint64_t seed,
                                                      const Eigen::VectorXd& beta_true = {}) {
  if (N == 0 || d == 0) throw std::invalid_argument("N and d must be >= 1");
  Eigen::VectorXd beta = beta_true.size() ? beta_true : Eigen::VectorXd::Zero(Eigen::Index(d));
  if (beta.size() != Eigen::Index(d)) throw std::invalid_argument("beta_true has wrong dimension");
  Engine eng = make_engine(seed, 0, Stream::Data);
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> unif;
  LogisticRegressionModel::RowMatrix x(static_cast<Eigen::Index>(N), static_cast<Eigen::Index>(d));
  Eigen::VectorXd y(static_cast<Eigen::Index>(N));
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    for (Eigen::Index j = 0; j + 1 < x.cols(); ++j) x(i, j) = normal(eng);
    x(i, x.cols() - 1) = 1.0;
    y[i] = unif(eng) < sigmoid(x.row(i).dot(beta)) ? 1.0 : -1.0;
  }
  return LogisticRegressionModel(std::move(x), std::move(y));
}

// Dataset persistence: one CSV row per datum.

inline void save_toy_data(const std::string& path, std::span<const double> x) {
  Table t{{"x"}, {}};
  for (double v : x) t.rows.push_back({v});
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  write_csv(out, t);
}

inline std::vector<double> load_toy_data(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path);
  const Table t = read_numeric_csv(in);
  if (t.header.size() != 1) throw std::runtime_error("toy dataset must have exactly one column");
  std::vector<double> x;
  for (std::size_t r = 0; r < t.rows.size(); ++r) x.push_back(t.number(r, t.header[0]));
  return x;
}

inline void save_logistic_data(const std::string& path, const LogisticRegressionModel& m) {
  Table t;
  for (std::size_t j = 0; j < m.dim(); ++j) t.header.push_back("x" + std::to_string(j + 1));
  t.header.push_back("y");
  for (Eigen::Index i = 0; i < m.covariates().rows(); ++i) {
    std::vector<Cell> row;
    for (Eigen::Index j = 0; j < m.covariates().cols(); ++j) row.emplace_back(m.covariates()(i, j));
    row.emplace_back(m.labels()[i]);
    t.rows.push_back(std::move(row));
  }
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  write_csv(out, t);
}

inline LogisticRegressionModel load_logistic_data(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path);
  const Table t = read_numeric_csv(in);
  if (t.header.size() < 2 || t.header.back() != "y")
    throw std::runtime_error("logistic dataset needs covariate columns followed by y");
  const auto N = Eigen::Index(t.rows.size()), d = Eigen::Index(t.header.size() - 1);
  LogisticRegressionModel::RowMatrix x(N, d);
  Eigen::VectorXd y(N);
  for (Eigen::Index i = 0; i < N; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) x(i, j) = t.number(std::size_t(i), t.header[std::size_t(j)]);
    y[i] = t.number(std::size_t(i), "y");
  }
  return LogisticRegressionModel(std::move(x), std::move(y));
}

}  // namespace sgld
