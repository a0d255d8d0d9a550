#include "sgld/experiments.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

using namespace sgld;

namespace {

// CSV text without timing columns.
std::string stable_csv(const Table& t) {
  Table out;
  std::vector<std::size_t> keep;
  for (std::size_t i = 0; i < t.header.size(); ++i)
    if (!is_timing_column(t.header[i])) {
      keep.push_back(i);
      out.header.push_back(t.header[i]);
    }
  for (const auto& row : t.rows) {
    std::vector<Cell> r;
    for (auto i : keep) r.push_back(row[i]);
    out.rows.push_back(std::move(r));
  }
  return to_csv_string(out);
}

nlohmann::json stable_json(nlohmann::json j) {
  if (j.is_object()) {
    nlohmann::json out = nlohmann::json::object();
    for (auto it = j.begin(); it != j.end(); ++it)
      if (!is_timing_column(it.key())) out[it.key()] = stable_json(it.value());
    return out;
  }
  if (j.is_array())
    for (auto& v : j) v = stable_json(v);
  return j;
}

GaussianConjugateModel toy_model(std::size_t N) {
  ToyDataConfig c;
  c.N = N;
  return c.build();
}

ExperimentResult run(const std::string& name, const std::string& text, unsigned threads = 1,
                     std::uint64_t seed = 1) {
  RunContext ctx;
  ctx.seed = seed;
  ctx.threads = threads;
  return find_experiment(name).run(text, ctx);
}

const char* kBias = R"(
[bias-sweep]
N = 50
n = [5, 50]
r = [0.1, 0.3]
steps = 20000
burn_in = 100
replicates = 4
)";

const char* kMse = R"(
[mse-sweep]
N = 50
n = [5]
steps = [1, 10, 100, 1000, 100000, 10000000]
empirical = true
empirical_max_steps = 100
replicates = 200
)";

const char* kMseGrow = R"(
[mse-sweep]
mode = "grow-n"
N_exponents = [1, 2]
n_powers = [0.5, 1]
steps = [10, 1000]
)";

const char* kCost = R"(
[cost-minimize]
N = 100
epsilon = [1e-2, 5e-3, 2e-3, 1e-3]
n_per_decade = 4
r_per_decade = 10
)";

const char* kGrow = R"(
[grow-n]
N = [10, 30, 100]
replicates = 4
)";

const char* kLogistic = R"(
[logistic]
N = 40
methods = ["euler", "sgld", "msgld"]
n = [5, 40]
steps = 300
replicates = 3
rwm_steps = 4000
rwm_burn_in = 1000
rwm_batches = 20
)";

const char* kWeak = R"(
[weak-order]
empirical_h = [0.05, 0.1, 0.2]
steps = 20000
burn_in = 100
replicates = 3
)";

}  // namespace

// ---------------------------------------------------------------------------
// Config files

TEST(Config, DefaultsRoundTrip) {
  for (const auto& e : experiments()) {
    const std::string text = e.defaults();
    EXPECT_EQ(text.rfind("[" + e.name + "]", 0), 0u) << e.name;
    // Reloading the printed defaults must be accepted by every experiment's schema.
    if (e.name == "bias-sweep") {
      EXPECT_NO_THROW(load_config<BiasSweepConfig>(text, e.name));
    }
    if (e.name == "mse-sweep") {
      EXPECT_NO_THROW(load_config<MseSweepConfig>(text, e.name));
    }
    if (e.name == "cost-minimize") {
      EXPECT_NO_THROW(load_config<CostMinimizeConfig>(text, e.name));
    }
    if (e.name == "grow-n") {
      EXPECT_NO_THROW(load_config<GrowNConfig>(text, e.name));
    }
    if (e.name == "logistic") {
      EXPECT_NO_THROW(load_config<LogisticConfig>(text, e.name));
    }
    if (e.name == "weak-order") {
      EXPECT_NO_THROW(load_config<WeakOrderConfig>(text, e.name));
    }
  }
}

TEST(Config, ValuesAreApplied) {
  const auto c = load_config<BiasSweepConfig>("N = 77\nr = [0.25]\nsteps = 2e5\nempirical = false\n"
                                              "methods = [\"sgld\"]\n",
                                              "bias-sweep");
  EXPECT_EQ(c.data.N, 77u);
  EXPECT_EQ(c.r, std::vector<double>{0.25});
  EXPECT_EQ(c.steps, 200000u);
  EXPECT_FALSE(c.empirical);
  EXPECT_EQ(c.methods, std::vector<std::string>{"sgld"});
}

TEST(Config, Errors) {
  auto msg = [](const std::string& text) {
    try {
      load_config<BiasSweepConfig>(text, "bias-sweep");
    } catch (const ConfigError& e) {
      return std::string(e.what());
    }
    return std::string("no error");
  };
  EXPECT_NE(msg("bogus = 1").find("unknown key 'bogus'"), std::string::npos);
  EXPECT_NE(msg("r = [0.5, 1.5]").find("r:"), std::string::npos);
  EXPECT_NE(msg("N = abc").find("N:"), std::string::npos);
  EXPECT_NE(msg("N = 0").find("N:"), std::string::npos);
  EXPECT_NE(msg("steps = 1.5").find("steps:"), std::string::npos);
  EXPECT_NE(msg("methods = [\"rk4\"]").find("unknown method"), std::string::npos);
  EXPECT_NE(msg("sampling = \"maybe\"").find("sampling:"), std::string::npos);
  EXPECT_NE(msg("empirical = yes").find("empirical:"), std::string::npos);
  EXPECT_NE(msg("[weak-order]\nmu = 1").find("unexpected section"), std::string::npos);
  EXPECT_NE(msg("n = []").find("n:"), std::string::npos);
}

TEST(Config, RunTimeValidation) {
  EXPECT_THROW(run("bias-sweep", "N = 10\nn = [20]\nempirical = false"), ConfigError);
  EXPECT_THROW(run("weak-order", "analytic_h = [1, 2, 5]\nempirical_h = []"), ConfigError);
  EXPECT_THROW(run("cost-minimize", "r_min = 0.5\nr_max = 0.4"), ConfigError);
  EXPECT_THROW(run("bias-sweep", "replicates = 1\nsteps = 10\nN = 10\nn = [2]"), ConfigError);
}

// ---------------------------------------------------------------------------
// Drivers on small configurations

TEST(BiasSweep, FullBatchRowMatchesEuler) {
  const auto res = run("bias-sweep", kBias);
  const auto& t = res.table;
  ASSERT_EQ(t.rows.size(), 2u * (1 + 2 + 2));
  for (double r : {0.1, 0.3}) {
    std::size_t euler = t.rows.size(), sgld_full = t.rows.size();
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
      if (t.number(i, "r") != r) continue;
      if (t.text(i, "method") == "euler") euler = i;
      if (t.text(i, "method") == "sgld" && t.number(i, "n") == 50) sgld_full = i;
    }
    ASSERT_LT(euler, t.rows.size());
    ASSERT_LT(sgld_full, t.rows.size());
    for (const char* col : {"analytic_bias", "empirical_bias", "empirical_bias_se"})
      EXPECT_EQ(t.number(euler, col), t.number(sgld_full, col)) << col;
    EXPECT_EQ(t.number(sgld_full, "empirical_excess_bias"), 0.0);
  }
}

TEST(BiasSweep, EmpiricalAgreesWithAnalytic) {
  const auto res = run("bias-sweep", kBias);
  const auto& t = res.table;
  std::size_t agree = 0;
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    const double d = std::abs(t.number(i, "empirical_bias") - t.number(i, "analytic_bias"));
    agree += d <= 3 * t.number(i, "empirical_bias_se");
  }
  EXPECT_GE(agree, t.rows.size() - 1);
  EXPECT_EQ(res.summary["N"], 50);
  EXPECT_EQ(res.status, ExitStatus::Ok);
}

TEST(BiasSweep, MsgldBelowSgldAtSmallStep) {
  const auto res = run("bias-sweep", "N = 1000\nn = [10]\nr = [0.01]\nempirical = false");
  const auto& t = res.table;
  double e = 0, s = 0, m = 0;
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    const auto name = t.text(i, "method");
    (name == "euler" ? e : name == "sgld" ? s : m) = std::abs(t.number(i, "analytic_bias"));
  }
  EXPECT_LT(e, m);
  EXPECT_LT(m, s);
}

TEST(MseSweep, FixedNCurvesAndSingleStepRow) {
  const auto res = run("mse-sweep", kMse);
  const auto& t = res.table;
  const GaussianConjugateModel model = toy_model(50);
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    const auto name = t.text(i, "method");
    const Method method = parse_method(name);
    const std::size_t n = std::size_t(t.number(i, "n"));
    const ToyAnalytic ta(model, {n, Sampling::WithoutReplacement});
    const double h = 0.05 / ta.A;
    EXPECT_EQ(t.number(i, "h"), h);
    if (t.number(i, "steps") == 1) {
      // E theta_1^4 - 2 E theta_1^2 m2 + m2^2 from the trajectory.
      const auto traj = moment_trajectory(ta, method, h, 1, Start(0.0));
      const double m2 = ta.mu_p * ta.mu_p + ta.sigma_p_sq;
      EXPECT_NEAR(t.number(i, "analytic_mse"), traj(1, 4) - 2 * traj(1, 2) * m2 + m2 * m2, 1e-10);
    }
    if (t.number(i, "steps") <= 100) {
      EXPECT_LT(std::abs(t.number(i, "empirical_mse") - t.number(i, "analytic_mse")),
                3 * t.number(i, "empirical_mse_se") + 1e-12)
          << name << " M=" << t.number(i, "steps");
    } else {
      EXPECT_EQ(t.text(i, "empirical_mse"), "");
    }
    EXPECT_DOUBLE_EQ(t.number(i, "effective_passes"), t.number(i, "steps") * double(n) / 50.0);
  }
  // The last point sits on the plateau given by the squared asymptotic bias.
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    if (t.number(i, "steps") != 1e7) continue;
    const std::size_t n = std::size_t(t.number(i, "n"));
    const ToyAnalytic ta(model, {n, Sampling::WithoutReplacement});
    const Method method = parse_method(t.text(i, "method"));
    const double lim = analytic_mse2_limit(ta, method, 0.05 / ta.A);
    EXPECT_NEAR(t.number(i, "analytic_mse"), lim, 0.05 * lim + 1e-6);
  }
}

TEST(MseSweep, GrowNModeShape) {
  const auto res = run("mse-sweep", kMseGrow);
  const auto& t = res.table;
  // 2 datasets x (euler + sgld x 2 + msgld x 2) x 2 step counts, with n = N^1 = N
  // for the minibatch methods.
  ASSERT_EQ(t.rows.size(), 2u * 5u * 2u);
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    EXPECT_EQ(t.text(i, "mode"), "grow-n");
    const double N = t.number(i, "N");
    EXPECT_TRUE(N == 10 || N == 100);
    if (t.text(i, "method") != "euler") {
      EXPECT_EQ(t.number(i, "n"), std::llround(std::pow(N, t.number(i, "n_power"))));
    }
  }
}

TEST(CostMinimize, SmallestFeasibleSteps) {
  auto f = [](std::uint64_t M) { return 1.0 / double(M); };
  EXPECT_EQ(smallest_feasible_steps(f, 0.01, 1000, 1.0, 1e9), 100u);
  EXPECT_EQ(smallest_feasible_steps(f, 0.01, 50, 1.0, 1e9), 0u);
  EXPECT_EQ(smallest_feasible_steps(f, 0.01, 1000, 1.0, 50.0), 0u);
  EXPECT_EQ(smallest_feasible_steps(f, 2.0, 1000, 1.0, 1e9), 1u);
}

TEST(CostMinimize, OptimaAreFeasibleAndMinimal) {
  const auto res = run("cost-minimize", kCost);
  ASSERT_EQ(res.status, ExitStatus::Ok);
  const auto& t = res.table;
  const auto model = toy_model(100);
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    ASSERT_EQ(t.number(i, "feasible"), 1);
    const double eps = t.number(i, "epsilon");
    EXPECT_LE(t.number(i, "mse"), eps * eps);
    const Method method = parse_method(t.text(i, "method"));
    const std::size_t n = std::size_t(t.number(i, "n"));
    const ToyAnalytic ta(model, {n, Sampling::WithoutReplacement});
    const auto M = std::uint64_t(t.number(i, "steps"));
    EXPECT_EQ(t.number(i, "cost"), double(M) * double(n));
    if (M > 1) {
      const double prev = analytic_mse2_breakdown(ta, method, t.number(i, "h"), M - 1, Start(0.0)).mse();
      EXPECT_GT(prev, eps * eps);
    }
  }
  EXPECT_TRUE(res.summary["euler_fit"].contains("steps_exponent"));
  EXPECT_EQ(res.summary["optima"]["sgld"]["n"].size(), 4u);
}

TEST(CostMinimize, InfeasibleTarget) {
  const auto res = run("cost-minimize", "N = 50\nepsilon = [1e-3]\nmax_steps = 10\nmethods = [\"euler\"]");
  EXPECT_EQ(res.status, ExitStatus::Infeasible);
  ASSERT_EQ(res.table.rows.size(), 1u);
  EXPECT_EQ(res.table.number(0, "feasible"), 0);
  EXPECT_EQ(res.warnings.size(), 1u);
}

TEST(GrowN, RowsAndTrends) {
  const auto res = run("grow-n", kGrow);
  const auto& t = res.table;
  ASSERT_EQ(t.rows.size(), 3u * 3u);
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    EXPECT_EQ(t.number(i, "datasets"), 4);
    EXPECT_TRUE(std::isfinite(t.number(i, "expected_value")));
  }
  for (const char* s : {"sgld-mse", "euler-mse", "sgld-ere"}) {
    ASSERT_TRUE(res.summary["trends"].contains(s)) << s;
    EXPECT_EQ(res.summary["trends"][s]["values"].size(), 3u);
  }
  EXPECT_TRUE(res.summary["trends"]["sgld-mse"]["decreasing"].get<bool>());
  EXPECT_TRUE(res.summary["trends"]["euler-mse"]["decreasing"].get<bool>());
}

TEST(Logistic, FullBatchSgldMatchesEuler) {
  const auto res = run("logistic", kLogistic);
  const auto& t = res.table;
  std::vector<std::string> euler, sgld;
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    const std::string line = t.text(i, "iteration") + "," + t.text(i, "mse") + "," + t.text(i, "mse_se");
    if (t.text(i, "method") == "euler") euler.push_back(line);
    if (t.text(i, "method") == "sgld" && t.number(i, "n") == 40) sgld.push_back(line);
  }
  ASSERT_FALSE(euler.empty());
  EXPECT_EQ(euler, sgld);
  EXPECT_EQ(res.summary["reference"]["runs"].size(), 2u);
  EXPECT_TRUE(res.summary["final_mse"]["msgld"].contains("5"));
}

TEST(Logistic, CheckpointGrid) {
  const auto g = checkpoint_grid(1000, 3);
  EXPECT_EQ(g.front(), 1u);
  EXPECT_EQ(g.back(), 1000u);
  EXPECT_TRUE(std::is_sorted(g.begin(), g.end()));
  EXPECT_EQ(std::adjacent_find(g.begin(), g.end()), g.end());
}

TEST(Logistic, RwmReferenceOnToyPosterior) {
  const GaussianConjugateModel m(1, 1, generate_toy_data(1, 1, 100, 2));
  const auto p = toy_posterior_params(m);
  const auto ref = rwm_reference(m, Eigen::VectorXd::Zero(1), 200000, 5000, 50, 0.3, 3, 1);
  EXPECT_NEAR(ref.acceptance[0], 0.3, 0.1);
  EXPECT_LT(std::abs(ref.mean[0] - p.mu_p), 3 * std::hypot(ref.run_se[0][0], ref.run_se[1][0]) / 2 + 1e-12);
}

TEST(WeakOrder, AnalyticAndEmpiricalPaths) {
  const auto res = run("weak-order", kWeak);
  EXPECT_TRUE(res.summary["analytic"]["pass"].get<bool>());
  EXPECT_NEAR(res.summary["analytic"]["lambda"].get<double>(), 0.25, 0.005);
  EXPECT_NEAR(res.summary["analytic"]["order"].get<double>(), 1.0, 0.05);
  ASSERT_TRUE(res.summary["empirical"].contains("lambda_se"));
  const auto& t = res.table;
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    if (t.text(i, "path") == "analytic") {
      EXPECT_NEAR(t.number(i, "bias"), ou_euler_stationary_variance(1.0, t.number(i, "h")) - 1.0, 1e-15);
    }
  }
}

TEST(WeakOrder, CoupledEstimatorIsUnbiased) {
  // bias(h) = sigma_h^2 - sigma^2 at h = 0.2.
  std::vector<double> v;
  for (std::uint64_t r = 0; r < 8; ++r) v.push_back(coupled_ou_bias(0.0, 1.0, 0.2, 200000, 100, 5, r));
  const auto m = detail::mean_se(v);
  EXPECT_LT(std::abs(m.mean - (ou_euler_stationary_variance(1.0, 0.2) - 1.0)), 4 * m.se);
}

// ---------------------------------------------------------------------------
// Determinism

TEST(Determinism, RerunsAndThreadCountsGiveIdenticalOutput) {
  const std::vector<std::pair<std::string, std::string>> cases{
      {"bias-sweep", kBias}, {"mse-sweep", kMse},     {"cost-minimize", kCost},
      {"grow-n", kGrow},     {"logistic", kLogistic}, {"weak-order", kWeak}};
  for (const auto& [name, text] : cases) {
    const auto a = run(name, text, 1);
    const auto b = run(name, text, 1);
    const auto c = run(name, text, 3);
    EXPECT_EQ(stable_csv(a.table), stable_csv(b.table)) << name;
    EXPECT_EQ(stable_csv(a.table), stable_csv(c.table)) << name;
    EXPECT_EQ(stable_json(a.summary).dump(), stable_json(c.summary).dump()) << name;
    const auto d = run(name, text, 1, 2);
    if (name != "cost-minimize") {
      EXPECT_NE(stable_csv(a.table), stable_csv(d.table)) << name;
    }
  }
}

// ---------------------------------------------------------------------------
// Helpers

TEST(Csv, QuotingAndNumbers) {
  Table t{{"a", "b,c"}, {{Cell(std::string("x\"y")), Cell(0.1)}, {Cell(std::string("")), Cell(1e-300)}}};
  EXPECT_EQ(to_csv_string(t), "a,\"b,c\"\n\"x\"\"y\",0.1\n,1e-300\n");
  EXPECT_EQ(parse_csv_line("\"x\"\"y\",\"1,2\",3"), (std::vector<std::string>{"x\"y", "1,2", "3"}));
}

TEST(Grids, LogIntGridAndSeeds) {
  const auto g = log_int_grid(1, 1000, 2);
  EXPECT_EQ(g.front(), 1u);
  EXPECT_EQ(g.back(), 1000u);
  EXPECT_TRUE(std::is_sorted(g.begin(), g.end()));
  const auto r = log_grid(1e-3, 0.5, 5);
  EXPECT_DOUBLE_EQ(r.front(), 1e-3);
  EXPECT_NEAR(r.back(), 0.5, 1e-15);
  EXPECT_EQ(derive_seed(1, 2, 3), derive_seed(1, 2, 3));
  EXPECT_NE(derive_seed(1, 2, 3), derive_seed(1, 3, 2));
  EXPECT_TRUE(is_timing_column("wall_time_s"));
  EXPECT_FALSE(is_timing_column("steps"));
}
