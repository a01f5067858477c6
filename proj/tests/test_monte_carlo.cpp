#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include <omp.h>

#include "wde/error.hpp"
#include "wde/besov_densities.hpp"
#include "wde/monte_carlo.hpp"

using namespace wde;
using namespace wde::mc;

TEST_CASE("kolmogorov cdf against frozen scipy values") {
  // scipy.special: 1 - kolmogorov(x)
  const std::vector<std::pair<double, double>> ref = {
      {0.3, 9.305801334513752e-06}, {0.5, 0.03605475633512489}, {0.8, 0.45585758842580193},
      {1.0, 0.7300003283226455},    {1.2, 0.887750333329275},   {1.36, 0.9505141232446221},
      {2.0, 0.9993290747442203}};
  for (auto [x, k] : ref) {
    CAPTURE(x);
    CHECK(std::abs(kolmogorov_cdf(x) - k) < 1e-8);
  }
  CHECK(std::abs(kolmogorov_quantile(0.5) - 0.8275735551899059) < 1e-8);
  CHECK(kolmogorov_cdf(0.0) == 0.0);
  // the two series meet at x = 1
  CHECK(std::abs(kolmogorov_cdf(std::nextafter(1.0, 0.0)) - kolmogorov_cdf(1.0)) < 1e-12);
}

TEST_CASE("ks distance and composition invariance") {
  auto uniform = [](double u) { return std::clamp(u, 0.0, 1.0); };
  CHECK(ks_distance({0.5}, uniform) == doctest::Approx(0.5));
  CHECK(ks_distance({0.25, 0.75}, uniform) == doctest::Approx(0.25));

  // sup over s is unchanged when the data are pushed through a monotone map
  std::mt19937_64 rng(4);
  std::exponential_distribution<double> ex(2.0);
  std::vector<double> x(300), u(300);
  for (std::size_t i = 0; i < x.size(); ++i) {
    x[i] = ex(rng);
    u[i] = 1.0 - std::exp(-2.0 * x[i]);
  }
  const double a = ks_distance(x, [](double v) { return v <= 0 ? 0.0 : 1.0 - std::exp(-2.0 * v); });
  CHECK(a == doctest::Approx(ks_distance(u, uniform)).epsilon(1e-12));
}

TEST_CASE("regression and moments") {
  const std::vector<double> x = {1, 2, 3, 4, 5};
  const std::vector<double> y = {3, 5, 7, 9, 11};
  const auto r = ols(x, y);
  CHECK(r.slope == doctest::Approx(2.0));
  CHECK(r.intercept == doctest::Approx(1.0));
  CHECK(r.r2 == doctest::Approx(1.0));
  CHECK(r.slope_se == doctest::Approx(0.0));
  CHECK_THROWS_AS(ols(std::vector<double>{1, 1}, std::vector<double>{2, 3}), Error);

  std::mt19937_64 rng(9);
  std::normal_distribution<double> nd;
  std::vector<double> z(200000);
  for (double& v : z) v = nd(rng);
  CHECK(std::abs(kurtosis(z) - 3.0) < 0.05);
  CHECK(std::abs(variance(z) - 1.0) < 0.01);
  CHECK(median({3, 1, 2}) == 2.0);
  CHECK(quantile({0, 10}, 0.9) == doctest::Approx(9.0));
}

TEST_CASE("replication seeds") {
  CHECK(replication_seed(1, 0, 0) == replication_seed(1, 0, 0));
  CHECK(replication_seed(1, 0, 1) != replication_seed(1, 0, 0));
  CHECK(replication_seed(1, 1, 0) != replication_seed(1, 0, 1));
  CHECK(replication_seed(2, 0, 0) != replication_seed(1, 0, 0));
}

TEST_CASE("config overrides and validation") {
  auto c = default_config("law-of-logarithm");
  CHECK(validate(c).empty());
  apply_override(c, "n_grid", "2^12,2^14");
  CHECK(c.n_grid == std::vector<std::int64_t>{4096, 16384});
  apply_override(c, "tol.window_lo", "0.5");
  CHECK(c.tolerance("window_lo") == 0.5);
  CHECK_THROWS_AS(apply_override(c, "bogus", "1"), Error);
  CHECK_THROWS_AS(apply_override(c, "replications", "ten"), Error);

  apply_override(c, "replications", "0");
  apply_override(c, "n_grid", "4096,1024");
  apply_override(c, "family", "db99");
  const auto problems = validate(c);
  CHECK(problems.size() == 3);  // every problem is reported, not just the first
  try {
    run_experiment(c);
    FAIL("expected a config error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::config);
  }
  CHECK_THROWS_AS(default_config("no-such-experiment"), Error);

  const auto back = ExperimentConfig::from_json(default_config("cdf-clt").to_json());
  CHECK(back.to_json() == default_config("cdf-clt").to_json());
  CHECK(back.hash() == default_config("cdf-clt").hash());
  CHECK(back.hash() != default_config("dkw-tail").hash());
}

TEST_CASE("schedule checks") {
  const auto plugin = [](std::int64_t n) { return choose_j_plugin(n); };
  CHECK(check_schedule_growth(plugin, 1 << 12, 1 << 18, 1).empty());
  const auto too_fine = [](std::int64_t n) { return static_cast<int>(std::floor(std::log2(static_cast<double>(n)))); };
  CHECK_FALSE(check_schedule_growth(too_fine, 1 << 12, 1 << 18, 1).empty());
  const auto jumpy = [](std::int64_t n) { return 2 * static_cast<int>(std::log2(static_cast<double>(n))) / 3; };
  CHECK_FALSE(check_schedule_growth(jumpy, 1 << 12, 1 << 18, 0).empty());

  const std::vector<std::int64_t> grid = {1 << 10, 1 << 12, 1 << 14};
  CHECK(check_bias_vanishing([](std::int64_t n) { return choose_j_fine(n); }, grid, 1.0).empty());
  CHECK_FALSE(check_bias_vanishing([](std::int64_t) { return 3; }, grid, 1.0).empty());

  // the runner refuses a schedule that stops growing
  auto c = default_config("law-of-logarithm");
  c.schedule = "fixed";
  c.params["j"] = 6;
  CHECK_FALSE(validate(c).empty());
}

TEST_CASE("zoo densities") {
  const auto normal = make_zoo_density("normal", 14);
  CHECK(std::sqrt(normal.sup_norm) == doctest::Approx(std::pow(2.0 * std::numbers::pi, -0.25)).epsilon(1e-6));
  CHECK(make_zoo_density("besov:t=0.5,family=db2,seed=3", 14).smoothness_t == 0.5);
  CHECK_THROWS_AS(make_zoo_density("besov:family=db2", 14), Error);
  CHECK_THROWS_AS(make_zoo_density("cauchy", 14), Error);
}

TEST_CASE("cdf deviation: haar estimator at the finest level tracks F_n") {
  const auto d = make_zoo_density("uniform", 14);
  std::vector<double> x;
  for (int i = 1; i <= 64; ++i) x.push_back((i - 0.5) / 64.0);
  const auto s = make_sample(x);
  const Estimator est = fit_linear(s, shared_context("haar", 14), 12);
  const auto dev = cdf_deviation(est, s, d);
  // one point per cell: F_n^W rises linearly across each occupied cell
  CHECK(dev.vs_empirical <= 1.0 / 64.0 + 1e-12);
  CHECK(dev.vs_true == doctest::Approx(0.5 / 64.0).epsilon(1e-3));
}

namespace {

ExperimentConfig small_lol() {
  auto c = default_config("law-of-logarithm");
  c.n_grid = {1 << 12, 1 << 13, 1 << 14};
  c.replications = 6;
  return c;
}

}  // namespace

TEST_CASE("law of logarithm: target, records and determinism") {
  const auto c = small_lol();
  const auto a = run_experiment(c);
  CHECK(a.aggregates["target"].get<double>() == doctest::Approx(0.6316).epsilon(1e-4));
  CHECK(a.records.size() == 18);
  CHECK(a.config_hash == c.hash());
  CHECK(a.aggregates["D1"].get<double>() == 1.0);  // haar: normalizer is 1
  CHECK(a.aggregates["D2"].get<double>() == 1.0);

  const int saved = omp_get_max_threads();
  omp_set_num_threads(3);
  const auto b = run_experiment(c);
  omp_set_num_threads(saved);
  CHECK(records_csv(a) == records_csv(b));
  CHECK(a.summary().dump() == b.summary().dump());

  auto other = c;
  other.seed += 1;
  CHECK(records_csv(run_experiment(other)) != records_csv(a));
}

TEST_CASE("records csv parses back losslessly") {
  const auto report = run_experiment(small_lol());
  std::istringstream in(records_csv(report));
  std::string line;
  std::size_t i = 0;
  bool header = false;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (!header) {
      CHECK(line == "series,n,replication,level,value");
      header = true;
      continue;
    }
    std::istringstream fields(line);
    std::string series, n, rep, level, value;
    std::getline(fields, series, ',');
    std::getline(fields, n, ',');
    std::getline(fields, rep, ',');
    std::getline(fields, level, ',');
    std::getline(fields, value, ',');
    REQUIRE(i < report.records.size());
    const auto& r = report.records[i++];
    CHECK(series == r.series);
    CHECK(std::stoll(n) == r.n);
    CHECK(std::stoi(rep) == r.replication);
    CHECK(std::stod(value) == r.value);
  }
  CHECK(i == report.records.size());
}

TEST_CASE("dkw tail: tail at the 90th percentile is 0.10") {
  auto c = default_config("dkw-tail");
  c.n_grid = {1 << 10};
  c.replications = 200;
  c.params["min_exceedances"] = 10;
  const auto r = run_experiment(c);
  CHECK(r.aggregates["q90_tail"].get<double>() == doctest::Approx(0.10));
  CHECK(r.aggregates["window"]["admissible_hi"].get<double>() == doctest::Approx(32.0));
}

TEST_CASE("dkw tail reports missing exceedances") {
  auto c = default_config("dkw-tail");
  c.n_grid = {1 << 10};
  c.replications = 15;
  const auto r = run_experiment(c);
  REQUIRE(!r.verdicts.empty());
  CHECK_FALSE(r.verdicts.front().pass);
  CHECK(r.verdicts.front().detail.find("replications") != std::string::npos);
}

TEST_CASE("bias decay experiment") {
  const auto r = run_experiment(default_config("bias-decay"));
  REQUIRE(r.verdicts.size() == 1);
  CHECK(r.verdicts[0].pass);
  CHECK(r.records.size() == 6);
}

TEST_CASE("functional clt: constant function is an exact null") {
  auto c = default_config("functional-clt");
  c.n_grid = {1 << 9, 1 << 10};
  c.replications = 20;
  const auto r = run_experiment(c);
  bool seen = false;
  for (const auto& v : r.verdicts)
    if (v.name == "constant-null") {
      seen = true;
      CHECK(v.pass);
    }
  CHECK(seen);
}

TEST_CASE("threshold fit does not depend on the generating density") {
  // the procedure never reads t: same sample, same document
  const auto ctx = shared_context("haar", 14);
  const auto s = sample_density(make_zoo_density("besov:t=0.5,family=db2,seed=11", 14), 2048, 5);
  const auto copy = make_sample(s.observations, s.seed_provenance);
  const Estimator a = fit_threshold(s, ctx, 16.0, 0);
  const Estimator b = fit_threshold(copy, ctx, 16.0, 0);
  CHECK(to_json(a).dump() == to_json(b).dump());
}
