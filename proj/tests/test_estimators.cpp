#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

#include "wde/besov_densities.hpp"
#include "wde/error.hpp"
#include "wde/estimators.hpp"

using namespace wde;

namespace {

Sample normal_sample(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  std::vector<double> x(n);
  for (double& v : x) v = nd(rng);
  return make_sample(x);
}

// Observations rounded to the grid of spacing 2^-bits.
Sample snapped(const Sample& s, int bits) {
  std::vector<double> x(s.observations);
  for (double& v : x) v = std::ldexp(std::round(std::ldexp(v, bits)), -bits);
  return make_sample(x);
}

}  // namespace

TEST_CASE("level schedules") {
  CHECK(choose_j_optimal(1024, 1.0) == 2);
  CHECK(choose_j_optimal(1 << 16, 0.5) >= choose_j_optimal(1 << 16, 2.0));
  CHECK(choose_j_optimal(1 << 20, 1.0) >= choose_j_optimal(1 << 10, 1.0));
  CHECK(choose_j_optimal(3, 1.0) == 0);
  const auto lv = threshold_levels(4096, 0);
  CHECK(lv.j1 == 9);
  const double r = 4096.0 / std::log(4096.0);
  CHECK(r <= 512.0);
  CHECK(512.0 <= 2.0 * r);
  CHECK_THROWS_AS(threshold_levels(4, 0), Error);
  CHECK(choose_j_fine(1 << 14) == 11);
}

TEST_CASE("haar linear estimator, hand cases") {
  auto ctx = shared_context("haar", 14);
  const auto s = make_sample({0.25, 0.75});
  const Estimator est = fit_linear(s, ctx, 1);
  for (double y : {0.01, 0.3, 0.5, 0.51, 0.99, 1.0}) CHECK(eval_density(est, y) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(eval_density(est, 0.0) == 0.0);
  CHECK(eval_density(est, 1.01) == 0.0);
  CHECK(cdf(est, 0.5) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(cdf(est, -3.0) == 0.0);
  CHECK(cdf(est, 4.0) == doctest::Approx(1.0).epsilon(1e-15));

  const Estimator e0 = fit_linear(make_sample({0.2, 0.9, 1.0}), ctx, 0);
  CHECK(eval_density(e0, 0.5) == doctest::Approx(1.0));
  CHECK(eval_density(e0, 1.5) == 0.0);
}

TEST_CASE("single observation integrates to one") {
  for (const char* name : {"haar", "db2", "db4"}) {
    auto ctx = shared_context(name, 14);
    for (int j : {0, 3, 7}) {
      const Estimator est = fit_linear(make_sample({0.3141}), ctx, j);
      CHECK(std::abs(total_mass(est) - 1.0) < 1e-4);
      CHECK(std::abs(cdf(est, 50.0) - 1.0) < 1e-4);
    }
  }
}

TEST_CASE("dual evaluation agreement") {
  auto ctx = shared_context("db3", 14);
  const auto s = normal_sample(400, 17);
  const int j = 4;
  const auto est = fit_linear(s, ctx, j);
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> unif(-4.0, 4.0);
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    const double y = unif(rng);
    worst = std::max(worst, std::abs(eval_density(est, y) - eval_by_kernel(*ctx, s, j, y)));
  }
  CHECK(worst <= 1e-8);
}

TEST_CASE("threshold degenerations") {
  for (const char* name : {"haar", "db2"}) {
    CAPTURE(name);
    auto ctx = shared_context(name, 14);
    const auto raw = normal_sample(3000, 23);
    const auto lv = threshold_levels(3000, ctx->b().family().regularity_T);
    const auto s = snapped(raw, 14 + lv.j0);
    const Estimator inf = fit_threshold(s, ctx, std::numeric_limits<double>::infinity(), ctx->b().family().regularity_T);
    const auto& th_inf = std::get<ThresholdEstimator>(inf);
    CHECK(th_inf.kept_count() == 0);
    const Estimator lin0 = fit_linear(s, ctx, th_inf.j0);

    ThresholdOptions zero;
    zero.zero_threshold = true;
    const Estimator all = fit_threshold(s, ctx, 1.0, ctx->b().family().regularity_T, zero);
    const auto& th_all = std::get<ThresholdEstimator>(all);
    CHECK(th_all.kept_count() == th_all.candidates);
    const Estimator lin1 = fit_linear(s, ctx, th_all.j1);

    double d_inf = 0.0;
    double d_all = 0.0;
    for (std::int64_t m = -5 * (1 << 6); m <= 5 * (1 << 6); ++m) {
      const double y = std::ldexp(static_cast<double>(m) + 0.37, -6);
      const double ys = std::ldexp(std::round(std::ldexp(y, 14 + lv.j0)), -(14 + lv.j0));
      d_inf = std::max(d_inf, std::abs(eval_density(inf, ys) - eval_density(lin0, ys)));
      d_all = std::max(d_all, std::abs(eval_density(all, ys) - eval_density(lin1, ys)));
    }
    CHECK(d_inf == 0.0);
    CHECK(d_all <= 1e-10);
    CHECK(std::abs(total_mass(all) - 1.0) < 1e-4);
    CHECK(std::abs(total_mass(inf) - 1.0) < 1e-4);
  }
}

TEST_CASE("kept coefficients exceed the threshold") {
  auto ctx = shared_context("haar", 14);
  const auto s = normal_sample(5000, 29);
  const auto th = fit_threshold(s, ctx, 1.0, 0);
  for (const auto& lv : th.kept_beta)
    for (double v : lv.values) CHECK(std::abs(v) > th.tau(lv.level));
  CHECK(th.j0 < th.j1);
}

TEST_CASE("cdf, derivative and functionals") {
  auto ctx = shared_context("db2", 14);
  const auto s = normal_sample(2000, 31);
  const int j = 4;
  const Estimator est = fit_linear(s, ctx, j);
  const int r = 14 + j;
  const double h = std::ldexp(1.0, -r);

  // numerical derivative of the cdf against the density
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> unif(-3.0, 3.0);
  for (int i = 0; i < 50; ++i) {
    const double y = std::ldexp(std::round(std::ldexp(unif(rng), r)), -r);
    const double d = (cdf(est, y + h) - cdf(est, y - h)) / (2 * h);
    CHECK(std::abs(d - eval_density(est, y)) < 1e-2);
  }

  // indicator functionals reproduce the cdf
  for (double sp : {-1.0, 0.0, 0.7}) {
    CHECK(std::abs(integrate_against(est, indicator_below(sp)) - cdf(est, sp)) <= 1e-12);
    // grid indicator with value 1/2 at the jump
    const double lo = -6.0;
    const auto count = static_cast<std::size_t>((sp - lo) / h) + 2;
    std::vector<double> f(count, 1.0);
    f[count - 2] = 0.5;
    f[count - 1] = 0.0;
    const DyadicTable table(r, lo, f, FunctionTag::generic);
    CHECK(std::abs(integrate_against(est, table) - cdf(est, sp)) <= 1e-6);
  }
  CHECK(std::abs(integrate_against(est, StepFunction{{}, {1.0}}) - 1.0) < 1e-4);

  // three-step BV function against cdf increments
  const StepFunction f{{-1.0, 0.5, 1.5}, {0.0, 2.0, -1.0, 0.0}};
  const double expect = 2.0 * (cdf(est, 0.5) - cdf(est, -1.0)) - (cdf(est, 1.5) - cdf(est, 0.5));
  CHECK(std::abs(integrate_against(est, f) - expect) < 1e-14);
}

TEST_CASE("haar density is nonnegative") {
  auto ctx = shared_context("haar", 14);
  const Estimator est = fit_linear(normal_sample(300, 3), ctx, 5);
  for (int m = -200; m <= 200; ++m) CHECK(eval_density(est, m * 0.0173) >= 0.0);
}

TEST_CASE("sup deviation statistic") {
  auto ctx = shared_context("db2", 14);
  const int j = 3;
  const Estimator est = fit_linear(normal_sample(500, 41), ctx, j);
  const auto grid = sup_grid(ctx->b().family(), j, -4.0, 4.0);
  const auto pts = grid.points();
  const auto self = eval_density(est, pts);
  DyadicTable ref(grid.resolution, grid.origin, self, FunctionTag::generic);
  CHECK(sup_deviation_statistic(est, ref, false) == 0.0);
  CHECK(sup_deviation_statistic(est, ref, true) == 0.0);

  std::vector<double> zero(pts.size(), 0.0);
  DyadicTable z(grid.resolution, grid.origin, zero, FunctionTag::generic);
  const double stat = sup_deviation_statistic(est, z, true);
  for (double y : {-0.5, 0.0, 0.75}) CHECK(stat >= std::abs(eval_density(est, y)) / ctx->D2 - 1e-12);
  DyadicTable coarse(j + 2, -4.0, std::vector<double>(33, 0.0), FunctionTag::generic);
  CHECK_THROWS_AS(sup_deviation_statistic(est, coarse, false), Error);

  auto haar = shared_context("haar", 14);
  const Estimator eh = fit_linear(normal_sample(500, 41), haar, j);
  const auto gh = sup_grid(haar->b().family(), j, -4.0, 4.0);
  DyadicTable zh(gh.resolution, gh.origin, std::vector<double>(gh.count, 0.1), FunctionTag::generic);
  CHECK(sup_deviation_statistic(eh, zh, true) == sup_deviation_statistic(eh, zh, false));
}

TEST_CASE("default kappa") {
  auto haar = WaveletBasis::create(build_family("haar"), 10);
  const double k = default_kappa(*haar, 1.0, 1.0, 0);
  CHECK(k <= 16.0);
  CHECK(kappa_constant(16.0, 1.0, 1.0, 1.0) >= 3.0 * 2.0 * std::log(2.0));
  const double target = 3.0 * 2.0 * std::log(2.0);
  CHECK(kappa_constant(k, 1.0, 1.0, 1.0) >= target);
  CHECK(kappa_constant(k - 1.0, 1.0, 1.0, 1.0) < target);
  CHECK(default_kappa(*haar, 2.0, 1.0, 0) > k);
  auto db3 = WaveletBasis::create(build_family("db3"), 12);
  CHECK(default_kappa(*db3, 1.0, 1.0, 2) > 0.0);
}

TEST_CASE("json round trip is lossless") {
  auto ctx = shared_context("db2", 14);
  const auto s = normal_sample(800, 51);
  const Estimator lin = fit_linear(s, ctx, 3);
  const auto doc = to_json(lin);
  const auto back = estimator_from_json(nlohmann::json::parse(doc.dump()));
  CHECK(to_json(back) == doc);
  for (double y : {-1.0, 0.1, 2.2}) CHECK(eval_density(back, y) == eval_density(lin, y));
  CHECK(estimator_hash(back) == estimator_hash(lin));

  const Estimator th = fit_threshold(s, ctx, std::numeric_limits<double>::infinity(), 1);
  const auto tdoc = to_json(th);
  CHECK(tdoc["kappa"] == "inf");
  const auto tback = estimator_from_json(nlohmann::json::parse(tdoc.dump()));
  CHECK(std::isinf(std::get<ThresholdEstimator>(tback).kappa));
  CHECK(to_json(tback) == tdoc);

  const Estimator th2 = fit_threshold(s, ctx, 0.5, 1);
  const auto t2 = estimator_from_json(nlohmann::json::parse(to_json(th2).dump()));
  for (double y : {-1.0, 0.1, 2.2}) {
    CHECK(eval_density(t2, y) == eval_density(th2, y));
    CHECK(cdf(t2, y) == cdf(th2, y));
  }

  auto bad = doc;
  bad["version"] = 99;
  try {
    estimator_from_json(bad);
    FAIL("expected version mismatch");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::version_mismatch);
  }
}
