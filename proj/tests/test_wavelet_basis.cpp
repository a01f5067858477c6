#include <doctest.h>

#include <Eigen/Dense>

#include <cmath>
#include <numbers>

#include "wde/error.hpp"
#include "wde/wavelet_basis.hpp"

using namespace wde;

namespace {

// Newton solve of the db2 constraints: sum h = sqrt2, alternating sum 0,
// h0 h2 + h1 h3 = 0 and one extra vanishing moment.
Eigen::Vector4d db2_by_newton() {
  Eigen::Vector4d h(0.5, 0.8, 0.2, -0.1);
  for (int it = 0; it < 50; ++it) {
    Eigen::Vector4d f(h.sum() - std::numbers::sqrt2, h(0) - h(1) + h(2) - h(3),
                      h(0) * h(2) + h(1) * h(3), -h(1) + 2 * h(2) - 3 * h(3));
    Eigen::Matrix4d jac;
    jac << 1, 1, 1, 1, 1, -1, 1, -1, h(2), h(3), h(0), h(1), 0, -1, 2, -3;
    h -= jac.partialPivLu().solve(f);
    if (f.norm() < 1e-15) break;
  }
  return h;
}

}  // namespace

TEST_CASE("haar family") {
  const auto haar = build_family("haar");
  REQUIRE(haar.filter.size() == 2);
  CHECK(haar.filter[0] == doctest::Approx(1.0 / std::numbers::sqrt2).epsilon(1e-15));
  CHECK(haar.filter[1] == doctest::Approx(1.0 / std::numbers::sqrt2).epsilon(1e-15));
  CHECK(haar.support_phi.lo == 0);
  CHECK(haar.support_phi.hi == 1);
  CHECK(haar.vanishing_moments == 1);
  CHECK(haar.regularity_T == 0);
}

TEST_CASE("db2 filter matches the constraint solve") {
  const auto db2 = build_family("db2");
  const auto oracle = db2_by_newton();
  REQUIRE(db2.filter.size() == 4);
  for (int k = 0; k < 4; ++k) CHECK(std::abs(db2.filter[static_cast<std::size_t>(k)] - oracle(k)) < 1e-12);
  CHECK(db2.support_phi.hi - db2.support_phi.lo == 3);
  CHECK(db2.support_psi.lo == -1);
  CHECK(db2.support_psi.hi == 2);
}

TEST_CASE("filter invariants for every supported family") {
  for (const auto& name : supported_families()) {
    CAPTURE(name);
    const auto fam = build_family(name);
    const auto d = filter_defects(fam);
    CHECK(d.sum <= 1e-12);
    CHECK(d.orthonormality <= 1e-12);
    CHECK(fam.support_phi.width() == static_cast<int>(fam.filter.size()) - 1);
  }
}

TEST_CASE("unknown family") {
  CHECK_THROWS_AS(build_family("sym4"), Error);
  CHECK_THROWS_AS(build_family("db"), Error);
  CHECK_THROWS_AS(build_family("db99"), Error);
  try {
    build_family("coif2");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::unsupported_family);
  }
}

TEST_CASE("haar tables") {
  const auto fam = build_family("haar");
  const auto phi = tabulate_phi(fam, 4);
  CHECK(phi.size() == 17);
  CHECK(phi.nearest(0.5) == 1.0);
  CHECK(phi.nearest(0.0) == 0.0);
  CHECK(phi.nearest(1.0) == 1.0);
  const auto psi = tabulate_psi(fam, 4);
  CHECK(psi.nearest(0.25) == 1.0);
  CHECK(psi.nearest(0.75) == -1.0);
  CHECK(psi.nearest(0.5) == 1.0);
  CHECK(psi.nearest(1.0) == -1.0);
  CHECK(psi.nearest(0.0) == 0.0);

  const auto iphi = tabulate_primitive(phi);
  const auto ipsi = tabulate_primitive(psi);
  CHECK(iphi.interpolate_clamped(0.5) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(ipsi.interpolate_clamped(0.5) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(std::abs(ipsi.interpolate_clamped(1.0)) < 1e-15);
  CHECK(iphi.values.front() == 0.0);
  CHECK(ipsi.values.front() == 0.0);

  auto basis = WaveletBasis::create(fam, 4);
  CHECK(basis->phi(0.0) == 0.0);
  CHECK(basis->phi(1.0) == 1.0);
  CHECK(basis->psi(0.5) == 1.0);
  CHECK(basis->psi(0.50001) == -1.0);
  CHECK(basis->phi_integral(0.3) == doctest::Approx(0.3));
  CHECK(basis->psi_integral(0.75) == doctest::Approx(0.25));
  CHECK(basis->psi_l2_norm() == 1.0);
  CHECK(basis->psi_sup_norm() == 1.0);
  CHECK(check_orthonormality(*basis) == 0.0);
}

TEST_CASE("db2 at R=14") {
  const auto fam = build_family("db2");
  auto basis = WaveletBasis::create(fam, 14);
  const auto& phi = basis->phi_table();
  CHECK(phi.size() == 3 * (1u << 14) + 1);
  double riemann = 0.0;
  for (double v : phi.values) riemann += v;
  CHECK(std::abs(riemann * phi.spacing() - 1.0) < 1e-6);
  CHECK(std::abs(basis->phi_primitive_table().values.back() - 1.0) < 1e-6);
  CHECK(check_orthonormality(*basis) <= 1e-5);
  CHECK(refinement_residual(*basis) <= 1e-8);
  CHECK(std::abs(psi_moment(*basis, 0)) <= 1e-8);
  CHECK(std::abs(psi_moment(*basis, 1)) <= 1e-5);
  CHECK(basis->cascade_iterations() <= 60);
}

TEST_CASE("db3 first moment") {
  auto basis = WaveletBasis::create(build_family("db3"), 14);
  CHECK(std::abs(psi_moment(*basis, 1)) <= 1e-6);
  CHECK(std::abs(psi_moment(*basis, 0)) <= 1e-8);
}

TEST_CASE("db4 diagnostics") {
  auto basis = WaveletBasis::create(build_family("db4"), 14);
  const auto d = diagnose(*basis);
  CHECK(d.orthonormality <= 1e-4);
  CHECK(d.partition_of_unity <= 1e-3);
  CHECK(d.refinement_residual <= 1e-8);
  for (double m : d.psi_moments) CHECK(std::abs(m) <= 1e-5);
}

TEST_CASE("primitive derivative matches base table") {
  auto basis = WaveletBasis::create(build_family("db3"), 12);
  const auto& prim = basis->psi_primitive_table();
  const auto& psi = basis->psi_table();
  const double h = psi.spacing();
  double worst = 0.0;
  for (std::size_t m = 1; m + 1 < prim.size(); ++m) {
    const double deriv = (prim.values[m + 1] - prim.values[m - 1]) / (2.0 * h);
    worst = std::max(worst, std::abs(deriv - psi.values[m]));
  }
  CHECK(worst < 0.05);
}

TEST_CASE("grid index lookups agree with snapped evaluation") {
  auto basis = WaveletBasis::create(build_family("db2"), 10);
  for (std::int64_t idx = -100; idx < 4000; idx += 37) {
    const double u = std::ldexp(static_cast<double>(idx), -10);
    CHECK(basis->phi_at(idx) == basis->phi(u));
    CHECK(basis->psi_at(idx) == basis->psi(u));
  }
}

TEST_CASE("cascade is deterministic") {
  const auto fam = build_family("db3");
  const auto a = tabulate_phi(fam, 10);
  const auto b = tabulate_phi(fam, 10);
  CHECK(a.values == b.values);
}

TEST_CASE("cascade iteration cap") {
  CascadeOptions opts;
  opts.max_iterations = 3;
  CHECK_THROWS_AS(run_cascade(build_family("db4"), 10, opts), Error);
}
