#include "wde/wavelet_basis.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <complex>
#include <numbers>

#include "wde/error.hpp"

namespace wde {

namespace {

constexpr int kMaxDaubechies = 10;

double binomial(int n, int k) {
  double r = 1.0;
  for (int i = 1; i <= k; ++i) r = r * static_cast<double>(n - k + i) / static_cast<double>(i);
  return r;
}

using Complex = std::complex<long double>;
using Poly = std::vector<Complex>;  // increasing powers

Poly multiply(const Poly& a, const Poly& b) {
  Poly out(a.size() + b.size() - 1, 0.0);
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < b.size(); ++j) out[i + j] += a[i] * b[j];
  return out;
}

// Spectral factorisation of |m0|^2 = cos^{2K}(w/2) P(sin^2(w/2)),
// P(y) = sum_{k<K} C(K-1+k, k) y^k.
std::vector<double> daubechies_filter(int K) {
  Poly q{1.0L};
  if (K > 1) {
    const int degree = K - 1;
    std::vector<double> coeff(static_cast<std::size_t>(K));
    for (int k = 0; k < K; ++k) coeff[static_cast<std::size_t>(k)] = binomial(K - 1 + k, k);
    Eigen::MatrixXd companion = Eigen::MatrixXd::Zero(degree, degree);
    for (int i = 0; i < degree; ++i) {
      companion(0, i) = -coeff[static_cast<std::size_t>(degree - 1 - i)] /
                        coeff[static_cast<std::size_t>(degree)];
      if (i + 1 < degree) companion(i + 1, i) = 1.0;
    }
    const Eigen::VectorXcd roots = companion.eigenvalues();
    for (Eigen::Index r = 0; r < roots.size(); ++r) {
      // The eigen-solver loses a few digits for K near 10; polish in long double.
      Complex y(roots(r).real(), roots(r).imag());
      for (int it = 0; it < 8; ++it) {
        Complex p = 0.0L;
        Complex dp = 0.0L;
        for (int k = degree; k >= 0; --k) {
          dp = dp * y + p;
          p = p * y + static_cast<long double>(coeff[static_cast<std::size_t>(k)]);
        }
        if (std::abs(dp) == 0.0L) break;
        y -= p / dp;
      }
      // y = (2 - z - 1/z) / 4  <=>  z^2 - (2 - 4y) z + 1 = 0; keep the root outside
      // the unit circle, which yields the conventional ordering (largest taps first).
      const Complex b = 2.0L - 4.0L * y;
      const Complex disc = std::sqrt(b * b - 4.0L);
      Complex z = 0.5L * (b + disc);
      if (std::abs(z) < 1.0L) z = 0.5L * (b - disc);
      q = multiply(q, Poly{-z, 1.0L});
    }
  }
  Poly h{1.0L};
  for (int k = 0; k < K; ++k) h = multiply(h, Poly{0.5L, 0.5L});
  h = multiply(h, q);
  Complex at_one = 0.0L;
  for (const auto& c : q) at_one += c;
  std::vector<double> filter(h.size());
  for (std::size_t k = 0; k < h.size(); ++k)
    filter[k] = static_cast<double>(std::numbers::sqrt2_v<long double> * (h[k] / at_one).real());
  return filter;
}

}  // namespace

std::vector<std::string> supported_families() {
  std::vector<std::string> out{"haar"};
  for (int k = 2; k <= kMaxDaubechies; ++k) out.push_back("db" + std::to_string(k));
  return out;
}

WaveletFamily build_family(std::string_view name) {
  WaveletFamily family;
  family.name = std::string(name);
  if (name == "haar" || name == "db1") {
    family.name = "haar";
    family.filter = {std::numbers::sqrt2 / 2.0, std::numbers::sqrt2 / 2.0};
    family.support_phi = {0, 1};
    family.support_psi = {0, 1};
    family.regularity_T = 0;
    family.vanishing_moments = 1;
    return family;
  }
  int order = 0;
  if (name.size() > 2 && name.substr(0, 2) == "db") {
    const auto digits = name.substr(2);
    const auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), order);
    if (ec != std::errc() || ptr != digits.data() + digits.size()) order = 0;
  }
  if (order < 2 || order > kMaxDaubechies)
    throw Error(ErrorKind::unsupported_family, "unknown wavelet family '" + std::string(name) + "'");
  family.filter = daubechies_filter(order);
  const int n = static_cast<int>(family.filter.size());
  family.support_phi = {0, n - 1};
  family.support_psi = {1 - n / 2, n / 2};
  family.regularity_T = order - 1;
  family.vanishing_moments = order;
  return family;
}

FilterDefects filter_defects(const WaveletFamily& family) {
  FilterDefects d;
  double sum = 0.0;
  for (double h : family.filter) sum += h;
  d.sum = std::abs(sum - std::numbers::sqrt2);
  const auto n = static_cast<int>(family.filter.size());
  for (int m = 0; 2 * m < n; ++m) {
    double s = 0.0;
    for (int k = 0; k + 2 * m < n; ++k)
      s += family.filter[static_cast<std::size_t>(k)] * family.filter[static_cast<std::size_t>(k + 2 * m)];
    d.orthonormality = std::max(d.orthonormality, std::abs(s - (m == 0 ? 1.0 : 0.0)));
  }
  return d;
}

CascadeResult run_cascade(const WaveletFamily& family, int resolution, CascadeOptions options) {
  if (resolution < 1) throw Error(ErrorKind::invalid_argument, "cascade needs resolution >= 1");
  const std::int64_t scale = std::int64_t{1} << resolution;
  const auto width = static_cast<std::int64_t>(family.support_phi.width());
  const std::int64_t count = width * scale + 1;

  std::vector<double> current(static_cast<std::size_t>(count), 0.0);
  for (std::int64_t m = 1; m <= scale && m < count; ++m) current[static_cast<std::size_t>(m)] = 1.0;

  CascadeResult result;
  if (family.is_haar()) {
    result.table = DyadicTable(resolution, 0.0, std::move(current), FunctionTag::phi, true);
    return result;
  }

  std::vector<double> taps(family.filter);
  for (double& t : taps) t *= std::numbers::sqrt2;
  std::vector<double> next(current.size());
  for (int it = 1; it <= options.max_iterations; ++it) {
    double diff = 0.0;
    for (std::int64_t m = 0; m < count; ++m) {
      double v = 0.0;
      for (std::size_t k = 0; k < taps.size(); ++k) {
        const std::int64_t idx = 2 * m - static_cast<std::int64_t>(k) * scale;
        if (idx >= 0 && idx < count) v += taps[k] * current[static_cast<std::size_t>(idx)];
      }
      next[static_cast<std::size_t>(m)] = v;
      diff = std::max(diff, std::abs(v - current[static_cast<std::size_t>(m)]));
    }
    current.swap(next);
    result.iterations = it;
    result.last_difference = diff;
    if (diff <= options.tolerance) {
      result.table = DyadicTable(resolution, family.support_phi.lo, std::move(current), FunctionTag::phi);
      return result;
    }
  }
  throw Error(ErrorKind::numerical_failure,
              "cascade for " + family.name + " did not converge in " +
                  std::to_string(options.max_iterations) + " iterations");
}

DyadicTable tabulate_phi(const WaveletFamily& family, int resolution, CascadeOptions options) {
  return run_cascade(family, resolution, options).table;
}

DyadicTable tabulate_psi(const WaveletFamily& family, const DyadicTable& phi) {
  const int resolution = phi.resolution;
  const std::int64_t scale = std::int64_t{1} << resolution;
  const std::int64_t lo_index = static_cast<std::int64_t>(family.support_psi.lo) * scale;
  const std::int64_t count = static_cast<std::int64_t>(family.support_psi.width()) * scale + 1;
  const auto phi_count = static_cast<std::int64_t>(phi.size());
  const auto n = static_cast<int>(family.filter.size());

  std::vector<double> values(static_cast<std::size_t>(count), 0.0);
  if (family.is_haar()) {
    for (std::int64_t m = 1; m < count; ++m) values[static_cast<std::size_t>(m)] = 2 * m <= count - 1 ? 1.0 : -1.0;
    return DyadicTable(resolution, 0.0, std::move(values), FunctionTag::psi, true);
  }
  for (std::int64_t m = 0; m < count; ++m) {
    // x = (lo_index + m) / scale; phi(2x - k) sits at index 2(lo_index + m) - k * scale.
    double v = 0.0;
    for (int k = 2 - n; k <= 1; ++k) {
      const double g = ((k % 2 == 0) ? 1.0 : -1.0) * family.filter[static_cast<std::size_t>(1 - k)];
      const std::int64_t idx = 2 * (lo_index + m) - static_cast<std::int64_t>(k) * scale;
      if (idx >= 0 && idx < phi_count) v += g * phi.values[static_cast<std::size_t>(idx)];
    }
    values[static_cast<std::size_t>(m)] = std::numbers::sqrt2 * v;
  }
  return DyadicTable(resolution, family.support_psi.lo, std::move(values), FunctionTag::psi, phi.step);
}

DyadicTable tabulate_psi(const WaveletFamily& family, int resolution, CascadeOptions options) {
  return tabulate_psi(family, tabulate_phi(family, resolution, options));
}

DyadicTable tabulate_primitive(const DyadicTable& table) {
  FunctionTag tag;
  if (table.tag == FunctionTag::phi) {
    tag = FunctionTag::phi_primitive;
  } else if (table.tag == FunctionTag::psi) {
    tag = FunctionTag::psi_primitive;
  } else {
    throw Error(ErrorKind::invalid_argument,
                "primitive requested for a " + std::string(to_string(table.tag)) + " table");
  }
  return DyadicTable(table.resolution, table.origin, cumulative_integral(table), tag, false);
}

std::shared_ptr<const WaveletBasis> WaveletBasis::create(const WaveletFamily& family, int resolution,
                                                         CascadeOptions options) {
  auto basis = std::shared_ptr<WaveletBasis>(new WaveletBasis());
  basis->family_ = family;
  basis->resolution_ = resolution;
  auto cascade = run_cascade(family, resolution, options);
  basis->cascade_iterations_ = cascade.iterations;
  basis->phi_ = std::move(cascade.table);
  basis->psi_ = tabulate_psi(family, basis->phi_);
  basis->phi_primitive_ = tabulate_primitive(basis->phi_);
  basis->psi_primitive_ = tabulate_primitive(basis->psi_);
  const std::int64_t scale = std::int64_t{1} << resolution;
  basis->phi_offset_ = static_cast<std::int64_t>(family.support_phi.lo) * scale;
  basis->psi_offset_ = static_cast<std::int64_t>(family.support_psi.lo) * scale;
  basis->phi_sup_ = basis->phi_.max_abs();
  basis->psi_sup_ = basis->psi_.max_abs();
  DyadicTable squared = basis->psi_;
  for (double& v : squared.values) v *= v;
  basis->psi_l2_ = std::sqrt(squared.integral());
  return basis;
}

double WaveletBasis::phi(double u) const {
  if (closed_form()) return (u > 0.0 && u <= 1.0) ? 1.0 : 0.0;
  return phi_.nearest(u);
}

double WaveletBasis::psi(double u) const {
  if (closed_form()) {
    if (u > 0.0 && u <= 0.5) return 1.0;
    if (u > 0.5 && u <= 1.0) return -1.0;
    return 0.0;
  }
  return psi_.nearest(u);
}

double WaveletBasis::phi_integral(double u) const {
  if (closed_form()) return std::clamp(u, 0.0, 1.0);
  return phi_primitive_.interpolate_clamped(u);
}

double WaveletBasis::psi_integral(double u) const {
  if (closed_form()) {
    if (u <= 0.0 || u >= 1.0) return 0.0;
    return u <= 0.5 ? u : 1.0 - u;
  }
  return psi_primitive_.interpolate_clamped(u);
}

double WaveletBasis::phi_at(std::int64_t grid_index) const {
  const std::int64_t m = grid_index - phi_offset_;
  if (m < 0 || m >= static_cast<std::int64_t>(phi_.size())) return 0.0;
  return phi_.values[static_cast<std::size_t>(m)];
}

double WaveletBasis::psi_at(std::int64_t grid_index) const {
  const std::int64_t m = grid_index - psi_offset_;
  if (m < 0 || m >= static_cast<std::int64_t>(psi_.size())) return 0.0;
  return psi_.values[static_cast<std::size_t>(m)];
}

std::pair<std::int64_t, std::int64_t> WaveletBasis::phi_keys(double x, int level) const {
  std::int64_t lo = 0;
  std::int64_t hi = -1;
  for_each_phi(x, level, [&](std::int64_t k, double) {
    if (hi < lo) lo = k;
    hi = k;
  });
  return {lo, hi};
}

std::pair<std::int64_t, std::int64_t> WaveletBasis::psi_keys(double x, int level) const {
  std::int64_t lo = 0;
  std::int64_t hi = -1;
  for_each_psi(x, level, [&](std::int64_t k, double) {
    if (hi < lo) lo = k;
    hi = k;
  });
  return {lo, hi};
}

namespace {

// Quadrature of a(x) b(x - shift) with both tables on the same grid.
double shifted_inner_product(const DyadicTable& a, const DyadicTable& b, std::int64_t shift_index) {
  const auto na = static_cast<std::int64_t>(a.size());
  const auto nb = static_cast<std::int64_t>(b.size());
  const std::int64_t offset =
      std::llround(std::ldexp(a.origin - b.origin, a.resolution)) - shift_index;
  std::vector<double> product(static_cast<std::size_t>(na), 0.0);
  for (std::int64_t m = 0; m < na; ++m) {
    const std::int64_t mb = m + offset;
    if (mb >= 0 && mb < nb)
      product[static_cast<std::size_t>(m)] = a.values[static_cast<std::size_t>(m)] * b.values[static_cast<std::size_t>(mb)];
  }
  DyadicTable t(a.resolution, a.origin, std::move(product), FunctionTag::generic, a.step || b.step);
  return t.integral();
}

}  // namespace

double check_orthonormality(const WaveletBasis& basis) {
  const auto& phi = basis.phi_table();
  const std::int64_t scale = std::int64_t{1} << basis.resolution();
  double worst = 0.0;
  for (int k = 0; k <= basis.family().support_phi.width(); ++k) {
    const double ip = shifted_inner_product(phi, phi, k * scale);
    worst = std::max(worst, std::abs(ip - (k == 0 ? 1.0 : 0.0)));
  }
  return worst;
}

double check_orthonormality(const WaveletFamily& family, int resolution) {
  return check_orthonormality(*WaveletBasis::create(family, resolution));
}

double partition_of_unity_defect(const WaveletBasis& basis) {
  const auto& phi = basis.phi_table().values;
  const std::int64_t scale = std::int64_t{1} << basis.resolution();
  const auto count = static_cast<std::int64_t>(phi.size());
  double worst = 0.0;
  for (std::int64_t m = 0; m < scale; ++m) {
    double s = 0.0;
    for (std::int64_t idx = m; idx < count; idx += scale) s += phi[static_cast<std::size_t>(idx)];
    worst = std::max(worst, std::abs(s - 1.0));
  }
  return worst;
}

double refinement_residual(const WaveletBasis& basis) {
  const auto& phi = basis.phi_table().values;
  const auto& h = basis.family().filter;
  const std::int64_t scale = std::int64_t{1} << basis.resolution();
  const auto count = static_cast<std::int64_t>(phi.size());
  double worst = 0.0;
  for (std::int64_t m = 0; m < count; ++m) {
    double v = 0.0;
    for (std::size_t k = 0; k < h.size(); ++k) {
      const std::int64_t idx = 2 * m - static_cast<std::int64_t>(k) * scale;
      if (idx >= 0 && idx < count) v += h[k] * phi[static_cast<std::size_t>(idx)];
    }
    worst = std::max(worst, std::abs(phi[static_cast<std::size_t>(m)] - std::numbers::sqrt2 * v));
  }
  return worst;
}

double psi_moment(const WaveletBasis& basis, int order) {
  DyadicTable t = basis.psi_table();
  for (std::size_t m = 0; m < t.size(); ++m) t.values[m] *= std::pow(t.abscissa(m), order);
  return t.integral();
}

BasisDiagnostics diagnose(const WaveletBasis& basis) {
  BasisDiagnostics d;
  d.family = basis.family().name;
  d.resolution = basis.resolution();
  d.filter = filter_defects(basis.family());
  d.orthonormality = check_orthonormality(basis);
  d.partition_of_unity = partition_of_unity_defect(basis);
  d.refinement_residual = refinement_residual(basis);
  d.phi_integral = basis.phi_table().integral();
  d.psi_integral = basis.psi_table().integral();
  for (int i = 0; i < basis.family().vanishing_moments; ++i) d.psi_moments.push_back(psi_moment(basis, i));
  d.cascade_iterations = basis.cascade_iterations();
  return d;
}

}  // namespace wde
