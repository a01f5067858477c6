#pragma once

#include <cmath>
#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "wde/dyadic_table.hpp"

namespace wde {

struct IntegerInterval {
  int lo = 0;
  int hi = 0;
  int width() const { return hi - lo; }
};

/// Compactly supported orthonormal father/mother wavelet pair given by its
/// refinement filter h_0..h_{N-1}.
struct WaveletFamily {
  std::string name;
  std::vector<double> filter;
  IntegerInterval support_phi;
  IntegerInterval support_psi;
  int regularity_T = 0;
  int vanishing_moments = 0;

  bool is_haar() const { return name == "haar"; }
};

/// "haar" or "db2" .. "db10". Daubechies filters are computed, not stored.
WaveletFamily build_family(std::string_view name);
std::vector<std::string> supported_families();

/// Deviation of sum(h) from sqrt(2) and max |sum_k h_k h_{k+2m} - delta_0m|.
struct FilterDefects {
  double sum = 0.0;
  double orthonormality = 0.0;
};
FilterDefects filter_defects(const WaveletFamily& family);

struct CascadeOptions {
  int max_iterations = 60;
  double tolerance = 1e-10;
};

struct CascadeResult {
  DyadicTable table;
  int iterations = 0;
  double last_difference = 0.0;
};

/// phi on [B1, B2] at spacing 2^-R. Haar is the exact indicator of (0,1];
/// Daubechies tables come from the grid cascade started at that indicator.
CascadeResult run_cascade(const WaveletFamily& family, int resolution, CascadeOptions options = {});
DyadicTable tabulate_phi(const WaveletFamily& family, int resolution, CascadeOptions options = {});
/// psi from a phi table via g_k = (-1)^k h_{1-k}.
DyadicTable tabulate_psi(const WaveletFamily& family, const DyadicTable& phi);
DyadicTable tabulate_psi(const WaveletFamily& family, int resolution, CascadeOptions options = {});
DyadicTable tabulate_primitive(const DyadicTable& table);

/// Immutable bundle of tables for one family at one resolution; shared by
/// kernels, estimators and experiments.
class WaveletBasis {
public:
  static std::shared_ptr<const WaveletBasis> create(const WaveletFamily& family, int resolution,
                                                    CascadeOptions options = {});

  const WaveletFamily& family() const { return family_; }
  int resolution() const { return resolution_; }
  /// Haar is evaluated in closed form; every other family by grid snap.
  bool closed_form() const { return family_.is_haar(); }

  const DyadicTable& phi_table() const { return phi_; }
  const DyadicTable& psi_table() const { return psi_; }
  const DyadicTable& phi_primitive_table() const { return phi_primitive_; }
  const DyadicTable& psi_primitive_table() const { return psi_primitive_; }

  double phi(double u) const;
  double psi(double u) const;
  /// int_{-inf}^u phi and int_{-inf}^u psi.
  double phi_integral(double u) const;
  double psi_integral(double u) const;

  /// Values at u = index * 2^-R (exact table lookups, no rounding).
  double phi_at(std::int64_t grid_index) const;
  double psi_at(std::int64_t grid_index) const;

  /// Nearest table index of 2^level * x, i.e. x snapped to spacing 2^-(R+level).
  std::int64_t snap_index(double x, int level) const {
    return std::llround(std::ldexp(x, resolution_ + level));
  }

  /// Calls f(k, phi(2^level x - k)) for every translate k whose support meets
  /// 2^level x. Haar is exact; other families snap x with snap_index.
  template <class F>
  void for_each_phi(double x, int level, F&& f) const {
    if (closed_form()) {
      f(static_cast<std::int64_t>(std::ceil(std::ldexp(x, level))) - 1, 1.0);
      return;
    }
    const std::int64_t idx = snap_index(x, level);
    const std::int64_t scale = std::int64_t{1} << resolution_;
    const std::int64_t hi = floor_div(idx - phi_offset_, scale);
    const std::int64_t lo = hi - family_.support_phi.width();
    for (std::int64_t k = lo; k <= hi; ++k) f(k, phi_at(idx - k * scale));
  }

  template <class F>
  void for_each_psi(double x, int level, F&& f) const {
    if (closed_form()) {
      const double u = std::ldexp(x, level);
      const double cell = std::ceil(u) - 1.0;
      f(static_cast<std::int64_t>(cell), (u - cell <= 0.5) ? 1.0 : -1.0);
      return;
    }
    const std::int64_t idx = snap_index(x, level);
    const std::int64_t scale = std::int64_t{1} << resolution_;
    const std::int64_t hi = floor_div(idx - psi_offset_, scale);
    const std::int64_t lo = hi - family_.support_psi.width();
    for (std::int64_t k = lo; k <= hi; ++k) f(k, psi_at(idx - k * scale));
  }

  /// Translates k touched by for_each_phi at x, as [lo, hi].
  std::pair<std::int64_t, std::int64_t> phi_keys(double x, int level) const;
  std::pair<std::int64_t, std::int64_t> psi_keys(double x, int level) const;

  static std::int64_t floor_div(std::int64_t a, std::int64_t b) {
    const std::int64_t q = a / b;
    return (a % b != 0 && ((a < 0) != (b < 0))) ? q - 1 : q;
  }

  double phi_sup_norm() const { return phi_sup_; }
  double psi_sup_norm() const { return psi_sup_; }
  double psi_l2_norm() const { return psi_l2_; }
  int cascade_iterations() const { return cascade_iterations_; }

private:
  WaveletBasis() = default;

  WaveletFamily family_;
  int resolution_ = 0;
  DyadicTable phi_;
  DyadicTable psi_;
  DyadicTable phi_primitive_;
  DyadicTable psi_primitive_;
  std::int64_t phi_offset_ = 0;
  std::int64_t psi_offset_ = 0;
  double phi_sup_ = 0.0;
  double psi_sup_ = 0.0;
  double psi_l2_ = 0.0;
  int cascade_iterations_ = 0;
};

using BasisPtr = std::shared_ptr<const WaveletBasis>;

/// Report from the grid-quadrature diagnostics of a basis.
struct BasisDiagnostics {
  std::string family;
  int resolution = 0;
  FilterDefects filter;
  double orthonormality = 0.0;       // max_k |<phi, phi(.-k)> - delta_0k|
  double partition_of_unity = 0.0;   // max_x |sum_k phi(x-k) - 1|
  double refinement_residual = 0.0;  // max_x |phi(x) - sqrt2 sum h_k phi(2x-k)|
  double phi_integral = 0.0;
  double psi_integral = 0.0;
  std::vector<double> psi_moments;  // int x^i psi, i < vanishing_moments
  int cascade_iterations = 0;
};

double check_orthonormality(const WaveletBasis& basis);
double check_orthonormality(const WaveletFamily& family, int resolution);
double partition_of_unity_defect(const WaveletBasis& basis);
double refinement_residual(const WaveletBasis& basis);
/// int x^i psi(x) dx by trapezoid on the psi table.
double psi_moment(const WaveletBasis& basis, int order);
BasisDiagnostics diagnose(const WaveletBasis& basis);

}  // namespace wde
