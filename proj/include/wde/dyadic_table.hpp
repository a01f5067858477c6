#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace wde {

enum class FunctionTag { phi, psi, phi_primitive, psi_primitive, density, cdf, generic };

std::string_view to_string(FunctionTag tag);

/// Samples of a function at origin + m * 2^-R, m = 0..size()-1. Outside the
/// sampled interval the function is taken to be zero (or the last value for
/// primitives and cdfs, see value_or_clamp).
///
/// `step` marks tables of left-continuous step functions whose jumps sit on
/// grid points (Haar). For those, cumulative integrals use the right-endpoint
/// rule, which is exact for such functions.
struct DyadicTable {
  int resolution = 0;
  double origin = 0.0;
  std::vector<double> values;
  FunctionTag tag = FunctionTag::generic;
  bool step = false;

  DyadicTable() = default;
  DyadicTable(int resolution, double origin, std::vector<double> values, FunctionTag tag,
              bool step = false);

  /// Grid spacing 2^-R.
  double spacing() const { return std::ldexp(1.0, -resolution); }
  std::size_t size() const { return values.size(); }
  double left() const { return origin; }
  double right() const { return origin + static_cast<double>(values.size() - 1) * spacing(); }
  double abscissa(std::size_t m) const { return origin + static_cast<double>(m) * spacing(); }

  /// Value at the grid point nearest to x; zero outside [left, right].
  double nearest(double x) const;
  /// Linear interpolation; zero left of the table, last value right of it.
  double interpolate_clamped(double x) const;
  /// Linear interpolation; zero outside [left, right].
  double interpolate(double x) const;

  /// Composite trapezoid integral over the table.
  double integral() const;
  double max_value() const;
  double min_value() const;
  double max_abs() const;
};

/// Cumulative trapezoid (or right-endpoint for step tables) integral, starting at 0.
std::vector<double> cumulative_integral(const DyadicTable& table);

/// Composite trapezoid weights times values, summed.
double trapezoid(std::span<const double> values, double spacing);

}  // namespace wde
