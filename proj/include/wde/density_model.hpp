#pragma once

#include <optional>
#include <string>

#include "wde/dyadic_table.hpp"

namespace wde {

/// Test density on a dyadic grid. Densities built from Haar pieces are step
/// tables (left-continuous, jumps on grid points); everything else is read by
/// linear interpolation.
struct DensityModel {
  DyadicTable grid;
  DyadicTable cdf_grid;
  double support_lo = 0.0;
  double support_hi = 0.0;
  double sup_norm = 0.0;
  std::optional<double> smoothness_t;  // empty means effectively infinite
  std::string description;

  double pdf(double x) const;
  double cdf(double x) const;
  int resolution() const { return grid.resolution; }
};

}  // namespace wde
