#pragma once

#include <memory>
#include <span>
#include <vector>

#include "wde/coefficients.hpp"
#include "wde/dyadic_table.hpp"
#include "wde/execution.hpp"
#include "wde/wavelet_basis.hpp"

namespace wde {

/// Basis plus the 1-periodic normalizer y -> sum_k phi^2(y - k) and its bounds
/// D1^2 <= normalizer <= D2^2.
struct KernelContext {
  BasisPtr basis;
  DyadicTable norm_sq;  // over [0, 1), 2^R points
  double D1 = 0.0;
  double D2 = 0.0;

  const WaveletBasis& b() const { return *basis; }
};

using ContextPtr = std::shared_ptr<const KernelContext>;

/// Tabulates the normalizer and computes D1, D2. Throws degenerate_family when D1 <= 1e-8.
ContextPtr make_context(BasisPtr basis);
ContextPtr make_context(std::string_view family, int resolution = 14);
/// Process-wide cache keyed by (family, resolution); thread-safe.
ContextPtr shared_context(std::string_view family, int resolution = 14);

/// (D1, D2) from the period table.
std::pair<double, double> compute_D_bounds(const DyadicTable& norm_sq);

/// K(y, x) = sum_k phi(y - k) phi(x - k).
double kernel_K(const KernelContext& ctx, double y, double x);
/// K_j(y, x) = 2^j K(2^j y, 2^j x); both points snap at resolution R + j.
double kernel_Kj(const KernelContext& ctx, int j, double y, double x);
/// sum_k phi^2(y - k), read from the period table.
double norm_squared(const KernelContext& ctx, double y);

/// Evaluation grid for sups: covers [lo, hi] widened by (B2 - B1) 2^-j on each
/// side, spacing 2^-(j+4) (capped at max_resolution), origin on that grid.
struct GridSpec {
  double origin = 0.0;
  int resolution = 0;
  std::size_t count = 0;

  double point(std::size_t m) const { return origin + static_cast<double>(m) * std::ldexp(1.0, -resolution); }
  std::vector<double> points() const;
};
GridSpec sup_grid(const WaveletFamily& family, int j, double lo, double hi, int max_resolution = 62);

/// K_j(p0) on the density's own grid. Computed as sum_k alpha_k(p0) 2^{j/2} phi(2^j y - k)
/// with alpha_k by quadrature against the density grid, which is the same
/// quadrature of K_j(y, .) p0 with the sums reordered.
DyadicTable project_density(const KernelContext& ctx, int j, const DyadicTable& density,
                            Exec exec = Exec::parallel);
/// K_j(p0) at arbitrary points.
std::vector<double> project_density_at(const KernelContext& ctx, int j, const DyadicTable& density,
                                       std::span<const double> points, Exec exec = Exec::parallel);
/// Brute-force quadrature of K_j(y, x_m) p0(x_m) over the density grid; reference for tests.
double project_density_direct(const KernelContext& ctx, int j, const DyadicTable& density, double y);

/// Evaluates sum_k alpha_k 2^{j/2} phi(2^j y - k) at many points.
std::vector<double> synthesize_at(const LevelCoefficients& alpha, const WaveletBasis& basis,
                                  std::span<const double> points, Exec exec = Exec::parallel);

}  // namespace wde
