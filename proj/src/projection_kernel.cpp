#include "wde/projection_kernel.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <string>

#include "wde/error.hpp"

namespace wde {

ContextPtr make_context(BasisPtr basis) {
  if (!basis) throw Error(ErrorKind::invalid_argument, "null basis");
  auto ctx = std::make_shared<KernelContext>();
  const int R = basis->resolution();
  const std::int64_t scale = std::int64_t{1} << R;
  const auto& phi = basis->phi_table().values;
  std::vector<double> period(static_cast<std::size_t>(scale), 0.0);
  if (basis->closed_form()) {
    std::fill(period.begin(), period.end(), 1.0);
  } else {
    // phi's table starts at an integer, so index residues mod 2^R are lattice classes.
    for (std::size_t m = 0; m < phi.size(); ++m) period[m % static_cast<std::size_t>(scale)] += phi[m] * phi[m];
  }
  ctx->norm_sq = DyadicTable(R, 0.0, std::move(period), FunctionTag::generic);
  std::tie(ctx->D1, ctx->D2) = compute_D_bounds(ctx->norm_sq);
  if (ctx->D1 <= 1e-8)
    throw Error(ErrorKind::degenerate_family, basis->family().name + " has a vanishing kernel normalizer");
  ctx->basis = std::move(basis);
  return ctx;
}

ContextPtr make_context(std::string_view family, int resolution) {
  return make_context(WaveletBasis::create(build_family(family), resolution));
}

ContextPtr shared_context(std::string_view family, int resolution) {
  static std::mutex mutex;
  static std::map<std::pair<std::string, int>, ContextPtr> cache;
  const auto name = build_family(family).name;
  std::lock_guard<std::mutex> lock(mutex);
  auto& slot = cache[{name, resolution}];
  if (!slot) slot = make_context(family, resolution);
  return slot;
}

std::pair<double, double> compute_D_bounds(const DyadicTable& norm_sq) {
  return {std::sqrt(std::max(0.0, norm_sq.min_value())), std::sqrt(norm_sq.max_value())};
}

double kernel_K(const KernelContext& ctx, double y, double x) { return kernel_Kj(ctx, 0, y, x); }

double kernel_Kj(const KernelContext& ctx, int j, double y, double x) {
  const auto& basis = ctx.b();
  const double scale = std::ldexp(1.0, j);
  if (basis.closed_form()) {
    const double cy = std::ceil(std::ldexp(y, j));
    const double cx = std::ceil(std::ldexp(x, j));
    return cy == cx ? scale : 0.0;
  }
  const std::int64_t ix = basis.snap_index(x, j);
  const std::int64_t step = std::int64_t{1} << basis.resolution();
  double s = 0.0;
  // phi_at is zero off the table, so translates outside x's range drop out
  basis.for_each_phi(y, j, [&](std::int64_t k, double v) { s += v * basis.phi_at(ix - k * step); });
  return scale * s;
}

double norm_squared(const KernelContext& ctx, double y) {
  const auto& t = ctx.norm_sq;
  const std::int64_t size = static_cast<std::int64_t>(t.size());
  std::int64_t m = ctx.b().snap_index(y, 0) % size;
  if (m < 0) m += size;
  return t.values[static_cast<std::size_t>(m)];
}

std::vector<double> GridSpec::points() const {
  std::vector<double> out(count);
  for (std::size_t m = 0; m < count; ++m) out[m] = point(m);
  return out;
}

GridSpec sup_grid(const WaveletFamily& family, int j, double lo, double hi, int max_resolution) {
  if (!(hi >= lo)) throw Error(ErrorKind::invalid_argument, "empty sup grid interval");
  const double pad = std::ldexp(static_cast<double>(family.support_phi.width()), -j);
  GridSpec g;
  g.resolution = std::min(j + 4, max_resolution);
  const double a = std::floor(std::ldexp(lo - pad, g.resolution));
  const double b = std::ceil(std::ldexp(hi + pad, g.resolution));
  g.origin = std::ldexp(a, -g.resolution);
  g.count = static_cast<std::size_t>(b - a) + 1;
  return g;
}

std::vector<double> synthesize_at(const LevelCoefficients& alpha, const WaveletBasis& basis,
                                  std::span<const double> points, Exec exec) {
  std::vector<double> out(points.size());
  const auto n = static_cast<std::int64_t>(points.size());
#pragma omp parallel for schedule(static) if (exec == Exec::parallel)
  for (std::int64_t i = 0; i < n; ++i)
    out[static_cast<std::size_t>(i)] = synthesize_alpha(alpha, basis, points[static_cast<std::size_t>(i)]);
  return out;
}

DyadicTable project_density(const KernelContext& ctx, int j, const DyadicTable& density, Exec exec) {
  std::vector<double> points(density.size());
  for (std::size_t m = 0; m < points.size(); ++m) points[m] = density.abscissa(m);
  auto values = project_density_at(ctx, j, density, points, exec);
  return DyadicTable(density.resolution, density.origin, std::move(values), FunctionTag::density, density.step);
}

std::vector<double> project_density_at(const KernelContext& ctx, int j, const DyadicTable& density,
                                       std::span<const double> points, Exec exec) {
  if (j < 0) throw Error(ErrorKind::invalid_argument, "negative level");
  const auto alpha = quadrature_alpha(density, ctx.b(), j, exec);
  return synthesize_at(alpha, ctx.b(), points, exec);
}

double project_density_direct(const KernelContext& ctx, int j, const DyadicTable& density, double y) {
  if (density.resolution < j + 4)
    throw Error(ErrorKind::resolution, "density grid too coarse for level " + std::to_string(j));
  const auto count = density.size();
  double s = 0.0;
  for (std::size_t m = 0; m < count; ++m) {
    double w = 1.0;
    if (density.step) {
      w = m == 0 ? 0.0 : 1.0;
    } else if (m == 0 || m + 1 == count) {
      w = 0.5;
    }
    const double fv = density.values[m];
    if (fv != 0.0 && w != 0.0) s += w * fv * kernel_Kj(ctx, j, y, density.abscissa(m));
  }
  return s * density.spacing();
}

}  // namespace wde
