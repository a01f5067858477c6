#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "wde/coefficients.hpp"
#include "wde/density_model.hpp"
#include "wde/projection_kernel.hpp"

namespace wde {

/// Normalizes a nonnegative grid to unit mass and derives the cdf table.
DensityModel make_density_from_grid(DyadicTable grid, std::string description,
                                    std::optional<double> smoothness_t = std::nullopt);

struct MixtureComponent {
  double weight = 1.0;
  double mean = 0.0;
  double stddev = 1.0;
};

/// Mixture restricted to [min mean - radius, max mean + radius] and renormalized.
DensityModel make_gaussian_mixture(const std::vector<MixtureComponent>& components, double truncation_radius,
                                   int resolution = 14);
/// Uniform on (lo, hi] as an exact step table.
DensityModel make_uniform(double lo = 0.0, double hi = 1.0, int resolution = 14);

struct BesovOptions {
  int resolution = 14;
  double epsilon_scale = 1.0;  // 0 gives the base density
  int top_level = -1;          // default: resolution - 2 for Haar, resolution - 4 otherwise
  double plateau_half_width = 1.0;
  double ramp_width = 3.0;
};

struct BesovConstruction {
  double t = 0.0;
  std::uint64_t seed = 0;
  std::string family;
  double epsilon = 0.0;
  double base_min = 0.0;  // base density on the perturbed interval
  int L0 = 0;
  int L1 = -1;  // inclusive; L1 < L0 means no perturbation
  std::vector<LevelCoefficients> beta;  // eps 2^{-l(t+1/2)} xi_lk, levels L0..L1

  /// B^s_{inf,inf} seminorm of the perturbation: sup_l 2^{l(s+1/2)} sup_k |beta_lk|.
  double perturbation_norm(double s) const;
};

struct BesovDensity {
  DensityModel model;
  DyadicTable base;
  BesovConstruction construction;
};

/// Smooth plateau base plus eps sum_l sum_k 2^{-l(t+1/2)} xi_lk psi_lk over the
/// translates supported inside the plateau; eps keeps the perturbation at half
/// the plateau height.
BesovDensity make_besov_density(double t, std::uint64_t seed, const WaveletBasis& basis, BesovOptions options = {});

/// Smooth step used by the plateau: 0 below 0, 1 above 1, C-infinity.
double smooth_step(double u);

struct BesovNorm {
  double value = 0.0;      // truncated + tail
  double truncated = 0.0;
  double tail = 0.0;
  int top_level = 0;       // last level summed
  bool divergent = false;  // no decay observed: infinite within truncation
};

/// Definition-1 norm from coefficients at j=0 and detail levels 0..L_max
/// (capped at f.resolution - 4); p, q may be +inf.
BesovNorm besov_norm(const DyadicTable& f, const WaveletBasis& basis, double s, double p, double q, int L_max = 12);

/// Inverse-cdf sampling on the cdf grid, mt19937_64 seeded with `seed`.
Sample sample_density(const DensityModel& density, std::size_t n, std::uint64_t seed);
/// Fills `out` (resized to n, unsorted) using the given uniforms source.
void inverse_cdf(const DensityModel& density, std::span<const double> uniforms, std::vector<double>& out);

struct BiasRecord {
  int j = 0;
  double bias = 0.0;  // grid sup |K_j(p0) - p0|
};
struct BiasCurve {
  std::vector<BiasRecord> records;
  double slope = 0.0;  // least squares slope of log2 bias on j
};
BiasCurve bias_curve(const DensityModel& density, const KernelContext& ctx, int j_lo, int j_hi);

void write_density_csv(std::ostream& out, const DensityModel& density);
DensityModel read_density_csv(std::istream& in);

}  // namespace wde
