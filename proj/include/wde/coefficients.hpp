#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "wde/density_model.hpp"
#include "wde/execution.hpp"
#include "wde/wavelet_basis.hpp"

namespace wde {

struct Sample {
  std::vector<double> observations;  // sorted ascending
  std::string seed_provenance;

  std::size_t n() const { return observations.size(); }
};

/// Sorts, rejects empty input and non-finite values.
Sample make_sample(std::vector<double> values, std::string provenance = {});

/// Coefficients of one level stored densely over the computed key range
/// [first, first + size). Keys outside the range are zero.
struct LevelCoefficients {
  int level = 0;
  std::int64_t first = 0;
  std::vector<double> values;

  double at(std::int64_t k) const {
    const std::int64_t m = k - first;
    if (m < 0 || m >= static_cast<std::int64_t>(values.size())) return 0.0;
    return values[static_cast<std::size_t>(m)];
  }
  std::int64_t last() const { return first + static_cast<std::int64_t>(values.size()) - 1; }
  std::size_t nonzero_count() const;
  double max_abs() const;
};

/// Surviving detail coefficients of one level.
struct SparseLevel {
  int level = 0;
  std::vector<std::int64_t> keys;  // ascending
  std::vector<double> values;

  std::size_t size() const { return keys.size(); }
};

enum class CoefficientKind { empirical, exact };

struct CoefficientSet {
  std::string family;
  int j0 = 0;
  int j1 = 0;  // exclusive
  LevelCoefficients alpha;
  std::vector<LevelCoefficients> beta;  // levels j0 .. j1-1
  CoefficientKind kind = CoefficientKind::empirical;
};

/// Largest dense key range a single level may allocate.
inline constexpr std::int64_t kMaxLevelKeys = std::int64_t{1} << 26;

/// Sample means of 2^{j/2} phi(2^j X - k) and 2^{l/2} psi(2^l X - k).
LevelCoefficients empirical_alpha(const Sample& sample, const WaveletBasis& basis, int j,
                                  Exec exec = Exec::serial);
LevelCoefficients empirical_beta(const Sample& sample, const WaveletBasis& basis, int l,
                                 Exec exec = Exec::serial);
CoefficientSet empirical_coefficients(const Sample& sample, const WaveletBasis& basis, int j0, int j1,
                                      Exec exec = Exec::serial);

/// int f(x) 2^{j/2} phi(2^j x - k) dx by quadrature on f's own grid (trapezoid,
/// or right-endpoint for step tables). Needs f.resolution >= j + 4.
LevelCoefficients quadrature_alpha(const DyadicTable& f, const WaveletBasis& basis, int j,
                                   Exec exec = Exec::serial);
LevelCoefficients quadrature_beta(const DyadicTable& f, const WaveletBasis& basis, int l,
                                  Exec exec = Exec::serial);
CoefficientSet exact_coefficients(const DensityModel& density, const WaveletBasis& basis, int j0, int j1,
                                  Exec exec = Exec::serial);

/// sum_k alpha_k 2^{j/2} phi(2^j y - k) and the psi analogue.
double synthesize_alpha(const LevelCoefficients& alpha, const WaveletBasis& basis, double y);
double synthesize_beta(const LevelCoefficients& beta, const WaveletBasis& basis, double y);

struct DeviationRecord {
  int level = 0;
  double alpha_sup = 0.0;  // sup_k |alpha_hat - alpha| at this level
  double beta_sup = 0.0;   // sup_k |beta_hat - beta|
};

/// Sup deviations over the union of stored keys, one record per level.
std::vector<DeviationRecord> deviation_stats(const Sample& sample, const DensityModel& density,
                                             const WaveletBasis& basis, std::span<const int> levels);
double sup_difference(const LevelCoefficients& a, const LevelCoefficients& b);

}  // namespace wde
