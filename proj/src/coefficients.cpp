#include "wde/coefficients.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

#include "wde/error.hpp"

namespace wde {

namespace {

constexpr std::size_t kChunk = 4096;

void check_range(std::int64_t first, std::int64_t last, int level) {
  if (last - first + 1 > kMaxLevelKeys)
    throw Error(ErrorKind::resolution, "level " + std::to_string(level) + " needs " +
                                           std::to_string(last - first + 1) + " keys; data range too wide");
}

template <bool Psi, class F>
void for_each_translate(const WaveletBasis& basis, double x, int level, F&& f) {
  if constexpr (Psi) {
    basis.for_each_psi(x, level, f);
  } else {
    basis.for_each_phi(x, level, f);
  }
}

template <bool Psi>
std::pair<std::int64_t, std::int64_t> keys(const WaveletBasis& basis, double x, int level) {
  return Psi ? basis.psi_keys(x, level) : basis.phi_keys(x, level);
}

template <bool Psi>
LevelCoefficients empirical_level(const Sample& sample, const WaveletBasis& basis, int level, Exec exec) {
  if (level < 0) throw Error(ErrorKind::invalid_argument, "negative level");
  if (sample.n() == 0) throw Error(ErrorKind::invalid_argument, "empty sample");
  const auto& obs = sample.observations;
  LevelCoefficients out;
  out.level = level;
  out.first = keys<Psi>(basis, obs.front(), level).first;
  const std::int64_t last = keys<Psi>(basis, obs.back(), level).second;
  check_range(out.first, last, level);
  out.values.assign(static_cast<std::size_t>(last - out.first + 1), 0.0);

  if (exec == Exec::serial || obs.size() <= kChunk) {
    for (double x : obs)
      for_each_translate<Psi>(basis, x, level, [&](std::int64_t k, double v) {
        out.values[static_cast<std::size_t>(k - out.first)] += v;
      });
  } else {
    // Sorted data: each chunk touches a contiguous key range of its own.
    const std::size_t chunks = (obs.size() + kChunk - 1) / kChunk;
    std::vector<LevelCoefficients> partial(chunks);
#pragma omp parallel for schedule(static)
    for (std::size_t c = 0; c < chunks; ++c) {
      const std::size_t begin = c * kChunk;
      const std::size_t end = std::min(obs.size(), begin + kChunk);
      auto& p = partial[c];
      p.first = keys<Psi>(basis, obs[begin], level).first;
      p.values.assign(static_cast<std::size_t>(keys<Psi>(basis, obs[end - 1], level).second - p.first + 1), 0.0);
      for (std::size_t i = begin; i < end; ++i)
        for_each_translate<Psi>(basis, obs[i], level, [&](std::int64_t k, double v) {
          p.values[static_cast<std::size_t>(k - p.first)] += v;
        });
    }
    for (const auto& p : partial)
      for (std::size_t m = 0; m < p.values.size(); ++m)
        out.values[static_cast<std::size_t>(p.first - out.first) + m] += p.values[m];
  }
  const double scale = std::sqrt(std::ldexp(1.0, level)) / static_cast<double>(obs.size());
  for (double& v : out.values) v *= scale;
  return out;
}

template <bool Psi>
LevelCoefficients quadrature_level(const DyadicTable& f, const WaveletBasis& basis, int level, Exec exec) {
  if (level < 0) throw Error(ErrorKind::invalid_argument, "negative level");
  if (f.resolution < level + 4)
    throw Error(ErrorKind::resolution, "grid resolution " + std::to_string(f.resolution) +
                                           " too coarse for level " + std::to_string(level));
  const auto& family = basis.family();
  const IntegerInterval support = Psi ? family.support_psi : family.support_phi;
  LevelCoefficients out;
  out.level = level;
  out.first = keys<Psi>(basis, f.left(), level).first;
  const std::int64_t last = keys<Psi>(basis, f.right(), level).second;
  check_range(out.first, last, level);
  out.values.assign(static_cast<std::size_t>(last - out.first + 1), 0.0);

  const auto count = static_cast<std::int64_t>(f.size());
  const double h = f.spacing();
  const std::int64_t scale = std::int64_t{1} << basis.resolution();
  const auto weight = [&](std::int64_t m) {
    if (f.step) return m == 0 ? 0.0 : 1.0;
    return (m == 0 || m == count - 1) ? 0.5 : 1.0;
  };
  const auto value = [&](double x, std::int64_t k) {
    if (basis.closed_form()) {
      const double u = std::ldexp(x, level) - static_cast<double>(k);
      return Psi ? basis.psi(u) : basis.phi(u);
    }
    const std::int64_t idx = basis.snap_index(x, level) - k * scale;
    return Psi ? basis.psi_at(idx) : basis.phi_at(idx);
  };
  const double factor = h * std::sqrt(std::ldexp(1.0, level));

  const auto n_keys = static_cast<std::int64_t>(out.values.size());
#pragma omp parallel for schedule(static) if (exec == Exec::parallel)
  for (std::int64_t i = 0; i < n_keys; ++i) {
    const std::int64_t k = out.first + i;
    const double lo = std::ldexp(static_cast<double>(k + support.lo), -level);
    const double hi = std::ldexp(static_cast<double>(k + support.hi), -level);
    const std::int64_t m_lo = std::max<std::int64_t>(0, static_cast<std::int64_t>(std::floor((lo - f.origin) / h)) - 1);
    const std::int64_t m_hi = std::min<std::int64_t>(count - 1, static_cast<std::int64_t>(std::ceil((hi - f.origin) / h)) + 1);
    double s = 0.0;
    for (std::int64_t m = m_lo; m <= m_hi; ++m) {
      const double fv = f.values[static_cast<std::size_t>(m)];
      if (fv != 0.0) s += weight(m) * fv * value(f.abscissa(static_cast<std::size_t>(m)), k);
    }
    out.values[static_cast<std::size_t>(i)] = s * factor;
  }
  return out;
}

}  // namespace

Sample make_sample(std::vector<double> values, std::string provenance) {
  if (values.empty()) throw Error(ErrorKind::invalid_argument, "sample must contain at least one observation");
  for (double v : values)
    if (!std::isfinite(v)) throw Error(ErrorKind::invalid_argument, "sample contains a non-finite value");
  std::sort(values.begin(), values.end());
  return Sample{std::move(values), std::move(provenance)};
}

std::size_t LevelCoefficients::nonzero_count() const {
  return static_cast<std::size_t>(std::count_if(values.begin(), values.end(), [](double v) { return v != 0.0; }));
}

double LevelCoefficients::max_abs() const {
  double best = 0.0;
  for (double v : values) best = std::max(best, std::abs(v));
  return best;
}

LevelCoefficients empirical_alpha(const Sample& sample, const WaveletBasis& basis, int j, Exec exec) {
  return empirical_level<false>(sample, basis, j, exec);
}

LevelCoefficients empirical_beta(const Sample& sample, const WaveletBasis& basis, int l, Exec exec) {
  return empirical_level<true>(sample, basis, l, exec);
}

CoefficientSet empirical_coefficients(const Sample& sample, const WaveletBasis& basis, int j0, int j1,
                                      Exec exec) {
  if (j1 < j0) throw Error(ErrorKind::invalid_argument, "j1 < j0");
  CoefficientSet set;
  set.family = basis.family().name;
  set.j0 = j0;
  set.j1 = j1;
  set.kind = CoefficientKind::empirical;
  set.alpha = empirical_alpha(sample, basis, j0, exec);
  for (int l = j0; l < j1; ++l) set.beta.push_back(empirical_beta(sample, basis, l, exec));
  return set;
}

LevelCoefficients quadrature_alpha(const DyadicTable& f, const WaveletBasis& basis, int j, Exec exec) {
  return quadrature_level<false>(f, basis, j, exec);
}

LevelCoefficients quadrature_beta(const DyadicTable& f, const WaveletBasis& basis, int l, Exec exec) {
  return quadrature_level<true>(f, basis, l, exec);
}

CoefficientSet exact_coefficients(const DensityModel& density, const WaveletBasis& basis, int j0, int j1,
                                  Exec exec) {
  if (j1 < j0) throw Error(ErrorKind::invalid_argument, "j1 < j0");
  if (density.resolution() < std::max(j0, j1) + 4)
    throw Error(ErrorKind::resolution, "density grid too coarse for level " + std::to_string(j1));
  CoefficientSet set;
  set.family = basis.family().name;
  set.j0 = j0;
  set.j1 = j1;
  set.kind = CoefficientKind::exact;
  set.alpha = quadrature_alpha(density.grid, basis, j0, exec);
  for (int l = j0; l < j1; ++l) set.beta.push_back(quadrature_beta(density.grid, basis, l, exec));
  return set;
}

double synthesize_alpha(const LevelCoefficients& alpha, const WaveletBasis& basis, double y) {
  double s = 0.0;
  basis.for_each_phi(y, alpha.level, [&](std::int64_t k, double v) { s += alpha.at(k) * v; });
  return s * std::sqrt(std::ldexp(1.0, alpha.level));
}

double synthesize_beta(const LevelCoefficients& beta, const WaveletBasis& basis, double y) {
  double s = 0.0;
  basis.for_each_psi(y, beta.level, [&](std::int64_t k, double v) { s += beta.at(k) * v; });
  return s * std::sqrt(std::ldexp(1.0, beta.level));
}

double sup_difference(const LevelCoefficients& a, const LevelCoefficients& b) {
  const std::int64_t lo = std::min(a.first, b.first);
  const std::int64_t hi = std::max(a.last(), b.last());
  double best = 0.0;
  for (std::int64_t k = lo; k <= hi; ++k) best = std::max(best, std::abs(a.at(k) - b.at(k)));
  return best;
}

std::vector<DeviationRecord> deviation_stats(const Sample& sample, const DensityModel& density,
                                             const WaveletBasis& basis, std::span<const int> levels) {
  std::vector<DeviationRecord> out;
  for (int l : levels) {
    DeviationRecord r;
    r.level = l;
    r.alpha_sup = sup_difference(empirical_alpha(sample, basis, l), quadrature_alpha(density.grid, basis, l));
    r.beta_sup = sup_difference(empirical_beta(sample, basis, l), quadrature_beta(density.grid, basis, l));
    out.push_back(r);
  }
  return out;
}

}  // namespace wde
