#include "wde/besov_densities.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <limits>
#include <numbers>
#include <ostream>
#include <random>
#include <sstream>

#include "wde/error.hpp"

namespace wde {

double DensityModel::pdf(double x) const {
  if (grid.step) {
    // left-continuous: value at the grid point closing the cell that holds x
    const double pos = std::ceil(std::ldexp(x - grid.origin, grid.resolution));
    if (pos < 0.0 || pos > static_cast<double>(grid.size() - 1)) return 0.0;
    return grid.values[static_cast<std::size_t>(pos)];
  }
  return grid.interpolate(x);
}

double DensityModel::cdf(double x) const { return cdf_grid.interpolate_clamped(x); }

namespace {

DensityModel assemble(DyadicTable grid, std::string description, std::optional<double> smoothness_t, bool normalize) {
  for (double v : grid.values)
    if (!(v >= 0.0) || !std::isfinite(v)) throw Error(ErrorKind::construction, "density values must be finite and >= 0");
  auto cum = cumulative_integral(grid);
  const double mass = cum.back();
  if (!(mass > 0.0)) throw Error(ErrorKind::construction, "density has zero mass");
  if (normalize)
    for (double& v : grid.values) v /= mass;
  for (double& v : cum) v /= mass;
  cum.back() = 1.0;
  grid.tag = FunctionTag::density;
  DensityModel d;
  d.cdf_grid = DyadicTable(grid.resolution, grid.origin, std::move(cum), FunctionTag::cdf);
  d.support_lo = grid.left();
  d.support_hi = grid.right();
  d.sup_norm = grid.max_value();
  d.grid = std::move(grid);
  d.smoothness_t = smoothness_t;
  d.description = std::move(description);
  return d;
}

}  // namespace

DensityModel make_density_from_grid(DyadicTable grid, std::string description, std::optional<double> smoothness_t) {
  return assemble(std::move(grid), std::move(description), smoothness_t, true);
}

DensityModel make_gaussian_mixture(const std::vector<MixtureComponent>& components, double truncation_radius,
                                   int resolution) {
  if (components.empty()) throw Error(ErrorKind::construction, "mixture needs a component");
  double wsum = 0.0;
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (const auto& c : components) {
    if (!(c.weight > 0.0) || !(c.stddev > 0.0))
      throw Error(ErrorKind::construction, "mixture weights and stddevs must be positive");
    wsum += c.weight;
    lo = std::min(lo, c.mean - truncation_radius);
    hi = std::max(hi, c.mean + truncation_radius);
  }
  if (std::abs(wsum - 1.0) > 1e-9) throw Error(ErrorKind::construction, "mixture weights must sum to 1");
  if (!(truncation_radius > 0.0)) throw Error(ErrorKind::construction, "truncation radius must be positive");
  const double a = std::floor(std::ldexp(lo, resolution));
  const double b = std::ceil(std::ldexp(hi, resolution));
  const auto count = static_cast<std::size_t>(b - a) + 1;
  const double origin = std::ldexp(a, -resolution);
  std::vector<double> values(count);
  for (std::size_t m = 0; m < count; ++m) {
    const double x = origin + std::ldexp(static_cast<double>(m), -resolution);
    double v = 0.0;
    for (const auto& c : components) {
      const double z = (x - c.mean) / c.stddev;
      v += c.weight * std::exp(-0.5 * z * z) / (c.stddev * std::sqrt(2.0 * std::numbers::pi));
    }
    values[m] = v;
  }
  std::ostringstream desc;
  desc << "gaussian mixture (" << components.size() << " components, radius " << truncation_radius << ")";
  return make_density_from_grid(DyadicTable(resolution, origin, std::move(values), FunctionTag::density), desc.str());
}

DensityModel make_uniform(double lo, double hi, int resolution) {
  if (!(hi > lo)) throw Error(ErrorKind::construction, "uniform needs lo < hi");
  const double a = std::ldexp(lo, resolution);
  const double b = std::ldexp(hi, resolution);
  if (a != std::floor(a) || b != std::floor(b))
    throw Error(ErrorKind::construction, "uniform endpoints must lie on the grid");
  const auto count = static_cast<std::size_t>(b - a) + 1;
  std::vector<double> values(count, 1.0 / (hi - lo));
  values[0] = 0.0;
  return make_density_from_grid(DyadicTable(resolution, lo, std::move(values), FunctionTag::density, true),
                                "uniform (step table)");
}

double smooth_step(double u) {
  if (u <= 0.0) return 0.0;
  if (u >= 1.0) return 1.0;
  const double a = std::exp(-1.0 / u);
  const double b = std::exp(-1.0 / (1.0 - u));
  return a / (a + b);
}

double BesovConstruction::perturbation_norm(double s) const {
  double best = 0.0;
  for (const auto& lv : beta) best = std::max(best, std::pow(2.0, lv.level * (s + 0.5)) * lv.max_abs());
  return best;
}

BesovDensity make_besov_density(double t, std::uint64_t seed, const WaveletBasis& basis, BesovOptions options) {
  const auto& family = basis.family();
  if (!(t > 0.0) || !(t < family.regularity_T + 1))
    throw Error(ErrorKind::construction, "smoothness t must lie in (0, T+1) for " + family.name);
  const int R = options.resolution;
  const double a = options.plateau_half_width;
  const double w = options.ramp_width;
  const double edge = a + w;
  if (std::ldexp(edge, R) != std::floor(std::ldexp(edge, R)))
    throw Error(ErrorKind::construction, "plateau edges must lie on the grid");
  const auto count = static_cast<std::size_t>(std::ldexp(2.0 * edge, R)) + 1;
  const double origin = -edge;
  const double height = 1.0 / (2.0 * a + w);  // each ramp integrates to w/2

  std::vector<double> base(count);
  for (std::size_t m = 0; m < count; ++m) {
    const double x = origin + std::ldexp(static_cast<double>(m), -R);
    base[m] = height * smooth_step((x + edge) / w) * smooth_step((edge - x) / w);
  }

  BesovConstruction con;
  con.t = t;
  con.seed = seed;
  con.family = family.name;
  con.base_min = height;
  con.L1 = options.top_level >= 0 ? options.top_level : (basis.closed_form() ? R - 2 : R - 4);
  const auto& sp = family.support_psi;
  // first level at which a translate of psi fits inside [-a, a]
  con.L0 = 0;
  while (std::ldexp(static_cast<double>(sp.width()), -con.L0) > 2.0 * a) ++con.L0;

  std::mt19937_64 rng(seed);
  std::vector<double> unit(count, 0.0);
  for (int l = con.L0; l <= con.L1; ++l) {
    LevelCoefficients lv;
    lv.level = l;
    const auto k_lo = static_cast<std::int64_t>(std::ceil(std::ldexp(-a, l))) - sp.lo;
    const auto k_hi = static_cast<std::int64_t>(std::floor(std::ldexp(a, l))) - sp.hi;
    lv.first = k_lo;
    const double mag = std::pow(2.0, -l * (t + 0.5));
    for (std::int64_t k = k_lo; k <= k_hi; ++k) lv.values.push_back((rng() >> 63) ? mag : -mag);
    con.beta.push_back(std::move(lv));
  }
  for (std::size_t m = 0; m < count; ++m) {
    const double x = origin + std::ldexp(static_cast<double>(m), -R);
    if (x < -a || x > a) continue;
    double u = 0.0;
    for (const auto& lv : con.beta) u += synthesize_beta(lv, basis, x);
    unit[m] = u;
  }
  double unit_sup = 0.0;
  for (double v : unit) unit_sup = std::max(unit_sup, std::abs(v));

  con.epsilon = 0.0;
  if (options.epsilon_scale > 0.0 && unit_sup > 0.0) {
    con.epsilon = options.epsilon_scale * 0.5 * height / unit_sup;
    if (!(con.epsilon > std::numeric_limits<double>::min()) || !std::isfinite(con.epsilon))
      throw Error(ErrorKind::construction, "perturbation scale underflows");
  }
  for (auto& lv : con.beta)
    for (double& v : lv.values) v *= con.epsilon;

  std::vector<double> values(count);
  for (std::size_t m = 0; m < count; ++m) values[m] = base[m] + con.epsilon * unit[m];

  BesovDensity out;
  std::ostringstream desc;
  desc << "besov t=" << t << " seed=" << seed << " family=" << family.name;
  const bool step = basis.closed_form();
  DyadicTable grid(R, origin, std::move(values), FunctionTag::density, step);
  // The base integrates to one in closed form and psi terms have zero mass, so
  // the table is kept as built rather than renormalized.
  out.model.cdf_grid = DyadicTable(R, origin, cumulative_integral(grid), FunctionTag::cdf);
  const double mass = out.model.cdf_grid.values.back();
  for (double& v : out.model.cdf_grid.values) v /= mass;
  out.model.support_lo = grid.left();
  out.model.support_hi = grid.right();
  out.model.sup_norm = grid.max_value();
  out.model.grid = std::move(grid);
  out.model.smoothness_t = t;
  out.model.description = desc.str();
  out.base = DyadicTable(R, origin, std::move(base), FunctionTag::density, step);
  out.construction = std::move(con);
  return out;
}

namespace {

double lp_norm(const std::vector<double>& v, double p) {
  if (std::isinf(p)) {
    double best = 0.0;
    for (double x : v) best = std::max(best, std::abs(x));
    return best;
  }
  double s = 0.0;
  for (double x : v) s += std::pow(std::abs(x), p);
  return std::pow(s, 1.0 / p);
}

}  // namespace

BesovNorm besov_norm(const DyadicTable& f, const WaveletBasis& basis, double s, double p, double q, int L_max) {
  if (!(p >= 1.0) || !(q >= 1.0)) throw Error(ErrorKind::invalid_argument, "besov norm needs p, q >= 1");
  BesovNorm out;
  out.top_level = std::min(L_max, f.resolution - 4);
  if (out.top_level < 0) throw Error(ErrorKind::resolution, "table too coarse for a besov norm");
  const double alpha_part = lp_norm(quadrature_alpha(f, basis, 0).values, p);
  const double inv_p = std::isinf(p) ? 0.0 : 1.0 / p;
  std::vector<double> w;
  for (int l = 0; l <= out.top_level; ++l)
    w.push_back(std::pow(2.0, l * (s + 0.5 - inv_p)) * lp_norm(quadrature_beta(f, basis, l).values, p));
  const double detail = lp_norm(w, q);

  // Geometric extrapolation from the last three level ratios.
  double ratio = 0.0;
  int used = 0;
  std::vector<double> ratios;
  for (std::size_t i = w.size() >= 4 ? w.size() - 3 : 1; i < w.size(); ++i) {
    if (w[i - 1] > 0.0) {
      ratios.push_back(w[i] / w[i - 1]);
      ++used;
    } else if (w[i] > 0.0) {
      ratios.push_back(std::numeric_limits<double>::infinity());
      ++used;
    }
  }
  if (used > 0) {
    std::sort(ratios.begin(), ratios.end());
    ratio = ratios[ratios.size() / 2];
  }
  const double last = w.empty() ? 0.0 : w.back();
  // With q = inf a flat sequence is still bounded; only growth diverges.
  const double limit = std::isinf(q) ? 1.0 + 1e-6 : 1.0;
  if (last > 0.0 && ratio >= limit) {
    out.divergent = true;
    out.truncated = alpha_part + detail;
    out.value = std::numeric_limits<double>::infinity();
    return out;
  }
  if (last > 0.0 && ratio > 0.0 && ratio < 1.0) {
    if (std::isinf(q)) {
      out.tail = 0.0;  // later terms are below the last one
    } else {
      const double rq = std::pow(ratio, q);
      out.tail = last * std::pow(rq / (1.0 - rq), 1.0 / q);
    }
  }
  out.truncated = alpha_part + detail;
  if (std::isinf(q)) {
    out.value = out.truncated;
  } else {
    out.value = alpha_part + std::pow(std::pow(detail, q) + std::pow(out.tail, q), 1.0 / q);
  }
  return out;
}

void inverse_cdf(const DensityModel& density, std::span<const double> uniforms, std::vector<double>& out) {
  const auto& c = density.cdf_grid.values;
  const double h = density.cdf_grid.spacing();
  out.resize(uniforms.size());
  for (std::size_t i = 0; i < uniforms.size(); ++i) {
    const double u = uniforms[i];
    // first index with c[m] > u, cell (m-1, m]
    auto it = std::upper_bound(c.begin(), c.end(), u);
    if (it == c.begin()) ++it;
    if (it == c.end()) --it;
    const auto m = static_cast<std::size_t>(it - c.begin());
    const double lo = c[m - 1];
    const double hi = c[m];
    const double frac = hi > lo ? (u - lo) / (hi - lo) : 0.5;
    out[i] = density.cdf_grid.origin + (static_cast<double>(m - 1) + frac) * h;
  }
}

Sample sample_density(const DensityModel& density, std::size_t n, std::uint64_t seed) {
  if (n == 0) throw Error(ErrorKind::invalid_argument, "sample size must be positive");
  std::mt19937_64 rng(seed);
  std::vector<double> u(n);
  for (double& v : u) v = static_cast<double>(rng() >> 11) * 0x1.0p-53;
  std::vector<double> x;
  inverse_cdf(density, u, x);
  return make_sample(std::move(x), "seed=" + std::to_string(seed));
}

BiasCurve bias_curve(const DensityModel& density, const KernelContext& ctx, int j_lo, int j_hi) {
  if (j_hi < j_lo) throw Error(ErrorKind::invalid_argument, "empty level range");
  BiasCurve curve;
  for (int j = j_lo; j <= j_hi; ++j) {
    const auto proj = project_density(ctx, j, density.grid);
    double best = 0.0;
    for (std::size_t m = 0; m < proj.size(); ++m)
      best = std::max(best, std::abs(proj.values[m] - density.grid.values[m]));
    curve.records.push_back({j, best});
  }
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const auto n = static_cast<double>(curve.records.size());
  for (const auto& r : curve.records) {
    const double y = std::log2(r.bias);
    sx += r.j;
    sy += y;
    sxx += static_cast<double>(r.j) * r.j;
    sxy += r.j * y;
  }
  curve.slope = n > 1 ? (n * sxy - sx * sy) / (n * sxx - sx * sx) : 0.0;
  return curve;
}

namespace {

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double parse_double(std::string_view s, std::size_t line) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size())
    throw Error(ErrorKind::parse, "line " + std::to_string(line) + ": bad number '" + std::string(s) + "'");
  return v;
}

}  // namespace

void write_density_csv(std::ostream& out, const DensityModel& density) {
  const auto& g = density.grid;
  out << "# wde-density 1\n";
  out << "# description=" << density.description << "\n";
  out << "# resolution=" << g.resolution << "\n";
  out << "# origin=" << format_double(g.origin) << "\n";
  out << "# support=" << format_double(density.support_lo) << "," << format_double(density.support_hi) << "\n";
  out << "# step=" << (g.step ? 1 : 0) << "\n";
  out << "# smoothness_t=" << (density.smoothness_t ? format_double(*density.smoothness_t) : "inf") << "\n";
  out << "x,density\n";
  for (std::size_t m = 0; m < g.size(); ++m) out << format_double(g.abscissa(m)) << "," << format_double(g.values[m]) << "\n";
}

DensityModel read_density_csv(std::istream& in) {
  std::string line;
  std::size_t lineno = 0;
  int resolution = -1;
  double origin = std::numeric_limits<double>::quiet_NaN();
  bool step = false;
  std::optional<double> t;
  std::string description;
  std::vector<double> values;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') {
      const auto eq = line.find('=');
      if (eq == std::string::npos) continue;
      const std::string key = line.substr(2, eq - 2);
      const std::string val = line.substr(eq + 1);
      if (key == "resolution") resolution = static_cast<int>(parse_double(val, lineno));
      else if (key == "origin") origin = parse_double(val, lineno);
      else if (key == "step") step = val == "1";
      else if (key == "description") description = val;
      else if (key == "smoothness_t" && val != "inf") t = parse_double(val, lineno);
      continue;
    }
    if (!header_seen) {
      header_seen = true;
      if (line == "x,density") continue;
    }
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw Error(ErrorKind::parse, "line " + std::to_string(lineno) + ": expected x,value");
    values.push_back(parse_double(std::string_view(line).substr(comma + 1), lineno));
  }
  if (resolution < 0 || std::isnan(origin) || values.empty())
    throw Error(ErrorKind::parse, "density csv lacks resolution, origin or rows");
  if (std::abs(trapezoid(values, std::ldexp(1.0, -resolution)) - 1.0) > 1e-3 && !step)
    throw Error(ErrorKind::parse, "density csv does not integrate to one");
  return assemble(DyadicTable(resolution, origin, std::move(values), FunctionTag::density, step), description, t,
                  false);
}

}  // namespace wde
