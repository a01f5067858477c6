#include "wde/monte_carlo.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <numbers>
#include <random>
#include <sstream>

#include "wde/besov_densities.hpp"
#include "wde/error.hpp"
#include "wde/hash.hpp"
#include "wde/io.hpp"

namespace wde::mc {

using nlohmann::json;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::uint64_t splitmix(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

double parse_double(std::string_view s, std::string_view what) {
  double v = 0.0;
  const auto* end = s.data() + s.size();
  if (s == "inf") return kInf;
  auto [p, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || p != end) throw Error(ErrorKind::config, std::string(what) + ": not a number: '" + std::string(s) + "'");
  return v;
}

std::int64_t parse_int(std::string_view s, std::string_view what) {
  // accepts 2^k as well as plain integers
  if (const auto caret = s.find('^'); caret != std::string_view::npos) {
    const auto base = parse_int(s.substr(0, caret), what);
    const auto exponent = parse_int(s.substr(caret + 1), what);
    if (exponent < 0 || exponent > 62) throw Error(ErrorKind::config, std::string(what) + ": bad exponent in '" + std::string(s) + "'");
    std::int64_t v = 1;
    for (std::int64_t i = 0; i < exponent; ++i) v *= base;
    return v;
  }
  std::int64_t v = 0;
  const auto* end = s.data() + s.size();
  auto [p, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || p != end) throw Error(ErrorKind::config, std::string(what) + ": not an integer: '" + std::string(s) + "'");
  return v;
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    const auto pos = s.find(sep, start);
    const auto stop = pos == std::string_view::npos ? s.size() : pos;
    if (stop > start) out.push_back(s.substr(start, stop - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::vector<std::int64_t> powers_of_two(int lo, int hi) {
  std::vector<std::int64_t> v;
  for (int k = lo; k <= hi; ++k) v.push_back(std::int64_t{1} << k);
  return v;
}

json summarize(std::vector<double> v) {
  if (v.empty()) return json::object();
  json s;
  s["count"] = v.size();
  s["mean"] = mean(v);
  s["sd"] = v.size() > 1 ? std::sqrt(variance(v)) : 0.0;
  s["q10"] = quantile(v, 0.1);
  s["median"] = quantile(v, 0.5);
  s["q90"] = quantile(v, 0.9);
  s["max"] = *std::max_element(v.begin(), v.end());
  return s;
}

json grid_json(const GridSpec& g) { return {{"origin", g.origin}, {"resolution", g.resolution}, {"count", g.count}}; }

json regression_json(const Regression& r) {
  return {{"slope", r.slope}, {"slope_se", r.slope_se}, {"intercept", r.intercept}, {"r2", r.r2}};
}

std::string fmt(double x) {
  std::ostringstream os;
  os.precision(6);
  os << x;
  return os.str();
}

// Runs body(rep) for every replication, possibly concurrently; results are
// stored by index so the output does not depend on scheduling.
template <class F>
std::vector<std::vector<double>> replicate(int reps, F&& body) {
  std::vector<std::vector<double>> out(static_cast<std::size_t>(reps));
  std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic)
  for (int r = 0; r < reps; ++r) {
    try {
      out[static_cast<std::size_t>(r)] = body(r);
    } catch (...) {
#pragma omp critical(wde_mc_failure)
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
  return out;
}

std::vector<double> column(const std::vector<std::vector<double>>& rows, std::size_t c) {
  std::vector<double> v;
  v.reserve(rows.size());
  for (const auto& r : rows) v.push_back(r[c]);
  return v;
}

ExperimentReport start_report(const ExperimentConfig& config) {
  ExperimentReport report;
  report.experiment_id = config.experiment_id;
  report.config = config.to_json();
  report.config_hash = config.hash();
  report.seed = config.seed;
  return report;
}

void add_records(ExperimentReport& report, const std::string& series, std::int64_t n, int level,
                 const std::vector<double>& values) {
  for (std::size_t r = 0; r < values.size(); ++r)
    report.records.push_back({series, n, static_cast<int>(r), level, values[r]});
}

void add_verdict(ExperimentReport& report, std::string name, bool pass, double observed, std::string target,
                 std::string detail = {}) {
  report.verdicts.push_back({std::move(name), pass, observed, std::move(target), std::move(detail)});
}

std::string besov_spec_with_t(const std::string& spec, double t) {
  if (spec.rfind("besov", 0) != 0) return spec;
  std::string out = spec;
  out += (out.find(':') == std::string::npos) ? ":" : ",";
  return out + "t=" + format_double(t);
}

int auto_density_resolution(const ExperimentConfig& config) {
  if (config.density_resolution > 0) return config.density_resolution;
  int res = 14;
  if (config.experiment_id == "law-of-logarithm") {
    for (auto n : config.n_grid) res = std::max(res, schedule_level(config, n) + 4);
  }
  return res;
}

std::vector<double> grid_pdf(const DensityModel& d, std::span<const double> pts) {
  std::vector<double> v(pts.size());
  for (std::size_t m = 0; m < pts.size(); ++m) v[m] = d.pdf(pts[m]);
  return v;
}

double sup_abs_diff(std::span<const double> a, std::span<const double> b) {
  double best = 0.0;
  for (std::size_t m = 0; m < a.size(); ++m) best = std::max(best, std::abs(a[m] - b[m]));
  return best;
}

struct DensitySpec {
  std::string kind;
  double t = -1.0;
  std::string family = "db2";
  std::uint64_t seed = 1;
};

DensitySpec parse_density_spec(std::string_view spec) {
  DensitySpec out;
  const auto colon = spec.find(':');
  out.kind = std::string(spec.substr(0, colon));
  if (out.kind != "normal" && out.kind != "mixture" && out.kind != "uniform" && out.kind != "besov")
    throw Error(ErrorKind::config, "unknown density '" + out.kind + "'");
  if (colon == std::string_view::npos) {
    if (out.kind == "besov") throw Error(ErrorKind::config, "besov density needs t=...");
    return out;
  }
  if (out.kind != "besov") throw Error(ErrorKind::config, "density '" + out.kind + "' takes no options");
  for (auto item : split(spec.substr(colon + 1), ',')) {
    const auto eq = item.find('=');
    if (eq == std::string_view::npos) throw Error(ErrorKind::config, "density option without '=': " + std::string(item));
    const auto key = item.substr(0, eq);
    const auto value = item.substr(eq + 1);
    if (key == "t") out.t = parse_double(value, "density t");
    else if (key == "family") out.family = std::string(value);
    else if (key == "seed") out.seed = static_cast<std::uint64_t>(parse_int(value, "density seed"));
    else throw Error(ErrorKind::config, "unknown density option '" + std::string(key) + "'");
  }
  if (!(out.t > 0.0)) throw Error(ErrorKind::config, "besov density needs t > 0");
  return out;
}

}  // namespace

// ---- config ----

json ExperimentConfig::to_json() const {
  json j;
  j["experiment_id"] = experiment_id;
  j["family"] = family;
  j["density"] = density;
  j["n_grid"] = n_grid;
  j["replications"] = replications;
  j["seed"] = seed;
  j["resolution"] = resolution;
  j["density_resolution"] = density_resolution;
  j["schedule"] = schedule;
  j["t"] = t;
  j["t_list"] = t_list;
  j["levels"] = levels;
  j["params"] = params;
  j["tolerances"] = tolerances;
  return j;
}

ExperimentConfig ExperimentConfig::from_json(const json& doc) {
  if (!doc.is_object()) throw Error(ErrorKind::config, "config must be a JSON object");
  ExperimentConfig c;
  try {
    for (const auto& [key, v] : doc.items()) {
      if (key == "experiment_id") c.experiment_id = v.get<std::string>();
      else if (key == "family") c.family = v.get<std::string>();
      else if (key == "density") c.density = v.get<std::string>();
      else if (key == "n_grid") c.n_grid = v.get<std::vector<std::int64_t>>();
      else if (key == "replications") c.replications = v.get<int>();
      else if (key == "seed") c.seed = v.get<std::uint64_t>();
      else if (key == "resolution") c.resolution = v.get<int>();
      else if (key == "density_resolution") c.density_resolution = v.get<int>();
      else if (key == "schedule") c.schedule = v.get<std::string>();
      else if (key == "t") c.t = v.get<double>();
      else if (key == "t_list") c.t_list = v.get<std::vector<double>>();
      else if (key == "levels") c.levels = v.get<std::vector<int>>();
      else if (key == "params") c.params = v.get<std::map<std::string, double>>();
      else if (key == "tolerances") c.tolerances = v.get<std::map<std::string, double>>();
      else throw Error(ErrorKind::config, "unknown config key '" + key + "'");
    }
  } catch (const json::exception& e) {
    throw Error(ErrorKind::config, e.what());
  }
  return c;
}

std::string ExperimentConfig::hash() const { return hex64(fnv1a64(to_json().dump())); }

double ExperimentConfig::param(const std::string& key) const {
  const auto it = params.find(key);
  if (it == params.end()) throw Error(ErrorKind::config, "missing param '" + key + "'");
  return it->second;
}

double ExperimentConfig::tolerance(const std::string& key) const {
  const auto it = tolerances.find(key);
  if (it == tolerances.end()) throw Error(ErrorKind::config, "missing tolerance '" + key + "'");
  return it->second;
}

bool ExperimentReport::passed() const {
  return std::all_of(verdicts.begin(), verdicts.end(), [](const Verdict& v) { return v.pass; });
}

json ExperimentReport::summary() const {
  json j;
  j["experiment_id"] = experiment_id;
  j["config"] = config;
  j["config_hash"] = config_hash;
  j["seed"] = seed;
  j["record_count"] = records.size();
  j["aggregates"] = aggregates;
  json v = json::array();
  for (const auto& verdict : verdicts)
    v.push_back({{"name", verdict.name},
                 {"pass", verdict.pass},
                 {"observed", verdict.observed},
                 {"target", verdict.target},
                 {"detail", verdict.detail}});
  j["verdicts"] = v;
  j["passed"] = passed();
  return j;
}

std::vector<std::string> experiment_ids() {
  return {"law-of-logarithm", "supnorm-rate",  "coefficient-scaling", "cdf-clt",    "dkw-tail",
          "lil",              "threshold-adaptivity", "functional-clt", "bias-decay"};
}

ExperimentConfig default_config(std::string_view id) {
  ExperimentConfig c;
  c.experiment_id = std::string(id);
  c.seed = 20240611;
  if (id == "law-of-logarithm") {
    c.n_grid = {1 << 12, 1 << 14, 1 << 16, 1 << 18};
    c.replications = 50;
    c.schedule = "plugin";
    c.params = {{"tau", 1}};
    c.tolerances = {{"window_lo", 0.7}, {"window_hi", 1.3}};
  } else if (id == "supnorm-rate") {
    c.family = "db2";
    c.density = "besov:family=db2,seed=7";
    c.n_grid = powers_of_two(10, 16);
    c.replications = 100;
    c.schedule = "optimal";
    c.t_list = {0.5, 1.0};
    c.params = {{"tau", 1}, {"overfit_replications", 20}};
    c.tolerances = {{"slope", 0.1}};
  } else if (id == "coefficient-scaling") {
    c.n_grid = powers_of_two(8, 14);
    c.replications = 200;
    c.schedule = "fixed";
    c.levels = {2, 3, 4, 5, 6, 7, 8};
    c.params = {{"j", 4}, {"kernel_n", 1 << 14}};
    c.tolerances = {{"alpha_slope", 0.07}, {"kernel_slope", 0.1}};
  } else if (id == "cdf-clt" || id == "dkw-tail") {
    c.n_grid = {1 << 10, 1 << 12, 10000, 1 << 14};
    c.replications = 2000;
    c.schedule = "fine";
    c.t = 1.0;
    if (id == "cdf-clt") {
      c.params = {{"gap_n", 10000}};
      c.tolerances = {{"ks", 0.05}, {"distribution_free", 0.03}, {"gap_median", 0.05}};
    } else {
      c.params = {{"lambda0", 1.0}, {"min_exceedances", 20}, {"points", 16}};
      c.tolerances = {{"r2", 0.9}, {"decay_factor", 5.0}, {"dkw_multiple", 2.0}};
    }
  } else if (id == "lil") {
    c.n_grid = powers_of_two(8, 20);
    c.replications = 5;
    c.schedule = "fine";
    c.t = 1.0;
    c.params = {{"tail_from", 1 << 14}};
    c.tolerances = {{"cap", 0.8}, {"tail_lo", 0.3}, {"tail_hi", 0.55}};
  } else if (id == "threshold-adaptivity") {
    c.density = "besov:family=db2,seed=11";
    c.n_grid = powers_of_two(10, 16);
    c.replications = 100;
    c.schedule = "optimal";
    c.t_list = {0.5, 1.0};
    c.params = {{"kappa", 0}, {"bound", 1}, {"eta", 1}, {"ks_n", 1 << 14}, {"ks_replications", 2000}};
    c.tolerances = {{"slope", 0.12}, {"ratio", 4.0}, {"ks", 0.07}};
  } else if (id == "functional-clt") {
    c.family = "db2";
    c.n_grid = {1 << 10, 1 << 12, 1 << 14};
    c.replications = 2000;
    c.schedule = "fine";
    c.t = 1.0;
    c.params = {{"bump_s", 1.0}};
    c.tolerances = {{"gap", 0.05}, {"variance", 0.1}, {"kurtosis_lo", 2.5}, {"kurtosis_hi", 3.5}, {"constant", 1e-9}};
  } else if (id == "bias-decay") {
    c.density = "besov:t=0.7,family=haar,seed=1";
    c.replications = 1;
    c.levels = {3, 4, 5, 6, 7, 8};
    c.params = {{"max_slope", -2.0}};
    c.tolerances = {{"slope", 0.15}};
  } else {
    throw Error(ErrorKind::config, "unknown experiment '" + std::string(id) + "'");
  }
  return c;
}

void apply_override(ExperimentConfig& c, std::string_view key, std::string_view value) {
  const std::string k(key);
  if (k == "family") c.family = std::string(value);
  else if (k == "density") c.density = std::string(value);
  else if (k == "schedule") c.schedule = std::string(value);
  else if (k == "replications") c.replications = static_cast<int>(parse_int(value, k));
  else if (k == "seed") c.seed = static_cast<std::uint64_t>(parse_int(value, k));
  else if (k == "resolution") c.resolution = static_cast<int>(parse_int(value, k));
  else if (k == "density_resolution") c.density_resolution = static_cast<int>(parse_int(value, k));
  else if (k == "t") c.t = parse_double(value, k);
  else if (k == "n_grid") {
    c.n_grid.clear();
    for (auto item : split(value, ',')) c.n_grid.push_back(parse_int(item, k));
  } else if (k == "t_list") {
    c.t_list.clear();
    for (auto item : split(value, ',')) c.t_list.push_back(parse_double(item, k));
  } else if (k == "levels") {
    c.levels.clear();
    for (auto item : split(value, ',')) c.levels.push_back(static_cast<int>(parse_int(item, k)));
  } else if (k.rfind("param.", 0) == 0) c.params[k.substr(6)] = parse_double(value, k);
  else if (k.rfind("tol.", 0) == 0) c.tolerances[k.substr(4)] = parse_double(value, k);
  else throw Error(ErrorKind::config, "unknown override '" + k + "'");
}

int schedule_level(const ExperimentConfig& c, std::int64_t n) {
  if (c.schedule == "optimal") return choose_j_optimal(n, c.t);
  if (c.schedule == "fine") return choose_j_fine(n);
  if (c.schedule == "plugin") return choose_j_plugin(n);
  if (c.schedule == "fixed") return static_cast<int>(c.param("j"));
  throw Error(ErrorKind::config, "unknown schedule '" + c.schedule + "'");
}

std::vector<std::string> check_schedule_growth(const std::function<int(std::int64_t)>& level, std::int64_t n_lo,
                                           std::int64_t n_hi, int tau) {
  std::vector<std::string> problems;
  std::vector<std::int64_t> ladder;
  for (std::int64_t n = std::max<std::int64_t>(n_lo, 16); n <= n_hi; n *= 2) ladder.push_back(n);
  if (ladder.size() < 2) return problems;
  auto ratio = [&](std::int64_t n) {
    const int j = std::max(level(n), 1);
    return static_cast<double>(n) / (j * std::ldexp(1.0, j));
  };
  auto loglog = [&](std::int64_t n) {
    return level(n) / std::log(std::log(static_cast<double>(n)));
  };
  if (!(ratio(ladder.back()) > ratio(ladder.front())))
    problems.push_back("schedule: n/(j 2^j) does not grow between n=" + std::to_string(ladder.front()) +
                       " and n=" + std::to_string(ladder.back()));
  if (!(loglog(ladder.back()) > loglog(ladder.front())))
    problems.push_back("schedule: j/log log n does not grow between n=" + std::to_string(ladder.front()) +
                       " and n=" + std::to_string(ladder.back()));
  for (std::size_t i = 0; i + 1 < ladder.size(); ++i) {
    const int jump = level(ladder[i + 1]) - level(ladder[i]);
    if (jump > tau || jump < 0) {
      problems.push_back("schedule: j_{2n} - j_n = " + std::to_string(jump) + " at n=" + std::to_string(ladder[i]) +
                         " (allowed 0.." + std::to_string(tau) + ")");
      break;
    }
  }
  return problems;
}

std::vector<std::string> check_bias_vanishing(const std::function<int(std::int64_t)>& level,
                                              std::span<const std::int64_t> n_grid, double t) {
  std::vector<std::string> problems;
  if (n_grid.size() < 2) return problems;
  auto term = [&](std::int64_t n) {
    return std::sqrt(static_cast<double>(n)) * std::exp2(-level(n) * (t + 1.0));
  };
  if (!(term(n_grid.back()) < term(n_grid.front())))
    problems.push_back("schedule: sqrt(n) 2^{-j(t+1)} does not decrease across n_grid");
  return problems;
}

std::vector<std::string> validate(const ExperimentConfig& c) {
  std::vector<std::string> problems;
  const auto ids = experiment_ids();
  if (std::find(ids.begin(), ids.end(), c.experiment_id) == ids.end()) {
    problems.push_back("unknown experiment '" + c.experiment_id + "'");
    return problems;
  }
  const bool needs_n = c.experiment_id != "bias-decay";
  if (c.replications < 1) problems.push_back("replications must be >= 1 (got " + std::to_string(c.replications) + ")");
  if (needs_n && c.n_grid.empty()) problems.push_back("n_grid must not be empty");
  for (std::size_t i = 0; i < c.n_grid.size(); ++i) {
    if (c.n_grid[i] < 8) problems.push_back("n_grid entries must be >= 8 (got " + std::to_string(c.n_grid[i]) + ")");
    if (i > 0 && c.n_grid[i] <= c.n_grid[i - 1]) {
      problems.push_back("n_grid must be strictly increasing");
      break;
    }
  }
  try {
    build_family(c.family);
  } catch (const Error& e) {
    problems.push_back(e.what());
  }
  if (c.resolution < 6 || c.resolution > 20) problems.push_back("resolution must lie in [6, 20]");
  if (c.density_resolution != 0 && (c.density_resolution < 8 || c.density_resolution > 24))
    problems.push_back("density_resolution must be 0 (auto) or lie in [8, 24]");
  const bool uses_t_list = c.experiment_id == "supnorm-rate" || c.experiment_id == "threshold-adaptivity";
  try {
    if (uses_t_list) {
      for (double t : c.t_list) parse_density_spec(besov_spec_with_t(c.density, t));
    } else {
      parse_density_spec(c.density);
    }
  } catch (const Error& e) {
    problems.push_back(e.what());
  }
  if (uses_t_list) {
    if (c.t_list.empty()) problems.push_back("t_list must not be empty");
    for (double t : c.t_list)
      if (!(t > 0.0)) problems.push_back("t_list entries must be positive");
  }
  if (!(c.t > 0.0)) problems.push_back("t must be positive");
  const std::vector<std::string> schedules = {"optimal", "fine", "plugin", "fixed"};
  if (std::find(schedules.begin(), schedules.end(), c.schedule) == schedules.end()) {
    problems.push_back("unknown schedule '" + c.schedule + "'");
  } else if (c.schedule == "fixed" && !c.params.count("j")) {
    problems.push_back("schedule 'fixed' needs param.j");
  }
  if ((c.experiment_id == "coefficient-scaling" || c.experiment_id == "bias-decay") && c.levels.size() < 2)
    problems.push_back("levels needs at least two entries");
  for (std::size_t i = 1; i < c.levels.size(); ++i)
    if (c.levels[i] <= c.levels[i - 1]) {
      problems.push_back("levels must be strictly increasing");
      break;
    }
  if (!problems.empty() || c.n_grid.empty()) return problems;

  auto level_for = [&](double t) {
    return [&c, t](std::int64_t n) {
      ExperimentConfig copy = c;
      copy.t = t;
      return schedule_level(copy, n);
    };
  };
  const std::string& id = c.experiment_id;
  const int tau = c.params.count("tau") ? static_cast<int>(c.params.at("tau")) : 1;
  if (id == "law-of-logarithm") {
    for (auto& p : check_schedule_growth(level_for(c.t), c.n_grid.front(), c.n_grid.back(), tau)) problems.push_back(p);
  } else if (id == "supnorm-rate") {
    for (double t : c.t_list)
      for (auto& p : check_schedule_growth(level_for(t), c.n_grid.front(), c.n_grid.back(), tau))
        problems.push_back("t=" + fmt(t) + ": " + p);
  } else if (id == "cdf-clt" || id == "dkw-tail" || id == "lil" || id == "functional-clt") {
    for (auto& p : check_bias_vanishing(level_for(c.t), c.n_grid, c.t)) problems.push_back(p);
  }
  return problems;
}

// ---- statistics helpers ----

double kolmogorov_cdf(double x) {
  if (!(x > 0.0)) return 0.0;
  constexpr double pi = std::numbers::pi;
  if (x < 1.0) {
    // theta form: sqrt(2 pi)/x sum_k exp(-(2k-1)^2 pi^2 / (8 x^2))
    const double front = std::sqrt(2.0 * pi) / x;
    const double c = -pi * pi / (8.0 * x * x);
    double sum = 0.0;
    for (int k = 1; k < 1000; ++k) {
      const double odd = 2.0 * k - 1.0;
      const double term = front * std::exp(c * odd * odd);
      sum += term;
      if (term < 1e-10 * 1e-6) break;
    }
    return sum;
  }
  double sum = 0.0;
  for (int k = 1; k < 1000; ++k) {
    const double term = std::exp(-2.0 * k * k * x * x);
    sum += (k % 2 == 1) ? term : -term;
    if (term < 1e-10 * 1e-6) break;
  }
  return 1.0 - 2.0 * sum;
}

double kolmogorov_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw Error(ErrorKind::invalid_argument, "quantile level must be in (0, 1)");
  double lo = 1e-3, hi = 10.0;
  for (int i = 0; i < 200 && hi - lo > 1e-14; ++i) {
    const double mid = 0.5 * (lo + hi);
    (kolmogorov_cdf(mid) < p ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

double ks_distance(std::vector<double> values, const std::function<double(double)>& cdf_fn) {
  if (values.empty()) throw Error(ErrorKind::invalid_argument, "ks_distance of an empty sample");
  std::sort(values.begin(), values.end());
  const auto m = static_cast<double>(values.size());
  double d = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double g = cdf_fn(values[i]);
    d = std::max({d, g - static_cast<double>(i) / m, static_cast<double>(i + 1) / m - g});
  }
  return d;
}

Regression ols(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw Error(ErrorKind::invalid_argument, "regression needs two or more pairs");
  const auto m = static_cast<double>(x.size());
  const double mx = mean(x), my = mean(y);
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0) throw Error(ErrorKind::invalid_argument, "regression with constant abscissae");
  Regression r;
  r.slope = sxy / sxx;
  r.intercept = my - r.slope * mx;
  const double ssr = std::max(0.0, syy - r.slope * sxy);
  r.r2 = syy > 0.0 ? 1.0 - ssr / syy : 1.0;
  r.slope_se = x.size() > 2 ? std::sqrt(ssr / (m - 2.0) / sxx) : 0.0;
  return r;
}

double quantile(std::vector<double> v, double p) {
  if (v.empty()) throw Error(ErrorKind::invalid_argument, "quantile of an empty vector");
  std::sort(v.begin(), v.end());
  const double pos = p * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

double median(std::vector<double> v) { return quantile(std::move(v), 0.5); }

double mean(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double variance(std::span<const double> v) {
  const double mu = mean(v);
  double s = 0.0;
  for (double x : v) s += (x - mu) * (x - mu);
  return s / static_cast<double>(v.size() - 1);
}

double kurtosis(std::span<const double> v) {
  const double mu = mean(v);
  double m2 = 0.0, m4 = 0.0;
  for (double x : v) {
    const double d2 = (x - mu) * (x - mu);
    m2 += d2;
    m4 += d2 * d2;
  }
  const auto m = static_cast<double>(v.size());
  m2 /= m;
  m4 /= m;
  return m4 / (m2 * m2);
}

std::uint64_t replication_seed(std::uint64_t base, std::uint64_t n_index, std::uint64_t rep) {
  return splitmix(splitmix(splitmix(base) + n_index) + rep);
}

DensityModel make_zoo_density(std::string_view spec, int resolution) {
  const auto s = parse_density_spec(spec);
  if (s.kind == "normal") {
    auto d = make_gaussian_mixture({{1.0, 0.0, 1.0}}, 6.0, resolution);
    d.description = "standard normal truncated to [-6, 6]";
    return d;
  }
  if (s.kind == "mixture") return make_gaussian_mixture({{0.4, -1.5, 0.5}, {0.6, 1.0, 0.8}}, 5.0, resolution);
  if (s.kind == "uniform") return make_uniform(0.0, 1.0, resolution);
  const auto ctx = shared_context(s.family, resolution);
  BesovOptions opts;
  opts.resolution = resolution;
  return make_besov_density(s.t, s.seed, ctx->b(), opts).model;
}

CdfDeviation cdf_deviation_impl(const Estimator& est, const Sample& sample, const DensityModel& d,
                                bool with_empirical) {
  const auto& fam = context_of(est).b().family();
  const int j = level_of(est);
  const int r = fam.is_haar() ? std::max(d.resolution(), j) : std::max(d.resolution(), j + 4);
  const int width = std::max(fam.support_phi.width(), fam.support_psi.width()) + 1;
  const auto& x = sample.observations;
  const double pad = std::ldexp(static_cast<double>(width), -j);
  const double lo = std::max(d.support_lo, x.front() - pad);
  const double hi = std::min(d.support_hi, x.back() + pad);
  const auto m0 = static_cast<std::int64_t>(std::ceil(std::ldexp(lo, r)));
  const auto m1 = static_cast<std::int64_t>(std::floor(std::ldexp(hi, r)));
  const auto n = static_cast<double>(x.size());

  CdfDeviation out;
  std::size_t below = 0;
  auto visit = [&](double s) {
    const double fw = cdf(est, s);
    out.vs_true = std::max(out.vs_true, std::abs(fw - d.cdf(s)));
    if (with_empirical) {
      while (below < x.size() && x[below] <= s) ++below;
      out.vs_empirical = std::max(out.vs_empirical, std::abs(fw - static_cast<double>(below) / n));
    }
  };
  visit(d.support_lo);
  for (std::int64_t m = m0; m <= m1; ++m) visit(std::ldexp(static_cast<double>(m), -r));
  // beyond the window the estimate is constant and F is monotone
  {
    const double fw = cdf(est, d.support_hi);
    out.vs_true = std::max(out.vs_true, std::abs(fw - d.cdf(d.support_hi)));
  }
  if (with_empirical) {
    // F_n jumps at each observation: compare both one-sided values there
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double fw = cdf(est, x[i]);
      const double before = static_cast<double>(i) / n;
      const double after = static_cast<double>(i + 1) / n;
      out.vs_empirical = std::max({out.vs_empirical, std::abs(fw - before), std::abs(fw - after)});
    }
  }
  return out;
}

CdfDeviation cdf_deviation(const Estimator& est, const Sample& sample, const DensityModel& density) {
  return cdf_deviation_impl(est, sample, density, true);
}

// ---- experiments ----

ExperimentReport exp_law_of_logarithm(const ExperimentConfig& config) {
  auto report = start_report(config);
  const int dres = auto_density_resolution(config);
  const auto density = make_zoo_density(config.density, dres);
  const auto ctx = shared_context(config.family, config.resolution);
  const double target = std::sqrt(density.sup_norm);
  report.aggregates["target"] = target;
  report.aggregates["density"] = density.description;
  report.aggregates["density_resolution"] = dres;
  report.aggregates["D1"] = ctx->D1;
  report.aggregates["D2"] = ctx->D2;

  std::vector<double> medians;
  json per_n = json::array();
  for (std::size_t ni = 0; ni < config.n_grid.size(); ++ni) {
    const auto n = config.n_grid[ni];
    const int j = schedule_level(config, n);
    const auto grid = sup_grid(ctx->b().family(), j, density.support_lo, density.support_hi, dres);
    const auto pts = grid.points();
    const auto expected = project_density_at(*ctx, j, density.grid, pts);
    std::vector<double> normalizer(pts.size());
    for (std::size_t m = 0; m < pts.size(); ++m) normalizer[m] = std::sqrt(norm_squared(*ctx, std::ldexp(pts[m], j)));
    const double scale = std::sqrt(static_cast<double>(n) / (2.0 * std::numbers::ln2 * j * std::ldexp(1.0, j)));

    const auto rows = replicate(config.replications, [&](int rep) {
      const auto sample = sample_density(density, static_cast<std::size_t>(n), replication_seed(config.seed, ni, rep));
      const Estimator est = fit_linear(sample, ctx, j);
      const auto values = eval_density(est, pts, Exec::serial);
      return std::vector<double>{scale * sup_deviation_statistic(values, expected, normalizer)};
    });
    const auto stat = column(rows, 0);
    add_records(report, "normalized_sup", n, j, stat);
    medians.push_back(median(stat));
    auto s = summarize(stat);
    s["n"] = n;
    s["j"] = j;
    s["n_over_j2j"] = static_cast<double>(n) / (j * std::ldexp(1.0, j));
    s["grid"] = grid_json(grid);
    per_n.push_back(s);
  }
  report.aggregates["per_n"] = per_n;

  const double lo = config.tolerance("window_lo"), hi = config.tolerance("window_hi");
  const double last = medians.back() / target;
  add_verdict(report, "median-window", last >= lo && last <= hi, last, "[" + fmt(lo) + ", " + fmt(hi) + "] x target",
              "median/target at n=" + std::to_string(config.n_grid.back()));
  const double gap_first = std::abs(medians.front() - target);
  const double gap_last = std::abs(medians.back() - target);
  add_verdict(report, "monotone-approach", gap_last < gap_first, gap_last,
              "< " + fmt(gap_first) + " (gap at n=" + std::to_string(config.n_grid.front()) + ")");
  return report;
}

ExperimentReport exp_supnorm_rate(const ExperimentConfig& config) {
  auto report = start_report(config);
  const int dres = auto_density_resolution(config);
  const auto ctx = shared_context(config.family, config.resolution);
  json per_t = json::array();
  for (std::size_t ti = 0; ti < config.t_list.size(); ++ti) {
    const double t = config.t_list[ti];
    const auto density = make_zoo_density(besov_spec_with_t(config.density, t), dres);
    ExperimentConfig cfg_t = config;
    cfg_t.t = t;
    std::vector<double> logn, logerr;
    json per_n = json::array();
    for (std::size_t ni = 0; ni < config.n_grid.size(); ++ni) {
      const auto n = config.n_grid[ni];
      const int j = schedule_level(cfg_t, n);
      const auto grid = sup_grid(ctx->b().family(), j, density.support_lo, density.support_hi, dres);
      const auto pts = grid.points();
      const auto truth = grid_pdf(density, pts);
      const auto stream = (static_cast<std::uint64_t>(ti) << 32) | ni;
      const auto rows = replicate(config.replications, [&](int rep) {
        const auto sample = sample_density(density, static_cast<std::size_t>(n), replication_seed(config.seed, stream, rep));
        const Estimator est = fit_linear(sample, ctx, j);
        return std::vector<double>{sup_abs_diff(eval_density(est, pts, Exec::serial), truth)};
      });
      const auto err = column(rows, 0);
      add_records(report, "sup_error_t=" + fmt(t), n, j, err);
      logn.push_back(std::log(static_cast<double>(n)));
      logerr.push_back(std::log(mean(err)));
      auto s = summarize(err);
      s["n"] = n;
      s["j"] = j;
      s["grid"] = grid_json(grid);
      per_n.push_back(s);
    }
    const auto fit = ols(logn, logerr);
    const double target = -t / (2.0 * t + 1.0);
    const double tol = config.tolerance("slope");
    add_verdict(report, "slope-t=" + fmt(t), std::abs(fit.slope - target) <= tol, fit.slope,
                fmt(target) + " +- " + fmt(tol), "log mean sup error on log n, se " + fmt(fit.slope_se));

    // variance-dominated side: double the level at the largest n
    const auto n = config.n_grid.back();
    const int j_opt = schedule_level(cfg_t, n);
    const int j_over = std::max(2 * j_opt, j_opt + 1);
    const int reps = std::min(config.replications, static_cast<int>(config.param("overfit_replications")));
    const auto ni = config.n_grid.size() - 1;
    const auto stream = (static_cast<std::uint64_t>(ti) << 32) | ni;
    const auto grid = sup_grid(ctx->b().family(), j_over, density.support_lo, density.support_hi, dres);
    const auto pts = grid.points();
    const auto truth = grid_pdf(density, pts);
    const auto rows = replicate(reps, [&](int rep) {
      const auto sample = sample_density(density, static_cast<std::size_t>(n), replication_seed(config.seed, stream, rep));
      const Estimator est = fit_linear(sample, ctx, j_over);
      return std::vector<double>{sup_abs_diff(eval_density(est, pts, Exec::serial), truth)};
    });
    const auto over = column(rows, 0);
    add_records(report, "sup_error_overfit_t=" + fmt(t), n, j_over, over);
    const double at_opt = std::exp(logerr.back());
    add_verdict(report, "overfit-t=" + fmt(t), mean(over) > at_opt, mean(over),
                "> " + fmt(at_opt) + " (error at j=" + std::to_string(j_opt) + ")",
                "mean sup error at j=" + std::to_string(j_over));
    per_t.push_back({{"t", t}, {"density", density.description}, {"regression", regression_json(fit)},
                     {"per_n", per_n}, {"overfit_mean", mean(over)}});
  }
  report.aggregates["per_t"] = per_t;
  return report;
}

ExperimentReport exp_coefficient_scaling(const ExperimentConfig& config) {
  auto report = start_report(config);
  const int dres = auto_density_resolution(config);
  const auto density = make_zoo_density(config.density, dres);
  const auto ctx = shared_context(config.family, config.resolution);
  const auto& basis = ctx->b();
  const int level = static_cast<int>(config.param("j"));
  const auto exact = quadrature_alpha(density.grid, basis, level);

  std::vector<double> logn, logdev;
  json alpha_n = json::array();
  for (std::size_t ni = 0; ni < config.n_grid.size(); ++ni) {
    const auto n = config.n_grid[ni];
    const auto rows = replicate(config.replications, [&](int rep) {
      const auto sample = sample_density(density, static_cast<std::size_t>(n), replication_seed(config.seed, ni, rep));
      return std::vector<double>{sup_difference(empirical_alpha(sample, basis, level), exact)};
    });
    const auto dev = column(rows, 0);
    add_records(report, "alpha_sup", n, level, dev);
    logn.push_back(std::log(static_cast<double>(n)));
    logdev.push_back(std::log(mean(dev)));
    auto s = summarize(dev);
    s["n"] = n;
    alpha_n.push_back(s);
  }
  const auto afit = ols(logn, logdev);
  const double atol = config.tolerance("alpha_slope");
  add_verdict(report, "alpha-slope", std::abs(afit.slope + 0.5) <= atol, afit.slope, "-0.5 +- " + fmt(atol),
              "log E sup_k |alpha_hat - alpha| on log n at level " + std::to_string(level) + ", se " + fmt(afit.slope_se));

  // kernel deviation sup_y |(P_n - P) K_l(y, .)| at fixed n across levels
  const auto kn = static_cast<std::int64_t>(config.param("kernel_n"));
  const auto stream = static_cast<std::uint64_t>(config.n_grid.size());
  std::vector<GridSpec> grids;
  std::vector<std::vector<double>> pts, expected;
  for (int l : config.levels) {
    grids.push_back(sup_grid(basis.family(), l, density.support_lo, density.support_hi, dres));
    pts.push_back(grids.back().points());
    expected.push_back(project_density_at(*ctx, l, density.grid, pts.back()));
  }
  const auto rows = replicate(config.replications, [&](int rep) {
    const auto sample = sample_density(density, static_cast<std::size_t>(kn), replication_seed(config.seed, stream, rep));
    std::vector<double> out;
    for (std::size_t li = 0; li < config.levels.size(); ++li) {
      const Estimator est = fit_linear(sample, ctx, config.levels[li]);
      out.push_back(sup_abs_diff(eval_density(est, pts[li], Exec::serial), expected[li]));
    }
    return out;
  });
  std::vector<double> lv, logk, logk_corrected;
  json kernel_l = json::array();
  for (std::size_t li = 0; li < config.levels.size(); ++li) {
    const int l = config.levels[li];
    const auto dev = column(rows, li);
    add_records(report, "kernel_sup", kn, l, dev);
    lv.push_back(l);
    logk.push_back(std::log2(mean(dev)));
    logk_corrected.push_back(std::log2(mean(dev) / std::sqrt(static_cast<double>(l))));
    auto s = summarize(dev);
    s["level"] = l;
    s["sqrt_2l_over_n"] = std::sqrt(std::ldexp(1.0, l) / static_cast<double>(kn));
    s["grid"] = grid_json(grids[li]);
    kernel_l.push_back(s);
  }
  const auto kfit = ols(lv, logk);
  const auto kfit_corrected = ols(lv, logk_corrected);
  const double ktol = config.tolerance("kernel_slope");
  add_verdict(report, "kernel-slope", std::abs(kfit.slope - 0.5) <= ktol, kfit.slope, "0.5 +- " + fmt(ktol),
              "log2 E sup_y |(P_n - P)K_l(y,.)| on l at n=" + std::to_string(kn) + ", se " + fmt(kfit.slope_se) +
                  "; after dividing by sqrt(l): " + fmt(kfit_corrected.slope));
  report.aggregates["alpha"] = {{"level", level}, {"regression", regression_json(afit)}, {"per_n", alpha_n}};
  report.aggregates["kernel"] = {{"n", kn},
                                 {"regression", regression_json(kfit)},
                                 {"regression_over_sqrt_l", regression_json(kfit_corrected)},
                                 {"per_level", kernel_l}};
  return report;
}

namespace {

struct CdfStats {
  std::vector<double> vs_true;       // sqrt(n) sup |F_n^W - F|
  std::vector<double> vs_empirical;  // sqrt(n) sup |F_n^W - F_n|
  int level = 0;
};

// cdf-clt and dkw-tail read the same replications; computed once per process.
CdfStats cdf_statistics(const ExperimentConfig& config, const std::string& density_spec, std::size_t ni) {
  static std::mutex mutex;
  static std::map<std::string, CdfStats> cache;
  const auto n = config.n_grid[ni];
  json key = {config.family, density_spec, n, ni, config.replications, config.seed, config.schedule,
              config.t, config.resolution, config.density_resolution};
  if (config.schedule == "fixed") key.push_back(config.param("j"));
  const std::string k = key.dump();
  {
    std::lock_guard lock(mutex);
    if (auto it = cache.find(k); it != cache.end()) return it->second;
  }
  const auto density = make_zoo_density(density_spec, auto_density_resolution(config));
  const auto ctx = shared_context(config.family, config.resolution);
  const int j = schedule_level(config, n);
  const double root_n = std::sqrt(static_cast<double>(n));
  const auto rows = replicate(config.replications, [&](int rep) {
    const auto sample = sample_density(density, static_cast<std::size_t>(n), replication_seed(config.seed, ni, rep));
    const Estimator est = fit_linear(sample, ctx, j);
    const auto dev = cdf_deviation(est, sample, density);
    return std::vector<double>{root_n * dev.vs_true, root_n * dev.vs_empirical};
  });
  CdfStats stats{column(rows, 0), column(rows, 1), j};
  std::lock_guard lock(mutex);
  cache.emplace(k, stats);
  return stats;
}

}  // namespace

ExperimentReport exp_cdf_clt(const ExperimentConfig& config) {
  auto report = start_report(config);
  std::vector<double> gap_medians;
  json per_n = json::array();
  CdfStats last;
  for (std::size_t ni = 0; ni < config.n_grid.size(); ++ni) {
    const auto n = config.n_grid[ni];
    last = cdf_statistics(config, config.density, ni);
    add_records(report, "sup_vs_F", n, last.level, last.vs_true);
    add_records(report, "sup_vs_Fn", n, last.level, last.vs_empirical);
    gap_medians.push_back(median(last.vs_empirical));
    per_n.push_back({{"n", n},
                     {"j", last.level},
                     {"sup_vs_F", summarize(last.vs_true)},
                     {"sup_vs_Fn", summarize(last.vs_empirical)},
                     {"ks_to_kolmogorov", ks_distance(last.vs_true, kolmogorov_cdf)},
                     {"bias_term", std::sqrt(static_cast<double>(n)) * std::exp2(-last.level * (config.t + 1.0))}});
  }
  report.aggregates["per_n"] = per_n;
  report.aggregates["kolmogorov_median"] = kolmogorov_quantile(0.5);

  const double ks = ks_distance(last.vs_true, kolmogorov_cdf);
  const double ks_tol = config.tolerance("ks");
  add_verdict(report, "kolmogorov-ks", ks <= ks_tol, ks, "<= " + fmt(ks_tol),
              "KS distance of sqrt(n) sup|F_n^W - F| to the Kolmogorov law at n=" + std::to_string(config.n_grid.back()));

  bool decreasing = true;
  for (std::size_t i = 1; i < gap_medians.size(); ++i) decreasing = decreasing && gap_medians[i] < gap_medians[i - 1];
  add_verdict(report, "empirical-gap-decreasing", decreasing, gap_medians.back(), "medians strictly decreasing in n",
              "median sqrt(n) sup|F_n^W - F_n| per n");

  const auto gap_n = static_cast<std::int64_t>(config.params.count("gap_n") ? config.param("gap_n") : 0);
  auto at = std::find(config.n_grid.begin(), config.n_grid.end(), gap_n);
  if (at == config.n_grid.end()) at = config.n_grid.end() - 1;
  const double gap_med = gap_medians[static_cast<std::size_t>(at - config.n_grid.begin())];
  const double gap_tol = config.tolerance("gap_median");
  add_verdict(report, "empirical-gap-median", gap_med <= gap_tol, gap_med, "<= " + fmt(gap_tol),
              "median sqrt(n) sup|F_n^W - F_n| at n=" + std::to_string(*at));

  const std::string alt = config.density == "mixture" ? "normal" : "mixture";
  const auto other = cdf_statistics(config, alt, config.n_grid.size() - 1);
  add_records(report, "sup_vs_F_" + alt, config.n_grid.back(), other.level, other.vs_true);
  const double diff = std::abs(median(last.vs_true) - median(other.vs_true));
  const double df_tol = config.tolerance("distribution_free");
  add_verdict(report, "distribution-free", diff <= df_tol, diff, "<= " + fmt(df_tol),
              "median difference between " + config.density + " and " + alt + "; KS of " + alt + " " +
                  fmt(ks_distance(other.vs_true, kolmogorov_cdf)));
  return report;
}

ExperimentReport exp_dkw_tail(const ExperimentConfig& config) {
  auto report = start_report(config);
  const std::size_t ni = config.n_grid.size() - 1;
  const auto n = config.n_grid[ni];
  const auto stats = cdf_statistics(config, config.density, ni);
  add_records(report, "sup_vs_F", n, stats.level, stats.vs_true);
  auto values = stats.vs_true;
  std::sort(values.begin(), values.end());
  const auto m = values.size();
  auto tail = [&](double lambda) {
    const auto above = values.end() - std::upper_bound(values.begin(), values.end(), lambda);
    return static_cast<double>(above) / static_cast<double>(m);
  };
  const int j = stats.level;
  const double root_n = std::sqrt(static_cast<double>(n));
  const double admissible_lo = config.param("lambda0") *
                          std::max(std::sqrt(j * std::ldexp(1.0, -j)), root_n * std::exp2(-j * (config.t + 1.0)));
  const auto min_exceed = static_cast<std::size_t>(config.param("min_exceedances"));
  const double lo = std::max(admissible_lo, quantile(values, 0.5));
  const double hi = m > min_exceed ? std::min(root_n, values[m - min_exceed - 1]) : 0.0;
  report.aggregates["window"] = {{"admissible_lo", admissible_lo}, {"admissible_hi", root_n}, {"lo", lo}, {"hi", hi}};
  report.aggregates["q90_tail"] = tail(quantile(values, 0.9));

  if (!(hi > lo)) {
    const double needed = std::ceil(static_cast<double>(min_exceed) / std::max(tail(lo), 1.0 / static_cast<double>(m)) * 4.0);
    add_verdict(report, "subgaussian-fit", false, 0.0, "slope < 0, R2 >= " + fmt(config.tolerance("r2")),
                "too few tail exceedances; rerun with replications >= " + fmt(needed));
    return report;
  }
  const int points = static_cast<int>(config.param("points"));
  std::vector<double> lam2, logtail;
  json table = json::array();
  double worst_dkw = 0.0;
  for (int i = 0; i < points; ++i) {
    const double lambda = lo + (hi - lo) * i / (points - 1);
    const double p = tail(lambda);
    lam2.push_back(lambda * lambda);
    logtail.push_back(std::log(p));
    const double dkw = 2.0 * std::exp(-2.0 * lambda * lambda);
    worst_dkw = std::max(worst_dkw, p / dkw);
    table.push_back({{"lambda", lambda}, {"tail", p}, {"dkw", dkw}, {"kolmogorov", 1.0 - kolmogorov_cdf(lambda)}});
  }
  const auto fit = ols(lam2, logtail);
  report.aggregates["regression"] = regression_json(fit);
  report.aggregates["tail_table"] = table;
  const double r2_tol = config.tolerance("r2");
  add_verdict(report, "subgaussian-fit", fit.slope < 0.0 && fit.r2 >= r2_tol, fit.r2,
              "slope < 0 and R2 >= " + fmt(r2_tol), "slope " + fmt(fit.slope) + " +- " + fmt(fit.slope_se) +
                  " over lambda in [" + fmt(lo) + ", " + fmt(hi) + "]");

  const double t075 = tail(0.75), t150 = tail(1.5);
  const double factor = t150 > 0.0 ? t075 / t150 : kInf;
  const double f_tol = config.tolerance("decay_factor");
  add_verdict(report, "decay-factor", factor >= f_tol, factor, ">= " + fmt(f_tol),
              "tail(0.75)/tail(1.5) = " + fmt(t075) + "/" + fmt(t150));
  const double d_tol = config.tolerance("dkw_multiple");
  add_verdict(report, "dkw-comparison", worst_dkw <= d_tol, worst_dkw, "<= " + fmt(d_tol),
              "max over the window of tail(lambda) / (2 exp(-2 lambda^2))");
  return report;
}

ExperimentReport exp_lil(const ExperimentConfig& config) {
  auto report = start_report(config);
  const int dres = auto_density_resolution(config);
  const auto density = make_zoo_density(config.density, dres);
  const auto ctx = shared_context(config.family, config.resolution);
  const auto n_max = static_cast<std::size_t>(config.n_grid.back());
  const auto tail_from = static_cast<std::int64_t>(config.param("tail_from"));

  // one growing sample per seed; each row is the trajectory along n_grid
  const auto rows = replicate(config.replications, [&](int rep) {
    std::mt19937_64 rng(replication_seed(config.seed, 0, rep));
    std::vector<double> u(n_max);
    for (double& v : u) v = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    std::vector<double> x;
    inverse_cdf(density, u, x);
    std::vector<double> traj;
    for (auto n : config.n_grid) {
      const auto sample = make_sample(std::vector<double>(x.begin(), x.begin() + n));
      const Estimator est = fit_linear(sample, ctx, schedule_level(config, n));
      const double dev = cdf_deviation_impl(est, sample, density, false).vs_true;
      const double nn = static_cast<double>(n);
      traj.push_back(std::sqrt(nn / (2.0 * std::log(std::log(nn)))) * dev);
    }
    return traj;
  });
  double overall = 0.0;
  std::vector<double> tail_max;
  json trajectories = json::array();
  for (std::size_t s = 0; s < rows.size(); ++s) {
    double tm = 0.0;
    for (std::size_t i = 0; i < config.n_grid.size(); ++i) {
      const auto n = config.n_grid[i];
      report.records.push_back({"lil", n, static_cast<int>(s), schedule_level(config, n), rows[s][i]});
      overall = std::max(overall, rows[s][i]);
      if (n >= tail_from) tm = std::max(tm, rows[s][i]);
    }
    tail_max.push_back(tm);
    trajectories.push_back(rows[s]);
  }
  std::sort(report.records.begin(), report.records.end(), [](const StatRecord& a, const StatRecord& b) {
    return a.n != b.n ? a.n < b.n : a.replication < b.replication;
  });
  report.aggregates["trajectories"] = trajectories;
  report.aggregates["tail_max_per_seed"] = tail_max;
  report.aggregates["strassen_cap"] = 0.5;
  const double cap = config.tolerance("cap");
  add_verdict(report, "bounded", overall <= cap, overall, "<= " + fmt(cap), "largest value over all seeds and n");
  const double med = median(tail_max);
  const double lo = config.tolerance("tail_lo"), hi = config.tolerance("tail_hi");
  add_verdict(report, "tail-running-max", med >= lo && med <= hi, med, "[" + fmt(lo) + ", " + fmt(hi) + "]",
              "median over seeds of the running max for n >= " + std::to_string(tail_from));
  return report;
}

ExperimentReport exp_threshold_adaptivity(const ExperimentConfig& config) {
  auto report = start_report(config);
  const int dres = auto_density_resolution(config);
  const auto ctx = shared_context(config.family, config.resolution);
  const int T = ctx->b().family().regularity_T;
  const double kappa = config.param("kappa") > 0.0
                           ? config.param("kappa")
                           : default_kappa(ctx->b(), config.param("bound"), config.param("eta"), T);
  report.aggregates["kappa"] = kappa;
  json per_t = json::array();
  for (std::size_t ti = 0; ti < config.t_list.size(); ++ti) {
    const double t = config.t_list[ti];
    const auto density = make_zoo_density(besov_spec_with_t(config.density, t), dres);
    std::vector<double> logn, logerr, ratios;
    double kept_total = 0.0;
    json per_n = json::array();
    for (std::size_t ni = 0; ni < config.n_grid.size(); ++ni) {
      const auto n = config.n_grid[ni];
      const auto lv = threshold_levels(n, T);
      const int j_oracle = choose_j_optimal(n, t);
      const auto grid = sup_grid(ctx->b().family(), std::max(lv.j1, j_oracle), density.support_lo,
                                 density.support_hi, dres);
      const auto pts = grid.points();
      const auto truth = grid_pdf(density, pts);
      const auto stream = (static_cast<std::uint64_t>(ti) << 32) | ni;
      const auto rows = replicate(config.replications, [&](int rep) {
        const auto sample = sample_density(density, static_cast<std::size_t>(n), replication_seed(config.seed, stream, rep));
        const auto hard = fit_threshold(sample, ctx, kappa, T);
        const auto kept = static_cast<double>(hard.kept_count());
        const Estimator h = hard;
        const Estimator oracle = fit_linear(sample, ctx, j_oracle);
        const Estimator coarse = fit_threshold(sample, ctx, kInf, T);
        return std::vector<double>{sup_abs_diff(eval_density(h, pts, Exec::serial), truth),
                                   sup_abs_diff(eval_density(oracle, pts, Exec::serial), truth),
                                   sup_abs_diff(eval_density(coarse, pts, Exec::serial), truth), kept};
      });
      const std::string tag = "_t=" + fmt(t);
      const auto eh = column(rows, 0), eo = column(rows, 1), ec = column(rows, 2), kept = column(rows, 3);
      add_records(report, "sup_error_threshold" + tag, n, lv.j1, eh);
      add_records(report, "sup_error_oracle" + tag, n, j_oracle, eo);
      add_records(report, "sup_error_kappa_inf" + tag, n, lv.j0, ec);
      add_records(report, "kept" + tag, n, lv.j1, kept);
      logn.push_back(std::log(static_cast<double>(n)));
      logerr.push_back(std::log(mean(eh)));
      ratios.push_back(mean(eh) / mean(eo));
      kept_total += mean(kept);
      per_n.push_back({{"n", n}, {"j0", lv.j0}, {"j1", lv.j1}, {"j_oracle", j_oracle},
                       {"threshold", summarize(eh)}, {"oracle", summarize(eo)}, {"kappa_inf", summarize(ec)},
                       {"mean_kept", mean(kept)}, {"grid", grid_json(grid)}});
    }
    const auto fit = ols(logn, logerr);
    const double target = -t / (2.0 * t + 1.0);
    const double tol = config.tolerance("slope");
    add_verdict(report, "slope-t=" + fmt(t), std::abs(fit.slope - target) <= tol, fit.slope,
                fmt(target) + " +- " + fmt(tol),
                "same kappa for every t, se " + fmt(fit.slope_se) + ", mean kept details summed over n " + fmt(kept_total));
    const double worst = *std::max_element(ratios.begin(), ratios.end());
    const double rtol = config.tolerance("ratio");
    add_verdict(report, "oracle-ratio-t=" + fmt(t), worst <= rtol, worst, "<= " + fmt(rtol),
                "max over n of mean threshold error / mean oracle linear error");
    per_t.push_back({{"t", t}, {"density", density.description}, {"regression", regression_json(fit)},
                     {"ratios", ratios}, {"per_n", per_n}});
  }
  report.aggregates["per_t"] = per_t;

  // cdf of the thresholded estimator against the Kolmogorov law
  const double t = config.t_list.back();
  const auto density = make_zoo_density(besov_spec_with_t(config.density, t), dres);
  const auto n = static_cast<std::int64_t>(config.param("ks_n"));
  const int reps = static_cast<int>(config.param("ks_replications"));
  const double root_n = std::sqrt(static_cast<double>(n));
  const auto stream = std::uint64_t{1} << 40;
  const auto rows = replicate(reps, [&](int rep) {
    const auto sample = sample_density(density, static_cast<std::size_t>(n), replication_seed(config.seed, stream, rep));
    const Estimator h = fit_threshold(sample, ctx, kappa, T);
    return std::vector<double>{root_n * cdf_deviation_impl(h, sample, density, false).vs_true};
  });
  const auto stat = column(rows, 0);
  const auto lv = threshold_levels(n, T);
  add_records(report, "cdf_sup_threshold_t=" + fmt(t), n, lv.j0, stat);
  const double ks = ks_distance(stat, kolmogorov_cdf);
  const double ks_tol = config.tolerance("ks");
  report.aggregates["cdf"] = {{"n", n}, {"t", t}, {"j0", lv.j0}, {"j1", lv.j1}, {"stat", summarize(stat)}, {"ks", ks}};
  add_verdict(report, "cdf-kolmogorov-ks", ks <= ks_tol, ks, "<= " + fmt(ks_tol),
              "KS of sqrt(n) sup|F_n^H - F| to the Kolmogorov law at n=" + std::to_string(n) + ", t=" + fmt(t));
  return report;
}

namespace {

struct TestFunction {
  std::string name;
  std::variant<StepFunction, DyadicTable> f;
  double mean = 0.0;      // P f
  double variance = 0.0;  // Var_P f
  bool constant = false;

  double operator()(double x) const {
    if (const auto* s = std::get_if<StepFunction>(&f)) return (*s)(x);
    return std::get<DyadicTable>(f).interpolate(x);
  }
};

void step_moments(TestFunction& tf, const DensityModel& d) {
  const auto& s = std::get<StepFunction>(tf.f);
  double m1 = 0.0, m2 = 0.0, prev = 0.0;
  for (std::size_t i = 0; i < s.values.size(); ++i) {
    const double upto = i < s.breaks.size() ? d.cdf(s.breaks[i]) : 1.0;
    const double mass = upto - prev;
    m1 += s.values[i] * mass;
    m2 += s.values[i] * s.values[i] * mass;
    prev = upto;
  }
  tf.mean = m1;
  tf.variance = std::max(0.0, m2 - m1 * m1);
}

void table_moments(TestFunction& tf, const DensityModel& d) {
  const auto& g = d.grid;
  std::vector<double> f1(g.size()), f2(g.size());
  for (std::size_t m = 0; m < g.size(); ++m) {
    const double fx = tf(g.abscissa(m));
    f1[m] = fx * g.values[m];
    f2[m] = fx * fx * g.values[m];
  }
  tf.mean = trapezoid(f1, g.spacing());
  tf.variance = std::max(0.0, trapezoid(f2, g.spacing()) - tf.mean * tf.mean);
}

}  // namespace

ExperimentReport exp_functional_clt(const ExperimentConfig& config) {
  auto report = start_report(config);
  const int dres = auto_density_resolution(config);
  const auto density = make_zoo_density(config.density, dres);
  const auto ctx = shared_context(config.family, config.resolution);

  std::vector<TestFunction> fs;
  fs.push_back({"constant", StepFunction{{}, {1.0}}, 0, 0, true});
  double lo = density.support_lo, hi = density.support_hi;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (density.cdf(mid) < 0.5 ? lo : hi) = mid;
  }
  const double median_x = 0.5 * (lo + hi);
  fs.push_back({"indicator_median", indicator_below(median_x)});
  fs.push_back({"indicator_low", indicator_below(median_x - 1.0)});
  // sup + variation = 0.3 + 0.65 <= 1
  fs.push_back({"three_steps", StepFunction{{median_x - 1.0, median_x + 0.5, median_x + 1.5}, {0.0, 0.3, 0.1, 0.25}}});
  {
    // smooth bump on (m-1, m+1), scaled to unit Besov norm
    const int r = 14;
    const double origin = median_x - 1.0;
    const std::size_t count = (std::size_t{1} << (r + 1)) + 1;
    std::vector<double> v(count, 0.0);
    for (std::size_t m = 1; m + 1 < count; ++m) {
      const double u = std::ldexp(static_cast<double>(m), -r) - 1.0;
      v[m] = std::exp(-1.0 / (1.0 - u * u));
    }
    DyadicTable bump(r, origin, std::move(v), FunctionTag::generic);
    const double s = config.param("bump_s");
    const auto norm = besov_norm(bump, ctx->b(), s, 2.0, 2.0);
    if (norm.divergent || !(norm.value > 0.0))
      throw Error(ErrorKind::numerical_failure, "bump Besov norm not finite");
    for (double& x : bump.values) x *= 0.99 / norm.value;
    const auto check = besov_norm(bump, ctx->b(), s, 2.0, 2.0);
    report.aggregates["bump_besov_norm"] = {{"s", s}, {"p", 2}, {"q", 2}, {"value", check.value}};
    add_verdict(report, "bump-besov-norm", !check.divergent && check.value <= 1.0, check.value, "<= 1",
                "B^s_22 norm of the smooth test function, s=" + fmt(s));
    fs.push_back({"bump", std::move(bump)});
  }
  for (auto& tf : fs) {
    if (std::holds_alternative<StepFunction>(tf.f)) step_moments(tf, density);
    else table_moments(tf, density);
  }

  const std::size_t nf = fs.size();
  json per_f = json::object();
  for (const auto& tf : fs) per_f[tf.name] = {{"mean", tf.mean}, {"variance", tf.variance}, {"per_n", json::array()}};
  std::vector<std::vector<double>> last_gap(nf), last_clt(nf), first_gap(nf);
  for (std::size_t ni = 0; ni < config.n_grid.size(); ++ni) {
    const auto n = config.n_grid[ni];
    const int j = schedule_level(config, n);
    const double root_n = std::sqrt(static_cast<double>(n));
    const auto rows = replicate(config.replications, [&](int rep) {
      const auto sample = sample_density(density, static_cast<std::size_t>(n), replication_seed(config.seed, ni, rep));
      const Estimator est = fit_linear(sample, ctx, j);
      std::vector<double> out;
      for (const auto& tf : fs) {
        const double pw = std::visit([&](const auto& f) { return integrate_against(est, f); }, tf.f);
        double pn = 0.0;
        for (double x : sample.observations) pn += tf(x);
        pn /= static_cast<double>(n);
        out.push_back(root_n * std::abs(pw - pn));
        out.push_back(root_n * (pw - tf.mean));
      }
      return out;
    });
    for (std::size_t fi = 0; fi < nf; ++fi) {
      const auto gap = column(rows, 2 * fi), clt = column(rows, 2 * fi + 1);
      add_records(report, "gap_" + fs[fi].name, n, j, gap);
      add_records(report, "clt_" + fs[fi].name, n, j, clt);
      per_f[fs[fi].name]["per_n"].push_back({{"n", n}, {"j", j}, {"gap", summarize(gap)}, {"clt_mean", mean(clt)},
                                             {"clt_variance", variance(clt)},
                                             {"clt_kurtosis", fs[fi].constant ? 0.0 : kurtosis(clt)}});
      if (ni == 0) first_gap[fi] = gap;
      last_gap[fi] = gap;
      last_clt[fi] = clt;
    }
  }
  report.aggregates["functions"] = per_f;

  const auto n = config.n_grid.back();
  const double gap_tol = config.tolerance("gap"), var_tol = config.tolerance("variance");
  const double k_lo = config.tolerance("kurtosis_lo"), k_hi = config.tolerance("kurtosis_hi");
  for (std::size_t fi = 0; fi < nf; ++fi) {
    const auto& tf = fs[fi];
    if (tf.constant) {
      double worst = 0.0;
      for (double v : last_clt[fi]) worst = std::max(worst, std::abs(v));
      const double c_tol = config.tolerance("constant");
      add_verdict(report, "constant-null", worst <= c_tol, worst, "<= " + fmt(c_tol),
                  "max |sqrt(n)(P_n^W - P)1| at n=" + std::to_string(n));
      continue;
    }
    const double g = median(last_gap[fi]);
    add_verdict(report, "gap-" + tf.name, g <= gap_tol && g < median(first_gap[fi]), g, "<= " + fmt(gap_tol),
                "median sqrt(n)|(P_n^W - P_n)f| at n=" + std::to_string(n) + ", decreasing from " +
                    fmt(median(first_gap[fi])));
    const double ratio = variance(last_clt[fi]) / tf.variance;
    add_verdict(report, "variance-" + tf.name, std::abs(ratio - 1.0) <= var_tol, ratio, "1 +- " + fmt(var_tol),
                "Var of sqrt(n)(P_n^W - P)f over Var_P f = " + fmt(tf.variance));
    const double k = kurtosis(last_clt[fi]);
    add_verdict(report, "kurtosis-" + tf.name, k >= k_lo && k <= k_hi, k, "[" + fmt(k_lo) + ", " + fmt(k_hi) + "]");
  }
  return report;
}

ExperimentReport exp_bias_decay(const ExperimentConfig& config) {
  auto report = start_report(config);
  const int dres = auto_density_resolution(config);
  const auto density = make_zoo_density(config.density, dres);
  const auto ctx = shared_context(config.family, config.resolution);
  const auto curve = bias_curve(density, *ctx, config.levels.front(), config.levels.back());
  for (const auto& r : curve.records) report.records.push_back({"bias", 0, 0, r.j, r.bias});
  json per_j = json::array();
  for (const auto& r : curve.records) per_j.push_back({{"j", r.j}, {"bias", r.bias}});
  report.aggregates["per_level"] = per_j;
  report.aggregates["slope"] = curve.slope;
  report.aggregates["density"] = density.description;
  if (density.smoothness_t) {
    const double t = *density.smoothness_t;
    const double tol = config.tolerance("slope");
    add_verdict(report, "bias-slope", std::abs(curve.slope + t) <= tol, curve.slope, fmt(-t) + " +- " + fmt(tol),
                "log2 sup|K_j p0 - p0| on j");
  } else {
    const double bound = config.param("max_slope");
    add_verdict(report, "bias-slope", curve.slope <= bound, curve.slope, "<= " + fmt(bound),
                "log2 sup|K_j p0 - p0| on j");
  }
  return report;
}

ExperimentReport run_experiment(const ExperimentConfig& config) {
  const auto problems = validate(config);
  if (!problems.empty()) {
    std::string msg = std::to_string(problems.size()) + " problem(s):";
    for (const auto& p : problems) msg += "\n  - " + p;
    throw Error(ErrorKind::config, msg);
  }
  const auto& id = config.experiment_id;
  if (id == "law-of-logarithm") return exp_law_of_logarithm(config);
  if (id == "supnorm-rate") return exp_supnorm_rate(config);
  if (id == "coefficient-scaling") return exp_coefficient_scaling(config);
  if (id == "cdf-clt") return exp_cdf_clt(config);
  if (id == "dkw-tail") return exp_dkw_tail(config);
  if (id == "lil") return exp_lil(config);
  if (id == "threshold-adaptivity") return exp_threshold_adaptivity(config);
  if (id == "functional-clt") return exp_functional_clt(config);
  return exp_bias_decay(config);
}

// ---- output ----

std::string records_csv(const ExperimentReport& report) {
  std::string out;
  out += "# experiment=" + report.experiment_id + "\n";
  out += "# seed=" + std::to_string(report.seed) + "\n";
  out += "# config_hash=" + report.config_hash + "\n";
  out += "# config=" + report.config.dump() + "\n";
  out += "series,n,replication,level,value\n";
  for (const auto& r : report.records) {
    out += r.series + "," + std::to_string(r.n) + "," + std::to_string(r.replication) + "," + std::to_string(r.level) +
           "," + format_double(r.value) + "\n";
  }
  return out;
}

std::pair<std::filesystem::path, std::filesystem::path> write_report(const ExperimentReport& report,
                                                                     const std::filesystem::path& dir) {
  const auto csv = dir / (report.experiment_id + ".csv");
  const auto js = dir / (report.experiment_id + ".json");
  write_text_atomic(csv, records_csv(report));
  write_text_atomic(js, report.summary().dump(2) + "\n");
  return {csv, js};
}

}  // namespace wde::mc
