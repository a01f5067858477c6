#include "wde/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "wde/error.hpp"
#include "wde/hash.hpp"

namespace wde {

namespace {

double log2_n_over_ln(std::int64_t n) {
  if (n < 2) throw Error(ErrorKind::invalid_argument, "schedule needs n >= 2");
  const auto x = static_cast<double>(n);
  return std::log2(x / std::log(x));
}

double root_scale(int level) { return std::sqrt(std::ldexp(1.0, level)); }

std::vector<double> prefix_sums(const std::vector<double>& v) {
  std::vector<double> out(v.size() + 1, 0.0);
  for (std::size_t i = 0; i < v.size(); ++i) out[i + 1] = out[i] + v[i];
  return out;
}

double sparse_lookup(const SparseLevel& level, std::int64_t k) {
  const auto it = std::lower_bound(level.keys.begin(), level.keys.end(), k);
  if (it == level.keys.end() || *it != k) return 0.0;
  return level.values[static_cast<std::size_t>(it - level.keys.begin())];
}

// sum_k c_k I(2^level s - k) for the dense alpha table, I the phi primitive.
double alpha_cdf_part(const LevelCoefficients& alpha, const std::vector<double>& prefix,
                      const WaveletBasis& basis, double s) {
  const auto& sup = basis.family().support_phi;
  const double u = std::ldexp(s, alpha.level);
  const auto full_last = static_cast<std::int64_t>(std::floor(u - sup.hi));
  const auto window_last = static_cast<std::int64_t>(std::ceil(u - sup.lo)) - 1;
  const std::int64_t count = static_cast<std::int64_t>(alpha.values.size());
  const std::int64_t upto = std::clamp<std::int64_t>(full_last - alpha.first + 1, 0, count);
  double sum = prefix[static_cast<std::size_t>(upto)] * basis.phi_integral(sup.hi);
  for (std::int64_t k = std::max(full_last + 1, alpha.first); k <= std::min(window_last, alpha.last()); ++k)
    sum += alpha.values[static_cast<std::size_t>(k - alpha.first)] * basis.phi_integral(u - static_cast<double>(k));
  return sum / root_scale(alpha.level);
}

double beta_cdf_part(const SparseLevel& beta, const std::vector<double>& prefix, const WaveletBasis& basis,
                     double s) {
  if (beta.keys.empty()) return 0.0;
  const auto& sup = basis.family().support_psi;
  const double u = std::ldexp(s, beta.level);
  const auto full_last = static_cast<std::int64_t>(std::floor(u - sup.hi));
  const auto window_last = static_cast<std::int64_t>(std::ceil(u - sup.lo)) - 1;
  const auto begin = std::upper_bound(beta.keys.begin(), beta.keys.end(), full_last);
  const auto upto = static_cast<std::size_t>(begin - beta.keys.begin());
  double sum = prefix[upto] * basis.psi_integral(sup.hi);
  for (auto it = begin; it != beta.keys.end() && *it <= window_last; ++it)
    sum += beta.values[static_cast<std::size_t>(it - beta.keys.begin())] *
           basis.psi_integral(u - static_cast<double>(*it));
  return sum / root_scale(beta.level);
}

}  // namespace

int choose_j_optimal(std::int64_t n, double t) {
  if (!(t > 0.0)) throw Error(ErrorKind::invalid_argument, "smoothness must be positive");
  const double v = log2_n_over_ln(n) / (2.0 * t + 1.0);
  return std::max(0, static_cast<int>(std::lround(v)));
}

int choose_j_fine(std::int64_t n) {
  return std::max(0, static_cast<int>(std::ceil(log2_n_over_ln(n))));
}

int choose_j_plugin(std::int64_t n) {
  if (n < 3) throw Error(ErrorKind::invalid_argument, "plug-in schedule needs n >= 3");
  const auto x = static_cast<double>(n);
  const double l = std::log(x);
  return std::max(0, static_cast<int>(std::lround(std::log2(x / (l * l)))));
}

ThresholdLevels threshold_levels(std::int64_t n, int T) {
  if (n < 8) throw Error(ErrorKind::degenerate_schedule, "thresholding needs n >= 8");
  if (T < 0) throw Error(ErrorKind::invalid_argument, "negative regularity");
  ThresholdLevels lv;
  lv.j0 = std::max(0, static_cast<int>(std::lround(log2_n_over_ln(n) / (2.0 * (T + 1) + 1.0))));
  lv.j1 = choose_j_fine(n);
  if (lv.j0 >= lv.j1)
    throw Error(ErrorKind::degenerate_schedule,
                "j0=" + std::to_string(lv.j0) + " >= j1=" + std::to_string(lv.j1) + " at n=" + std::to_string(n));
  return lv;
}

double ThresholdEstimator::tau(int l) const {
  if (zero_threshold) return 0.0;
  if (std::isinf(kappa)) return kappa;
  return kappa * std::sqrt(static_cast<double>(l) / static_cast<double>(n));
}

std::size_t ThresholdEstimator::kept_count() const {
  std::size_t c = 0;
  for (const auto& lv : kept_beta) c += lv.size();
  return c;
}

void finalize(LinearEstimator& est) { est.alpha_prefix = prefix_sums(est.alpha.values); }

void finalize(ThresholdEstimator& est) {
  est.alpha_prefix = prefix_sums(est.alpha.values);
  est.beta_prefix.clear();
  for (const auto& lv : est.kept_beta) est.beta_prefix.push_back(prefix_sums(lv.values));
}

LinearEstimator fit_linear(const Sample& sample, ContextPtr ctx, int j, Exec exec) {
  if (!ctx) throw Error(ErrorKind::invalid_argument, "null kernel context");
  if (j < 0) throw Error(ErrorKind::invalid_argument, "negative level");
  LinearEstimator est;
  est.alpha = empirical_alpha(sample, ctx->b(), j, exec);
  est.ctx = std::move(ctx);
  est.j = j;
  est.n = static_cast<std::int64_t>(sample.n());
  est.seed_provenance = sample.seed_provenance;
  finalize(est);
  return est;
}

ThresholdEstimator fit_threshold(const Sample& sample, ContextPtr ctx, double kappa, int T,
                                 ThresholdOptions options, Exec exec) {
  if (!ctx) throw Error(ErrorKind::invalid_argument, "null kernel context");
  if (!(kappa > 0.0)) throw Error(ErrorKind::invalid_argument, "kappa must be positive");
  const auto n = static_cast<std::int64_t>(sample.n());
  ThresholdLevels lv;
  if (options.j0 >= 0 && options.j1 >= 0) {
    lv = {options.j0, options.j1};
    if (lv.j0 >= lv.j1) throw Error(ErrorKind::degenerate_schedule, "j0 >= j1");
  } else {
    lv = threshold_levels(n, T);
  }
  ThresholdEstimator est;
  est.j0 = lv.j0;
  est.j1 = lv.j1;
  est.kappa = kappa;
  est.zero_threshold = options.zero_threshold;
  est.n = n;
  est.seed_provenance = sample.seed_provenance;
  est.alpha = empirical_alpha(sample, ctx->b(), lv.j0, exec);
  for (int l = lv.j0; l < lv.j1; ++l) {
    const auto beta = empirical_beta(sample, ctx->b(), l, exec);
    const double tau = est.tau(l);
    SparseLevel kept;
    kept.level = l;
    for (std::size_t i = 0; i < beta.values.size(); ++i) {
      const double b = beta.values[i];
      if (b == 0.0) continue;
      ++est.candidates;
      if (std::abs(b) > tau) {
        kept.keys.push_back(beta.first + static_cast<std::int64_t>(i));
        kept.values.push_back(b);
      }
    }
    est.kept_beta.push_back(std::move(kept));
  }
  est.ctx = std::move(ctx);
  finalize(est);
  return est;
}

double eval_density(const LinearEstimator& est, double y) { return synthesize_alpha(est.alpha, est.ctx->b(), y); }

double eval_density(const ThresholdEstimator& est, double y) {
  const auto& basis = est.ctx->b();
  double s = synthesize_alpha(est.alpha, basis, y);
  for (const auto& lv : est.kept_beta) {
    if (lv.keys.empty()) continue;
    double d = 0.0;
    basis.for_each_psi(y, lv.level, [&](std::int64_t k, double v) {
      if (v != 0.0) d += sparse_lookup(lv, k) * v;
    });
    s += d * root_scale(lv.level);
  }
  return s;
}

double eval_density(const Estimator& est, double y) {
  return std::visit([y](const auto& e) { return eval_density(e, y); }, est);
}

std::vector<double> eval_density(const Estimator& est, std::span<const double> points, Exec exec) {
  std::vector<double> out(points.size());
  const auto n = static_cast<std::int64_t>(points.size());
#pragma omp parallel for schedule(static) if (exec == Exec::parallel)
  for (std::int64_t i = 0; i < n; ++i)
    out[static_cast<std::size_t>(i)] = eval_density(est, points[static_cast<std::size_t>(i)]);
  return out;
}

double eval_by_kernel(const KernelContext& ctx, const Sample& sample, int j, double y) {
  double s = 0.0;
  for (double x : sample.observations) s += kernel_Kj(ctx, j, y, x);
  return s / static_cast<double>(sample.n());
}

double cdf(const LinearEstimator& est, double s) {
  return alpha_cdf_part(est.alpha, est.alpha_prefix, est.ctx->b(), s);
}

double cdf(const ThresholdEstimator& est, double s) {
  const auto& basis = est.ctx->b();
  double v = alpha_cdf_part(est.alpha, est.alpha_prefix, basis, s);
  for (std::size_t i = 0; i < est.kept_beta.size(); ++i)
    v += beta_cdf_part(est.kept_beta[i], est.beta_prefix[i], basis, s);
  return v;
}

double cdf(const Estimator& est, double s) {
  return std::visit([s](const auto& e) { return cdf(e, s); }, est);
}

std::vector<double> cdf(const Estimator& est, std::span<const double> points, Exec exec) {
  std::vector<double> out(points.size());
  const auto n = static_cast<std::int64_t>(points.size());
#pragma omp parallel for schedule(static) if (exec == Exec::parallel)
  for (std::int64_t i = 0; i < n; ++i) out[static_cast<std::size_t>(i)] = cdf(est, points[static_cast<std::size_t>(i)]);
  return out;
}

double total_mass(const Estimator& est) {
  return std::visit(
      [](const auto& e) {
        const auto& basis = e.ctx->b();
        double m = e.alpha_prefix.back() * basis.phi_integral(basis.family().support_phi.hi) /
                   root_scale(e.alpha.level);
        if constexpr (std::is_same_v<std::decay_t<decltype(e)>, ThresholdEstimator>) {
          const double end = basis.psi_integral(basis.family().support_psi.hi);
          for (std::size_t i = 0; i < e.kept_beta.size(); ++i)
            m += e.beta_prefix[i].back() * end / root_scale(e.kept_beta[i].level);
        }
        return m;
      },
      est);
}

double StepFunction::operator()(double x) const {
  const auto it = std::lower_bound(breaks.begin(), breaks.end(), x);
  return values[static_cast<std::size_t>(it - breaks.begin())];
}

double StepFunction::total_variation() const {
  double tv = 0.0;
  for (std::size_t i = 1; i < values.size(); ++i) tv += std::abs(values[i] - values[i - 1]);
  return tv;
}

StepFunction indicator_below(double s) { return StepFunction{{s}, {1.0, 0.0}}; }

double integrate_against(const Estimator& est, const StepFunction& f) {
  if (f.values.size() != f.breaks.size() + 1)
    throw Error(ErrorKind::invalid_argument, "step function needs one more value than breaks");
  if (!std::is_sorted(f.breaks.begin(), f.breaks.end()))
    throw Error(ErrorKind::invalid_argument, "step function breaks must be sorted");
  const double mass = total_mass(est);
  if (f.breaks.empty()) return f.values[0] * mass;
  double prev = cdf(est, f.breaks[0]);
  double s = f.values[0] * prev;
  for (std::size_t i = 1; i < f.breaks.size(); ++i) {
    const double next = cdf(est, f.breaks[i]);
    s += f.values[i] * (next - prev);
    prev = next;
  }
  return s + f.values.back() * (mass - prev);
}

double integrate_against(const Estimator& est, const DyadicTable& f) {
  std::vector<double> points(f.size());
  for (std::size_t m = 0; m < f.size(); ++m) points[m] = f.abscissa(m);
  const auto p = eval_density(est, points, Exec::serial);
  std::vector<double> product(f.size());
  for (std::size_t m = 0; m < f.size(); ++m) product[m] = p[m] * f.values[m];
  return DyadicTable(f.resolution, f.origin, std::move(product), FunctionTag::generic, f.step).integral();
}

int level_of(const Estimator& est) {
  if (const auto* lin = std::get_if<LinearEstimator>(&est)) return lin->j;
  return std::get<ThresholdEstimator>(est).j1;
}

const KernelContext& context_of(const Estimator& est) {
  return *std::visit([](const auto& e) -> const ContextPtr& { return e.ctx; }, est);
}

double sup_deviation_statistic(std::span<const double> estimate, std::span<const double> reference,
                               std::span<const double> normalizer) {
  if (estimate.size() != reference.size() || (!normalizer.empty() && normalizer.size() != estimate.size()))
    throw Error(ErrorKind::invalid_argument, "statistic inputs differ in length");
  double best = 0.0;
  for (std::size_t i = 0; i < estimate.size(); ++i) {
    double d = std::abs(estimate[i] - reference[i]);
    if (!normalizer.empty()) d /= normalizer[i];
    best = std::max(best, d);
  }
  return best;
}

double sup_deviation_statistic(const Estimator& est, const DyadicTable& reference, bool normalized) {
  const int j = level_of(est);
  if (reference.resolution < j + 4)
    throw Error(ErrorKind::resolution, "reference grid spacing exceeds 2^-(j+4)");
  if (normalized && !std::holds_alternative<LinearEstimator>(est))
    throw Error(ErrorKind::invalid_argument, "normalized statistic is defined for the linear estimator");
  std::vector<double> points(reference.size());
  for (std::size_t m = 0; m < points.size(); ++m) points[m] = reference.abscissa(m);
  const auto values = eval_density(est, points, Exec::serial);
  std::vector<double> norm;
  if (normalized) {
    const auto& ctx = context_of(est);
    norm.resize(points.size());
    for (std::size_t m = 0; m < points.size(); ++m) norm[m] = std::sqrt(norm_squared(ctx, std::ldexp(points[m], j)));
  }
  return sup_deviation_statistic(values, reference.values, norm);
}

double kappa_constant(double kappa, double psi_l2, double psi_sup, double sup_norm_bound) {
  const double lin = 8.0 / (3.0 * std::sqrt(std::numbers::ln2)) * kappa * psi_sup;
  return kappa * kappa / (8.0 * psi_l2 * psi_l2 * sup_norm_bound + lin);
}

double default_kappa(const WaveletBasis& basis, double sup_norm_bound, double eta, int T, double step) {
  if (!(sup_norm_bound > 0.0) || !(eta > 0.0) || !(step > 0.0))
    throw Error(ErrorKind::invalid_argument, "default_kappa needs positive bound, eta and step");
  const double target = (T + 3) * (1.0 + 1.0 / eta) * std::numbers::ln2;
  for (std::int64_t i = 1; i < (std::int64_t{1} << 40); ++i) {
    const double kappa = static_cast<double>(i) * step;
    if (kappa_constant(kappa, basis.psi_l2_norm(), basis.psi_sup_norm(), sup_norm_bound) >= target) return kappa;
  }
  throw Error(ErrorKind::numerical_failure, "kappa search exhausted");
}

double plugin_kappa(const Sample& sample, ContextPtr ctx, double eta, int T) {
  const auto est = fit_linear(sample, ctx, choose_j_plugin(static_cast<std::int64_t>(sample.n())));
  const auto grid = sup_grid(ctx->b().family(), est.j, sample.observations.front(), sample.observations.back());
  const auto points = grid.points();
  double bound = 0.0;
  for (double y : points) bound = std::max(bound, eval_density(est, y));
  return default_kappa(ctx->b(), bound, eta, T);
}

// ---- serialization ----

namespace {

nlohmann::json level_json(int level, std::int64_t first, const std::vector<double>& values) {
  nlohmann::json keys = nlohmann::json::array();
  nlohmann::json vals = nlohmann::json::array();
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (values[i] == 0.0) continue;
    keys.push_back(first + static_cast<std::int64_t>(i));
    vals.push_back(values[i]);
  }
  return {{"level", level}, {"keys", keys}, {"values", vals}};
}

LevelCoefficients dense_from_json(const nlohmann::json& j) {
  LevelCoefficients out;
  out.level = j.at("level").get<int>();
  const auto keys = j.at("keys").get<std::vector<std::int64_t>>();
  const auto vals = j.at("values").get<std::vector<double>>();
  if (keys.size() != vals.size()) throw Error(ErrorKind::parse, "coefficient keys and values differ in length");
  if (keys.empty()) return out;
  if (!std::is_sorted(keys.begin(), keys.end())) throw Error(ErrorKind::parse, "coefficient keys not sorted");
  out.first = keys.front();
  if (keys.back() - keys.front() + 1 > kMaxLevelKeys) throw Error(ErrorKind::parse, "coefficient key range too wide");
  out.values.assign(static_cast<std::size_t>(keys.back() - keys.front() + 1), 0.0);
  for (std::size_t i = 0; i < keys.size(); ++i) out.values[static_cast<std::size_t>(keys[i] - out.first)] = vals[i];
  return out;
}

nlohmann::json kappa_json(double kappa) {
  if (std::isinf(kappa)) return "inf";
  return kappa;
}

double kappa_from_json(const nlohmann::json& j) {
  if (j.is_string()) {
    if (j.get<std::string>() == "inf") return std::numeric_limits<double>::infinity();
    throw Error(ErrorKind::parse, "kappa must be a number or the string inf");
  }
  return j.get<double>();
}

}  // namespace

nlohmann::json to_json(const Estimator& est) {
  nlohmann::json doc;
  doc["format"] = "wde-estimator";
  doc["version"] = kEstimatorFormatVersion;
  const auto& ctx = context_of(est);
  doc["family"] = ctx.b().family().name;
  doc["resolution"] = ctx.b().resolution();
  if (const auto* lin = std::get_if<LinearEstimator>(&est)) {
    doc["kind"] = "linear";
    doc["n"] = lin->n;
    doc["seed_provenance"] = lin->seed_provenance;
    doc["j"] = lin->j;
    doc["alpha"] = level_json(lin->j, lin->alpha.first, lin->alpha.values);
  } else {
    const auto& th = std::get<ThresholdEstimator>(est);
    doc["kind"] = "threshold";
    doc["n"] = th.n;
    doc["seed_provenance"] = th.seed_provenance;
    doc["j0"] = th.j0;
    doc["j1"] = th.j1;
    doc["kappa"] = kappa_json(th.kappa);
    doc["zero_threshold"] = th.zero_threshold;
    doc["candidates"] = th.candidates;
    doc["alpha"] = level_json(th.j0, th.alpha.first, th.alpha.values);
    nlohmann::json beta = nlohmann::json::array();
    for (const auto& lv : th.kept_beta) {
      nlohmann::json keys(lv.keys);
      nlohmann::json vals(lv.values);
      beta.push_back({{"level", lv.level}, {"keys", keys}, {"values", vals}});
    }
    doc["kept_beta"] = beta;
  }
  return doc;
}

Estimator estimator_from_json(const nlohmann::json& doc) {
  try {
    if (doc.value("format", std::string()) != "wde-estimator")
      throw Error(ErrorKind::parse, "not an estimator document");
    const int version = doc.at("version").get<int>();
    if (version != kEstimatorFormatVersion)
      throw Error(ErrorKind::version_mismatch, "estimator document version " + std::to_string(version) +
                                                   ", expected " + std::to_string(kEstimatorFormatVersion));
    auto ctx = shared_context(doc.at("family").get<std::string>(), doc.at("resolution").get<int>());
    const auto kind = doc.at("kind").get<std::string>();
    if (kind == "linear") {
      LinearEstimator est;
      est.ctx = ctx;
      est.j = doc.at("j").get<int>();
      est.n = doc.at("n").get<std::int64_t>();
      est.seed_provenance = doc.value("seed_provenance", std::string());
      est.alpha = dense_from_json(doc.at("alpha"));
      est.alpha.level = est.j;
      finalize(est);
      return est;
    }
    if (kind == "threshold") {
      ThresholdEstimator est;
      est.ctx = ctx;
      est.j0 = doc.at("j0").get<int>();
      est.j1 = doc.at("j1").get<int>();
      est.kappa = kappa_from_json(doc.at("kappa"));
      est.zero_threshold = doc.value("zero_threshold", false);
      est.candidates = doc.value("candidates", std::size_t{0});
      est.n = doc.at("n").get<std::int64_t>();
      est.seed_provenance = doc.value("seed_provenance", std::string());
      est.alpha = dense_from_json(doc.at("alpha"));
      est.alpha.level = est.j0;
      for (const auto& lv : doc.at("kept_beta")) {
        SparseLevel s;
        s.level = lv.at("level").get<int>();
        s.keys = lv.at("keys").get<std::vector<std::int64_t>>();
        s.values = lv.at("values").get<std::vector<double>>();
        if (s.keys.size() != s.values.size() || !std::is_sorted(s.keys.begin(), s.keys.end()))
          throw Error(ErrorKind::parse, "malformed kept_beta level");
        est.kept_beta.push_back(std::move(s));
      }
      finalize(est);
      return est;
    }
    throw Error(ErrorKind::parse, "unknown estimator kind '" + kind + "'");
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::parse, std::string("estimator document: ") + e.what());
  }
}

std::string estimator_hash(const Estimator& est) { return hex64(fnv1a64(to_json(est).dump())); }

}  // namespace wde
