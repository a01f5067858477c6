#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "wde/coefficients.hpp"
#include "wde/projection_kernel.hpp"

namespace wde {

// ---- level schedules (natural logs throughout) ----

/// round(log2((n / ln n)^{1/(2t+1)})), at least 0.
int choose_j_optimal(std::int64_t n, double t);
/// ceil(log2(n / ln n)): the top of the thresholding sandwich, also the CDF schedule.
int choose_j_fine(std::int64_t n);
/// round(log2(n / (ln n)^2)), the plug-in level for the sup-norm bound.
int choose_j_plugin(std::int64_t n);

struct ThresholdLevels {
  int j0 = 0;
  int j1 = 0;  // exclusive
};
/// j0 = round(log2((n/ln n)^{1/(2(T+1)+1)})), j1 = choose_j_fine(n).
/// Throws degenerate_schedule when j0 >= j1 or n < 8.
ThresholdLevels threshold_levels(std::int64_t n, int T);

// ---- estimators ----

struct LinearEstimator {
  ContextPtr ctx;
  int j = 0;
  LevelCoefficients alpha;
  std::int64_t n = 0;
  std::string seed_provenance;
  std::vector<double> alpha_prefix;  // alpha_prefix[i] = sum of the first i alphas
};

struct ThresholdEstimator {
  ContextPtr ctx;
  int j0 = 0;
  int j1 = 0;
  double kappa = 0.0;
  bool zero_threshold = false;  // test hook: tau = 0
  LevelCoefficients alpha;      // level j0
  std::vector<SparseLevel> kept_beta;  // one entry per level j0 .. j1-1
  std::int64_t n = 0;
  std::size_t candidates = 0;  // nonzero beta_hat before thresholding
  std::string seed_provenance;
  std::vector<double> alpha_prefix;
  std::vector<std::vector<double>> beta_prefix;

  /// kappa sqrt(l / n)
  double tau(int l) const;
  std::size_t kept_count() const;
};

using Estimator = std::variant<LinearEstimator, ThresholdEstimator>;

LinearEstimator fit_linear(const Sample& sample, ContextPtr ctx, int j, Exec exec = Exec::serial);

struct ThresholdOptions {
  bool zero_threshold = false;  // keep every nonzero beta_hat
  int j0 = -1;                  // overrides when >= 0
  int j1 = -1;
};

/// Hard thresholding with tau = kappa sqrt(l/n); kappa may be +inf.
ThresholdEstimator fit_threshold(const Sample& sample, ContextPtr ctx, double kappa, int T,
                                 ThresholdOptions options = {}, Exec exec = Exec::serial);

/// Recomputes the prefix caches after the coefficient tables were filled in by hand.
void finalize(LinearEstimator& est);
void finalize(ThresholdEstimator& est);

double eval_density(const LinearEstimator& est, double y);
double eval_density(const ThresholdEstimator& est, double y);
double eval_density(const Estimator& est, double y);
std::vector<double> eval_density(const Estimator& est, std::span<const double> points,
                                 Exec exec = Exec::parallel);

/// (1/n) sum_i K_j(y, X_i); the kernel-average form of the linear estimator.
double eval_by_kernel(const KernelContext& ctx, const Sample& sample, int j, double y);

double cdf(const LinearEstimator& est, double s);
double cdf(const ThresholdEstimator& est, double s);
double cdf(const Estimator& est, double s);
std::vector<double> cdf(const Estimator& est, std::span<const double> points, Exec exec = Exec::parallel);
/// Limit of the cdf at +inf.
double total_mass(const Estimator& est);

/// Left-continuous step function: values[0] on (-inf, breaks[0]], values[i] on
/// (breaks[i-1], breaks[i]], values.back() beyond the last break.
struct StepFunction {
  std::vector<double> breaks;
  std::vector<double> values;

  double operator()(double x) const;
  double total_variation() const;
};
StepFunction indicator_below(double s);

/// int p f: exact cdf algebra for step functions, grid quadrature of p(y_m) f_m
/// on f's grid for tables (trapezoid, or right-endpoint for step tables).
double integrate_against(const Estimator& est, const StepFunction& f);
double integrate_against(const Estimator& est, const DyadicTable& f);

/// Grid sup of |p_n - reference| over the reference table's points, optionally
/// divided by sqrt(sum_k phi^2(2^j y - k)) (linear estimators only).
double sup_deviation_statistic(const Estimator& est, const DyadicTable& reference, bool normalized);
double sup_deviation_statistic(std::span<const double> estimate, std::span<const double> reference,
                               std::span<const double> normalizer = {});

// ---- threshold constant ----

/// c(kappa) = kappa^2 / (8 |psi|_2^2 bound + 8/(3 sqrt(ln 2)) kappa |psi|_inf).
double kappa_constant(double kappa, double psi_l2, double psi_sup, double sup_norm_bound);
/// Smallest kappa on the grid step, 2 step, ... with c(kappa) >= (T+3)(1+1/eta) ln 2.
double default_kappa(const WaveletBasis& basis, double sup_norm_bound, double eta, int T, double step = 1.0);
/// Experimental: default_kappa with the bound replaced by the sup of the linear
/// estimator at the plug-in level.
double plugin_kappa(const Sample& sample, ContextPtr ctx, double eta, int T);

// ---- serialization ----

inline constexpr int kEstimatorFormatVersion = 1;

nlohmann::json to_json(const Estimator& est);
Estimator estimator_from_json(const nlohmann::json& doc);
/// FNV-1a of the compact JSON dump.
std::string estimator_hash(const Estimator& est);

int level_of(const Estimator& est);  // j, or j1 for thresholded
const KernelContext& context_of(const Estimator& est);

}  // namespace wde
