#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "wde/density_model.hpp"
#include "wde/estimators.hpp"

namespace wde::mc {

/// Everything an experiment reads. Experiment-specific knobs live in `params`
/// and `tolerances`, keyed by name; the defaults of each experiment list them.
struct ExperimentConfig {
  std::string experiment_id;
  std::string family = "haar";
  std::string density = "normal";
  std::vector<std::int64_t> n_grid;
  int replications = 1;
  std::uint64_t seed = 1;
  int resolution = 14;          // wavelet tables
  int density_resolution = 0;   // 0: chosen from the schedule
  std::string schedule = "optimal";  // optimal | fine | plugin | fixed
  double t = 1.0;               // smoothness fed to the schedule
  std::vector<double> t_list;
  std::vector<int> levels;
  std::map<std::string, double> params;
  std::map<std::string, double> tolerances;

  nlohmann::json to_json() const;
  static ExperimentConfig from_json(const nlohmann::json& doc);
  /// FNV-1a of the canonical JSON.
  std::string hash() const;
  double param(const std::string& key) const;
  double tolerance(const std::string& key) const;
};

struct StatRecord {
  std::string series;
  std::int64_t n = 0;
  int replication = 0;
  int level = 0;
  double value = 0.0;
};

struct Verdict {
  std::string name;
  bool pass = false;
  double observed = 0.0;
  std::string target;
  std::string detail;
};

struct ExperimentReport {
  std::string experiment_id;
  nlohmann::json config;
  std::string config_hash;
  std::uint64_t seed = 0;
  std::vector<StatRecord> records;
  nlohmann::json aggregates = nlohmann::json::object();
  std::vector<Verdict> verdicts;

  bool passed() const;
  nlohmann::json summary() const;
};

std::vector<std::string> experiment_ids();
/// Default config of an experiment; throws config for unknown ids.
ExperimentConfig default_config(std::string_view experiment_id);
/// key=value override: family, density, n_grid (comma list), replications, seed,
/// resolution, density_resolution, schedule, t, t_list, levels, param.<k>, tol.<k>.
void apply_override(ExperimentConfig& config, std::string_view key, std::string_view value);
/// Every problem with the config, empty when it can run.
std::vector<std::string> validate(const ExperimentConfig& config);

/// Validates, then dispatches on experiment_id. Throws config listing all problems.
ExperimentReport run_experiment(const ExperimentConfig& config);

ExperimentReport exp_law_of_logarithm(const ExperimentConfig& config);
ExperimentReport exp_supnorm_rate(const ExperimentConfig& config);
ExperimentReport exp_coefficient_scaling(const ExperimentConfig& config);
ExperimentReport exp_cdf_clt(const ExperimentConfig& config);
ExperimentReport exp_dkw_tail(const ExperimentConfig& config);
ExperimentReport exp_lil(const ExperimentConfig& config);
ExperimentReport exp_threshold_adaptivity(const ExperimentConfig& config);
ExperimentReport exp_functional_clt(const ExperimentConfig& config);
ExperimentReport exp_bias_decay(const ExperimentConfig& config);

// ---- building blocks ----

/// "normal", "mixture", "uniform" or "besov:t=0.5,family=db2,seed=3".
DensityModel make_zoo_density(std::string_view spec, int resolution);

/// Counter-based seed for replication `rep` at grid index `n_index`.
std::uint64_t replication_seed(std::uint64_t base, std::uint64_t n_index, std::uint64_t rep);

/// Level used by the config's schedule at sample size n.
int schedule_level(const ExperimentConfig& config, std::int64_t n);

/// n/(j 2^j) and j/log log n grow, and j_{2n} - j_n <= tau, along the
/// doubling ladder from n_lo to n_hi. Returns the violations.
std::vector<std::string> check_schedule_growth(const std::function<int(std::int64_t)>& level, std::int64_t n_lo,
                                           std::int64_t n_hi, int tau);
/// sqrt(n) 2^{-j(t+1)} smaller at the end of n_grid than at the start.
std::vector<std::string> check_bias_vanishing(const std::function<int(std::int64_t)>& level,
                                              std::span<const std::int64_t> n_grid, double t);

/// Law of sup |Brownian bridge|; alternating series, theta series for small x.
double kolmogorov_cdf(double x);
double kolmogorov_quantile(double p);
/// sup_x |empirical cdf of values - cdf|.
double ks_distance(std::vector<double> values, const std::function<double(double)>& cdf);

struct Regression {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_se = 0.0;
  double r2 = 0.0;
};
Regression ols(std::span<const double> x, std::span<const double> y);

double median(std::vector<double> v);
double quantile(std::vector<double> v, double p);
double mean(std::span<const double> v);
double variance(std::span<const double> v);  // unbiased
double kurtosis(std::span<const double> v);  // non-excess

struct CdfDeviation {
  double vs_true = 0.0;       // sup |F_est - F|
  double vs_empirical = 0.0;  // sup |F_est - F_n|
};
/// Grid sups over the density grid (refined to the estimator's kinks) on the
/// data hull widened by the kernel support, plus the data points for F_n.
CdfDeviation cdf_deviation(const Estimator& est, const Sample& sample, const DensityModel& density);

// ---- output ----

std::string records_csv(const ExperimentReport& report);
/// Writes <dir>/<id>.csv and <dir>/<id>.json atomically; returns the two paths.
std::pair<std::filesystem::path, std::filesystem::path> write_report(const ExperimentReport& report,
                                                                     const std::filesystem::path& dir);

}  // namespace wde::mc
