// wde: fit / evaluate wavelet density estimators and run the Monte-Carlo checks.

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "wde/error.hpp"
#include "wde/estimators.hpp"
#include "wde/io.hpp"
#include "wde/monte_carlo.hpp"
#include "wde/wavelet_basis.hpp"

namespace fs = std::filesystem;
using namespace wde;

namespace {

constexpr int kExitVerdict = 1;
constexpr int kExitError = 2;

fs::path output_dir(const std::string& flag) {
  if (!flag.empty()) return flag;
  if (const char* env = std::getenv("WDE_OUTPUT_DIR"); env && *env) return env;
  return ".";
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double parse_value(const std::string& text, const std::string& source, std::size_t line) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != text.size() || !std::isfinite(v))
    throw Error(ErrorKind::parse, source + ":" + std::to_string(line) + ": not a finite number: '" + text + "'");
  return v;
}

// One value per line; '#' starts a comment. With column > 0 lines are split on
// commas and that (1-based) field is read.
std::vector<double> read_values(const std::string& path, int column) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::io, "cannot read " + path);
  std::vector<double> out;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    if (column > 0) {
      std::stringstream fields(line);
      std::string field;
      int c = 0;
      bool found = false;
      while (std::getline(fields, field, ',')) {
        if (++c == column) {
          found = true;
          break;
        }
      }
      if (!found)
        throw Error(ErrorKind::parse, path + ":" + std::to_string(number) + ": no column " + std::to_string(column));
      line = trim(field);
    }
    out.push_back(parse_value(line, path, number));
  }
  return out;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::io, "cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void emit(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
  } else {
    write_text_atomic(path, text);
  }
}

struct FitArgs {
  std::string input;
  std::string output;
  std::string family = "haar";
  int resolution = 14;
  std::optional<int> j;
  std::optional<double> t;
  bool threshold = false;
  std::string kappa = "auto";
  std::optional<int> T;
  double bound = 1.0;
  double eta = 1.0;
  int column = 0;
  std::optional<std::uint64_t> seed;
};

int cmd_fit(const FitArgs& a) {
  auto values = read_values(a.input, a.column);
  const std::string provenance = a.seed ? "seed=" + std::to_string(*a.seed) : "file=" + fs::path(a.input).filename().string();
  const auto sample = make_sample(std::move(values), provenance);
  const auto ctx = make_context(a.family, a.resolution);
  const auto n = static_cast<std::int64_t>(sample.n());
  Estimator est;
  std::string summary;
  if (a.threshold) {
    if (a.j || a.t) throw Error(ErrorKind::config, "--threshold picks its own levels; drop --j/--t");
    const int T = a.T.value_or(ctx->b().family().regularity_T);
    double kappa = 0.0;
    if (a.kappa == "auto") kappa = default_kappa(ctx->b(), a.bound, a.eta, T);
    else if (a.kappa == "plugin") kappa = plugin_kappa(sample, ctx, a.eta, T);
    else if (a.kappa == "inf") kappa = std::numeric_limits<double>::infinity();
    else kappa = parse_value(a.kappa, "--kappa", 0);
    const auto h = fit_threshold(sample, ctx, kappa, T);
    summary = "n=" + std::to_string(n) + " j0=" + std::to_string(h.j0) + " j1=" + std::to_string(h.j1) +
              " kappa=" + format_double(kappa) + " kept=" + std::to_string(h.kept_count());
    est = h;
  } else {
    int j = 0;
    if (a.j) j = *a.j;
    else if (a.t) j = choose_j_optimal(n, *a.t);
    else throw Error(ErrorKind::config, "fit needs --j or --t (or --threshold)");
    est = fit_linear(sample, ctx, j);
    summary = "n=" + std::to_string(n) + " j=" + std::to_string(j) +
              " nonzero=" + std::to_string(std::get<LinearEstimator>(est).alpha.nonzero_count());
  }
  std::string out = a.output;
  if (out.empty()) out = (output_dir("") / (fs::path(a.input).stem().string() + ".wde.json")).string();
  emit(out, to_json(est).dump(1) + "\n");
  std::cerr << summary << (out == "-" ? "" : " -> " + out) << "\n";
  return 0;
}

struct EvalArgs {
  std::string estimator;
  std::string points;
  std::string points_file;
  std::vector<double> grid;  // lo hi count
  bool cdf = false;
  std::string output = "-";
};

int cmd_eval(const EvalArgs& a) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(read_file(a.estimator));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::parse, a.estimator + ": " + e.what());
  }
  const auto est = estimator_from_json(doc);
  std::vector<double> xs;
  if (!a.points.empty()) {
    std::stringstream ss(a.points);
    std::string item;
    while (std::getline(ss, item, ',')) xs.push_back(parse_value(trim(item), "--points", 0));
  }
  if (!a.points_file.empty()) {
    auto more = read_values(a.points_file, 0);
    xs.insert(xs.end(), more.begin(), more.end());
  }
  if (!a.grid.empty()) {
    const double lo = a.grid[0], hi = a.grid[1];
    const auto count = static_cast<std::size_t>(a.grid[2]);
    if (count < 2 || !(hi > lo)) throw Error(ErrorKind::config, "--grid needs lo < hi and count >= 2");
    for (std::size_t i = 0; i < count; ++i) xs.push_back(lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(count - 1));
  }
  if (xs.empty()) throw Error(ErrorKind::config, "eval needs --points, --points-file or --grid");
  const auto ys = a.cdf ? cdf(est, xs) : eval_density(est, xs);
  std::string out = "# estimator_hash=" + estimator_hash(est) + "\n";
  out += std::string("# quantity=") + (a.cdf ? "cdf" : "density") + "\n";
  out += "x,value\n";
  for (std::size_t i = 0; i < xs.size(); ++i) out += format_double(xs[i]) + "," + format_double(ys[i]) + "\n";
  emit(a.output, out);
  return 0;
}

struct SimulateArgs {
  std::string id;
  std::vector<std::string> overrides;
  std::string config_file;
  std::optional<std::uint64_t> seed;
  std::string output_dir;
};

int cmd_simulate(const SimulateArgs& a) {
  mc::ExperimentConfig config;
  std::vector<std::string> problems;
  try {
    if (!a.config_file.empty()) {
      config = mc::ExperimentConfig::from_json(nlohmann::json::parse(read_file(a.config_file)));
      if (config.experiment_id.empty()) config.experiment_id = a.id;
      if (config.experiment_id != a.id) problems.push_back("config file is for '" + config.experiment_id + "'");
    } else {
      config = mc::default_config(a.id);
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::config, a.config_file + ": " + e.what());
  }
  if (!a.seed) problems.push_back("--seed is required");
  else config.seed = *a.seed;
  for (const auto& o : a.overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos) {
      problems.push_back("override without '=': " + o);
      continue;
    }
    try {
      mc::apply_override(config, o.substr(0, eq), o.substr(eq + 1));
    } catch (const Error& e) {
      problems.push_back(e.what());
    }
  }
  for (auto& p : mc::validate(config)) problems.push_back(std::move(p));
  if (!problems.empty()) {
    std::cerr << "config error: " << problems.size() << " problem(s)\n";
    for (const auto& p : problems) std::cerr << "  - " << p << "\n";
    return kExitError;
  }
  const auto report = mc::run_experiment(config);
  const auto [csv, js] = mc::write_report(report, output_dir(a.output_dir));
  for (const auto& v : report.verdicts)
    std::cout << (v.pass ? "PASS " : "FAIL ") << report.experiment_id << " " << v.name << ": observed "
              << format_double(v.observed) << ", target " << v.target << (v.detail.empty() ? "" : " (" + v.detail + ")")
              << "\n";
  std::cout << "wrote " << csv.string() << " and " << js.string() << "\n";
  return report.passed() ? 0 : kExitVerdict;
}

int cmd_list() {
  for (const auto& id : mc::experiment_ids()) {
    const auto c = mc::default_config(id);
    std::cout << id << "  family=" << c.family << " density=" << c.density << " replications=" << c.replications
              << " n_grid=";
    for (std::size_t i = 0; i < c.n_grid.size(); ++i) std::cout << (i ? "," : "") << c.n_grid[i];
    std::cout << "\n";
  }
  return 0;
}

int cmd_check_basis(const std::vector<std::string>& families, int resolution) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& name : families) {
    const auto basis = WaveletBasis::create(build_family(name), resolution);
    const auto d = diagnose(*basis);
    out.push_back({{"family", d.family},
                   {"resolution", d.resolution},
                   {"filter_sum_defect", d.filter.sum},
                   {"filter_orthonormality_defect", d.filter.orthonormality},
                   {"orthonormality_defect", d.orthonormality},
                   {"partition_of_unity_defect", d.partition_of_unity},
                   {"refinement_residual", d.refinement_residual},
                   {"phi_integral", d.phi_integral},
                   {"psi_integral", d.psi_integral},
                   {"psi_moments", d.psi_moments},
                   {"cascade_iterations", d.cascade_iterations}});
  }
  std::cout << out.dump(2) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"wavelet density estimation"};
  app.require_subcommand(1);

  FitArgs fit;
  auto* fit_cmd = app.add_subcommand("fit", "fit an estimator to a sample file");
  fit_cmd->add_option("input", fit.input, "sample file, one value per line")->required()->check(CLI::ExistingFile);
  fit_cmd->add_option("-o,--output", fit.output, "estimator JSON path, '-' for stdout");
  fit_cmd->add_option("--family", fit.family, "haar, db2 .. db10")->capture_default_str();
  fit_cmd->add_option("--resolution", fit.resolution, "table resolution R")->capture_default_str();
  auto* j_opt = fit_cmd->add_option("--j", fit.j, "resolution level");
  auto* t_opt = fit_cmd->add_option("--t", fit.t, "smoothness; j = round(log2(n/ln n)/(2t+1))");
  j_opt->excludes(t_opt);
  fit_cmd->add_flag("--threshold", fit.threshold, "hard-thresholded estimator");
  fit_cmd->add_option("--kappa", fit.kappa, "auto, plugin, inf or a number")->capture_default_str();
  fit_cmd->add_option("--T", fit.T, "regularity used for j0 and kappa (default: family's)");
  fit_cmd->add_option("--bound", fit.bound, "sup-norm bound for kappa=auto")->capture_default_str();
  fit_cmd->add_option("--eta", fit.eta, "eta for kappa=auto")->capture_default_str();
  fit_cmd->add_option("--column", fit.column, "1-based CSV column (0: whole line)")->capture_default_str();
  fit_cmd->add_option("--seed", fit.seed, "recorded as provenance");

  EvalArgs ev;
  auto* eval_cmd = app.add_subcommand("eval", "evaluate a fitted estimator");
  eval_cmd->add_option("estimator", ev.estimator, "estimator JSON")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--points", ev.points, "comma separated query points");
  eval_cmd->add_option("--points-file", ev.points_file, "file of query points")->check(CLI::ExistingFile);
  eval_cmd->add_option("--grid", ev.grid, "lo hi count")->expected(3);
  eval_cmd->add_flag("--cdf", ev.cdf, "evaluate the cdf instead of the density");
  eval_cmd->add_option("-o,--output", ev.output, "CSV path, '-' for stdout")->capture_default_str();

  SimulateArgs sim;
  auto* sim_cmd = app.add_subcommand("simulate", "run a Monte-Carlo experiment");
  sim_cmd->add_option("experiment", sim.id, "experiment id (see list-experiments)")->required();
  sim_cmd->add_option("--set", sim.overrides, "key=value override, repeatable");
  sim_cmd->add_option("--config", sim.config_file, "JSON config replacing the defaults")->check(CLI::ExistingFile);
  sim_cmd->add_option("--seed", sim.seed, "base seed (required)");
  sim_cmd->add_option("--output-dir", sim.output_dir, "report directory (default $WDE_OUTPUT_DIR or .)");

  app.add_subcommand("list-experiments", "list experiment ids and their defaults");

  std::vector<std::string> families = {"haar", "db2", "db3", "db4"};
  int check_resolution = 14;
  auto* check_cmd = app.add_subcommand("check-basis", "print wavelet table diagnostics");
  check_cmd->add_option("--family", families, "families to check")->capture_default_str();
  check_cmd->add_option("--resolution", check_resolution, "table resolution R")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : kExitError;
  }

  try {
    if (*fit_cmd) return cmd_fit(fit);
    if (*eval_cmd) return cmd_eval(ev);
    if (*sim_cmd) return cmd_simulate(sim);
    if (app.got_subcommand("list-experiments")) return cmd_list();
    return cmd_check_basis(families, check_resolution);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitError;
  }
}
