#include "cli.hpp"

#include <CLI11.hpp>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <optional>
#include <set>
#include <sstream>

#include "selex/ccmle.hpp"
#include "selex/errors.hpp"
#include "selex/experiments.hpp"
#include "selex/ordering_prob.hpp"
#include "selex/table.hpp"

namespace selex::cli {

namespace {

using json = nlohmann::ordered_json;

/// Bad flag or config value; reported with exit code 2.
class UsageError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

double parse_real(const std::string& text, const std::string& what) {
  std::size_t used = 0;
  double value = 0.0;
  try {
    value = std::stod(text, &used);
  } catch (const std::exception&) {
    throw UsageError(what + ": '" + text + "' is not a number");
  }
  if (used != text.size()) throw UsageError(what + ": '" + text + "' is not a number");
  if (!std::isfinite(value)) throw UsageError(what + ": '" + text + "' is not finite");
  return value;
}

std::vector<double> parse_list(const std::string& text, const std::string& what) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_real(item, what));
  return out;
}

std::vector<std::size_t> parse_ranks(const std::string& text, std::size_t p) {
  std::vector<std::size_t> ranks;
  if (text.empty()) {
    for (std::size_t r = 1; r <= p; ++r) ranks.push_back(r);
    return ranks;
  }
  for (double v : parse_list(text, "--ranks")) {
    if (v < 1 || v != std::floor(v)) throw UsageError("--ranks: ranks are positive integers");
    ranks.push_back(static_cast<std::size_t>(v));
  }
  return ranks;
}

json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

ExportFormat resolve_format(const std::string& format, const std::string& path) {
  if (!format.empty()) {
    try {
      return parse_export_format(format);
    } catch (const InvalidArgument& e) {
      throw UsageError(std::string("--format: ") + e.what());
    }
  }
  return std::filesystem::path(path).extension() == ".json" ? ExportFormat::json : ExportFormat::csv;
}

// ---- config files -----------------------------------------------------------

json load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("config: cannot read '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw UsageError("config: '" + path + "' is not valid JSON: " + e.what());
  }
}

void reject_unknown(const json& obj, const std::set<std::string>& allowed) {
  if (!obj.is_object()) throw UsageError("config: each entry must be a JSON object");
  for (const auto& [key, _] : obj.items())
    if (!allowed.contains(key)) throw UsageError("config: unknown field '" + key + "'");
}

template <typename T>
T field(const json& obj, const std::string& key) {
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw UsageError("config: field '" + key + "' is missing or has the wrong type");
  }
}

std::vector<json> config_entries(const json& doc) {
  if (doc.is_array()) {
    if (doc.empty()) throw UsageError("config: empty configuration list");
    return {doc.begin(), doc.end()};
  }
  return {doc};
}

MseConfig mse_from_json(const json& obj) {
  reject_unknown(obj, {"mu_true", "sigma", "n_reps", "seed", "ranks"});
  MseConfig cfg;
  cfg.mu_true = field<std::vector<double>>(obj, "mu_true");
  if (obj.contains("sigma")) cfg.sigma = field<double>(obj, "sigma");
  if (obj.contains("n_reps")) cfg.n_reps = field<std::int64_t>(obj, "n_reps");
  if (obj.contains("seed")) cfg.seed = field<std::uint64_t>(obj, "seed");
  if (obj.contains("ranks"))
    cfg.ranks = field<std::vector<std::size_t>>(obj, "ranks");
  else
    for (std::size_t r = 1; r <= cfg.mu_true.size(); ++r) cfg.ranks.push_back(r);
  return cfg;
}

BootstrapConfig bootstrap_from_json(const json& obj) {
  reject_unknown(obj, {"mu_true", "n_per_group", "obs_sd", "n_boot", "level", "seed"});
  BootstrapConfig cfg;
  cfg.mu_true = field<std::vector<double>>(obj, "mu_true");
  if (obj.contains("n_per_group")) cfg.n_per_group = field<std::int64_t>(obj, "n_per_group");
  if (obj.contains("obs_sd")) cfg.obs_sd = field<double>(obj, "obs_sd");
  if (obj.contains("n_boot")) cfg.n_boot = field<std::int64_t>(obj, "n_boot");
  if (obj.contains("level")) cfg.level = field<double>(obj, "level");
  if (obj.contains("seed")) cfg.seed = field<std::uint64_t>(obj, "seed");
  return cfg;
}

// Config validation errors become usage errors (exit 2).
template <typename Config>
void validate_config(const Config& cfg) {
  try {
    cfg.validate();
  } catch (const InvalidArgument& e) {
    throw UsageError(e.what());
  }
}

// ---- subcommands --------------------------------------------------------------

struct ProbArgs {
  std::string means;
  double sigma = 0.0;
  std::int64_t mc = 0;
  std::uint64_t seed = 1;
  bool json = false;
};

int cmd_prob(const ProbArgs& a, std::ostream& out) {
  const auto means = parse_list(a.means, "--means");
  if (means.size() < 2) throw UsageError("--means: need at least 2 values");
  if (!(std::isfinite(a.sigma) && a.sigma > 0.0)) throw UsageError("--sigma: must be > 0");
  if (a.mc != 0 && a.mc < 10000) throw UsageError("--mc: need at least 10000 draws");

  const MeanConfig cfg(means, a.sigma);
  const OrderingProb prob =
      a.mc > 0 ? mc_ordering_probability(cfg, a.mc, a.seed) : ordering_probability(cfg);

  if (a.json) {
    json doc;
    doc["means"] = means;
    doc["sigma"] = a.sigma;
    doc["value"] = prob.value;
    doc["log_value"] = finite_or_null(prob.log_value);
    doc["method"] = to_string(prob.method);
    doc["err_est"] = prob.err_est;
    doc["underflow"] = prob.underflow;
    doc["degenerate"] = prob.degenerate;
    out << doc.dump(2) << '\n';
  } else {
    out << "value      " << format_double(prob.value) << '\n'
        << "log_value  " << format_double(prob.log_value) << '\n'
        << "method     " << to_string(prob.method) << '\n'
        << "err_est    " << format_double(prob.err_est) << '\n';
    if (prob.underflow) out << "note       value underflows; log_value is exact\n";
    if (prob.degenerate) out << "note       Monte Carlo fraction is 0 or 1\n";
  }
  return kOk;
}

struct EstimateArgs {
  std::string obs;
  double sigma = 0.0;
  bool json = false;
  bool diagnostics = false;
  int max_iterations = OptimizerSettings{}.max_iterations;
};

int cmd_estimate(const EstimateArgs& a, std::ostream& out, std::ostream& err) {
  const auto x = parse_list(a.obs, "--obs");
  if (x.size() < 2) throw UsageError("--obs: need at least 2 values");
  if (!(std::isfinite(a.sigma) && a.sigma > 0.0)) throw UsageError("--sigma: must be > 0");

  if (a.max_iterations < 1) throw UsageError("--max-iterations: must be >= 1");

  const ObservedSample sample(x, a.sigma);
  OptimizerSettings opt;
  opt.max_iterations = a.max_iterations;
  const CcmleResult fit = ccmle(sample, {}, opt);

  // tie groups in the caller's 1-based population labels
  std::vector<std::vector<std::size_t>> groups;
  for (const auto& g : fit.groups) {
    std::vector<std::size_t> labels;
    for (std::size_t r : g) labels.push_back(fit.labels[r] + 1);
    std::sort(labels.begin(), labels.end());
    groups.push_back(std::move(labels));
  }

  if (a.json) {
    json doc;
    doc["observed"] = x;
    doc["sigma"] = a.sigma;
    doc["estimate"] = fit.mu_hat_input_order;
    doc["groups"] = groups;
    doc["path"] = to_string(fit.path);
    doc["log_likelihood"] = fit.log_likelihood;
    doc["converged"] = fit.converged;
    if (a.diagnostics) {
      doc["iterations"] = fit.iterations;
      doc["kkt_residual"] = fit.kkt_residual;
      std::vector<std::size_t> order;
      for (std::size_t l : fit.labels) order.push_back(l + 1);
      doc["rank_order"] = order;
    }
    out << doc.dump(2) << '\n';
  } else {
    out << "population  observed  estimate\n";
    for (std::size_t i = 0; i < x.size(); ++i) {
      char line[96];
      std::snprintf(line, sizeof line, "%-10zu  %-8s  %s\n", i + 1, format_double(x[i]).c_str(),
                    format_double(fit.mu_hat_input_order[i]).c_str());
      out << line;
    }
    out << "groups     ";
    for (const auto& g : groups) {
      out << " {";
      for (std::size_t k = 0; k < g.size(); ++k) out << (k ? "," : "") << g[k];
      out << '}';
    }
    out << "\npath        " << to_string(fit.path) << '\n'
        << "loglik      " << format_double(fit.log_likelihood) << '\n';
    if (a.diagnostics) {
      out << "iterations  " << fit.iterations << '\n'
          << "kkt         " << format_double(fit.kkt_residual) << '\n'
          << "converged   " << (fit.converged ? "yes" : "no") << '\n';
    }
  }
  if (!fit.converged) {
    err << "selex: optimizer did not converge; reporting the best iterate\n";
    return kOptimizer;
  }
  return kOk;
}

struct MseArgs {
  std::string means;
  std::string grid;
  double sigma = 1.0;
  std::int64_t reps = 1000;
  std::uint64_t seed = 1;
  std::string ranks;
  std::string config;
  std::string out;
  std::string format;
  bool acceptance = false;
  bool json = false;
};

int cmd_simulate_mse(const MseArgs& a, CLI::App& sub, std::ostream& out, std::ostream& err) {
  const bool from_config = !a.config.empty();
  const int sources = (from_config ? 1 : 0) + (a.means.empty() ? 0 : 1) + (a.grid.empty() ? 0 : 1);
  if (sources != 1) throw UsageError("simulate-mse: give exactly one of --means, --grid, --config");
  if (from_config && (sub.count("--sigma") || sub.count("--reps") || sub.count("--seed") ||
                      sub.count("--ranks")))
    throw UsageError("simulate-mse: --config cannot be combined with --sigma/--reps/--seed/--ranks");

  std::vector<MseConfig> configs;
  if (from_config) {
    for (const auto& entry : config_entries(load_json(a.config)))
      configs.push_back(mse_from_json(entry));
  } else {
    std::vector<std::vector<double>> grid;
    if (!a.means.empty()) {
      grid.push_back(parse_list(a.means, "--means"));
    } else if (a.grid == "p2") {
      grid = mse_grid_p2();
    } else if (a.grid == "p3") {
      grid = mse_grid_p3();
    } else {
      throw UsageError("--grid: expected p2 or p3");
    }
    for (auto& mu : grid) {
      MseConfig cfg;
      cfg.ranks = parse_ranks(a.ranks, mu.size());
      cfg.mu_true = std::move(mu);
      cfg.sigma = a.sigma;
      cfg.n_reps = a.reps;
      cfg.seed = a.seed;
      configs.push_back(std::move(cfg));
    }
  }
  for (const auto& cfg : configs) validate_config(cfg);
  const ExportFormat format = resolve_format(a.format, a.out);

  std::vector<MseSummary> summaries;
  std::int64_t failures = 0;
  std::int64_t not_converged = 0;
  for (const auto& cfg : configs) {
    summaries.push_back(run_mse(cfg));
    failures += summaries.back().failures;
    not_converged += summaries.back().not_converged;
  }
  const Table table = mse_table(summaries);
  export_results(table, format, a.out);

  if (a.json) {
    json doc;
    doc["command"] = "simulate-mse";
    doc["out"] = a.out;
    doc["configs"] = configs.size();
    doc["rows"] = table.rows.size();
    doc["failures"] = failures;
    doc["not_converged"] = not_converged;
    out << doc.dump(2) << '\n';
  } else {
    out << "simulate-mse: " << configs.size() << " configuration(s), " << table.rows.size()
        << " rows, " << failures << " failed replicate(s) -> " << a.out << '\n';
  }
  if (a.acceptance && failures > 0) {
    err << "selex: " << failures << " replicate(s) failed in acceptance mode\n";
    return kReplicate;
  }
  return kOk;
}

struct BootstrapArgs {
  std::string means;
  std::int64_t n_per_group = 50;
  double obs_sd = std::sqrt(50.0);
  std::int64_t n_boot = 9999;
  double level = 0.95;
  std::uint64_t seed = 1;
  std::string config;
  std::string out;
  std::string format;
  bool acceptance = false;
  bool json = false;
};

int cmd_bootstrap_ci(const BootstrapArgs& a, CLI::App& sub, std::ostream& out, std::ostream& err) {
  const bool from_config = !a.config.empty();
  if (from_config == !a.means.empty())
    throw UsageError("bootstrap-ci: give exactly one of --means, --config");
  for (const char* flag : {"--n-per-group", "--obs-sd", "--n-boot", "--level", "--seed"})
    if (from_config && sub.count(flag))
      throw UsageError(std::string("bootstrap-ci: --config cannot be combined with ") + flag);

  std::vector<BootstrapConfig> configs;
  if (from_config) {
    for (const auto& entry : config_entries(load_json(a.config)))
      configs.push_back(bootstrap_from_json(entry));
  } else {
    BootstrapConfig cfg;
    cfg.mu_true = parse_list(a.means, "--means");
    cfg.n_per_group = a.n_per_group;
    cfg.obs_sd = a.obs_sd;
    cfg.n_boot = a.n_boot;
    cfg.level = a.level;
    cfg.seed = a.seed;
    configs.push_back(std::move(cfg));
  }
  for (const auto& cfg : configs) validate_config(cfg);
  const ExportFormat format = resolve_format(a.format, a.out);

  std::vector<IntervalSet> sets;
  std::int64_t failures = 0;
  for (const auto& cfg : configs) {
    sets.push_back(run_bootstrap_ci(cfg));
    failures += sets.back().failures;
  }
  export_results(interval_table(sets), format, a.out);

  if (a.json) {
    json doc;
    doc["command"] = "bootstrap-ci";
    doc["out"] = a.out;
    doc["failures"] = failures;
    json results = json::array();
    for (const auto& s : sets) {
      json entry;
      entry["mu_true"] = s.config.mu_true;
      entry["group_means"] = s.group_means;
      entry["pooled"] = s.estimate.groups.size() == 1;
      json ranks = json::array();
      for (const auto& r : s.ranks) {
        json row;
        row["rank"] = r.rank;
        row["ccmle"] = {r.ccmle.point, r.ccmle.lower, r.ccmle.upper};
        row["traditional"] = {r.traditional.point, r.traditional.lower, r.traditional.upper};
        ranks.push_back(std::move(row));
      }
      entry["ranks"] = std::move(ranks);
      results.push_back(std::move(entry));
    }
    doc["results"] = std::move(results);
    out << doc.dump(2) << '\n';
  } else {
    for (const auto& s : sets) {
      out << "bootstrap-ci: B=" << s.config.n_boot << " level=" << format_double(s.config.level)
          << (s.estimate.groups.size() == 1 ? " (CCMLE estimates fully pooled)" : "") << '\n';
      out << "rank  ccmle [lower, upper]               traditional [lower, upper]\n";
      for (const auto& r : s.ranks) {
        char line[160];
        std::snprintf(line, sizeof line, "%-4zu  %-10s [%s, %s]   %-10s [%s, %s]\n", r.rank,
                      format_double(r.ccmle.point).c_str(), format_double(r.ccmle.lower).c_str(),
                      format_double(r.ccmle.upper).c_str(),
                      format_double(r.traditional.point).c_str(),
                      format_double(r.traditional.lower).c_str(),
                      format_double(r.traditional.upper).c_str());
        out << line;
      }
    }
    out << "bootstrap-ci: " << failures << " redrawn resample(s) -> " << a.out << '\n';
  }
  if (a.acceptance && failures > 0) {
    err << "selex: " << failures << " resample(s) failed in acceptance mode\n";
    return kReplicate;
  }
  return kOk;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Estimation for the means of normal populations selected by rank"};
  app.name("selex");
  app.require_subcommand(1);
  app.option_defaults()->always_capture_default();

  ProbArgs prob_args;
  auto* prob = app.add_subcommand("prob", "Probability that draws from N(mu_i, sigma^2) fall in descending order");
  prob->add_option("--means", prob_args.means, "Comma-separated population means")->required();
  prob->add_option("--sigma", prob_args.sigma, "Common standard deviation")->required();
  prob->add_option("--mc", prob_args.mc, "Monte Carlo draws instead of quadrature (0 = quadrature, else >= 10000)");
  prob->add_option("--seed", prob_args.seed, "Seed for --mc");
  prob->add_flag("--json", prob_args.json, "Emit one JSON document");

  EstimateArgs est_args;
  auto* est = app.add_subcommand("estimate", "Constrained conditional MLE of the means given ranked observations");
  est->add_option("--obs", est_args.obs, "Comma-separated observations, any order")->required();
  est->add_option("--sigma", est_args.sigma, "Standard deviation of one observation")->required();
  est->add_flag("--json", est_args.json, "Emit one JSON document");
  est->add_flag("--diagnostics", est_args.diagnostics, "Include solver iterations and KKT residual");
  est->add_option("--max-iterations", est_args.max_iterations, "Iteration cap for the numeric solver (p >= 3)");

  MseArgs mse_args;
  auto* mse = app.add_subcommand("simulate-mse", "Selection-aware MSE of the CCMLE versus the naive MLE");
  mse->add_option("--means", mse_args.means, "Comma-separated true means (one configuration)");
  mse->add_option("--grid", mse_args.grid, "Built-in configuration grid: p2 or p3");
  mse->add_option("--sigma", mse_args.sigma, "Standard deviation of one observation");
  mse->add_option("--reps", mse_args.reps, "Replicates per configuration (n_reps, >= 100)");
  mse->add_option("--seed", mse_args.seed, "Random seed");
  mse->add_option("--ranks", mse_args.ranks, "Comma-separated ranks to score, 1 = max (default: all)");
  mse->add_option("--config", mse_args.config, "JSON config: object or array with mu_true, sigma, n_reps, seed, ranks");
  mse->add_option("--out", mse_args.out, "Output file")->required();
  mse->add_option("--format", mse_args.format, "csv or json (default: from --out extension)");
  mse->add_flag("--acceptance", mse_args.acceptance, "Exit 5 if any replicate fails");
  mse->add_flag("--json", mse_args.json, "Emit the summary as one JSON document");

  BootstrapArgs boot_args;
  auto* boot = app.add_subcommand("bootstrap-ci", "Stratified bootstrap intervals for the selected means");
  boot->add_option("--means", boot_args.means, "Comma-separated true means");
  boot->add_option("--n-per-group", boot_args.n_per_group, "Observations per population");
  boot->add_option("--obs-sd", boot_args.obs_sd, "Standard deviation of one observation");
  boot->add_option("--n-boot", boot_args.n_boot, "Bootstrap resamples (>= 999)");
  boot->add_option("--level", boot_args.level, "Interval coverage level");
  boot->add_option("--seed", boot_args.seed, "Random seed");
  boot->add_option("--config", boot_args.config, "JSON config: object or array with mu_true, n_per_group, obs_sd, n_boot, level, seed");
  boot->add_option("--out", boot_args.out, "Output file")->required();
  boot->add_option("--format", boot_args.format, "csv or json (default: from --out extension)");
  boot->add_flag("--acceptance", boot_args.acceptance, "Exit 5 if any resample fails");
  boot->add_flag("--json", boot_args.json, "Emit the summary as one JSON document");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kUsage;
  }

  try {
    if (prob->parsed()) return cmd_prob(prob_args, out);
    if (est->parsed()) return cmd_estimate(est_args, out, err);
    if (mse->parsed()) return cmd_simulate_mse(mse_args, *mse, out, err);
    if (boot->parsed()) return cmd_bootstrap_ci(boot_args, *boot, out, err);
  } catch (const UsageError& e) {
    err << "selex: " << e.what() << "\nRun with --help for usage.\n";
    return kUsage;
  } catch (const InvalidArgument& e) {
    err << "selex: " << e.what() << '\n';
    return kUsage;
  } catch (const ConvergenceFailure& e) {
    err << "selex: " << e.what() << " (best value " << format_double(e.value()) << ", error "
        << format_double(e.err_est()) << ")\n";
    return kQuadrature;
  } catch (const RootBracketFailure& e) {
    err << "selex: " << e.what() << '\n';
    return kOptimizer;
  } catch (const IoError& e) {
    err << "selex: " << e.what() << '\n';
    return kUsage;
  } catch (const Error& e) {
    err << "selex: " << e.what() << '\n';
    return kReplicate;
  }
  return kUsage;
}

}  // namespace selex::cli
