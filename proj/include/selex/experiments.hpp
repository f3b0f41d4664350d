#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "selex/ccmle.hpp"
#include "selex/table.hpp"

namespace selex {

// ---------------------------------------------------------------------------
// Mean squared error study
// ---------------------------------------------------------------------------

struct MseConfig {
  std::vector<double> mu_true;
  double sigma = 1.0;
  std::int64_t n_reps = 1000;
  std::uint64_t seed = 1;
  /// 1-based ranks to score (1 = largest observation). Empty is invalid.
  std::vector<std::size_t> ranks;

  void validate() const;
};

/// One simulated replicate. Errors are indexed by rank and measured against
/// the true mean of whichever population landed at that rank.
struct ExperimentRecord {
  std::vector<double> draw;
  /// selected_labels[r] is the population observed at rank r.
  std::vector<std::size_t> selected_labels;
  std::vector<double> errors_mle;
  std::vector<double> errors_ccmle;
};

/// Scores the naive estimate (the sorted draw) and the CCMLE for one draw.
ExperimentRecord score_replicate(std::span<const double> mu_true, std::span<const double> draw,
                                 double sigma, const QuadratureSpec& spec = {},
                                 const OptimizerSettings& opt = {});

struct RankMse {
  std::size_t rank = 0;
  double mse_mle = 0.0;
  double se_mle = 0.0;
  double mse_ccmle = 0.0;
  double se_ccmle = 0.0;
};

struct MseSummary {
  MseConfig config;
  std::vector<RankMse> ranks;
  /// Replicates that entered the averages.
  std::int64_t n_used = 0;
  /// Replicates dropped because the solver threw.
  std::int64_t failures = 0;
  /// Replicates kept but flagged as not converged.
  std::int64_t not_converged = 0;
};

/// Replicate i draws from stream (seed, i), so the summary is identical for
/// any `threads` (0 = SELEX_THREADS / auto).
MseSummary run_mse(const MseConfig& cfg, int threads = 0, const QuadratureSpec& spec = {},
                   const OptimizerSettings& opt = {});

/// Two populations: mu_2 = 0, mu_1 = 0, step, ..., 5.
std::vector<std::vector<double>> mse_grid_p2(double step = 0.25);

/// Three populations: mu_3 in {0, 2, 4}; mu_1 >= mu_2 on the grid mu_3, mu_3 + step, ..., 5.
std::vector<std::vector<double>> mse_grid_p3(double step = 0.5);

/// Columns config_id, mu_true_1..p, rank, estimator, mse, se, n_reps.
/// Every summary must have the same number of populations.
Table mse_table(std::span<const MseSummary> summaries);

// ---------------------------------------------------------------------------
// Stratified bootstrap intervals
// ---------------------------------------------------------------------------

struct BootstrapConfig {
  std::vector<double> mu_true;
  std::int64_t n_per_group = 50;
  /// Standard deviation of one observation; sqrt(50) gives sample means of unit variance.
  double obs_sd = std::sqrt(50.0);
  std::int64_t n_boot = 9999;
  double level = 0.95;
  std::uint64_t seed = 1;

  void validate() const;
};

struct Interval {
  double point = 0.0;
  double lower = 0.0;
  double upper = 0.0;
};

struct RankInterval {
  std::size_t rank = 0;
  /// Bias-corrected percentile interval of the rank-r CCMLE.
  Interval ccmle;
  /// Percentile interval of the rank-r bootstrap sample mean.
  Interval traditional;
  /// Bias-correction constant of the CCMLE interval.
  double z0 = 0.0;
};

struct IntervalSet {
  BootstrapConfig config;
  /// Group sample means in population order.
  std::vector<double> group_means;
  CcmleResult estimate;
  std::vector<RankInterval> ranks;
  /// Replicate statistics, indexed [rank][replicate].
  std::vector<std::vector<double>> boot_ccmle;
  std::vector<std::vector<double>> boot_means;
  /// Resamples whose CCMLE failed and were redrawn.
  std::int64_t failures = 0;
};

/// Linear-interpolation (type 7) sample quantile.
double sample_quantile(std::span<const double> values, double q);

/// Percentile interval of `stats` at the given level, reported around `point`.
Interval percentile_interval(std::span<const double> stats, double point, double level);

/// BC percentile interval. z0 = Phi^-1 of the share of statistics below
/// `point`, ties counted half; the share is clamped into
/// [1/(2B), 1 - 1/(2B)].
Interval bc_interval(std::span<const double> stats, double point, double level,
                     double* z0_out = nullptr);

/// Bootstrap on supplied data, one sample per population. cfg.mu_true only
/// labels the output; the effective sigma of a group mean is
/// cfg.obs_sd / sqrt(n_per_group).
IntervalSet bootstrap_from_data(const BootstrapConfig& cfg,
                                const std::vector<std::vector<double>>& samples, int threads = 0,
                                const QuadratureSpec& spec = {},
                                const OptimizerSettings& opt = {});

/// Draws n_per_group observations from N(mu_i, obs_sd^2) per population from
/// stream (seed, 0), then runs bootstrap_from_data. Resample b uses stream
/// (seed, b + 1).
IntervalSet run_bootstrap_ci(const BootstrapConfig& cfg, int threads = 0,
                             const QuadratureSpec& spec = {}, const OptimizerSettings& opt = {});

/// Columns config_id, mu_true_1..p, rank, method, point, lower, upper, level, n_boot.
Table interval_table(std::span<const IntervalSet> sets);

}  // namespace selex
