#pragma once

#include <span>
#include <vector>

#include "selex/normal_kernels.hpp"

namespace selex {

/// One observation per population (typically a sample mean) with the common
/// standard deviation of those observations.
///
/// The constructor sorts the observations into descending order. Equal
/// values keep their input order. `labels()[r]` is the input index of the
/// observation at rank r.
class ObservedSample {
public:
  ObservedSample(std::vector<double> x, double sigma);

  /// Observations in descending order.
  std::span<const double> x() const noexcept { return x_; }
  double sigma() const noexcept { return sigma_; }
  std::size_t size() const noexcept { return x_.size(); }
  std::span<const std::size_t> labels() const noexcept { return labels_; }
  /// True when the input already arrived in descending order.
  bool sorted() const noexcept { return sorted_; }

  /// Maps a vector indexed by rank back to the caller's input order.
  std::vector<double> to_input_order(std::span<const double> by_rank) const;

private:
  std::vector<double> x_;
  double sigma_;
  std::vector<std::size_t> labels_;
  bool sorted_;
};

/// The cone {mu : mu_1 >= mu_2 >= ... >= mu_p}.
struct MonotoneCone {
  std::size_t p;

  bool contains(std::span<const double> mu) const;
};

/// Euclidean projection onto the nonincreasing cone by pool-adjacent-violators.
/// Pooled blocks hold exactly their mean, so ties in the output are exact.
std::vector<double> project_monotone(std::span<const double> v);

enum class SolverPath { closed_form_pooled, closed_form_interior, numeric };

const char* to_string(SolverPath path);

struct OptimizerSettings {
  double kkt_tol = 1e-7;
  int max_iterations = 500;
  /// First trial step, in units of sigma^2.
  double initial_step = 1.0;
  double backtrack = 0.5;
  /// Adjacent estimates closer than tie_tol * sigma are merged.
  double tie_tol = 1e-6;
  /// Finite-difference half-width for the gradient of log P, in units of sigma.
  double fd_step = 1e-5;
};

struct CcmleResult {
  /// Estimates by rank (nonincreasing).
  std::vector<double> mu_hat;
  /// Estimates in the caller's input order.
  std::vector<double> mu_hat_input_order;
  /// Maximal runs of equal estimates, as rank indices.
  std::vector<std::vector<std::size_t>> groups;
  SolverPath path = SolverPath::numeric;
  int iterations = 0;
  /// || mu - P(mu + sigma^2 grad l(mu)) || / sigma at the returned point.
  double kkt_residual = 0.0;
  double log_likelihood = 0.0;
  /// labels[r] is the input index of rank r.
  std::vector<std::size_t> labels;
  bool converged = true;
};

/// -(1/(2 sigma^2)) sum (x_i - mu_i)^2 - log P_mu(X_1 > ... > X_p), constant dropped.
/// `mu` is indexed by rank.
double conditional_log_likelihood(std::span<const double> mu, const ObservedSample& obs,
                                  const QuadratureSpec& spec = {});

/// Exact two-population estimator.
///
/// Pools at the midpoint when x_1 - x_2 <= 2 sigma / sqrt(pi). Otherwise
/// mu_1 solves g(sqrt2 (xbar - mu_1) / sigma) = sqrt2 (x_1 - mu_1) / sigma
/// on (xbar, x_1) by bisection and mu_2 = x_1 + x_2 - mu_1.
CcmleResult ccmle_p2(const ObservedSample& obs);

/// Residual h1(mu_1) - h2(mu_1) of the two-population stationarity equation.
double p2_stationarity_residual(const ObservedSample& obs, double mu1);

/// project_monotone(x - sigma^2 grad log P(x)).
std::vector<double> taylor_start(const ObservedSample& obs, const QuadratureSpec& spec = {});

/// Projected gradient ascent from taylor_start, for any p >= 2.
CcmleResult ccmle_numeric(const ObservedSample& obs, const QuadratureSpec& spec = {},
                          const OptimizerSettings& opt = {});

/// ccmle_p2 when p = 2, ccmle_numeric otherwise.
CcmleResult ccmle(const ObservedSample& obs, const QuadratureSpec& spec = {},
                  const OptimizerSettings& opt = {});

}  // namespace selex
