#include "selex/ccmle.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "selex/errors.hpp"
#include "selex/ordering_prob.hpp"

namespace selex {

ObservedSample::ObservedSample(std::vector<double> x, double sigma) : sigma_(sigma) {
  if (x.size() < 2) throw InvalidArgument("ObservedSample: need at least 2 observations");
  if (!(std::isfinite(sigma) && sigma > 0.0))
    throw InvalidArgument("ObservedSample: sigma must be finite and > 0");
  for (double v : x)
    if (!std::isfinite(v)) throw InvalidArgument("ObservedSample: observations must be finite");

  labels_.resize(x.size());
  std::iota(labels_.begin(), labels_.end(), std::size_t{0});
  std::stable_sort(labels_.begin(), labels_.end(),
                   [&x](std::size_t a, std::size_t b) { return x[a] > x[b]; });
  sorted_ = std::is_sorted(labels_.begin(), labels_.end());
  x_.reserve(x.size());
  for (std::size_t label : labels_) x_.push_back(x[label]);
}

std::vector<double> ObservedSample::to_input_order(std::span<const double> by_rank) const {
  if (by_rank.size() != labels_.size())
    throw InvalidArgument("to_input_order: length does not match the sample");
  std::vector<double> out(by_rank.size());
  for (std::size_t r = 0; r < by_rank.size(); ++r) out[labels_[r]] = by_rank[r];
  return out;
}

const char* to_string(SolverPath path) {
  switch (path) {
    case SolverPath::closed_form_pooled: return "closed_form_pooled";
    case SolverPath::closed_form_interior: return "closed_form_interior";
    case SolverPath::numeric: return "numeric";
  }
  return "unknown";
}

double conditional_log_likelihood(std::span<const double> mu, const ObservedSample& obs,
                                  const QuadratureSpec& spec) {
  if (mu.size() != obs.size())
    throw InvalidArgument("conditional_log_likelihood: mu has the wrong length");
  const auto x = obs.x();
  const double sigma = obs.sigma();
  double rss = 0.0;
  for (std::size_t i = 0; i < mu.size(); ++i) rss += (x[i] - mu[i]) * (x[i] - mu[i]);
  const auto prob = ordering_probability(MeanConfig({mu.begin(), mu.end()}, sigma), spec);
  return -rss / (2.0 * sigma * sigma) - prob.log_value;
}

namespace {

// grad log P with the component along (1, ..., 1) removed; the exact
// gradient has none since P only depends on differences of the means.
std::vector<double> centered_grad_log_prob(std::span<const double> mu, double sigma,
                                           const QuadratureSpec& spec, double fd_step) {
  auto grad = grad_log_ordering_probability(MeanConfig({mu.begin(), mu.end()}, sigma), spec,
                                            fd_step * sigma);
  const double mean = std::accumulate(grad.begin(), grad.end(), 0.0) / grad.size();
  for (double& g : grad) g -= mean;
  return grad;
}

std::vector<double> grad_log_likelihood(std::span<const double> mu, const ObservedSample& obs,
                                        const QuadratureSpec& spec, double fd_step) {
  const auto x = obs.x();
  const double s2 = obs.sigma() * obs.sigma();
  auto grad = centered_grad_log_prob(mu, obs.sigma(), spec, fd_step);
  for (std::size_t i = 0; i < grad.size(); ++i) grad[i] = (x[i] - mu[i]) / s2 - grad[i];
  return grad;
}

double kkt_residual(std::span<const double> mu, std::span<const double> grad, double sigma) {
  std::vector<double> trial(mu.size());
  for (std::size_t i = 0; i < mu.size(); ++i) trial[i] = mu[i] + sigma * sigma * grad[i];
  const auto proj = project_monotone(trial);
  double norm2 = 0.0;
  for (std::size_t i = 0; i < mu.size(); ++i) norm2 += (mu[i] - proj[i]) * (mu[i] - proj[i]);
  return std::sqrt(norm2) / sigma;
}

std::vector<std::vector<std::size_t>> tie_groups(std::span<const double> mu) {
  std::vector<std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < mu.size(); ++i) {
    if (i == 0 || mu[i] != mu[i - 1]) groups.emplace_back();
    groups.back().push_back(i);
  }
  return groups;
}

// Replaces runs whose adjacent gaps are below `tol` by their mean.
std::vector<double> snap_ties(std::span<const double> mu, double tol) {
  std::vector<double> out(mu.begin(), mu.end());
  std::size_t start = 0;
  while (start < out.size()) {
    std::size_t end = start + 1;
    while (end < out.size() && out[end - 1] - out[end] < tol) ++end;
    if (end - start > 1) {
      double sum = 0.0;
      for (std::size_t i = start; i < end; ++i) sum += out[i];
      const double mean = sum / static_cast<double>(end - start);
      std::fill(out.begin() + start, out.begin() + end, mean);
    }
    start = end;
  }
  return out;
}

CcmleResult finish(const ObservedSample& obs, std::vector<double> mu, SolverPath path,
                   int iterations, bool converged, const QuadratureSpec& spec, double fd_step) {
  CcmleResult out;
  out.path = path;
  out.iterations = iterations;
  out.converged = converged;
  out.log_likelihood = conditional_log_likelihood(mu, obs, spec);
  out.kkt_residual =
      kkt_residual(mu, grad_log_likelihood(mu, obs, spec, fd_step), obs.sigma());
  out.groups = tie_groups(mu);
  out.labels.assign(obs.labels().begin(), obs.labels().end());
  out.mu_hat_input_order = obs.to_input_order(mu);
  out.mu_hat = std::move(mu);
  return out;
}

}  // namespace

double p2_stationarity_residual(const ObservedSample& obs, double mu1) {
  const auto x = obs.x();
  const double xbar = 0.5 * (x[0] + x[1]);
  const double scale = kSqrt2 / obs.sigma();
  return inverse_mills(scale * (xbar - mu1)) - scale * (x[0] - mu1);
}

CcmleResult ccmle_p2(const ObservedSample& obs) {
  if (obs.size() != 2) throw InvalidArgument("ccmle_p2: requires exactly 2 observations");
  const auto x = obs.x();
  const double sigma = obs.sigma();
  const double xbar = 0.5 * (x[0] + x[1]);
  const QuadratureSpec spec;
  const OptimizerSettings opt;

  if (x[0] - x[1] <= 2.0 * sigma / kSqrtPi) {
    return finish(obs, {xbar, xbar}, SolverPath::closed_form_pooled, 0, true, spec, opt.fd_step);
  }

  // The residual is strictly increasing in mu_1: negative at xbar once the
  // gap exceeds the threshold, nonnegative at x_1.
  double lo = xbar;
  double hi = x[0];
  if (!(p2_stationarity_residual(obs, lo) < 0.0) || !(p2_stationarity_residual(obs, hi) >= 0.0))
    throw RootBracketFailure("ccmle_p2: stationarity equation not bracketed on (xbar, x1]");

  int iterations = 0;
  while (iterations < 200) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    ++iterations;
    if (p2_stationarity_residual(obs, mid) < 0.0)
      lo = mid;
    else
      hi = mid;
  }
  const double mu1 = std::fabs(p2_stationarity_residual(obs, lo)) <
                             std::fabs(p2_stationarity_residual(obs, hi))
                         ? lo
                         : hi;
  const double mu2 = x[0] + x[1] - mu1;
  return finish(obs, {mu1, mu2}, SolverPath::closed_form_interior, iterations, true, spec,
                opt.fd_step);
}

std::vector<double> taylor_start(const ObservedSample& obs, const QuadratureSpec& spec) {
  const auto x = obs.x();
  const double s2 = obs.sigma() * obs.sigma();
  const OptimizerSettings defaults;
  auto grad = centered_grad_log_prob(x, obs.sigma(), spec, defaults.fd_step);
  std::vector<double> step(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) step[i] = x[i] - s2 * grad[i];
  return project_monotone(step);
}

CcmleResult ccmle_numeric(const ObservedSample& obs, const QuadratureSpec& spec,
                          const OptimizerSettings& opt) {
  const double sigma = obs.sigma();
  const double s2 = sigma * sigma;
  const std::size_t p = obs.size();

  auto mu = taylor_start(obs, spec);
  double value = conditional_log_likelihood(mu, obs, spec);
  bool converged = false;
  int iterations = 0;

  std::vector<double> trial(p);
  for (; iterations < opt.max_iterations; ++iterations) {
    const auto grad = grad_log_likelihood(mu, obs, spec, opt.fd_step);
    if (kkt_residual(mu, grad, sigma) <= opt.kkt_tol) {
      converged = true;
      break;
    }

    // Backtracking on the projection arc until the quadratic lower model holds.
    double t = opt.initial_step * s2;
    bool accepted = false;
    std::vector<double> candidate;
    double candidate_value = 0.0;
    const double noise = 1e-12 * (1.0 + std::fabs(value));
    while (t >= 1e-12 * s2) {
      for (std::size_t i = 0; i < p; ++i) trial[i] = mu[i] + t * grad[i];
      candidate = project_monotone(trial);
      double slope = 0.0;
      double dist2 = 0.0;
      for (std::size_t i = 0; i < p; ++i) {
        const double d = candidate[i] - mu[i];
        slope += grad[i] * d;
        dist2 += d * d;
      }
      candidate_value = conditional_log_likelihood(candidate, obs, spec);
      if (candidate_value >= value + slope - dist2 / (2.0 * t) - noise) {
        accepted = true;
        break;
      }
      t *= opt.backtrack;
    }
    if (!accepted) break;
    mu = std::move(candidate);
    value = candidate_value;
  }

  const auto snapped = snap_ties(mu, opt.tie_tol * sigma);
  if (snapped != mu && conditional_log_likelihood(snapped, obs, spec) >= value - opt.kkt_tol)
    mu = snapped;

  return finish(obs, std::move(mu), SolverPath::numeric, iterations, converged, spec, opt.fd_step);
}

CcmleResult ccmle(const ObservedSample& obs, const QuadratureSpec& spec,
                  const OptimizerSettings& opt) {
  if (obs.size() == 2) return ccmle_p2(obs);
  return ccmle_numeric(obs, spec, opt);
}

}  // namespace selex
