#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "selex/normal_kernels.hpp"

namespace selex {

/// Means of p >= 2 independent normal populations sharing one standard
/// deviation. The means may appear in any order.
class MeanConfig {
public:
  MeanConfig(std::vector<double> mu, double sigma);

  std::span<const double> mu() const noexcept { return mu_; }
  double sigma() const noexcept { return sigma_; }
  std::size_t size() const noexcept { return mu_.size(); }

private:
  std::vector<double> mu_;
  double sigma_;
};

enum class ProbMethod { closed_form_p2, quadrature, monte_carlo };

const char* to_string(ProbMethod method);

/// P(X_1 > X_2 > ... > X_p) together with its logarithm.
struct OrderingProb {
  double value = 0.0;
  double log_value = 0.0;
  ProbMethod method = ProbMethod::quadrature;
  double err_est = 0.0;
  /// Set when value < 1e-300; log_value is still meaningful.
  bool underflow = false;
  /// Monte Carlo only: the observed fraction was 0 or 1, so log_value and
  /// the standard error carry no information.
  bool degenerate = false;
};

/// Closed form for p = 2, otherwise the conditioning recursion
///
///   H_p(t) = Phi((t - mu_p) / sigma),
///   H_k(t) = int_{-inf}^{t} phi_k(s) H_{k+1}(s) ds,
///   P      = int phi_1(t) H_2(t) dt,
///
/// evaluated on one shared panel grid spanning
/// [min(mu) - R sigma, max(mu) + R sigma]. Each panel carries Gauss-Legendre
/// nodes and a spectral integration matrix, so every level costs one
/// cumulative sweep. Levels are rescaled as they are built, which keeps
/// log_value finite long after value underflows.
///
/// The grid is refined until two resolutions agree to the QuadratureSpec tolerance;
/// ConvergenceFailure once it would exceed spec.max_subdivisions panels.
OrderingProb ordering_probability(const MeanConfig& cfg, const QuadratureSpec& spec = {});

/// Fraction of n_draws simulated vectors that land in the descending order.
/// Draws are split into fixed blocks whose streams derive from (seed, block),
/// so the answer does not depend on `threads` (0 = SELEX_THREADS / auto).
OrderingProb mc_ordering_probability(const MeanConfig& cfg, std::int64_t n_draws,
                                     std::uint64_t seed, int threads = 0);

enum class GradientMethod {
  /// Analytic for p = 2, central differences otherwise.
  automatic,
  finite_difference,
};

/// Gradient of log P with respect to the means.
///
/// `step` is the central-difference half-width; a value <= 0 selects the
/// default 1e-5 * sigma.
std::vector<double> grad_log_ordering_probability(
    const MeanConfig& cfg, const QuadratureSpec& spec = {}, double step = 0.0,
    GradientMethod method = GradientMethod::automatic);

}  // namespace selex
