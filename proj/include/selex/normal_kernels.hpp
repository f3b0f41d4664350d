#pragma once

#include <functional>

namespace selex {

/// Settings for one-dimensional adaptive quadrature over a truncated real line.
struct QuadratureSpec {
  double abs_tol = 1e-10;
  double rel_tol = 1e-8;
  /// Half-width of the integration window, in units of the caller's scale.
  double truncation_radius = 8.0;
  int max_subdivisions = 2000;

  /// Throws InvalidArgument when any field is out of range.
  void validate() const;
};

struct QuadratureResult {
  double value = 0.0;
  double err_est = 0.0;
  int subdivisions = 0;
};

inline constexpr double kSqrt2 = 1.41421356237309504880;
inline constexpr double kSqrtPi = 1.77245385090551602730;
inline constexpr double kInvSqrt2Pi = 0.39894228040143267794;
inline constexpr double kLogSqrt2Pi = 0.91893853320467274178;

double std_normal_pdf(double z);
double log_std_normal_pdf(double z);

/// Phi(z), computed through erfc so both tails keep relative accuracy.
double std_normal_cdf(double z);

/// 1 - Phi(z) without cancellation.
double std_normal_sf(double z);

/// log Phi(z), finite for every finite z.
double log_std_normal_cdf(double z);

/// Inverse of Phi on (0, 1). Acklam's rational start refined by Halley steps.
double std_normal_quantile(double prob);

/// Inverse Mills ratio g(z) = phi(z) / (1 - Phi(z)).
///
/// Above z = 5 the ratio is evaluated from the continued fraction of the
/// Mills ratio, which stays accurate where 1 - Phi(z) is tiny. Below about
/// z = -38.6 the true value is smaller than the least subnormal double and
/// the result is 0; use log_inverse_mills there.
double inverse_mills(double z);

/// log g(z), finite for every finite z.
double log_inverse_mills(double z);

/// Adaptive Gauss-Kronrod (7/15) integration of f over the window
/// [center - R*scale, center + R*scale] with R = spec.truncation_radius.
///
/// Panels with the largest error estimate are bisected until the summed
/// error meets max(abs_tol, rel_tol*|value|). Throws ConvergenceFailure
/// carrying the best estimate once max_subdivisions panels are in use.
QuadratureResult integrate(const std::function<double(double)>& f,
                           const QuadratureSpec& spec, double center = 0.0,
                           double scale = 1.0);

/// Same rule on an explicit finite interval [lo, hi].
QuadratureResult integrate_interval(const std::function<double(double)>& f,
                                    double lo, double hi,
                                    const QuadratureSpec& spec);

}  // namespace selex
