#include "selex/normal_kernels.hpp"

#include <array>
#include <cmath>
#include <limits>
#include <queue>
#include <tuple>
#include <utility>
#include <string>
#include <vector>

#include "selex/errors.hpp"

namespace selex {

void QuadratureSpec::validate() const {
  if (!(abs_tol > 0.0)) throw InvalidArgument("QuadratureSpec: abs_tol must be > 0");
  if (!(rel_tol > 0.0)) throw InvalidArgument("QuadratureSpec: rel_tol must be > 0");
  if (!(truncation_radius >= 6.0))
    throw InvalidArgument("QuadratureSpec: truncation_radius must be >= 6");
  if (max_subdivisions < 10)
    throw InvalidArgument("QuadratureSpec: max_subdivisions must be >= 10");
}

double std_normal_pdf(double z) { return kInvSqrt2Pi * std::exp(-0.5 * z * z); }

double log_std_normal_pdf(double z) { return -0.5 * z * z - kLogSqrt2Pi; }

double std_normal_cdf(double z) { return 0.5 * std::erfc(-z / kSqrt2); }

double std_normal_sf(double z) { return 0.5 * std::erfc(z / kSqrt2); }

namespace {

// g(z) = z + 1/(z + 2/(z + 3/(z + ...))), modified Lentz. Converges
// quickly for z >= 5.
double mills_continued_fraction(double z) {
  constexpr double tiny = 1e-300;
  constexpr double eps = 1e-16;
  double f = z;
  double c = f;
  double d = 0.0;
  for (int k = 1; k < 1000; ++k) {
    d = z + k * d;
    if (std::fabs(d) < tiny) d = tiny;
    c = z + k / c;
    if (std::fabs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double delta = c * d;
    f *= delta;
    if (std::fabs(delta - 1.0) < eps) break;
  }
  return f;
}

constexpr double kTailSwitch = 5.0;

}  // namespace

double inverse_mills(double z) {
  if (z > kTailSwitch) return mills_continued_fraction(z);
  return std_normal_pdf(z) / std_normal_sf(z);
}

double log_inverse_mills(double z) {
  if (z > kTailSwitch) return std::log(mills_continued_fraction(z));
  return log_std_normal_pdf(z) - std::log(std_normal_sf(z));
}

double log_std_normal_cdf(double z) {
  // Phi(z) = phi(z) / g(-z)
  if (z < -kTailSwitch) return log_std_normal_pdf(z) - std::log(mills_continued_fraction(-z));
  if (z > kTailSwitch) return std::log1p(-std_normal_sf(z));
  return std::log(std_normal_cdf(z));
}

double std_normal_quantile(double prob) {
  if (!(prob > 0.0 && prob < 1.0))
    throw InvalidArgument("std_normal_quantile: probability must lie in (0, 1)");

  static constexpr std::array<double, 6> a{-3.969683028665376e+01, 2.209460984245205e+02,
                                           -2.759285104469687e+02, 1.383577518672690e+02,
                                           -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr std::array<double, 5> b{-5.447609879822406e+01, 1.615858368580409e+02,
                                           -1.556989798598866e+02, 6.680131188771972e+01,
                                           -1.328068155288572e+01};
  static constexpr std::array<double, 6> c{-7.784894002430293e-03, -3.223964580411365e-01,
                                           -2.400758277161838e+00, -2.549732539343734e+00,
                                           4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr std::array<double, 4> d{7.784695709041462e-03, 3.224671290700398e-01,
                                           2.445134137142996e+00, 3.754408661907416e+00};
  constexpr double p_low = 0.02425;

  double x;
  if (prob < p_low) {
    const double q = std::sqrt(-2.0 * std::log(prob));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (prob <= 1.0 - p_low) {
    const double q = prob - 0.5;
    const double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    const double q = std::sqrt(-2.0 * std::log1p(-prob));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }

  // Halley refinement; work in the tail that keeps relative precision.
  for (int it = 0; it < 2; ++it) {
    const double e = x < 0.0 ? std_normal_cdf(x) - prob : (1.0 - prob) - std_normal_sf(x);
    const double u = e / std_normal_pdf(x);
    x -= u / (1.0 + 0.5 * x * u);
  }
  return x;
}

namespace {

// Gauss-Kronrod 7/15 abscissae on [-1, 1] (nonnegative half) and weights.
constexpr std::array<double, 8> kXgk{
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
constexpr std::array<double, 8> kWgk{
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
// Gauss weights at kXgk[1], kXgk[3], kXgk[5], kXgk[7].
constexpr std::array<double, 4> kWg{
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

struct Panel {
  double lo;
  double hi;
  double value;
  double error;
  bool operator<(const Panel& other) const { return error < other.error; }
};

Panel gk15(const std::function<double(double)>& f, double lo, double hi) {
  const double center = 0.5 * (lo + hi);
  const double half = 0.5 * (hi - lo);
  const double fc = f(center);
  double kronrod = kWgk[7] * fc;
  double gauss = kWg[3] * fc;
  for (int j = 0; j < 7; ++j) {
    const double dx = half * kXgk[j];
    const double sum = f(center - dx) + f(center + dx);
    kronrod += kWgk[j] * sum;
    if (j % 2 == 1) gauss += kWg[j / 2] * sum;
  }
  kronrod *= half;
  gauss *= half;
  return {lo, hi, kronrod, std::fabs(kronrod - gauss)};
}

}  // namespace

QuadratureResult integrate_interval(const std::function<double(double)>& f, double lo,
                                    double hi, const QuadratureSpec& spec) {
  spec.validate();
  if (!(std::isfinite(lo) && std::isfinite(hi) && lo < hi))
    throw InvalidArgument("integrate: interval must be finite with lo < hi");

  constexpr int initial_panels = 8;
  std::priority_queue<Panel> panels;
  const double width = (hi - lo) / initial_panels;
  for (int i = 0; i < initial_panels; ++i) {
    const double a = lo + i * width;
    const double b = (i + 1 == initial_panels) ? hi : lo + (i + 1) * width;
    panels.push(gk15(f, a, b));
  }

  auto totals = [&panels]() {
    auto copy = panels;
    double value = 0.0;
    double error = 0.0;
    while (!copy.empty()) {
      value += copy.top().value;
      error += copy.top().error;
      copy.pop();
    }
    return std::pair{value, error};
  };

  auto [value, error] = totals();
  while (error > std::max(spec.abs_tol, spec.rel_tol * std::fabs(value))) {
    if (static_cast<int>(panels.size()) >= spec.max_subdivisions) {
      throw ConvergenceFailure("integrate: " + std::to_string(spec.max_subdivisions) +
                                   " subdivisions exhausted",
                               value, error);
    }
    const Panel worst = panels.top();
    panels.pop();
    const double mid = 0.5 * (worst.lo + worst.hi);
    const Panel left = gk15(f, worst.lo, mid);
    const Panel right = gk15(f, mid, worst.hi);
    value += left.value + right.value - worst.value;
    error += left.error + right.error - worst.error;
    panels.push(left);
    panels.push(right);
  }

  std::tie(value, error) = totals();
  return {value, error, static_cast<int>(panels.size())};
}

QuadratureResult integrate(const std::function<double(double)>& f, const QuadratureSpec& spec,
                           double center, double scale) {
  if (!(scale > 0.0)) throw InvalidArgument("integrate: scale must be > 0");
  const double radius = spec.truncation_radius * scale;
  return integrate_interval(f, center - radius, center + radius, spec);
}

}  // namespace selex
