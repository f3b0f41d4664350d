#include "selex/ordering_prob.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <string>

#include "selex/errors.hpp"
#include "selex/parallel.hpp"

namespace selex {

MeanConfig::MeanConfig(std::vector<double> mu, double sigma) : mu_(std::move(mu)), sigma_(sigma) {
  if (mu_.size() < 2) throw InvalidArgument("MeanConfig: need at least 2 means");
  if (!(std::isfinite(sigma_) && sigma_ > 0.0))
    throw InvalidArgument("MeanConfig: sigma must be finite and > 0");
  for (double m : mu_)
    if (!std::isfinite(m)) throw InvalidArgument("MeanConfig: means must be finite");
}

const char* to_string(ProbMethod method) {
  switch (method) {
    case ProbMethod::closed_form_p2: return "closed_form_p2";
    case ProbMethod::quadrature: return "quadrature";
    case ProbMethod::monte_carlo: return "monte_carlo";
  }
  return "unknown";
}

namespace {

constexpr double kUnderflowThreshold = 1e-300;

// Gauss-Legendre panel of fixed order with the matrix that integrates the
// interpolating polynomial from the panel's left edge up to each node.
template <int N>
struct SpectralPanel {
  std::array<double, N> nodes{};
  std::array<double, N> weights{};
  std::array<std::array<double, N>, N> cumulative{};

  SpectralPanel() {
    for (int i = 0; i < N; ++i) {
      double x = std::cos(M_PI * (i + 0.75) / (N + 0.5));
      double dp = 0.0;
      for (int it = 0; it < 100; ++it) {
        double p0 = 1.0;
        double p1 = x;
        for (int k = 2; k <= N; ++k) {
          const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
          p0 = p1;
          p1 = p2;
        }
        dp = N * (x * p1 - p0) / (x * x - 1.0);
        const double dx = p1 / dp;
        x -= dx;
        if (std::fabs(dx) < 1e-16) break;
      }
      // ascending order
      nodes[N - 1 - i] = x;
      weights[N - 1 - i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }

    auto lagrange = [this](int j, double t) {
      double v = 1.0;
      for (int k = 0; k < N; ++k)
        if (k != j) v *= (t - nodes[k]) / (nodes[j] - nodes[k]);
      return v;
    };
    for (int i = 0; i < N; ++i) {
      const double half = 0.5 * (nodes[i] + 1.0);
      for (int j = 0; j < N; ++j) {
        double s = 0.0;
        for (int q = 0; q < N; ++q) s += weights[q] * lagrange(j, -1.0 + half * (nodes[q] + 1.0));
        cumulative[i][j] = half * s;
      }
    }
  }
};

constexpr int kOrder = 16;

const SpectralPanel<kOrder>& panel_rule() {
  static const SpectralPanel<kOrder> rule;
  return rule;
}

double log_add(double a, double b) {
  if (a < b) std::swap(a, b);
  if (b == -std::numeric_limits<double>::infinity()) return a;
  return a + std::log1p(std::exp(b - a));
}

// log P on a grid of `panels` equal panels covering [lo, hi]. Each panel's
// integrand is rescaled by its own peak and running integrals are carried as
// logs, so no intermediate quantity underflows.
double log_prob_on_grid(std::span<const double> mu, double sigma, double lo, double hi,
                        int panels) {
  const auto& rule = panel_rule();
  const std::size_t p = mu.size();
  const double h = (hi - lo) / panels;
  const double log_jac = std::log(0.5 * h);
  const std::size_t n_nodes = static_cast<std::size_t>(panels) * kOrder;
  constexpr double neg_inf = -std::numeric_limits<double>::infinity();

  std::vector<double> s(n_nodes);
  for (int q = 0; q < panels; ++q)
    for (int i = 0; i < kOrder; ++i) s[q * kOrder + i] = lo + h * (q + 0.5 * (rule.nodes[i] + 1.0));

  const double log_sigma = std::log(sigma);

  // log H_p
  std::vector<double> log_h(n_nodes);
  for (std::size_t j = 0; j < n_nodes; ++j) log_h[j] = log_std_normal_cdf((s[j] - mu[p - 1]) / sigma);

  std::array<double, kOrder> f{};
  // Loads panel q of phi_k * H_{k+1}, scaled by its peak; returns the log peak.
  auto load_panel = [&](std::size_t k, int q) {
    double peak = neg_inf;
    for (int j = 0; j < kOrder; ++j) {
      const std::size_t n = q * kOrder + j;
      f[j] = log_std_normal_pdf((s[n] - mu[k]) / sigma) - log_sigma + log_h[n];
      peak = std::max(peak, f[j]);
    }
    if (peak == neg_inf) return peak;
    for (double& v : f) v = std::exp(v - peak);
    return peak;
  };
  auto panel_total = [&]() {
    double total = 0.0;
    for (int j = 0; j < kOrder; ++j) total += rule.weights[j] * f[j];
    return total;
  };

  for (std::size_t k = p - 2; k >= 1; --k) {
    double log_carry = neg_inf;
    for (int q = 0; q < panels; ++q) {
      const double peak = load_panel(k, q);
      for (int i = 0; i < kOrder; ++i) {
        double partial = 0.0;
        if (peak != neg_inf)
          for (int j = 0; j < kOrder; ++j) partial += rule.cumulative[i][j] * f[j];
        log_h[q * kOrder + i] =
            partial > 0.0 ? log_add(log_carry, peak + log_jac + std::log(partial)) : log_carry;
      }
      if (peak == neg_inf) continue;
      const double total = panel_total();
      if (total > 0.0) log_carry = log_add(log_carry, peak + log_jac + std::log(total));
    }
  }

  double log_total = neg_inf;
  for (int q = 0; q < panels; ++q) {
    const double peak = load_panel(0, q);
    if (peak == neg_inf) continue;
    const double total = panel_total();
    if (total > 0.0) log_total = log_add(log_total, peak + log_jac + std::log(total));
  }
  return log_total;
}

OrderingProb closed_form_p2(const MeanConfig& cfg) {
  const double u = (cfg.mu()[1] - cfg.mu()[0]) / (cfg.sigma() * kSqrt2);
  OrderingProb out;
  out.method = ProbMethod::closed_form_p2;
  out.value = std_normal_sf(u);
  out.log_value = log_std_normal_cdf(-u);
  out.err_est = std::numeric_limits<double>::epsilon() * out.value;
  out.underflow = out.value < kUnderflowThreshold;
  return out;
}

}  // namespace

OrderingProb ordering_probability(const MeanConfig& cfg, const QuadratureSpec& spec) {
  spec.validate();
  if (cfg.size() == 2) return closed_form_p2(cfg);

  const auto mu = cfg.mu();
  const double sigma = cfg.sigma();
  const auto [min_it, max_it] = std::minmax_element(mu.begin(), mu.end());
  const double lo = *min_it - spec.truncation_radius * sigma;
  const double hi = *max_it + spec.truncation_radius * sigma;

  // Coarse panels of width ~sigma, then halve until two resolutions agree.
  int panels = std::max(4, static_cast<int>(std::ceil((hi - lo) / sigma)));
  double coarse = log_prob_on_grid(mu, sigma, lo, hi, panels);
  if (2 * panels > spec.max_subdivisions) {
    throw ConvergenceFailure("ordering_probability: spread of the means needs " +
                                 std::to_string(2 * panels) + " panels, limit is " +
                                 std::to_string(spec.max_subdivisions),
                             std::exp(coarse), std::numeric_limits<double>::infinity());
  }
  for (;;) {
    const int fine_panels = 2 * panels;
    const double fine = log_prob_on_grid(mu, sigma, lo, hi, fine_panels);
    const double value = std::exp(fine);
    const double diff = std::fabs(value - std::exp(coarse));
    const double log_diff = std::fabs(fine - coarse);
    const bool underflow = value < kUnderflowThreshold;
    const bool value_ok = diff <= std::max(spec.abs_tol, spec.rel_tol * value);
    // below abs_tol the absolute criterion says nothing, so demand relative accuracy
    const bool log_ok = value >= spec.abs_tol || log_diff <= spec.rel_tol;
    // lower-tail mass dropped at the window edge, one per level
    const double tail = static_cast<double>(cfg.size() - 1) * std_normal_sf(spec.truncation_radius);

    if (value_ok && log_ok && std::isfinite(fine)) {
      OrderingProb out;
      out.method = ProbMethod::quadrature;
      out.value = value;
      out.log_value = fine;
      out.err_est = diff + tail * value;
      out.underflow = underflow;
      return out;
    }
    if (fine_panels * 2 > spec.max_subdivisions) {
      throw ConvergenceFailure("ordering_probability: grid refinement exceeded " +
                                   std::to_string(spec.max_subdivisions) + " panels",
                               value, diff);
    }
    panels = fine_panels;
    coarse = fine;
  }
}

OrderingProb mc_ordering_probability(const MeanConfig& cfg, std::int64_t n_draws,
                                     std::uint64_t seed, int threads) {
  if (n_draws < 10000) throw InvalidArgument("mc_ordering_probability: n_draws must be >= 1e4");

  constexpr std::int64_t block = 1 << 16;
  const std::int64_t n_blocks = (n_draws + block - 1) / block;
  std::vector<std::int64_t> hits(static_cast<std::size_t>(n_blocks), 0);
  const auto mu = cfg.mu();
  const double sigma = cfg.sigma();
  const std::size_t p = mu.size();

  parallel_for(n_blocks, threads, [&](std::int64_t b) {
    auto engine = stream_engine(seed, static_cast<std::uint64_t>(b));
    std::normal_distribution<double> normal(0.0, 1.0);
    const std::int64_t count = std::min(block, n_draws - b * block);
    std::vector<double> x(p);
    std::int64_t local = 0;
    for (std::int64_t r = 0; r < count; ++r) {
      for (std::size_t i = 0; i < p; ++i) x[i] = mu[i] + sigma * normal(engine);
      bool ordered = true;
      for (std::size_t i = 1; i < p && ordered; ++i) ordered = x[i - 1] > x[i];
      local += ordered ? 1 : 0;
    }
    hits[static_cast<std::size_t>(b)] = local;
  });

  std::int64_t total = 0;
  for (auto h : hits) total += h;

  OrderingProb out;
  out.method = ProbMethod::monte_carlo;
  out.value = static_cast<double>(total) / static_cast<double>(n_draws);
  out.err_est = std::sqrt(out.value * (1.0 - out.value) / static_cast<double>(n_draws));
  out.degenerate = total == 0 || total == n_draws;
  out.log_value = out.degenerate ? std::numeric_limits<double>::quiet_NaN() : std::log(out.value);
  return out;
}

std::vector<double> grad_log_ordering_probability(const MeanConfig& cfg, const QuadratureSpec& spec,
                                                  double step, GradientMethod method) {
  const auto mu = cfg.mu();
  const double sigma = cfg.sigma();
  const std::size_t p = mu.size();

  if (p == 2 && method == GradientMethod::automatic) {
    const double u = (mu[1] - mu[0]) / (sigma * kSqrt2);
    const double d = inverse_mills(u) / (sigma * kSqrt2);
    return {d, -d};
  }

  const double h = step > 0.0 ? step : 1e-5 * sigma;
  std::vector<double> grad(p);
  std::vector<double> shifted(mu.begin(), mu.end());
  for (std::size_t i = 0; i < p; ++i) {
    shifted[i] = mu[i] + h;
    const double up = ordering_probability(MeanConfig(shifted, sigma), spec).log_value;
    shifted[i] = mu[i] - h;
    const double down = ordering_probability(MeanConfig(shifted, sigma), spec).log_value;
    shifted[i] = mu[i];
    grad[i] = (up - down) / (2.0 * h);
  }
  return grad;
}

}  // namespace selex
