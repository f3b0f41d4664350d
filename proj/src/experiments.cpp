#include "selex/experiments.hpp"

#include <algorithm>
#include <numeric>
#include <random>
#include <string>
#include <tuple>

#include "selex/errors.hpp"
#include "selex/parallel.hpp"

namespace selex {

namespace {

void check_means(const std::vector<double>& mu, const char* who) {
  if (mu.size() < 2) throw InvalidArgument(std::string(who) + ": mu_true needs at least 2 means");
  for (double m : mu)
    if (!std::isfinite(m)) throw InvalidArgument(std::string(who) + ": mu_true must be finite");
}

}  // namespace

void MseConfig::validate() const {
  check_means(mu_true, "MseConfig");
  if (!(std::isfinite(sigma) && sigma > 0.0)) throw InvalidArgument("MseConfig: sigma must be > 0");
  if (n_reps < 100) throw InvalidArgument("MseConfig: n_reps must be >= 100");
  if (ranks.empty()) throw InvalidArgument("MseConfig: ranks must not be empty");
  for (std::size_t r : ranks)
    if (r < 1 || r > mu_true.size())
      throw InvalidArgument("MseConfig: rank " + std::to_string(r) + " outside 1.." +
                            std::to_string(mu_true.size()));
}

void BootstrapConfig::validate() const {
  check_means(mu_true, "BootstrapConfig");
  if (n_per_group < 2) throw InvalidArgument("BootstrapConfig: n_per_group must be >= 2");
  if (!(std::isfinite(obs_sd) && obs_sd > 0.0))
    throw InvalidArgument("BootstrapConfig: obs_sd must be > 0");
  if (n_boot < 999) throw InvalidArgument("BootstrapConfig: n_boot must be >= 999");
  if (!(level > 0.0 && level < 1.0)) throw InvalidArgument("BootstrapConfig: level must be in (0, 1)");
}

ExperimentRecord score_replicate(std::span<const double> mu_true, std::span<const double> draw,
                                 double sigma, const QuadratureSpec& spec,
                                 const OptimizerSettings& opt) {
  if (mu_true.size() != draw.size())
    throw InvalidArgument("score_replicate: draw and mu_true differ in length");
  const ObservedSample obs({draw.begin(), draw.end()}, sigma);
  const auto fit = ccmle(obs, spec, opt);

  ExperimentRecord rec;
  rec.draw.assign(draw.begin(), draw.end());
  rec.selected_labels.assign(obs.labels().begin(), obs.labels().end());
  const std::size_t p = draw.size();
  rec.errors_mle.resize(p);
  rec.errors_ccmle.resize(p);
  for (std::size_t r = 0; r < p; ++r) {
    const double truth = mu_true[rec.selected_labels[r]];
    rec.errors_mle[r] = truth - obs.x()[r];
    rec.errors_ccmle[r] = truth - fit.mu_hat[r];
  }
  return rec;
}

MseSummary run_mse(const MseConfig& cfg, int threads, const QuadratureSpec& spec,
                   const OptimizerSettings& opt) {
  cfg.validate();
  const std::size_t p = cfg.mu_true.size();
  const auto n = static_cast<std::size_t>(cfg.n_reps);

  enum class Status : char { ok, not_converged, failed };
  std::vector<double> err_mle(n * p);
  std::vector<double> err_ccmle(n * p);
  std::vector<Status> status(n, Status::ok);

  parallel_for(cfg.n_reps, threads, [&](std::int64_t i) {
    auto engine = stream_engine(cfg.seed, static_cast<std::uint64_t>(i));
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<double> draw(p);
    for (std::size_t k = 0; k < p; ++k) draw[k] = cfg.mu_true[k] + cfg.sigma * normal(engine);

    const auto slot = static_cast<std::size_t>(i);
    try {
      const ObservedSample obs(draw, cfg.sigma);
      const auto fit = ccmle(obs, spec, opt);
      for (std::size_t r = 0; r < p; ++r) {
        const double truth = cfg.mu_true[obs.labels()[r]];
        err_mle[slot * p + r] = truth - obs.x()[r];
        err_ccmle[slot * p + r] = truth - fit.mu_hat[r];
      }
      if (!fit.converged) status[slot] = Status::not_converged;
    } catch (const Error&) {
      status[slot] = Status::failed;
    }
  });

  MseSummary out;
  out.config = cfg;
  for (Status s : status) {
    if (s == Status::failed) ++out.failures;
    if (s == Status::not_converged) ++out.not_converged;
  }
  out.n_used = cfg.n_reps - out.failures;

  auto mse_and_se = [&](const std::vector<double>& err, std::size_t r) {
    double sum = 0.0;
    double sum_sq = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (status[i] == Status::failed) continue;
      const double sq = err[i * p + r] * err[i * p + r];
      sum += sq;
      sum_sq += sq * sq;
    }
    const auto m = static_cast<double>(out.n_used);
    if (m < 2) return std::pair{sum / std::max(m, 1.0), 0.0};
    const double mean = sum / m;
    const double var = std::max(0.0, (sum_sq - m * mean * mean) / (m - 1.0));
    return std::pair{mean, std::sqrt(var / m)};
  };

  for (std::size_t rank : cfg.ranks) {
    RankMse row;
    row.rank = rank;
    std::tie(row.mse_mle, row.se_mle) = mse_and_se(err_mle, rank - 1);
    std::tie(row.mse_ccmle, row.se_ccmle) = mse_and_se(err_ccmle, rank - 1);
    out.ranks.push_back(row);
  }
  return out;
}

std::vector<std::vector<double>> mse_grid_p2(double step) {
  if (!(step > 0.0)) throw InvalidArgument("mse_grid_p2: step must be > 0");
  std::vector<std::vector<double>> grid;
  const int count = static_cast<int>(std::floor(5.0 / step + 1e-9));
  for (int i = 0; i <= count; ++i) grid.push_back({i * step, 0.0});
  return grid;
}

std::vector<std::vector<double>> mse_grid_p3(double step) {
  if (!(step > 0.0)) throw InvalidArgument("mse_grid_p3: step must be > 0");
  std::vector<std::vector<double>> grid;
  for (double mu3 : {0.0, 2.0, 4.0}) {
    const int count = static_cast<int>(std::floor((5.0 - mu3) / step + 1e-9));
    for (int i = 0; i <= count; ++i)
      for (int j = 0; j <= i; ++j) grid.push_back({mu3 + i * step, mu3 + j * step, mu3});
  }
  return grid;
}

namespace {

std::vector<std::string> header_with_means(std::size_t p, std::initializer_list<const char*> tail) {
  std::vector<std::string> cols{"config_id"};
  for (std::size_t i = 1; i <= p; ++i) cols.push_back("mu_true_" + std::to_string(i));
  for (const char* c : tail) cols.emplace_back(c);
  return cols;
}

std::vector<Cell> row_prefix(std::size_t id, const std::vector<double>& mu) {
  std::vector<Cell> row{static_cast<std::int64_t>(id)};
  for (double m : mu) row.emplace_back(m);
  return row;
}

}  // namespace

Table mse_table(std::span<const MseSummary> summaries) {
  if (summaries.empty()) throw InvalidArgument("mse_table: no summaries");
  const std::size_t p = summaries.front().config.mu_true.size();
  Table table;
  table.columns = header_with_means(p, {"rank", "estimator", "mse", "se", "n_reps"});
  for (std::size_t id = 0; id < summaries.size(); ++id) {
    const auto& s = summaries[id];
    if (s.config.mu_true.size() != p)
      throw InvalidArgument("mse_table: summaries differ in the number of populations");
    for (const auto& r : s.ranks) {
      for (const bool is_ccmle : {false, true}) {
        auto row = row_prefix(id, s.config.mu_true);
        row.emplace_back(static_cast<std::int64_t>(r.rank));
        row.emplace_back(std::string(is_ccmle ? "ccmle" : "mle"));
        row.emplace_back(is_ccmle ? r.mse_ccmle : r.mse_mle);
        row.emplace_back(is_ccmle ? r.se_ccmle : r.se_mle);
        row.emplace_back(s.n_used);
        table.rows.push_back(std::move(row));
      }
    }
  }
  return table;
}

double sample_quantile(std::span<const double> values, double q) {
  if (values.empty()) throw InvalidArgument("sample_quantile: no values");
  if (!(q >= 0.0 && q <= 1.0)) throw InvalidArgument("sample_quantile: q must be in [0, 1]");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  const double h = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

Interval percentile_interval(std::span<const double> stats, double point, double level) {
  const double alpha = 1.0 - level;
  return {point, sample_quantile(stats, 0.5 * alpha), sample_quantile(stats, 1.0 - 0.5 * alpha)};
}

Interval bc_interval(std::span<const double> stats, double point, double level, double* z0_out) {
  if (stats.empty()) throw InvalidArgument("bc_interval: no bootstrap statistics");
  double below = 0.0;
  for (double s : stats) {
    if (s < point)
      below += 1.0;
    else if (s == point)
      below += 0.5;
  }
  const auto b = static_cast<double>(stats.size());
  const double share = std::clamp(below / b, 0.5 / b, 1.0 - 0.5 / b);
  const double z0 = std_normal_quantile(share);
  const double z_alpha = std_normal_quantile(0.5 * (1.0 - level));
  if (z0_out != nullptr) *z0_out = z0;
  return {point, sample_quantile(stats, std_normal_cdf(2.0 * z0 + z_alpha)),
          sample_quantile(stats, std_normal_cdf(2.0 * z0 - z_alpha))};
}

IntervalSet bootstrap_from_data(const BootstrapConfig& cfg,
                                const std::vector<std::vector<double>>& samples, int threads,
                                const QuadratureSpec& spec, const OptimizerSettings& opt) {
  cfg.validate();
  const std::size_t p = cfg.mu_true.size();
  if (samples.size() != p) throw InvalidArgument("bootstrap: one sample per population required");
  for (const auto& s : samples)
    if (static_cast<std::int64_t>(s.size()) != cfg.n_per_group)
      throw InvalidArgument("bootstrap: every sample must hold n_per_group observations");

  const double sigma_eff = cfg.obs_sd / std::sqrt(static_cast<double>(cfg.n_per_group));
  auto group_mean = [](const std::vector<double>& v) {
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  };

  IntervalSet out;
  out.config = cfg;
  for (const auto& s : samples) out.group_means.push_back(group_mean(s));
  const ObservedSample original(out.group_means, sigma_eff);
  out.estimate = ccmle(original, spec, opt);

  const auto n_boot = static_cast<std::size_t>(cfg.n_boot);
  out.boot_ccmle.assign(p, std::vector<double>(n_boot));
  out.boot_means.assign(p, std::vector<double>(n_boot));
  std::vector<std::int64_t> failures(n_boot, 0);
  constexpr int max_attempts = 100;

  parallel_for(cfg.n_boot, threads, [&](std::int64_t b) {
    auto engine = stream_engine(cfg.seed, static_cast<std::uint64_t>(b) + 1);
    std::uniform_int_distribution<std::size_t> pick(0, static_cast<std::size_t>(cfg.n_per_group) - 1);
    const auto slot = static_cast<std::size_t>(b);
    std::vector<double> means(p);
    for (int attempt = 0; attempt < max_attempts; ++attempt) {
      for (std::size_t k = 0; k < p; ++k) {
        double sum = 0.0;
        for (std::int64_t j = 0; j < cfg.n_per_group; ++j) sum += samples[k][pick(engine)];
        means[k] = sum / static_cast<double>(cfg.n_per_group);
      }
      try {
        const ObservedSample obs(means, sigma_eff);
        const auto fit = ccmle(obs, spec, opt);
        if (!fit.converged) {
          ++failures[slot];
          continue;
        }
        for (std::size_t r = 0; r < p; ++r) {
          out.boot_ccmle[r][slot] = fit.mu_hat[r];
          out.boot_means[r][slot] = obs.x()[r];
        }
        return;
      } catch (const Error&) {
        ++failures[slot];
      }
    }
    throw Error("bootstrap: resample " + std::to_string(b) + " failed " +
                std::to_string(max_attempts) + " times");
  });
  out.failures = std::accumulate(failures.begin(), failures.end(), std::int64_t{0});

  for (std::size_t r = 0; r < p; ++r) {
    RankInterval ri;
    ri.rank = r + 1;
    ri.ccmle = bc_interval(out.boot_ccmle[r], out.estimate.mu_hat[r], cfg.level, &ri.z0);
    ri.traditional = percentile_interval(out.boot_means[r], original.x()[r], cfg.level);
    out.ranks.push_back(ri);
  }
  return out;
}

IntervalSet run_bootstrap_ci(const BootstrapConfig& cfg, int threads, const QuadratureSpec& spec,
                             const OptimizerSettings& opt) {
  cfg.validate();
  auto engine = stream_engine(cfg.seed, 0);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<std::vector<double>> samples(cfg.mu_true.size());
  for (std::size_t k = 0; k < samples.size(); ++k) {
    samples[k].resize(static_cast<std::size_t>(cfg.n_per_group));
    for (double& v : samples[k]) v = cfg.mu_true[k] + cfg.obs_sd * normal(engine);
  }
  return bootstrap_from_data(cfg, samples, threads, spec, opt);
}

Table interval_table(std::span<const IntervalSet> sets) {
  if (sets.empty()) throw InvalidArgument("interval_table: no interval sets");
  const std::size_t p = sets.front().config.mu_true.size();
  Table table;
  table.columns =
      header_with_means(p, {"rank", "method", "point", "lower", "upper", "level", "n_boot"});
  for (std::size_t id = 0; id < sets.size(); ++id) {
    const auto& s = sets[id];
    if (s.config.mu_true.size() != p)
      throw InvalidArgument("interval_table: sets differ in the number of populations");
    for (const auto& r : s.ranks) {
      for (const bool is_ccmle : {true, false}) {
        const Interval& iv = is_ccmle ? r.ccmle : r.traditional;
        auto row = row_prefix(id, s.config.mu_true);
        row.emplace_back(static_cast<std::int64_t>(r.rank));
        row.emplace_back(std::string(is_ccmle ? "ccmle_bc" : "traditional"));
        row.emplace_back(iv.point);
        row.emplace_back(iv.lower);
        row.emplace_back(iv.upper);
        row.emplace_back(s.config.level);
        row.emplace_back(s.config.n_boot);
        table.rows.push_back(std::move(row));
      }
    }
  }
  return table;
}

}  // namespace selex
