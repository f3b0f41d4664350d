#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "selex/errors.hpp"
#include "selex/experiments.hpp"

using namespace selex;

namespace {

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::filesystem::path scratch(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / "selex_test_experiments";
  std::filesystem::create_directories(dir);
  return dir / name;
}

MseConfig small_mse(std::vector<double> mu, std::int64_t reps, std::uint64_t seed) {
  MseConfig cfg;
  cfg.mu_true = std::move(mu);
  cfg.n_reps = reps;
  cfg.seed = seed;
  cfg.ranks = {1};
  return cfg;
}

BootstrapConfig small_boot(std::vector<double> mu, double level = 0.95) {
  BootstrapConfig cfg;
  cfg.mu_true = std::move(mu);
  cfg.n_per_group = 20;
  cfg.n_boot = 999;
  cfg.level = level;
  cfg.seed = 5;
  return cfg;
}

}  // namespace

TEST_CASE("errors are scored against the selected population") {
  const std::vector<double> mu{3.0, 2.0, 1.0};
  const std::vector<double> draw{2.1, 2.2, 1.8};
  const auto rec = score_replicate(mu, draw, 1.0);
  REQUIRE(rec.selected_labels.size() == 3);
  CHECK(rec.selected_labels[0] == 1);
  CHECK(rec.selected_labels[1] == 0);
  CHECK(rec.selected_labels[2] == 2);
  CHECK(rec.errors_mle[0] == doctest::Approx(-0.2).epsilon(1e-12));
  CHECK(rec.errors_mle[1] == doctest::Approx(0.9).epsilon(1e-12));
  CHECK(rec.errors_mle[2] == doctest::Approx(-0.8).epsilon(1e-12));
  CHECK(rec.errors_ccmle.size() == 3);
}

TEST_CASE("configuration validation") {
  CHECK_THROWS_AS(small_mse({0, 0}, 99, 1).validate(), InvalidArgument);
  auto no_ranks = small_mse({0, 0}, 100, 1);
  no_ranks.ranks.clear();
  CHECK_THROWS_AS(no_ranks.validate(), InvalidArgument);
  auto bad_rank = small_mse({0, 0}, 100, 1);
  bad_rank.ranks = {3};
  CHECK_THROWS_AS(bad_rank.validate(), InvalidArgument);
  try {
    small_mse({0, 0}, 0, 1).validate();
    FAIL("expected InvalidArgument");
  } catch (const InvalidArgument& e) {
    CHECK(std::string(e.what()).find("n_reps") != std::string::npos);
  }

  auto boot = small_boot({1, 0});
  boot.n_boot = 998;
  CHECK_THROWS_AS(boot.validate(), InvalidArgument);
  boot = small_boot({1, 0}, 1.0);
  CHECK_THROWS_AS(boot.validate(), InvalidArgument);
  boot = small_boot({1, 0}, 0.0);
  CHECK_THROWS_AS(boot.validate(), InvalidArgument);
}

TEST_CASE("MSE study") {
  SUBCASE("naive max of two standard normals has unit MSE") {
    const auto s = run_mse(small_mse({0, 0}, 10'000, 7));
    REQUIRE(s.ranks.size() == 1);
    CHECK(s.failures == 0);
    CHECK(s.n_used == 10'000);
    CHECK(std::fabs(s.ranks[0].mse_mle - 1.0) <= 0.05);
    CHECK(s.ranks[0].mse_ccmle < s.ranks[0].mse_mle);
  }

  SUBCASE("summary does not depend on worker count") {
    auto cfg = small_mse({1.0, 0.5, 0.0}, 200, 3);
    cfg.ranks = {1, 2, 3};
    const auto a = run_mse(cfg, 1);
    const auto b = run_mse(cfg, 4);
    REQUIRE(a.ranks.size() == 3);
    for (std::size_t r = 0; r < 3; ++r) {
      CHECK(a.ranks[r].mse_mle == b.ranks[r].mse_mle);
      CHECK(a.ranks[r].mse_ccmle == b.ranks[r].mse_ccmle);
      CHECK(a.ranks[r].se_ccmle == b.ranks[r].se_ccmle);
    }
    CHECK(run_mse(cfg, 1).ranks[0].mse_ccmle == a.ranks[0].mse_ccmle);
  }

  SUBCASE("grids") {
    const auto g2 = mse_grid_p2();
    CHECK(g2.size() == 21);
    CHECK(g2.front() == std::vector<double>{0.0, 0.0});
    CHECK(g2.back() == std::vector<double>{5.0, 0.0});
    const auto g3 = mse_grid_p3();
    CHECK(g3.size() == 100);
    for (const auto& mu : g3) {
      CHECK(mu[0] >= mu[1]);
      CHECK(mu[1] >= mu[2]);
    }
  }
}

TEST_CASE("quantiles and bootstrap intervals") {
  const std::vector<double> v{4.0, 1.0, 3.0, 2.0, 5.0};
  CHECK(sample_quantile(v, 0.0) == 1.0);
  CHECK(sample_quantile(v, 1.0) == 5.0);
  CHECK(sample_quantile(v, 0.5) == 3.0);
  CHECK(sample_quantile(v, 0.1) == doctest::Approx(1.4).epsilon(1e-14));

  std::vector<double> sym;
  for (int i = -500; i <= 500; ++i) sym.push_back(i * 0.01);
  double z0 = 1.0;
  const auto bc = bc_interval(sym, 0.0, 0.9, &z0);
  const auto pct = percentile_interval(sym, 0.0, 0.9);
  CHECK(std::fabs(z0) < 1e-12);
  CHECK(bc.lower == doctest::Approx(pct.lower).epsilon(1e-12));
  CHECK(bc.upper == doctest::Approx(pct.upper).epsilon(1e-12));
  CHECK(pct.lower == doctest::Approx(sample_quantile(sym, 0.05)).epsilon(1e-12));

  bc_interval(sym, 100.0, 0.9, &z0);
  CHECK(z0 == doctest::Approx(std_normal_quantile(1.0 - 0.5 / sym.size())).epsilon(1e-12));
}

TEST_CASE("bootstrap on constant data collapses to points") {
  auto cfg = small_boot({3.0, 0.0});
  const std::vector<std::vector<double>> samples{std::vector<double>(20, 3.0),
                                                 std::vector<double>(20, 0.0)};
  const auto set = bootstrap_from_data(cfg, samples);
  REQUIRE(set.ranks.size() == 2);
  for (const auto& r : set.ranks) {
    CHECK(r.ccmle.lower == r.ccmle.point);
    CHECK(r.ccmle.upper == r.ccmle.point);
    CHECK(r.traditional.lower == r.traditional.upper);
  }
  CHECK(set.failures == 0);
}

TEST_CASE("bootstrap intervals") {
  const auto wide = run_bootstrap_ci(small_boot({1.5, 0.0}, 0.95), 1);
  const auto narrow = run_bootstrap_ci(small_boot({1.5, 0.0}, 0.90), 3);
  REQUIRE(wide.ranks.size() == 2);
  CHECK(wide.group_means == narrow.group_means);
  for (std::size_t r = 0; r < 2; ++r) {
    CHECK(wide.ranks[r].ccmle.lower <= narrow.ranks[r].ccmle.lower);
    CHECK(wide.ranks[r].ccmle.upper >= narrow.ranks[r].ccmle.upper);
    CHECK(wide.ranks[r].traditional.lower <= narrow.ranks[r].traditional.lower);
    CHECK(wide.ranks[r].traditional.upper >= narrow.ranks[r].traditional.upper);
    CHECK(wide.ranks[r].traditional.lower <= wide.ranks[r].traditional.point);
    CHECK(wide.ranks[r].traditional.point <= wide.ranks[r].traditional.upper);
    CHECK(wide.boot_ccmle[r].size() == 999);
  }

  const auto again = run_bootstrap_ci(small_boot({1.5, 0.0}, 0.95), 4);
  CHECK(again.boot_ccmle == wide.boot_ccmle);
  CHECK(again.ranks[0].ccmle.upper == wide.ranks[0].ccmle.upper);

  auto bad = small_boot({1.0, 0.0});
  CHECK_THROWS_AS(bootstrap_from_data(bad, {std::vector<double>(20, 1.0)}), InvalidArgument);
}

TEST_CASE("result tables and export") {
  auto cfg = small_mse({0.5, 0.0}, 100, 2);
  cfg.ranks = {1, 2};
  const auto summary = run_mse(cfg);
  const std::vector<MseSummary> summaries{summary};
  const auto table = mse_table(summaries);
  CHECK(table.columns == std::vector<std::string>{"config_id", "mu_true_1", "mu_true_2", "rank",
                                                  "estimator", "mse", "se", "n_reps"});
  CHECK(table.rows.size() == 4);

  const auto csv = to_csv(table);
  CHECK(csv.rfind("config_id,mu_true_1,mu_true_2,rank,estimator,mse,se,n_reps\n", 0) == 0);
  CHECK(csv.find('\r') == std::string::npos);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 5);

  SUBCASE("JSON round-trip") {
    Table two{table.columns, {table.rows[0], table.rows[1]}};
    const auto parsed = nlohmann::json::parse(to_json(two));
    REQUIRE(parsed.size() == 2);
    for (std::size_t i = 0; i < 2; ++i) {
      CHECK(parsed[i]["rank"].get<std::int64_t>() == std::get<std::int64_t>(two.rows[i][3]));
      CHECK(parsed[i]["estimator"].get<std::string>() == std::get<std::string>(two.rows[i][4]));
      const double mse = std::get<double>(two.rows[i][5]);
      CHECK(parsed[i]["mse"].get<double>() == doctest::Approx(mse).epsilon(1e-9));
      CHECK(format_double(parsed[i]["mse"].get<double>()) == format_double(mse));
    }
  }

  SUBCASE("identical runs write identical bytes") {
    const auto a = scratch("a.csv");
    const auto b = scratch("b.csv");
    export_results(mse_table(std::vector<MseSummary>{run_mse(cfg, 1)}), ExportFormat::csv, a);
    export_results(mse_table(std::vector<MseSummary>{run_mse(cfg, 4)}), ExportFormat::csv, b);
    CHECK(slurp(a) == slurp(b));
    CHECK(slurp(a) == csv);
    const auto j = scratch("a.json");
    export_results(table, ExportFormat::json, j);
    CHECK(slurp(j) == to_json(table));
  }

  SUBCASE("empty table writes nothing") {
    const auto path = scratch("empty.csv");
    std::filesystem::remove(path);
    CHECK_THROWS_AS(export_results(Table{table.columns, {}}, ExportFormat::csv, path),
                    InvalidArgument);
    CHECK_FALSE(std::filesystem::exists(path));
  }

  SUBCASE("unwritable path surfaces the path") {
    const std::filesystem::path bad = "/nonexistent-dir/out.csv";
    try {
      export_results(table, ExportFormat::csv, bad);
      FAIL("expected IoError");
    } catch (const IoError& e) {
      CHECK(std::string(e.what()).find(bad.string()) != std::string::npos);
    }
  }

  CHECK(parse_export_format("json") == ExportFormat::json);
  CHECK_THROWS_AS(parse_export_format("xml"), InvalidArgument);
  CHECK(format_double(0.1) == "0.1");
  CHECK(format_double(1.0 / 3.0) == "0.3333333333");
}
