#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <tuple>

#include <Eigen/QR>

#include "mprg/errors.hpp"
#include "mprg/harness.hpp"

using mprg::ExperimentConfig;
using mprg::LinkModel;

namespace {

ExperimentConfig small_config() {
  ExperimentConfig cfg;
  cfg.prior.k = 3;
  cfg.prior.n = 30;
  cfg.link = LinkModel::named("abs-noise-out", 0.05);
  cfg.m_grid = {100, 200, 400};
  cfg.trials = 3;
  cfg.restarts = 2;
  cfg.algorithms = {mprg::Algorithm::mprg, mprg::Algorithm::appgd};
  cfg.solver.t1 = 5;
  cfg.solver.t2 = 5;
  cfg.master_seed = 99;
  return cfg;
}

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::size_t count_of(const std::string& text, const std::string& needle) {
  std::size_t n = 0;
  for (auto pos = text.find(needle); pos != std::string::npos; pos = text.find(needle, pos + 1))
    ++n;
  return n;
}

bool rows_equal(const mprg::SweepResult& a, const mprg::SweepResult& b) {
  if (a.rows.size() != b.rows.size()) return false;
  for (std::size_t i = 0; i < a.rows.size(); ++i) {
    const auto& x = a.rows[i];
    const auto& y = b.rows[i];
    if (std::tie(x.m, x.algorithm, x.trial, x.restart, x.final_error) !=
        std::tie(y.m, y.algorithm, y.trial, y.restart, y.final_error))
      return false;
  }
  return true;
}

}  // namespace

TEST_CASE("run_experiment cardinality") {
  ExperimentConfig cfg;
  cfg.link = LinkModel::named("abs-noise-out", 0);
  cfg.m_grid = {100};
  cfg.trials = 1;
  cfg.restarts = 1;
  cfg.algorithms = {mprg::Algorithm::ppower};
  const auto result = mprg::run_experiment(cfg);
  REQUIRE(result.rows.size() == 1);
  CHECK(result.rows[0].m == 100);
  CHECK(result.rows[0].algorithm == "ppower");
  CHECK(result.aggregates.size() == 1);
  CHECK(result.slopes.empty());

  auto many = small_config();
  const auto full = mprg::run_experiment(many);
  CHECK(full.rows.size() == 3 * 3 * 2);
  many.aggregation = mprg::Aggregation::mean;
  CHECK(mprg::run_experiment(many).rows.size() == 3 * 3 * 2 * 2);
}

TEST_CASE("run_experiment is a pure function of the config") {
  auto cfg = small_config();
  const auto a = mprg::run_experiment(cfg);
  const auto b = mprg::run_experiment(cfg);
  CHECK(rows_equal(a, b));
  cfg.threads = 4;
  CHECK(rows_equal(a, mprg::run_experiment(cfg)));
  cfg.master_seed = 100;
  CHECK_FALSE(rows_equal(a, mprg::run_experiment(cfg)));
}

TEST_CASE("rows are sorted and aggregates are arithmetic means") {
  auto cfg = small_config();
  cfg.aggregation = mprg::Aggregation::mean;
  const auto result = mprg::run_experiment(cfg);
  CHECK(std::is_sorted(result.rows.begin(), result.rows.end(), [](const auto& x, const auto& y) {
    return std::tie(x.m, x.algorithm, x.trial, x.restart) <
           std::tie(y.m, y.algorithm, y.trial, y.restart);
  }));
  REQUIRE(result.aggregates.size() == 6);
  for (const auto& agg : result.aggregates) {
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& row : result.rows)
      if (row.m == agg.m && row.algorithm == agg.algorithm) {
        sum += row.final_error;
        ++n;
      }
    CHECK(agg.count == n);
    CHECK(std::abs(agg.mean - sum / static_cast<double>(n)) <= 1e-12);
  }
}

TEST_CASE("best-of-restarts keeps the lowest error, ties to the lowest index") {
  auto cfg = small_config();
  cfg.restarts = 3;
  cfg.aggregation = mprg::Aggregation::mean;
  const auto every = mprg::run_experiment(cfg);
  cfg.aggregation = mprg::Aggregation::best;
  const auto best = mprg::run_experiment(cfg);
  for (const auto& row : best.rows) {
    double lowest = INFINITY;
    int index = -1;
    for (const auto& r : every.rows)
      if (r.m == row.m && r.algorithm == row.algorithm && r.trial == row.trial &&
          r.final_error < lowest) {
        lowest = r.final_error;
        index = r.restart;
      }
    CHECK(row.final_error == lowest);
    CHECK(row.restart == index);
  }

  cfg.selection = mprg::Selection::residual;
  CHECK(mprg::run_experiment(cfg).rows.size() == best.rows.size());
}

TEST_CASE("draw_signal") {
  const auto prior = mprg::PriorSpec{}.build();
  const Eigen::VectorXd x = mprg::draw_signal(prior, 5, 2);
  CHECK(std::abs(x.norm() - 1.0) <= 1e-12);
  CHECK(x.minCoeff() >= 0.0);
  CHECK(mprg::draw_signal(prior, 5, 2) == x);
  CHECK(mprg::draw_signal(prior, 5, 3) != x);
  const auto proj = mprg::project_exact(prior, x);
  CHECK((proj.point - x).norm() <= 1e-12);
}

TEST_CASE("measurement_residual") {
  const Eigen::VectorXd x = Eigen::VectorXd::Unit(4, 1);
  const auto data = mprg::sample_measurements(LinkModel::named("abs-noise-out", 0), x, 50, 1);
  CHECK(mprg::measurement_residual(data, x) == 0.0);
  CHECK(mprg::measurement_residual(data, -x) == 0.0);
  CHECK(mprg::measurement_residual(data, Eigen::VectorXd::Unit(4, 0)) > 0.0);
}

TEST_CASE("fit_slope") {
  SUBCASE("exact 1/sqrt(m) law") {
    const auto fit = mprg::fit_slope({{100, 0.1}, {400, 0.05}, {1600, 0.025}});
    CHECK(std::abs(fit.slope + 0.5) <= 1e-9);
    CHECK(fit.points == 3);
    CHECK(fit.warnings.empty());
  }
  SUBCASE("constant errors") {
    const auto fit = mprg::fit_slope({{10, 0.3}, {20, 0.3}, {40, 0.3}, {80, 0.3}});
    CHECK(std::abs(fit.slope) <= 1e-12);
    CHECK_FALSE(fit.ci_excludes_zero());
  }
  SUBCASE("matches an independent least-squares fit and t interval") {
    const std::vector<std::pair<double, double>> pts{
        {250, 0.31}, {500, 0.22}, {1000, 0.17}, {2000, 0.11}, {4000, 0.082}};
    Eigen::MatrixXd design(5, 2);
    Eigen::VectorXd rhs(5);
    for (int i = 0; i < 5; ++i) {
      design(i, 0) = 1.0;
      design(i, 1) = std::log(pts[i].first);
      rhs(i) = std::log(pts[i].second);
    }
    const Eigen::VectorXd beta = design.colPivHouseholderQr().solve(rhs);
    const double sse = (design * beta - rhs).squaredNorm();
    const double sxx = (design.col(1).array() - design.col(1).mean()).square().sum();
    const double se = std::sqrt(sse / 3.0 / sxx);
    const double t975_3 = 3.182446305284263;  // Student t, 3 dof, 97.5% quantile

    const auto fit = mprg::fit_slope(pts);
    CHECK(fit.slope == doctest::Approx(beta(1)).epsilon(1e-12));
    CHECK(fit.intercept == doctest::Approx(beta(0)).epsilon(1e-12));
    CHECK(fit.slope_stderr == doctest::Approx(se).epsilon(1e-10));
    CHECK(fit.ci_low == doctest::Approx(beta(1) - t975_3 * se).epsilon(1e-10));
    CHECK(fit.ci_high == doctest::Approx(beta(1) + t975_3 * se).epsilon(1e-10));
    CHECK(fit.ci_excludes_zero());
  }
  SUBCASE("nonpositive points are excluded with a warning") {
    const auto fit = mprg::fit_slope({{100, 0.1}, {200, 0.0}, {400, 0.05}, {1600, 0.025}});
    CHECK(fit.points == 3);
    CHECK(fit.warnings.size() == 1);
    CHECK(std::abs(fit.slope + 0.5) <= 1e-9);
  }
  SUBCASE("fewer than three usable points") {
    CHECK_THROWS_AS(mprg::fit_slope({{100, 0.1}, {400, 0.05}}), mprg::InsufficientData);
    CHECK_THROWS_AS(mprg::fit_slope({{100, 0.1}, {400, -0.05}, {800, 0.0}, {1600, 0.02}}),
                    mprg::InsufficientData);
    CHECK_THROWS_AS(mprg::fit_slope({{100, 0.1}, {100, 0.2}, {100, 0.3}}),
                    mprg::InsufficientData);
  }
}

TEST_CASE("pilot sweep slope lies in the 1/sqrt(m) band") {
  ExperimentConfig cfg;
  cfg.link = LinkModel::named("abs-noise-out", 0);
  cfg.m_grid = {250, 500, 1000, 2000, 4000};
  cfg.trials = 10;
  cfg.master_seed = 11;
  cfg.threads = 0;
  const auto result = mprg::run_experiment(cfg);
  REQUIRE(result.slopes.count("mprg") == 1);
  const auto& fit = result.slopes.at("mprg");
  CAPTURE(fit.slope);
  CHECK(fit.slope >= -0.75);
  CHECK(fit.slope <= -0.25);
  CHECK(fit.ci_excludes_zero());
}

TEST_CASE("configuration parsing") {
  SUBCASE("every key is read") {
    const auto cfg = mprg::parse_experiment_config(R"({
      "prior": {"kind": "relu-mlp", "k": 4, "n": 40, "r": 2.5, "seed": 3, "hidden": [20, 30],
                "activation": "relu"},
      "link": {"name": "square-sin", "sigma": 0.5},
      "m_grid": [100, 300], "trials": 4, "restarts": 2,
      "algorithms": ["mprg", "appgd"], "master_seed": 12, "selection": "residual",
      "aggregation": "mean", "threads": 2,
      "solver": {"t1": 10, "t2": 15, "tau": 0.8, "nu_floor": 0.01, "zeta_fixed": 0.5,
                 "appgd_count_init": false,
                 "projection": {"steps": 50, "learning_rate": 0.1, "restarts": 3,
                                "latent_init": "gaussian", "tolerance": 1e-6,
                                "method": "iterative"}}
    })");
    CHECK(cfg.prior.kind == mprg::PriorKind::relu_mlp);
    CHECK(cfg.prior.k == 4);
    CHECK(cfg.prior.n == 40);
    CHECK(cfg.prior.r == 2.5);
    CHECK(cfg.prior.hidden == std::vector<Eigen::Index>{20, 30});
    CHECK(cfg.link.kind == mprg::LinkKind::square_sin);
    CHECK(cfg.link.sigma == 0.5);
    CHECK(cfg.m_grid == std::vector<Eigen::Index>{100, 300});
    CHECK(cfg.trials == 4);
    CHECK(cfg.restarts == 2);
    CHECK(cfg.algorithms == std::vector<mprg::Algorithm>{mprg::Algorithm::mprg,
                                                         mprg::Algorithm::appgd});
    CHECK(cfg.master_seed == 12);
    CHECK(cfg.selection == mprg::Selection::residual);
    CHECK(cfg.aggregation == mprg::Aggregation::mean);
    CHECK(cfg.threads == 2);
    CHECK(cfg.solver.t1 == 10);
    CHECK(cfg.solver.t2 == 15);
    CHECK(cfg.solver.tau == 0.8);
    CHECK(cfg.solver.nu_floor == 0.01);
    CHECK(cfg.solver.zeta_fixed == 0.5);
    CHECK_FALSE(cfg.solver.appgd_count_init);
    CHECK(cfg.solver.proj.steps == 50);
    CHECK(cfg.solver.proj.learning_rate == 0.1);
    CHECK(cfg.solver.proj.restarts == 3);
    CHECK(cfg.solver.proj.latent_init == mprg::LatentInit::gaussian);
    CHECK(cfg.solver.proj.tolerance == 1e-6);
    CHECK(cfg.solver.proj.method == mprg::ProjectionMethod::iterative);
  }
  SUBCASE("subspace basis and custom links") {
    const auto cfg = mprg::parse_experiment_config(R"({
      "prior": {"basis": "gaussian"},
      "link": {"name": "custom", "terms": "abs;square", "sigma": 0.1},
      "m_grid": [50]
    })");
    CHECK(cfg.prior.basis == mprg::SubspaceBasis::gaussian);
    CHECK(cfg.link.terms.size() == 2);
  }
  SUBCASE("every problem is reported") {
    try {
      mprg::parse_experiment_config(R"({
        "prior": {"k": 0, "colour": "red"},
        "m_grid": [400, 200],
        "trials": 0,
        "restarts": "two",
        "algorithms": ["mprg", "amp"],
        "bogus": 1
      })");
      FAIL("expected ConfigError");
    } catch (const mprg::ConfigError& e) {
      const auto& p = e.problems();
      auto has = [&](const std::string& needle) {
        return std::any_of(p.begin(), p.end(), [&](const std::string& s) {
          return s.find(needle) != std::string::npos;
        });
      };
      CHECK(has("bogus: unknown key"));
      CHECK(has("prior.colour: unknown key"));
      CHECK(has("restarts: wrong type"));
      CHECK(has("amp"));
      CHECK(has("prior.k must be at least 1"));
      CHECK(has("m_grid must be strictly increasing"));
      CHECK(has("trials must be at least 1"));
      CHECK(p.size() == 7);
    }
  }
  SUBCASE("malformed documents") {
    CHECK_THROWS_AS(mprg::parse_experiment_config("{not json"), mprg::ConfigError);
    CHECK_THROWS_AS(mprg::parse_experiment_config("[1, 2]"), mprg::ConfigError);
    CHECK_THROWS_AS(mprg::load_experiment_config("/nonexistent/config.json"), mprg::IoError);
  }
}

TEST_CASE("sweep CSV round-trip and output files") {
  const auto dir = std::filesystem::temp_directory_path() / "mprg_test_harness";
  std::filesystem::create_directories(dir);
  const auto result = mprg::run_experiment(small_config());

  mprg::emit_outputs(result, mprg::OutputFormat::csv, dir / "sweep.csv");
  const std::string text = slurp(dir / "sweep.csv");
  CHECK(text.rfind("m,algorithm,trial,restart,final_error\n", 0) == 0);
  CHECK(count_of(text, "\nm,algorithm,mean,stderr\n") == 1);

  const auto back = mprg::read_sweep_csv(dir / "sweep.csv");
  CHECK(rows_equal(back, result));
  REQUIRE(back.aggregates.size() == result.aggregates.size());
  for (std::size_t i = 0; i < back.aggregates.size(); ++i) {
    CHECK(back.aggregates[i].m == result.aggregates[i].m);
    CHECK(back.aggregates[i].algorithm == result.aggregates[i].algorithm);
    CHECK(std::abs(back.aggregates[i].mean - result.aggregates[i].mean) <= 1e-12);
    CHECK(std::abs(back.aggregates[i].stderr_ - result.aggregates[i].stderr_) <= 1e-12);
    CHECK(back.aggregates[i].count == result.aggregates[i].count);
  }
  const auto rebuilt = mprg::aggregate_rows(back.rows);
  for (std::size_t i = 0; i < rebuilt.size(); ++i)
    CHECK(std::abs(rebuilt[i].mean - back.aggregates[i].mean) <= 1e-12);

  mprg::emit_outputs(result, mprg::OutputFormat::svg, dir / "sweep.svg");
  const std::string svg = slurp(dir / "sweep.svg");
  CHECK(count_of(svg, "<polyline") == 2);
  CHECK(svg == mprg::render_svg(result));

  std::ofstream bad(dir / "bad.csv");
  bad << "m,algorithm,trial,restart,final_error\n100,mprg,x,0,0.1\n";
  bad.close();
  CHECK_THROWS_AS(mprg::read_sweep_csv(dir / "bad.csv"), mprg::IoError);
  CHECK_THROWS_AS(mprg::read_sweep_csv(dir / "missing.csv"), mprg::IoError);
  CHECK_THROWS_AS(mprg::emit_outputs(result, mprg::OutputFormat::csv, dir / "no" / "x.csv"),
                  mprg::IoError);
  std::filesystem::remove_all(dir);
}

TEST_CASE("SVG structure for one algorithm and three m values") {
  mprg::SweepResult result;
  result.aggregates = {{100, "mprg", 0.3, 0.02, 5}, {200, "mprg", 0.2, 0.01, 5},
                       {400, "mprg", 0.15, 0.01, 5}};
  const std::string svg = mprg::render_svg(result);
  CHECK(count_of(svg, "<polyline") == 1);
  const auto start = svg.find("points=\"") + 8;
  const std::string points = svg.substr(start, svg.find('"', start) - start);
  CHECK(count_of(points, ",") == 3);
  CHECK(count_of(points, " ") == 2);
  CHECK(svg.find("viewBox=\"0 0 640 480\"") != std::string::npos);

  result.aggregates.push_back({100, "appgd", 0.25, 0.02, 5});
  const std::string two = mprg::render_svg(result);
  CHECK(two.find("#1f77b4\" stroke-width=\"2\" points=\"") < two.find("#d62728"));
  CHECK(two.find(">appgd</text>") < two.find(">mprg</text>"));
}

TEST_CASE("empty results are rejected without writing a file") {
  const auto path = std::filesystem::temp_directory_path() / "mprg_test_empty.csv";
  std::filesystem::remove(path);
  const mprg::SweepResult empty;
  CHECK_THROWS_AS(mprg::emit_outputs(empty, mprg::OutputFormat::csv, path), mprg::InvalidArgument);
  CHECK_THROWS_AS(mprg::emit_outputs(empty, mprg::OutputFormat::svg, path), mprg::InvalidArgument);
  CHECK_FALSE(std::filesystem::exists(path));
}
