#pragma once

// Experiment orchestration: seeded trial grids over (m, algorithm), restart
// selection, aggregation, log-log slope fits, and CSV/SVG output.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "mprg/baselines.hpp"
#include "mprg/genprior.hpp"
#include "mprg/linkmodels.hpp"
#include "mprg/pipeline.hpp"

namespace mprg {

struct PriorSpec {
  PriorKind kind = PriorKind::linear_subspace;
  Eigen::Index k = 5;
  Eigen::Index n = 100;
  std::optional<double> r;
  std::uint64_t seed = 1;
  std::vector<Eigen::Index> hidden{50};  // relu-mlp only
  Activation activation = Activation::relu;
  SubspaceBasis basis = SubspaceBasis::block;  // linear-subspace only

  GenerativePrior build() const;
};

enum class Selection { error, residual };
enum class Aggregation { best, mean };

struct ExperimentConfig {
  PriorSpec prior;
  LinkModel link;
  std::vector<Eigen::Index> m_grid;
  int trials = 10;
  int restarts = 1;
  std::vector<Algorithm> algorithms{Algorithm::mprg};
  SolverConfig solver;
  std::uint64_t master_seed = 0;
  // Best-of-restarts picks by reconstruction error (needs ground truth) or by
  // the measurement residual || |A x| - y ||.
  Selection selection = Selection::error;
  // best: one row per trial (the selected restart); mean: every restart row.
  Aggregation aggregation = Aggregation::best;
  unsigned threads = 1;  // 0 = hardware concurrency

  // Throws ConfigError listing every violated field.
  void validate() const;
};

// JSON config; key names are documented in README.md.
ExperimentConfig parse_experiment_config(std::string_view json_text);
ExperimentConfig load_experiment_config(const std::filesystem::path& path);

struct SweepRow {
  Eigen::Index m = 0;
  std::string algorithm;
  int trial = 0;
  int restart = 0;
  double final_error = 0.0;
};

struct AggregateRow {
  Eigen::Index m = 0;
  std::string algorithm;
  double mean = 0.0;
  double stderr_ = 0.0;
  std::size_t count = 0;
};

struct SlopeFit {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_stderr = 0.0;
  double ci_low = 0.0;  // 95% interval from the Student t quantile
  double ci_high = 0.0;
  std::size_t points = 0;
  std::vector<std::string> warnings;

  bool ci_excludes_zero() const { return ci_low > 0.0 || ci_high < 0.0; }
};

struct SweepResult {
  std::vector<SweepRow> rows;              // sorted by (m, algorithm, trial, restart)
  std::vector<AggregateRow> aggregates;    // sorted by (m, algorithm)
  std::map<std::string, SlopeFit> slopes;  // algorithms with >= 3 usable m values
};

// Signal x = G(z) with z ~ N(0, I_k) drawn from the (trial) substream, so the
// same trial uses the same signal at every m.
Eigen::VectorXd draw_signal(const GenerativePrior& prior, std::uint64_t master_seed, int trial);

SweepResult run_experiment(const ExperimentConfig& cfg);

// OLS on (log m, log error). Points with nonpositive coordinates are dropped
// with a warning; fewer than 3 remaining throws InsufficientData.
SlopeFit fit_slope(const std::vector<std::pair<double, double>>& points);

std::vector<AggregateRow> aggregate_rows(const std::vector<SweepRow>& rows);
std::map<std::string, SlopeFit> fit_slopes(const std::vector<AggregateRow>& aggregates);

void write_sweep_csv(const SweepResult& result, const std::filesystem::path& path);
SweepResult read_sweep_csv(const std::filesystem::path& path);

// Log-log plot of mean error +- stderr vs m, one polyline per algorithm in
// name order. Output depends only on the aggregates.
std::string render_svg(const SweepResult& result);

enum class OutputFormat { csv, svg };
// Throws InvalidArgument (no file written) on an empty result.
void emit_outputs(const SweepResult& result, OutputFormat format,
                  const std::filesystem::path& path);

// || |A x| - y ||
double measurement_residual(const MeasurementSet& data, const Eigen::VectorXd& x);

}  // namespace mprg
