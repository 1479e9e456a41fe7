#include "mprg/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <thread>
#include <tuple>

#include <boost/math/distributions/students_t.hpp>

#include "mprg/errors.hpp"
#include "mprg/rng.hpp"

namespace mprg {

GenerativePrior PriorSpec::build() const {
  if (kind == PriorKind::linear_subspace) return GenerativePrior::linear_subspace(k, n, seed, r, basis);
  return GenerativePrior::relu_mlp(k, hidden, n, seed, r, activation);
}

double measurement_residual(const MeasurementSet& data, const Eigen::VectorXd& x) {
  return ((data.sensing * x).cwiseAbs() - data.observations).norm();
}

Eigen::VectorXd draw_signal(const GenerativePrior& prior, std::uint64_t master_seed, int trial) {
  for (std::uint64_t attempt = 0; attempt < 100; ++attempt) {
    Rng rng(derive_seed(master_seed, StreamRole::signal,
                        {static_cast<std::uint64_t>(trial), attempt}));
    try {
      return prior.evaluate(prior.sample_latent(rng));
    } catch (const DegenerateLatent&) {
    }
  }
  throw NumericalError("could not draw a nondegenerate signal from the prior");
}

namespace {

struct TaskResult {
  // [algorithm][restart]
  std::vector<std::vector<double>> errors;
  std::vector<std::vector<double>> residuals;
};

TaskResult run_task(const ExperimentConfig& cfg, const GenerativePrior& prior,
                    std::size_t m_index, int trial) {
  const Eigen::VectorXd signal = draw_signal(prior, cfg.master_seed, trial);
  const auto data = sample_measurements(
      cfg.link, signal, cfg.m_grid[m_index],
      derive_seed(cfg.master_seed, StreamRole::measurements,
                  {static_cast<std::uint64_t>(m_index), static_cast<std::uint64_t>(trial)}));
  TaskResult out;
  for (Algorithm algo : cfg.algorithms) {
    std::vector<double> errs, res;
    for (int r = 0; r < cfg.restarts; ++r) {
      const std::uint64_t seed =
          derive_seed(cfg.master_seed, StreamRole::restart,
                      {static_cast<std::uint64_t>(m_index), static_cast<std::uint64_t>(trial),
                       static_cast<std::uint64_t>(r)});
      const RunTrace trace = run_algorithm(algo, data, prior, cfg.solver, seed);
      errs.push_back(trace.final_error);
      res.push_back(cfg.selection == Selection::residual
                        ? measurement_residual(data, trace.estimate)
                        : trace.final_error);
    }
    out.errors.push_back(std::move(errs));
    out.residuals.push_back(std::move(res));
  }
  return out;
}

template <typename Fn>
void parallel_for(std::size_t count, unsigned threads, Fn&& fn) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, count));
  std::vector<std::exception_ptr> failures(count);
  auto body = [&](std::atomic<std::size_t>& next) {
    for (std::size_t i = next++; i < count; i = next++) {
      try {
        fn(i);
      } catch (...) {
        failures[i] = std::current_exception();
      }
    }
  };
  std::atomic<std::size_t> next{0};
  if (threads <= 1) {
    body(next);
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(body, std::ref(next));
    for (auto& th : pool) th.join();
  }
  // Report the failure of the lowest task index, regardless of timing.
  for (auto& f : failures)
    if (f) std::rethrow_exception(f);
}

}  // namespace

std::vector<AggregateRow> aggregate_rows(const std::vector<SweepRow>& rows) {
  std::map<std::pair<Eigen::Index, std::string>, std::vector<double>> groups;
  for (const SweepRow& row : rows) groups[{row.m, row.algorithm}].push_back(row.final_error);
  std::vector<AggregateRow> out;
  for (const auto& [key, values] : groups) {
    AggregateRow agg;
    agg.m = key.first;
    agg.algorithm = key.second;
    agg.count = values.size();
    double sum = 0.0;
    for (double v : values) sum += v;
    agg.mean = sum / static_cast<double>(values.size());
    if (values.size() > 1) {
      double ss = 0.0;
      for (double v : values) ss += (v - agg.mean) * (v - agg.mean);
      agg.stderr_ = std::sqrt(ss / static_cast<double>(values.size() - 1)) /
                    std::sqrt(static_cast<double>(values.size()));
    }
    out.push_back(std::move(agg));
  }
  return out;
}

SlopeFit fit_slope(const std::vector<std::pair<double, double>>& points) {
  SlopeFit fit;
  std::vector<double> xs, ys;
  for (const auto& [m, err] : points) {
    if (!(m > 0.0) || !(err > 0.0)) {
      fit.warnings.push_back("excluded nonpositive point (m=" + std::to_string(m) +
                             ", error=" + std::to_string(err) + ")");
      continue;
    }
    xs.push_back(std::log(m));
    ys.push_back(std::log(err));
  }
  if (xs.size() < 3)
    throw InsufficientData("slope fit needs at least 3 positive points, got " +
                           std::to_string(xs.size()));

  const double count = static_cast<double>(xs.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= count;
  my /= count;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
  }
  if (!(sxx > 0.0)) throw InsufficientData("slope fit needs at least two distinct m values");
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double sse = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double r = ys[i] - (fit.intercept + fit.slope * xs[i]);
    sse += r * r;
  }
  const double dof = count - 2.0;
  fit.slope_stderr = std::sqrt(sse / dof / sxx);
  const boost::math::students_t dist(dof);
  const double q = boost::math::quantile(boost::math::complement(dist, 0.025));
  fit.ci_low = fit.slope - q * fit.slope_stderr;
  fit.ci_high = fit.slope + q * fit.slope_stderr;
  fit.points = xs.size();
  return fit;
}

std::map<std::string, SlopeFit> fit_slopes(const std::vector<AggregateRow>& aggregates) {
  std::map<std::string, std::vector<std::pair<double, double>>> by_algo;
  for (const AggregateRow& a : aggregates)
    by_algo[a.algorithm].emplace_back(static_cast<double>(a.m), a.mean);
  std::map<std::string, SlopeFit> out;
  for (const auto& [algo, pts] : by_algo) {
    try {
      out.emplace(algo, fit_slope(pts));
    } catch (const InsufficientData&) {
    }
  }
  return out;
}

SweepResult run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  const GenerativePrior prior = cfg.prior.build();

  const std::size_t n_m = cfg.m_grid.size();
  const auto trials = static_cast<std::size_t>(cfg.trials);
  std::vector<TaskResult> results(n_m * trials);
  parallel_for(results.size(), cfg.threads, [&](std::size_t idx) {
    results[idx] = run_task(cfg, prior, idx / trials, static_cast<int>(idx % trials));
  });

  SweepResult out;
  for (std::size_t mi = 0; mi < n_m; ++mi) {
    for (std::size_t ti = 0; ti < trials; ++ti) {
      const TaskResult& task = results[mi * trials + ti];
      for (std::size_t a = 0; a < cfg.algorithms.size(); ++a) {
        const std::string name(to_string(cfg.algorithms[a]));
        const auto& errs = task.errors[a];
        if (cfg.aggregation == Aggregation::mean) {
          for (std::size_t r = 0; r < errs.size(); ++r)
            out.rows.push_back({cfg.m_grid[mi], name, static_cast<int>(ti), static_cast<int>(r),
                                errs[r]});
        } else {
          const auto& score = task.residuals[a];
          std::size_t best = 0;
          for (std::size_t r = 1; r < score.size(); ++r)
            if (score[r] < score[best]) best = r;
          out.rows.push_back({cfg.m_grid[mi], name, static_cast<int>(ti), static_cast<int>(best),
                              errs[best]});
        }
      }
    }
  }
  std::sort(out.rows.begin(), out.rows.end(), [](const SweepRow& a, const SweepRow& b) {
    return std::tie(a.m, a.algorithm, a.trial, a.restart) <
           std::tie(b.m, b.algorithm, b.trial, b.restart);
  });
  out.aggregates = aggregate_rows(out.rows);
  out.slopes = fit_slopes(out.aggregates);
  return out;
}

}  // namespace mprg
