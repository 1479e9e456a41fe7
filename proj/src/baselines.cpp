#include "mprg/baselines.hpp"

#include <array>
#include <chrono>
#include <string>

#include "mprg/errors.hpp"
#include "mprg/refine.hpp"
#include "mprg/spectral.hpp"

namespace mprg {

namespace {

constexpr std::array<std::pair<Algorithm, std::string_view>, 5> kAlgorithmNames{{
    {Algorithm::mprg, "mprg"},
    {Algorithm::mprgf, "mprgf"},
    {Algorithm::ppower, "ppower"},
    {Algorithm::step2, "step2"},
    {Algorithm::appgd, "appgd"},
}};

void finish(RunTrace& trace, const Projector& projector, std::uint64_t seed,
            std::chrono::steady_clock::time_point start) {
  trace.final_error = trace.records.back().error;
  trace.seeds = {seed};
  trace.projection_calls = projector.calls();
  trace.wall_time =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

double error_to(const Eigen::VectorXd& x, const MeasurementSet& data) {
  return data.has_truth() ? (x - data.signal).norm() : kNaN;
}

RunTrace run_ppower(const MeasurementSet& data, const GenerativePrior& prior,
                    const SolverConfig& cfg, std::uint64_t seed) {
  const auto start = std::chrono::steady_clock::now();
  Projector projector(prior, cfg.proj, seed);
  const SpectralMatrix spec = build_spectral_matrix(data);
  const auto states = projected_power(spec.v, projector, initial_vector(spec), cfg.t1 + cfg.t2,
                                      data.has_truth() ? &data.signal : nullptr);
  RunTrace trace;
  trace.algorithm = "ppower";
  for (const PowerState& s : states) trace.records.push_back(power_record(s));
  trace.estimate = states.back().iterate;
  trace.estimate_latent = states.back().latent;
  finish(trace, projector, seed, start);
  return trace;
}

// t = 0 is w^(0); t = 1 is its projection, a refinement start in Range(G);
// the remaining t1 + t2 - 1 records are refine steps.
RunTrace run_step2(const MeasurementSet& data, const GenerativePrior& prior,
                   const SolverConfig& cfg, std::uint64_t seed) {
  const auto start = std::chrono::steady_clock::now();
  Projector projector(prior, cfg.proj, seed);
  const SpectralMatrix spec = build_spectral_matrix(data);
  const Eigen::VectorXd w0 = initial_vector(spec);

  RunTrace trace;
  trace.algorithm = "step2";
  TraceRecord first;
  first.t = 0;
  first.error = error_to(w0, data);
  if (data.has_truth()) first.correlation = data.signal.dot(w0);
  trace.records.push_back(first);

  ProjectionResult x0;
  try {
    x0 = projector(w0);
  } catch (const NumericalError& e) {
    throw ProjectionFailure(std::string("step2 initial projection failed: ") + e.what(), 1);
  }
  const auto refined = run_refine(data, projector, x0.point,
                                  cfg.refine_config(ZetaMode::adaptive, cfg.t1 + cfg.t2 - 1),
                                  &x0.latent);
  for (const RefineState& s : refined) trace.records.push_back(refine_record(s, 1));
  trace.estimate = refined.back().iterate;
  trace.estimate_latent = refined.back().latent;
  finish(trace, projector, seed, start);
  return trace;
}

RunTrace run_appgd(const MeasurementSet& data, const GenerativePrior& prior,
                   const SolverConfig& cfg, std::uint64_t seed) {
  const auto start = std::chrono::steady_clock::now();
  Projector projector(prior, cfg.proj, seed);
  const SpectralMatrix spec = build_spectral_matrix(data);
  const auto power = projected_power(spec.v, projector, initial_vector(spec), cfg.t1,
                                     data.has_truth() ? &data.signal : nullptr);

  RunTrace trace;
  trace.algorithm = "appgd";
  for (const PowerState& s : power) trace.records.push_back(power_record(s));

  AppgdConfig acfg;
  acfg.tau = cfg.tau;
  acfg.iterations = cfg.appgd_count_init ? cfg.t2 : cfg.t1 + cfg.t2;
  acfg.proj_cfg = cfg.proj;
  acfg.validate();

  Eigen::VectorXd x = power.back().iterate;
  Eigen::VectorXd latent = power.back().latent;
  for (int it = 0; it < acfg.iterations; ++it) {
    const int t = cfg.t1 + it + 1;
    ProjectionResult next;
    try {
      next = appgd_step(data, x, acfg, projector, latent.size() ? &latent : nullptr);
    } catch (const NumericalError& e) {
      throw ProjectionFailure(std::string("appgd step failed: ") + e.what(),
                              static_cast<std::size_t>(t));
    }
    x = std::move(next.point);
    latent = std::move(next.latent);
    TraceRecord r;
    r.t = t;
    r.error = error_to(x, data);
    if (data.has_truth()) r.correlation = data.signal.dot(x);
    trace.records.push_back(r);
  }
  trace.estimate = x;
  trace.estimate_latent = latent;
  finish(trace, projector, seed, start);
  return trace;
}

}  // namespace

void AppgdConfig::validate() const {
  std::vector<std::string> problems;
  if (!(tau > 0.0)) problems.push_back("tau must be positive");
  if (iterations < 0) problems.push_back("appgd iterations must be nonnegative");
  if (!problems.empty()) throw ConfigError(problems);
  proj_cfg.validate();
}

Eigen::VectorXd appgd_update(const Eigen::MatrixXd& sensing, const Eigen::VectorXd& y,
                             const Eigen::VectorXd& x, double tau) {
  const Eigen::VectorXd proj = sensing * x;
  Eigen::VectorXd residual(proj.size());
  for (Eigen::Index i = 0; i < proj.size(); ++i) residual[i] = proj[i] - y[i] * phase_sign(proj[i]);
  return x - (tau / static_cast<double>(sensing.rows())) * (sensing.transpose() * residual);
}

ProjectionResult appgd_step(const MeasurementSet& data, const Eigen::VectorXd& x,
                            const AppgdConfig& cfg, Projector& projector,
                            const Eigen::VectorXd* latent) {
  return projector(appgd_update(data.sensing, data.observations, x, cfg.tau), latent);
}

Eigen::VectorXd appgd_step(const MeasurementSet& data, const Eigen::VectorXd& x,
                           const AppgdConfig& cfg, const GenerativePrior& prior,
                           std::uint64_t seed) {
  Projector projector(prior, cfg.proj_cfg, seed);
  return appgd_step(data, x, cfg, projector).point;
}

std::string_view to_string(Algorithm algo) {
  for (const auto& [a, name] : kAlgorithmNames)
    if (a == algo) return name;
  return "unknown";
}

Algorithm parse_algorithm(std::string_view name) {
  for (const auto& [a, text] : kAlgorithmNames)
    if (text == name) return a;
  throw ConfigError("unknown algorithm '" + std::string(name) + "'");
}

RunTrace run_baseline(std::string_view name, const MeasurementSet& data,
                      const GenerativePrior& prior, const SolverConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  if (name == "appgd") return run_appgd(data, prior, cfg, seed);
  if (name == "ppower") return run_ppower(data, prior, cfg, seed);
  if (name == "step2") return run_step2(data, prior, cfg, seed);
  throw ConfigError("unknown baseline '" + std::string(name) + "'");
}

RunTrace run_algorithm(Algorithm algo, const MeasurementSet& data, const GenerativePrior& prior,
                       const SolverConfig& cfg, std::uint64_t seed) {
  switch (algo) {
    case Algorithm::mprg: return run_mprg(data, prior, cfg, seed, ZetaMode::adaptive);
    case Algorithm::mprgf: return run_mprg(data, prior, cfg, seed, ZetaMode::fixed);
    default: return run_baseline(to_string(algo), data, prior, cfg, seed);
  }
}

}  // namespace mprg
