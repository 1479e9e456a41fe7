#include "mprg/pipeline.hpp"

#include <chrono>
#include <string>

#include "mprg/errors.hpp"
#include "mprg/spectral.hpp"

namespace mprg {

void SolverConfig::validate() const {
  std::vector<std::string> problems;
  if (t1 < 1) problems.push_back("t1 must be at least 1");
  if (t2 < 1) problems.push_back("t2 must be at least 1");
  if (!(tau > 0.0)) problems.push_back("tau must be positive");
  if (!(nu_floor > 0.0)) problems.push_back("nu_floor must be positive");
  if (zeta_fixed && !(*zeta_fixed > 0.0)) problems.push_back("zeta_fixed must be positive");
  try {
    proj.validate();
  } catch (const ConfigError& e) {
    problems.insert(problems.end(), e.problems().begin(), e.problems().end());
  }
  if (!problems.empty()) throw ConfigError(problems);
}

RefineConfig SolverConfig::refine_config(ZetaMode mode, int iterations) const {
  RefineConfig rc;
  rc.t2 = iterations;
  rc.zeta_mode = mode;
  rc.zeta_fixed = mode == ZetaMode::fixed ? zeta_fixed : std::nullopt;
  rc.proj_cfg = proj;
  rc.nu_floor = nu_floor;
  return rc;
}

TraceRecord power_record(const PowerState& state) {
  TraceRecord r;
  r.t = state.t;
  r.error = state.error.value_or(kNaN);
  r.correlation = state.correlation.value_or(kNaN);
  return r;
}

TraceRecord refine_record(const RefineState& state, int t_offset) {
  TraceRecord r;
  r.t = state.t + t_offset;
  r.error = state.error.value_or(kNaN);
  r.nu_hat = state.nu_hat;
  r.zeta = state.zeta;
  r.warn = state.warn;
  return r;
}

RunTrace run_mprg(const MeasurementSet& data, const GenerativePrior& prior,
                  const SolverConfig& cfg, std::uint64_t seed, ZetaMode zeta_mode) {
  cfg.validate();
  const auto start = std::chrono::steady_clock::now();
  const Eigen::VectorXd* truth = data.has_truth() ? &data.signal : nullptr;

  Projector projector(prior, cfg.proj, seed);
  const SpectralMatrix spec = build_spectral_matrix(data);
  const auto power = projected_power(spec.v, projector, initial_vector(spec), cfg.t1, truth);

  const PowerState& handoff = power.back();
  const auto refined = run_refine(data, projector, handoff.iterate,
                                  cfg.refine_config(zeta_mode, cfg.t2), &handoff.latent);

  RunTrace trace;
  trace.algorithm = zeta_mode == ZetaMode::adaptive ? "mprg" : "mprgf";
  for (const PowerState& s : power) trace.records.push_back(power_record(s));
  // x^(0) of the second step is w^(t1): annotate that record with its nu-hat.
  TraceRecord& joint = trace.records.back();
  joint.nu_hat = refined.front().nu_hat;
  joint.zeta = refined.front().zeta;
  joint.warn = refined.front().warn;
  for (std::size_t i = 1; i < refined.size(); ++i)
    trace.records.push_back(refine_record(refined[i], cfg.t1));

  trace.estimate = refined.back().iterate;
  trace.estimate_latent = refined.back().latent;
  trace.final_error = trace.records.back().error;
  trace.seeds = {seed};
  trace.projection_calls = projector.calls();
  trace.wall_time =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return trace;
}

}  // namespace mprg
