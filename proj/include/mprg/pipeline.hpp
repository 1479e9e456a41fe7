#pragma once

// The full two-step solver: spectral initialization and projected power
// iterations, followed by nu-hat scaled projected gradient refinement.

#include <cstdint>
#include <optional>

#include "mprg/genprior.hpp"
#include "mprg/linkmodels.hpp"
#include "mprg/refine.hpp"
#include "mprg/spectral.hpp"
#include "mprg/trace.hpp"

namespace mprg {

struct SolverConfig {
  int t1 = 20;
  int t2 = 30;
  double tau = 0.9;  // APPGD step size
  double nu_floor = 1e-3;
  std::optional<double> zeta_fixed;
  ProjectionConfig proj;
  // APPGD starts from w^(t1); when true those t1 iterations count against
  // its t1 + t2 budget, otherwise it runs t1 + t2 iterations of its own.
  bool appgd_count_init = true;

  void validate() const;  // throws ConfigError
  RefineConfig refine_config(ZetaMode mode, int iterations) const;
};

// Records t = 0..t1 come from the power step (t = 0 is the spectral start),
// t1+1..t1+t2 from refinement.
RunTrace run_mprg(const MeasurementSet& data, const GenerativePrior& prior,
                  const SolverConfig& cfg, std::uint64_t seed,
                  ZetaMode zeta_mode = ZetaMode::adaptive);

TraceRecord power_record(const PowerState& state);
TraceRecord refine_record(const RefineState& state, int t_offset);

}  // namespace mprg
