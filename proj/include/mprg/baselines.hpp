#pragma once

// Comparison methods sharing the priors and projectors of the main solver:
// APPGD and the single-step variants PPower and Step2.

#include <cstdint>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "mprg/genprior.hpp"
#include "mprg/linkmodels.hpp"
#include "mprg/pipeline.hpp"
#include "mprg/trace.hpp"

namespace mprg {

struct AppgdConfig {
  double tau = 0.9;
  int iterations = 30;
  ProjectionConfig proj_cfg;

  void validate() const;
};

// sign(0) is +1.
inline double phase_sign(double v) { return v < 0.0 ? -1.0 : 1.0; }

// x - (tau/m) sum_i (a_i^T x - y_i sign(a_i^T x)) a_i
Eigen::VectorXd appgd_update(const Eigen::MatrixXd& sensing, const Eigen::VectorXd& y,
                             const Eigen::VectorXd& x, double tau);

ProjectionResult appgd_step(const MeasurementSet& data, const Eigen::VectorXd& x,
                            const AppgdConfig& cfg, Projector& projector,
                            const Eigen::VectorXd* latent = nullptr);
Eigen::VectorXd appgd_step(const MeasurementSet& data, const Eigen::VectorXd& x,
                           const AppgdConfig& cfg, const GenerativePrior& prior,
                           std::uint64_t seed);

enum class Algorithm { mprg, mprgf, ppower, step2, appgd };

std::string_view to_string(Algorithm algo);
Algorithm parse_algorithm(std::string_view name);  // throws ConfigError

// name in {appgd, ppower, step2}. Every method starts from the normalized
// spectral vector w^(0), makes t1 + t2 projection calls (APPGD: unless
// appgd_count_init is false) and returns t1 + t2 + 1 records.
RunTrace run_baseline(std::string_view name, const MeasurementSet& data,
                      const GenerativePrior& prior, const SolverConfig& cfg, std::uint64_t seed);

// Any algorithm, including mprg and mprgf.
RunTrace run_algorithm(Algorithm algo, const MeasurementSet& data, const GenerativePrior& prior,
                       const SolverConfig& cfg, std::uint64_t seed);

}  // namespace mprg
