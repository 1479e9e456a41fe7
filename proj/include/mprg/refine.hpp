#pragma once

// Second step of the two-step solver: projected gradient iterations on the
// pseudo-observations (y_i - ybar) a_i^T x, scaled by the empirical nu-hat.

#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "mprg/genprior.hpp"
#include "mprg/linkmodels.hpp"

namespace mprg {

enum class ZetaMode { adaptive, fixed };

std::string_view to_string(ZetaMode mode);
ZetaMode parse_zeta_mode(std::string_view name);

struct RefineConfig {
  int t2 = 30;
  ZetaMode zeta_mode = ZetaMode::adaptive;
  // Fixed mode always freezes nu-hat at its t = 0 value. The step size is
  // zeta_fixed when set, otherwise 1 / max(nu-hat^(0), nu_floor).
  std::optional<double> zeta_fixed;
  ProjectionConfig proj_cfg;
  double nu_floor = 1e-3;

  void validate() const;  // throws ConfigError
};

struct RefineState {
  Eigen::VectorXd iterate;         // x^(t), unit norm
  Eigen::VectorXd latent;          // empty when produced outside a projection
  int t = 0;
  double nu_hat = 0.0;             // nu-hat^(t), evaluated at x^(t)
  double zeta = 0.0;               // step size for the step leaving x^(t)
  bool warn = false;               // nu-hat^(t) <= 0 in adaptive mode
  Eigen::VectorXd pre_projection;  // x-tilde^(t); empty at t = 0
  std::optional<double> error;     // ||x^(t) - x||
};

double empirical_mean_y(const Eigen::VectorXd& y);
double empirical_mean_y(const MeasurementSet& data);

// (1/m) sum_i (y_i - ybar) (a_i^T x)^2
double estimate_nu_hat(const Eigen::MatrixXd& sensing, const Eigen::VectorXd& y, double ybar,
                       const Eigen::VectorXd& x);
double estimate_nu_hat(const MeasurementSet& data, double ybar, const Eigen::VectorXd& x);

// y-tilde_i = (y_i - ybar) a_i^T x
Eigen::VectorXd pseudo_observations(const Eigen::MatrixXd& sensing, const Eigen::VectorXd& y,
                                    double ybar, const Eigen::VectorXd& x);

// x - (zeta/m) sum_i (nu * a_i^T x - y-tilde_i) a_i
Eigen::VectorXd gradient_update(const Eigen::MatrixXd& sensing, const Eigen::VectorXd& y,
                                double ybar, const Eigen::VectorXd& x, double nu, double zeta);

// Scale used for the step leaving `nu_hat`'s iterate.
struct StepScale {
  double nu = 0.0;
  double zeta = 0.0;
  bool warn = false;
};
StepScale step_scale(double nu_hat, const RefineConfig& cfg);

RefineState make_refine_state(const MeasurementSet& data, double ybar, Eigen::VectorXd x,
                              Eigen::VectorXd latent, int t, const RefineConfig& cfg,
                              const std::optional<StepScale>& frozen = std::nullopt);

// One iteration: gradient_update with the state's scale (or the frozen one),
// then projection.
RefineState refine_step(const MeasurementSet& data, double ybar, const RefineState& state,
                        const RefineConfig& cfg, Projector& projector,
                        const std::optional<StepScale>& frozen = std::nullopt);

// x0 followed by cfg.t2 refine steps. t2 = 0 is allowed here and returns the
// initial state only.
std::vector<RefineState> run_refine(const MeasurementSet& data, Projector& projector,
                                    const Eigen::VectorXd& x0, const RefineConfig& cfg,
                                    const Eigen::VectorXd* latent0 = nullptr);
std::vector<RefineState> run_refine(const MeasurementSet& data, const GenerativePrior& prior,
                                    const Eigen::VectorXd& x0, const RefineConfig& cfg,
                                    std::uint64_t seed);

}  // namespace mprg
