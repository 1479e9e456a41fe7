#include "mprg/refine.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "mprg/errors.hpp"

namespace mprg {

std::string_view to_string(ZetaMode mode) {
  return mode == ZetaMode::adaptive ? "adaptive" : "fixed";
}

ZetaMode parse_zeta_mode(std::string_view name) {
  if (name == "adaptive") return ZetaMode::adaptive;
  if (name == "fixed") return ZetaMode::fixed;
  throw ConfigError("unknown zeta_mode '" + std::string(name) + "'");
}

void RefineConfig::validate() const {
  std::vector<std::string> problems;
  if (t2 < 0) problems.push_back("t2 must be nonnegative");
  if (zeta_fixed && !(*zeta_fixed > 0.0)) problems.push_back("zeta_fixed must be positive");
  if (!(nu_floor > 0.0)) problems.push_back("nu_floor must be positive");
  try {
    proj_cfg.validate();
  } catch (const ConfigError& e) {
    problems.insert(problems.end(), e.problems().begin(), e.problems().end());
  }
  if (!problems.empty()) throw ConfigError(problems);
}

double empirical_mean_y(const Eigen::VectorXd& y) {
  if (y.size() < 1) throw InvalidArgument("empirical_mean_y: need at least one observation");
  return y.mean();
}

double empirical_mean_y(const MeasurementSet& data) { return empirical_mean_y(data.observations); }

double estimate_nu_hat(const Eigen::MatrixXd& sensing, const Eigen::VectorXd& y, double ybar,
                       const Eigen::VectorXd& x) {
  const Eigen::VectorXd proj = sensing * x;
  return ((y.array() - ybar) * proj.array().square()).mean();
}

double estimate_nu_hat(const MeasurementSet& data, double ybar, const Eigen::VectorXd& x) {
  return estimate_nu_hat(data.sensing, data.observations, ybar, x);
}

Eigen::VectorXd pseudo_observations(const Eigen::MatrixXd& sensing, const Eigen::VectorXd& y,
                                    double ybar, const Eigen::VectorXd& x) {
  return ((y.array() - ybar) * (sensing * x).array()).matrix();
}

Eigen::VectorXd gradient_update(const Eigen::MatrixXd& sensing, const Eigen::VectorXd& y,
                                double ybar, const Eigen::VectorXd& x, double nu, double zeta) {
  const Eigen::VectorXd proj = sensing * x;
  const Eigen::VectorXd y_tilde = ((y.array() - ybar) * proj.array()).matrix();
  const Eigen::VectorXd residual = nu * proj - y_tilde;
  const double scale = zeta / static_cast<double>(sensing.rows());
  return x - scale * (sensing.transpose() * residual);
}

StepScale step_scale(double nu_hat, const RefineConfig& cfg) {
  StepScale s;
  s.nu = nu_hat;
  if (cfg.zeta_mode == ZetaMode::fixed && cfg.zeta_fixed) {
    s.zeta = *cfg.zeta_fixed;
  } else {
    s.warn = !(nu_hat > 0.0);
    s.zeta = 1.0 / std::max(nu_hat, cfg.nu_floor);
  }
  return s;
}

RefineState make_refine_state(const MeasurementSet& data, double ybar, Eigen::VectorXd x,
                              Eigen::VectorXd latent, int t, const RefineConfig& cfg,
                              const std::optional<StepScale>& frozen) {
  RefineState s;
  s.nu_hat = estimate_nu_hat(data, ybar, x);
  if (frozen) {
    s.zeta = frozen->zeta;
    s.warn = frozen->warn;
  } else {
    const StepScale scale = step_scale(s.nu_hat, cfg);
    s.zeta = scale.zeta;
    s.warn = scale.warn;
  }
  if (data.has_truth()) s.error = (x - data.signal).norm();
  s.iterate = std::move(x);
  s.latent = std::move(latent);
  s.t = t;
  return s;
}

RefineState refine_step(const MeasurementSet& data, double ybar, const RefineState& state,
                        const RefineConfig& cfg, Projector& projector,
                        const std::optional<StepScale>& frozen) {
  const double nu = frozen ? frozen->nu : state.nu_hat;
  Eigen::VectorXd pre =
      gradient_update(data.sensing, data.observations, ybar, state.iterate, nu, state.zeta);
  ProjectionResult proj;
  try {
    proj = projector(pre, state.latent.size() ? &state.latent : nullptr);
  } catch (const NumericalError& e) {
    throw ProjectionFailure(std::string("refine step failed: ") + e.what(),
                            static_cast<std::size_t>(state.t + 1));
  }
  RefineState next = make_refine_state(data, ybar, std::move(proj.point), std::move(proj.latent),
                                       state.t + 1, cfg, frozen);
  next.pre_projection = std::move(pre);
  return next;
}

std::vector<RefineState> run_refine(const MeasurementSet& data, Projector& projector,
                                    const Eigen::VectorXd& x0, const RefineConfig& cfg,
                                    const Eigen::VectorXd* latent0) {
  cfg.validate();
  if (x0.size() != data.n()) throw InvalidArgument("run_refine: x0 has wrong dimension");
  const double ybar = empirical_mean_y(data);

  std::vector<RefineState> states;
  states.reserve(static_cast<std::size_t>(cfg.t2) + 1);
  states.push_back(make_refine_state(data, ybar, x0, latent0 ? *latent0 : Eigen::VectorXd(), 0,
                                     cfg));
  std::optional<StepScale> frozen;
  if (cfg.zeta_mode == ZetaMode::fixed) {
    frozen = step_scale(states.front().nu_hat, cfg);
    states.front().zeta = frozen->zeta;
  }
  for (int t = 0; t < cfg.t2; ++t)
    states.push_back(refine_step(data, ybar, states.back(), cfg, projector, frozen));
  return states;
}

std::vector<RefineState> run_refine(const MeasurementSet& data, const GenerativePrior& prior,
                                    const Eigen::VectorXd& x0, const RefineConfig& cfg,
                                    std::uint64_t seed) {
  Projector projector(prior, cfg.proj_cfg, seed);
  return run_refine(data, projector, x0, cfg, nullptr);
}

}  // namespace mprg
