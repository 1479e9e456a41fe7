#include "mprg/spectral.hpp"

#include <cmath>
#include <fstream>
#include <limits>

#include "mprg/errors.hpp"
#include "mprg/numfmt.hpp"

namespace mprg {

Eigen::MatrixXd SpectralMatrix::shifted() const {
  Eigen::MatrixXd s = v;
  s.diagonal().array() += ybar;
  return s;
}

SpectralMatrix build_spectral_matrix(const Eigen::MatrixXd& sensing, const Eigen::VectorXd& y) {
  const Eigen::Index m = sensing.rows();
  const Eigen::Index n = sensing.cols();
  if (m < 1) throw InvalidArgument("build_spectral_matrix: need at least one measurement");
  if (y.size() != m) throw InvalidArgument("build_spectral_matrix: y length must equal m");

  SpectralMatrix spec;
  spec.m_used = m;
  spec.ybar = y.mean();
  spec.v.resize(n, n);
  spec.diag_shifted.resize(n);

  const double inv_m = 1.0 / static_cast<double>(m);
  const Eigen::MatrixXd weighted = sensing.array().colwise() * y.array();
  for (Eigen::Index l = 0; l < n; ++l) {
    for (Eigen::Index j = l; j < n; ++j) {
      const double s = sensing.col(j).dot(weighted.col(l)) * inv_m;
      if (j == l) {
        spec.diag_shifted[j] = s;
        spec.v(j, j) = s - spec.ybar;
      } else {
        spec.v(j, l) = s;
        spec.v(l, j) = s;
      }
    }
  }
  return spec;
}

SpectralMatrix build_spectral_matrix(const MeasurementSet& data) {
  return build_spectral_matrix(data.sensing, data.observations);
}

Eigen::VectorXd initial_vector(const Eigen::MatrixXd& shifted) {
  const Eigen::Index n = shifted.rows();
  if (n == 0 || shifted.cols() != n) throw InvalidArgument("initial_vector: need a square matrix");
  Eigen::Index best = 0;
  for (Eigen::Index j = 1; j < n; ++j)
    if (shifted(j, j) > shifted(best, best)) best = j;
  Eigen::VectorXd col = shifted.col(best);
  const double norm = col.norm();
  if (!(norm > 0.0) || !std::isfinite(norm)) return Eigen::VectorXd::Unit(n, 0);
  return col / norm;
}

Eigen::VectorXd initial_vector(const SpectralMatrix& spec) { return initial_vector(spec.shifted()); }

namespace {

PowerState make_state(Eigen::VectorXd w, Eigen::VectorXd latent, int t,
                      const Eigen::VectorXd* truth) {
  PowerState s;
  s.iterate = std::move(w);
  s.latent = std::move(latent);
  s.t = t;
  if (truth && truth->size() == s.iterate.size()) {
    s.correlation = truth->dot(s.iterate);
    s.error = (s.iterate - *truth).norm();
    s.low_correlation = *s.correlation < kLowCorrelation;
  }
  return s;
}

}  // namespace

std::vector<PowerState> projected_power(const Eigen::MatrixXd& v, Projector& projector,
                                        const Eigen::VectorXd& w0, int t1,
                                        const Eigen::VectorXd* truth) {
  if (t1 < 1) throw InvalidArgument("projected_power: t1 must be at least 1");
  if (w0.size() != v.rows()) throw InvalidArgument("projected_power: w0 has wrong dimension");
  const double norm = w0.norm();
  if (!(norm > 0.0)) throw InvalidArgument("projected_power: w0 must be nonzero");

  std::vector<PowerState> states;
  states.reserve(static_cast<std::size_t>(t1) + 1);
  states.push_back(make_state(w0 / norm, Eigen::VectorXd(), 0, truth));
  for (int t = 0; t < t1; ++t) {
    const PowerState& prev = states.back();
    const Eigen::VectorXd target = v * prev.iterate;
    ProjectionResult proj;
    try {
      proj = projector(target, prev.latent.size() ? &prev.latent : nullptr);
    } catch (const NumericalError& e) {
      throw ProjectionFailure(std::string("projected power step failed: ") + e.what(),
                              static_cast<std::size_t>(t + 1));
    }
    states.push_back(make_state(std::move(proj.point), std::move(proj.latent), t + 1, truth));
  }
  return states;
}

std::vector<PowerState> projected_power(const SpectralMatrix& spec, const GenerativePrior& prior,
                                        const Eigen::VectorXd& w0, int t1,
                                        const ProjectionConfig& proj_cfg, std::uint64_t seed,
                                        const Eigen::VectorXd* truth) {
  Projector projector(prior, proj_cfg, seed);
  return projected_power(spec.v, projector, w0, t1, truth);
}

void write_power_trajectory(const std::vector<PowerState>& states,
                            const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  const double nan = std::numeric_limits<double>::quiet_NaN();
  out << "t,error,correlation\n";
  for (const PowerState& s : states)
    out << s.t << ',' << format_double(s.error.value_or(nan)) << ','
        << format_double(s.correlation.value_or(nan)) << '\n';
  if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace mprg
