#pragma once

// First step of the two-step solver: the weighted second-moment matrix
// V = (1/m) sum_i y_i (a_i a_i^T - I) and projected power iterations on it.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include <Eigen/Core>

#include "mprg/genprior.hpp"
#include "mprg/linkmodels.hpp"

namespace mprg {

struct SpectralMatrix {
  Eigen::MatrixXd v;             // symmetric n x n
  Eigen::Index m_used = 0;
  Eigen::VectorXd diag_shifted;  // diagonal of (1/m) sum_i y_i a_i a_i^T
  double ybar = 0.0;

  // (1/m) sum_i y_i a_i a_i^T, i.e. V + ybar * I.
  Eigen::MatrixXd shifted() const;
};

// Each entry (j, l), j >= l, is one dot product written to both triangles, so
// V is symmetric by construction.
SpectralMatrix build_spectral_matrix(const Eigen::MatrixXd& sensing, const Eigen::VectorXd& y);
SpectralMatrix build_spectral_matrix(const MeasurementSet& data);

// Column at the largest diagonal entry (lowest index on ties), normalized.
// A zero column gives e_1.
Eigen::VectorXd initial_vector(const Eigen::MatrixXd& shifted);
Eigen::VectorXd initial_vector(const SpectralMatrix& spec);

struct PowerState {
  Eigen::VectorXd iterate;  // w^(t), unit norm
  Eigen::VectorXd latent;   // latent of the projection that produced it; empty at t = 0
  int t = 0;
  std::optional<double> correlation;  // x^T w^(t)
  std::optional<double> error;        // ||w^(t) - x||
  bool low_correlation = false;       // correlation below kLowCorrelation
};

inline constexpr double kLowCorrelation = 0.05;

// Returns w^(0) followed by t1 projected power iterates w^(t+1) = P_G(V w^(t)).
// `truth` (optional) fills in correlation/error.
std::vector<PowerState> projected_power(const Eigen::MatrixXd& v, Projector& projector,
                                        const Eigen::VectorXd& w0, int t1,
                                        const Eigen::VectorXd* truth = nullptr);
std::vector<PowerState> projected_power(const SpectralMatrix& spec, const GenerativePrior& prior,
                                        const Eigen::VectorXd& w0, int t1,
                                        const ProjectionConfig& proj_cfg, std::uint64_t seed,
                                        const Eigen::VectorXd* truth = nullptr);

// CSV `t,error,correlation`; missing values are written as nan.
void write_power_trajectory(const std::vector<PowerState>& states,
                            const std::filesystem::path& path);

}  // namespace mprg
