#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace mprg {

inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// One iterate of any solver. Fields a method does not produce stay NaN.
struct TraceRecord {
  int t = 0;
  double error = kNaN;
  double nu_hat = kNaN;
  double zeta = kNaN;
  double correlation = kNaN;
  bool warn = false;
};

struct RunTrace {
  std::string algorithm;
  std::vector<TraceRecord> records;  // ordered by t
  Eigen::VectorXd estimate;
  Eigen::VectorXd estimate_latent;
  double final_error = kNaN;  // records.back().error
  double wall_time = 0.0;     // seconds
  std::vector<std::uint64_t> seeds;
  std::size_t projection_calls = 0;
};

// `t,error,nu_hat,zeta,warn`
void write_refine_trajectory(const RunTrace& trace, const std::filesystem::path& path);
// `t,error,correlation`
void write_power_trajectory(const RunTrace& trace, const std::filesystem::path& path);

}  // namespace mprg
