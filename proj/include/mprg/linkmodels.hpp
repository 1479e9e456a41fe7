#pragma once

// Link functions y = f(a^T x) for the single index model, measurement
// sampling, and population moments of y.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

namespace mprg {

enum class LinkKind { abs_noise_out, abs_noise_in, square_noise, abs_tanh, square_sin, linear, custom };

std::string_view to_string(LinkKind kind);
LinkKind parse_link_kind(std::string_view name);  // throws ConfigError

// One primitive of a custom link. A term is a chain of ops applied left to
// right starting from g; add_noise adds eta at that position in the chain.
struct LinkOp {
  enum class Kind { abs, square, tanh, sin, scale, add_noise };
  Kind kind;
  double value = 1.0;  // multiplier for scale

  bool operator==(const LinkOp&) const = default;
};
using LinkTerm = std::vector<LinkOp>;

// "abs;abs,tanh,scale:2,add-noise" -> two terms. Empty string = zero link.
std::vector<LinkTerm> parse_link_terms(std::string_view text);
std::string format_link_terms(const std::vector<LinkTerm>& terms);

struct LinkModel {
  LinkKind kind = LinkKind::abs_noise_out;
  double sigma = 0.0;
  std::vector<LinkTerm> terms;  // custom only; y is the sum of the terms

  static LinkModel named(std::string_view name, double sigma);
  static LinkModel custom(std::vector<LinkTerm> terms, double sigma);

  std::string name() const { return std::string(to_string(kind)); }
  // True when the noise enters additively outside the nonlinearity.
  bool noise_outside() const;
};

// f(g) with eta injected where the link formula places it.
double apply_link(const LinkModel& link, double g, double eta);

// Population covariance Cov[f(g), g^2] when it has a closed form (linear: 0,
// square-noise: 2), independent of sigma.
std::optional<double> analytic_nu(const LinkModel& link);
std::optional<double> analytic_mean_y(const LinkModel& link);

struct MeasurementSet {
  Eigen::VectorXd signal;        // ground truth; empty when unknown
  Eigen::MatrixXd sensing;       // m x n, row i is a_i
  Eigen::VectorXd observations;  // y
  std::uint64_t seed = 0;
  LinkModel link;

  Eigen::Index n() const { return sensing.cols(); }
  Eigen::Index m() const { return sensing.rows(); }
  bool has_truth() const { return signal.size() == sensing.cols(); }
};

// Row i consumes n standard normals for a_i followed by one normal for eta_i
// from a single stream seeded by `seed`.
MeasurementSet sample_measurements(const LinkModel& link, const Eigen::VectorXd& signal,
                                   Eigen::Index m, std::uint64_t seed);

struct MomentReport {
  double nu = 0.0;
  double mean_y = 0.0;
  double subexp_norm_proxy = 0.0;
  std::size_t mc_samples = 0;
  double mc_stderr = 0.0;  // 0 when nu is analytic
  bool analytic = false;
};

// Monte-Carlo draws are split into a fixed number of substreams, so the
// result never depends on how the chunks are scheduled.
inline constexpr std::size_t kMonteCarloChunks = 16;

MomentReport population_nu(const LinkModel& link, std::size_t mc_samples, std::uint64_t seed,
                           bool force_monte_carlo = false);

// max over p in 1..8 of p^-1 (E|y|^p)^(1/p). Diagnostic only.
double subexp_norm_proxy(const LinkModel& link, std::size_t mc_samples, std::uint64_t seed);
double subexp_norm_proxy(const Eigen::Ref<const Eigen::VectorXd>& y);

// CSV `y,a_1,...,a_n` plus a JSON sidecar (n, m, seed, link, sigma, signal).
void write_measurements(const MeasurementSet& data, const std::filesystem::path& csv,
                        const std::filesystem::path& metadata);
MeasurementSet read_measurements(const std::filesystem::path& csv,
                                 const std::filesystem::path& metadata);

}  // namespace mprg
