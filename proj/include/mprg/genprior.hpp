#pragma once

// Normalized generative priors G: B^k(r) -> S^{n-1} and projections onto
// their range.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string_view>
#include <vector>

#include <Eigen/Core>

namespace mprg {

class Rng;

enum class PriorKind { linear_subspace, relu_mlp };
enum class Activation { relu, none };
enum class SubspaceBasis { block, gaussian };

std::string_view to_string(PriorKind kind);
std::string_view to_string(Activation act);
PriorKind parse_prior_kind(std::string_view name);
Activation parse_activation(std::string_view name);
std::string_view to_string(SubspaceBasis basis);
SubspaceBasis parse_subspace_basis(std::string_view name);

// Immutable after construction. Layers map k -> h_1 -> ... -> n; the
// activation is applied after every layer, and the output is divided by its
// l2 norm. With ReLU the range lies in the nonnegative orthant.
class GenerativePrior {
 public:
  // Orthonormal n x k basis. block: column i is the normalized indicator of
  // the i-th of k disjoint, seeded, near-equal coordinate blocks, and the
  // latent domain is B^k(r) intersected with the nonnegative orthant, so the
  // range is a cone of nonnegative vectors that excludes -x. gaussian: the QR
  // factor of a seeded Gaussian matrix over the full ball; that range is
  // sign-symmetric, so magnitude-only links cannot tell x from -x.
  static GenerativePrior linear_subspace(Eigen::Index k, Eigen::Index n, std::uint64_t seed,
                                         std::optional<double> radius = std::nullopt,
                                         SubspaceBasis basis = SubspaceBasis::block);
  // Bias-free MLP with N(0, 1/fan_in) weights.
  static GenerativePrior relu_mlp(Eigen::Index k, const std::vector<Eigen::Index>& hidden,
                                  Eigen::Index n, std::uint64_t seed,
                                  std::optional<double> radius = std::nullopt,
                                  Activation activation = Activation::relu);
  // Stored weights, used by the model-file loader.
  static GenerativePrior from_layers(PriorKind kind, std::vector<Eigen::MatrixXd> layers,
                                     double radius, std::uint64_t seed, Activation activation,
                                     bool nonnegative_latents = false);

  static double default_radius(Eigen::Index k);

  PriorKind kind() const { return kind_; }
  Eigen::Index k() const { return k_; }
  Eigen::Index n() const { return n_; }
  double radius() const { return radius_; }
  Activation activation() const { return activation_; }
  std::uint64_t seed() const { return seed_; }
  double lipschitz_proxy() const { return lipschitz_proxy_; }
  bool nonnegative_latents() const { return nonnegative_latents_; }
  const std::vector<Eigen::MatrixXd>& layers() const { return layers_; }
  // Orthonormal basis W (linear-subspace only).
  const Eigen::MatrixXd& basis() const { return layers_.front(); }

  // Radially clips z into B^k(r), runs the network, normalizes. Throws
  // DegenerateLatent when the unnormalized output is zero.
  Eigen::VectorXd evaluate(const Eigen::VectorXd& z) const;
  Eigen::VectorXd evaluate_unnormalized(const Eigen::VectorXd& z) const;

  // ||G(z) - v||^2 and its gradient in z by backpropagation through the
  // layers and the normalization. No clipping is applied to z here.
  double squared_distance(const Eigen::VectorXd& z, const Eigen::VectorXd& v,
                          Eigen::VectorXd* gradient) const;

  // Euclidean projection onto the latent domain: clamps negative entries when
  // nonnegative_latents() is set, then clips radially into B^k(r).
  Eigen::VectorXd clip_to_ball(Eigen::VectorXd z) const;

  // Latent for a synthetic signal: N(0, I_k), folded to |N(0, I_k)| when
  // the latent domain is nonnegative.
  Eigen::VectorXd sample_latent(Rng& rng) const;

 private:
  GenerativePrior(PriorKind kind, std::vector<Eigen::MatrixXd> layers, double radius,
                  std::uint64_t seed, Activation activation, bool nonnegative_latents);

  PriorKind kind_;
  Eigen::Index k_;
  Eigen::Index n_;
  double radius_;
  std::vector<Eigen::MatrixXd> layers_;
  Activation activation_;
  std::uint64_t seed_;
  double lipschitz_proxy_;
  bool nonnegative_latents_;
};

// Largest singular value by power iteration on M^T M.
double spectral_norm_estimate(const Eigen::MatrixXd& matrix, int iterations = 50);

enum class LatentInit { zero, gaussian, warm_start };
enum class ProjectionMethod { automatic, exact, iterative };

std::string_view to_string(LatentInit init);
LatentInit parse_latent_init(std::string_view name);
std::string_view to_string(ProjectionMethod method);
ProjectionMethod parse_projection_method(std::string_view name);

struct ProjectionConfig {
  int steps = 200;
  double learning_rate = 0.05;
  int restarts = 1;
  LatentInit latent_init = LatentInit::warm_start;
  double tolerance = 0.0;  // stop a descent once ||grad|| <= tolerance
  ProjectionMethod method = ProjectionMethod::automatic;

  void validate() const;  // throws ConfigError
};

struct ProjectionResult {
  Eigen::VectorXd point;   // unit vector in Range(G)
  Eigen::VectorXd latent;  // in B^k(r)
  double objective = 0.0;  // ||point - v||
  int restart_index = 0;
  bool fallback = false;   // exact projector substituted the first basis column
};

// Closed-form projection for the linear-subspace prior: normalizes W c with
// c = W^T v, clamped at zero over a nonnegative latent domain. Throws
// DegenerateProjection when W c vanishes.
ProjectionResult project_exact(const GenerativePrior& prior, const Eigen::VectorXd& v);

// Adam descent on ||G(z) - v||^2 over cfg.restarts latent starts. The best
// objective wins; ties go to the lowest restart index. Throws
// ProjectionFailure when every restart degenerates.
ProjectionResult project_iterative(const GenerativePrior& prior, const Eigen::VectorXd& v,
                                   const ProjectionConfig& cfg, std::uint64_t seed,
                                   const Eigen::VectorXd* warm_latent = nullptr);

// Dispatches on cfg.method (automatic: exact for linear-subspace), applying
// the first-basis-column fallback for the exact projector.
ProjectionResult project(const GenerativePrior& prior, const Eigen::VectorXd& v,
                         const ProjectionConfig& cfg, std::uint64_t seed,
                         const Eigen::VectorXd* warm_latent = nullptr);

// The projection P_G used by the algorithms: binds a prior and config and
// hands every call its own derived seed. Counts calls for budget accounting.
class Projector {
 public:
  Projector(const GenerativePrior& prior, ProjectionConfig cfg, std::uint64_t seed);

  ProjectionResult operator()(const Eigen::VectorXd& v,
                              const Eigen::VectorXd* warm_latent = nullptr);

  const GenerativePrior& prior() const { return *prior_; }
  const ProjectionConfig& config() const { return cfg_; }
  std::size_t calls() const { return calls_; }

 private:
  const GenerativePrior* prior_;
  ProjectionConfig cfg_;
  std::uint64_t seed_;
  std::size_t calls_ = 0;
};

// JSON model file with stored weights; loading never re-derives from seed.
void write_model(const GenerativePrior& prior, const std::filesystem::path& path);
GenerativePrior read_model(const std::filesystem::path& path);

}  // namespace mprg
