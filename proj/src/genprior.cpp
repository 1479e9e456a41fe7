#include "mprg/genprior.hpp"

#include <cmath>
#include <limits>
#include <string>

#include <Eigen/QR>

#include "mprg/errors.hpp"
#include "mprg/rng.hpp"

namespace mprg {

namespace {

Eigen::MatrixXd gaussian_matrix(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed,
                                double scale) {
  Rng rng(seed);
  Eigen::MatrixXd w(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) w(i, j) = scale * rng.normal();
  return w;
}

// Orthonormal, nonnegative: normalized indicators of k disjoint blocks from a
// seeded Fisher-Yates shuffle of the coordinates.
Eigen::MatrixXd block_basis(Eigen::Index k, Eigen::Index n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
  for (Eigen::Index i = n - 1; i > 0; --i) {
    auto j = static_cast<Eigen::Index>(rng.uniform() * static_cast<double>(i + 1));
    if (j > i) j = i;
    std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(j)]);
  }
  Eigen::MatrixXd basis = Eigen::MatrixXd::Zero(n, k);
  Eigen::Index pos = 0;
  for (Eigen::Index c = 0; c < k; ++c) {
    const Eigen::Index size = n / k + (c < n % k ? 1 : 0);
    const double value = 1.0 / std::sqrt(static_cast<double>(size));
    for (Eigen::Index i = 0; i < size; ++i, ++pos)
      basis(order[static_cast<std::size_t>(pos)], c) = value;
  }
  return basis;
}

}  // namespace

std::string_view to_string(SubspaceBasis basis) {
  return basis == SubspaceBasis::block ? "block" : "gaussian";
}

SubspaceBasis parse_subspace_basis(std::string_view name) {
  if (name == "block") return SubspaceBasis::block;
  if (name == "gaussian") return SubspaceBasis::gaussian;
  throw ConfigError("unknown subspace basis '" + std::string(name) + "'");
}

std::string_view to_string(PriorKind kind) {
  return kind == PriorKind::linear_subspace ? "linear-subspace" : "relu-mlp";
}

std::string_view to_string(Activation act) { return act == Activation::relu ? "relu" : "none"; }

PriorKind parse_prior_kind(std::string_view name) {
  if (name == "linear-subspace") return PriorKind::linear_subspace;
  if (name == "relu-mlp") return PriorKind::relu_mlp;
  throw ConfigError("unknown prior kind '" + std::string(name) + "'");
}

Activation parse_activation(std::string_view name) {
  if (name == "relu") return Activation::relu;
  if (name == "none") return Activation::none;
  throw ConfigError("unknown activation '" + std::string(name) + "'");
}

double GenerativePrior::default_radius(Eigen::Index k) {
  return 10.0 * std::sqrt(static_cast<double>(k));
}

double spectral_norm_estimate(const Eigen::MatrixXd& matrix, int iterations) {
  if (matrix.size() == 0) return 0.0;
  Eigen::VectorXd x = Eigen::VectorXd::Ones(matrix.cols()) / std::sqrt(double(matrix.cols()));
  double sigma = 0.0;
  for (int it = 0; it < iterations; ++it) {
    const Eigen::VectorXd y = matrix.transpose() * (matrix * x);
    const double norm = y.norm();
    if (norm == 0.0) return 0.0;
    x = y / norm;
    sigma = std::sqrt(norm);
  }
  return sigma;
}

GenerativePrior::GenerativePrior(PriorKind kind, std::vector<Eigen::MatrixXd> layers,
                                 double radius, std::uint64_t seed, Activation activation,
                                 bool nonnegative_latents)
    : kind_(kind),
      k_(layers.empty() ? 0 : layers.front().cols()),
      n_(layers.empty() ? 0 : layers.back().rows()),
      radius_(radius),
      layers_(std::move(layers)),
      activation_(activation),
      seed_(seed),
      lipschitz_proxy_(1.0),
      nonnegative_latents_(nonnegative_latents) {
  std::vector<std::string> problems;
  if (layers_.empty()) problems.push_back("prior needs at least one layer");
  for (std::size_t l = 1; l < layers_.size(); ++l)
    if (layers_[l].cols() != layers_[l - 1].rows())
      problems.push_back("layer " + std::to_string(l) + " input width does not match layer " +
                         std::to_string(l - 1) + " output");
  if (k_ < 1) problems.push_back("latent dimension k must be at least 1");
  if (!(k_ < n_)) problems.push_back("latent dimension k must be smaller than n");
  if (!(radius_ > 0.0)) problems.push_back("latent radius r must be positive");
  if (kind_ == PriorKind::linear_subspace && layers_.size() != 1)
    problems.push_back("linear-subspace prior has exactly one layer");
  if (!problems.empty()) throw ConfigError(problems);
  for (const auto& w : layers_) lipschitz_proxy_ *= spectral_norm_estimate(w);
}

GenerativePrior GenerativePrior::linear_subspace(Eigen::Index k, Eigen::Index n,
                                                 std::uint64_t seed,
                                                 std::optional<double> radius,
                                                 SubspaceBasis basis_kind) {
  if (k < 1 || k >= n) throw ConfigError("linear-subspace prior needs 1 <= k < n");
  const std::uint64_t weight_seed = derive_seed(seed, StreamRole::weights, {0});
  Eigen::MatrixXd basis;
  if (basis_kind == SubspaceBasis::block) {
    basis = block_basis(k, n, weight_seed);
  } else {
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(gaussian_matrix(n, k, weight_seed, 1.0));
    basis = qr.householderQ() * Eigen::MatrixXd::Identity(n, k);
  }
  return GenerativePrior(PriorKind::linear_subspace, {std::move(basis)},
                         radius.value_or(default_radius(k)), seed, Activation::none,
                         basis_kind == SubspaceBasis::block);
}

GenerativePrior GenerativePrior::relu_mlp(Eigen::Index k, const std::vector<Eigen::Index>& hidden,
                                          Eigen::Index n, std::uint64_t seed,
                                          std::optional<double> radius, Activation activation) {
  std::vector<Eigen::Index> widths{k};
  widths.insert(widths.end(), hidden.begin(), hidden.end());
  widths.push_back(n);
  for (Eigen::Index w : widths)
    if (w < 1) throw ConfigError("relu-mlp layer widths must be positive");
  std::vector<Eigen::MatrixXd> layers;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    const double scale = 1.0 / std::sqrt(static_cast<double>(widths[l]));
    layers.push_back(gaussian_matrix(widths[l + 1], widths[l],
                                     derive_seed(seed, StreamRole::weights, {l}), scale));
  }
  return GenerativePrior(PriorKind::relu_mlp, std::move(layers),
                         radius.value_or(default_radius(k)), seed, activation, false);
}

GenerativePrior GenerativePrior::from_layers(PriorKind kind, std::vector<Eigen::MatrixXd> layers,
                                             double radius, std::uint64_t seed,
                                             Activation activation, bool nonnegative_latents) {
  return GenerativePrior(kind, std::move(layers), radius, seed, activation, nonnegative_latents);
}

Eigen::VectorXd GenerativePrior::sample_latent(Rng& rng) const {
  Eigen::VectorXd z = rng.normal_vector(k_);
  if (nonnegative_latents_) z = z.cwiseAbs();
  return z;
}

Eigen::VectorXd GenerativePrior::clip_to_ball(Eigen::VectorXd z) const {
  if (nonnegative_latents_) z = z.cwiseMax(0.0);
  const double norm = z.norm();
  if (norm > radius_) z *= radius_ / norm;
  return z;
}

Eigen::VectorXd GenerativePrior::evaluate_unnormalized(const Eigen::VectorXd& z) const {
  if (z.size() != k_) throw InvalidArgument("latent vector has wrong dimension");
  Eigen::VectorXd h = clip_to_ball(z);
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    h = layers_[l] * h;
    if (activation_ == Activation::relu) h = h.cwiseMax(0.0);
  }
  return h;
}

Eigen::VectorXd GenerativePrior::evaluate(const Eigen::VectorXd& z) const {
  Eigen::VectorXd out = evaluate_unnormalized(z);
  const double norm = out.norm();
  if (!(norm > 0.0)) throw DegenerateLatent("generator output is zero before normalization");
  return out / norm;
}

double GenerativePrior::squared_distance(const Eigen::VectorXd& z, const Eigen::VectorXd& v,
                                         Eigen::VectorXd* gradient) const {
  if (z.size() != k_) throw InvalidArgument("latent vector has wrong dimension");
  if (v.size() != n_) throw InvalidArgument("target vector has wrong dimension");

  // Forward, keeping post-activation values for the ReLU masks.
  std::vector<Eigen::VectorXd> acts;
  acts.reserve(layers_.size() + 1);
  acts.push_back(z);
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    Eigen::VectorXd h = layers_[l] * acts.back();
    if (activation_ == Activation::relu) h = h.cwiseMax(0.0);
    acts.push_back(std::move(h));
  }
  const Eigen::VectorXd& out = acts.back();
  const double norm = out.norm();
  if (!(norm > 0.0)) throw DegenerateLatent("generator output is zero before normalization");
  const Eigen::VectorXd u = out / norm;
  const Eigen::VectorXd diff = u - v;
  const double value = diff.squaredNorm();

  if (gradient) {
    const Eigen::VectorXd du = 2.0 * diff;
    Eigen::VectorXd delta = (du - u * u.dot(du)) / norm;
    for (std::size_t l = layers_.size(); l-- > 0;) {
      if (activation_ == Activation::relu)
        delta = (acts[l + 1].array() > 0.0).select(delta, 0.0);
      delta = layers_[l].transpose() * delta;
    }
    *gradient = std::move(delta);
  }
  return value;
}

void ProjectionConfig::validate() const {
  std::vector<std::string> problems;
  if (steps < 1) problems.push_back("projection.steps must be at least 1");
  if (!(learning_rate > 0.0)) problems.push_back("projection.learning_rate must be positive");
  if (restarts < 1) problems.push_back("projection.restarts must be at least 1");
  if (!(tolerance >= 0.0)) problems.push_back("projection.tolerance must be nonnegative");
  if (!problems.empty()) throw ConfigError(problems);
}

std::string_view to_string(LatentInit init) {
  switch (init) {
    case LatentInit::zero: return "zero";
    case LatentInit::gaussian: return "gaussian";
    case LatentInit::warm_start: return "warm-start";
  }
  return "unknown";
}

LatentInit parse_latent_init(std::string_view name) {
  if (name == "zero") return LatentInit::zero;
  if (name == "gaussian") return LatentInit::gaussian;
  if (name == "warm-start") return LatentInit::warm_start;
  throw ConfigError("unknown latent_init '" + std::string(name) + "'");
}

std::string_view to_string(ProjectionMethod method) {
  switch (method) {
    case ProjectionMethod::automatic: return "auto";
    case ProjectionMethod::exact: return "exact";
    case ProjectionMethod::iterative: return "iterative";
  }
  return "unknown";
}

ProjectionMethod parse_projection_method(std::string_view name) {
  if (name == "auto") return ProjectionMethod::automatic;
  if (name == "exact") return ProjectionMethod::exact;
  if (name == "iterative") return ProjectionMethod::iterative;
  throw ConfigError("unknown projection method '" + std::string(name) + "'");
}

ProjectionResult project_exact(const GenerativePrior& prior, const Eigen::VectorXd& v) {
  if (prior.kind() != PriorKind::linear_subspace)
    throw InvalidArgument("exact projection needs a linear-subspace prior");
  if (v.size() != prior.n()) throw InvalidArgument("target vector has wrong dimension");
  const Eigen::MatrixXd& w = prior.basis();
  Eigen::VectorXd coeffs = w.transpose() * v;
  if (prior.nonnegative_latents()) coeffs = coeffs.cwiseMax(0.0);
  const Eigen::VectorXd in_span = w * coeffs;
  const double norm = in_span.norm();
  if (!(norm > 1e-13 * v.norm()) || !std::isfinite(norm))
    throw DegenerateProjection("target is orthogonal to the prior's range");

  ProjectionResult result;
  result.point = in_span / norm;
  result.latent = prior.clip_to_ball(coeffs);
  result.objective = (result.point - v).norm();
  return result;
}

ProjectionResult project_iterative(const GenerativePrior& prior, const Eigen::VectorXd& v,
                                   const ProjectionConfig& cfg, std::uint64_t seed,
                                   const Eigen::VectorXd* warm_latent) {
  cfg.validate();
  if (v.size() != prior.n()) throw InvalidArgument("target vector has wrong dimension");
  if (!v.allFinite() || v.norm() == 0.0)
    throw InvalidArgument("projection target must be finite and nonzero");

  constexpr double kBeta1 = 0.9;
  constexpr double kBeta2 = 0.999;
  constexpr double kEpsilon = 1e-8;
  const Eigen::Index k = prior.k();

  std::optional<ProjectionResult> best;
  double best_value = std::numeric_limits<double>::infinity();

  for (int r = 0; r < cfg.restarts; ++r) {
    Rng rng(derive_seed(seed, {static_cast<std::uint64_t>(r)}));
    Eigen::VectorXd z;
    if (cfg.latent_init == LatentInit::zero) {
      z = Eigen::VectorXd::Zero(k);
    } else if (cfg.latent_init == LatentInit::warm_start && r == 0 && warm_latent &&
               warm_latent->size() == k) {
      z = prior.clip_to_ball(*warm_latent);
    } else {
      z = prior.clip_to_ball(0.1 * prior.sample_latent(rng));
    }

    Eigen::VectorXd m1 = Eigen::VectorXd::Zero(k);
    Eigen::VectorXd m2 = Eigen::VectorXd::Zero(k);
    Eigen::VectorXd grad;
    Eigen::VectorXd run_best_z;
    double run_best = std::numeric_limits<double>::infinity();
    double decay1 = 1.0;
    double decay2 = 1.0;

    for (int s = 0; s <= cfg.steps; ++s) {
      double value;
      try {
        value = prior.squared_distance(z, v, s < cfg.steps ? &grad : nullptr);
      } catch (const DegenerateLatent&) {
        break;  // keep whatever this descent found so far
      }
      if (value < run_best) {
        run_best = value;
        run_best_z = z;
      }
      if (s == cfg.steps || grad.norm() <= cfg.tolerance) break;
      decay1 *= kBeta1;
      decay2 *= kBeta2;
      m1 = kBeta1 * m1 + (1.0 - kBeta1) * grad;
      m2 = kBeta2 * m2 + (1.0 - kBeta2) * grad.cwiseAbs2();
      const Eigen::ArrayXd m_hat = m1.array() / (1.0 - decay1);
      const Eigen::ArrayXd v_hat = m2.array() / (1.0 - decay2);
      z -= (cfg.learning_rate * m_hat / (v_hat.sqrt() + kEpsilon)).matrix();
      z = prior.clip_to_ball(std::move(z));
    }

    if (run_best_z.size() == 0) continue;  // degenerate from the first evaluation
    if (run_best < best_value) {
      best_value = run_best;
      ProjectionResult res;
      res.point = prior.evaluate(run_best_z);
      res.latent = run_best_z;
      res.objective = std::sqrt(run_best);
      res.restart_index = r;
      best = std::move(res);
    }
  }
  if (!best) throw ProjectionFailure("every projection restart hit a degenerate latent");
  return *best;
}

ProjectionResult project(const GenerativePrior& prior, const Eigen::VectorXd& v,
                         const ProjectionConfig& cfg, std::uint64_t seed,
                         const Eigen::VectorXd* warm_latent) {
  ProjectionMethod method = cfg.method;
  if (method == ProjectionMethod::automatic)
    method = prior.kind() == PriorKind::linear_subspace ? ProjectionMethod::exact
                                                        : ProjectionMethod::iterative;
  if (method == ProjectionMethod::iterative)
    return project_iterative(prior, v, cfg, seed, warm_latent);
  try {
    return project_exact(prior, v);
  } catch (const DegenerateProjection&) {
    ProjectionResult res;
    res.point = prior.basis().col(0);
    res.latent = Eigen::VectorXd::Unit(prior.k(), 0);
    res.objective = (res.point - v).norm();
    res.fallback = true;
    return res;
  }
}

Projector::Projector(const GenerativePrior& prior, ProjectionConfig cfg, std::uint64_t seed)
    : prior_(&prior), cfg_(cfg), seed_(seed) {
  cfg_.validate();
}

ProjectionResult Projector::operator()(const Eigen::VectorXd& v,
                                       const Eigen::VectorXd* warm_latent) {
  const std::uint64_t call_seed = derive_seed(seed_, StreamRole::projection, {calls_});
  ++calls_;
  return project(*prior_, v, cfg_, call_seed, warm_latent);
}

}  // namespace mprg
