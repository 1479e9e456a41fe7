#include <doctest.h>

#include <cmath>
#include <filesystem>

#include <Eigen/SVD>

#include "mprg/errors.hpp"
#include "mprg/genprior.hpp"
#include "mprg/rng.hpp"

using mprg::GenerativePrior;
using mprg::ProjectionConfig;

namespace {

GenerativePrior block_prior(Eigen::Index k = 5, Eigen::Index n = 100, std::uint64_t seed = 1) {
  return GenerativePrior::linear_subspace(k, n, seed);
}

GenerativePrior gaussian_prior(Eigen::Index k = 5, Eigen::Index n = 100, std::uint64_t seed = 1) {
  return GenerativePrior::linear_subspace(k, n, seed, std::nullopt, mprg::SubspaceBasis::gaussian);
}

GenerativePrior mlp_prior(std::uint64_t seed = 2) {
  return GenerativePrior::relu_mlp(5, {50}, 100, seed);
}

double relative_fd_error(const GenerativePrior& prior, const Eigen::VectorXd& z,
                         const Eigen::VectorXd& v) {
  Eigen::VectorXd grad;
  prior.squared_distance(z, v, &grad);
  const double h = 1e-5;
  Eigen::VectorXd fd(z.size());
  for (Eigen::Index j = 0; j < z.size(); ++j) {
    Eigen::VectorXd zp = z, zm = z;
    zp(j) += h;
    zm(j) -= h;
    fd(j) = (prior.squared_distance(zp, v, nullptr) - prior.squared_distance(zm, v, nullptr)) /
            (2.0 * h);
  }
  return (grad - fd).norm() / fd.norm();
}

}  // namespace

TEST_CASE("enum names round-trip") {
  for (auto kind : {mprg::PriorKind::linear_subspace, mprg::PriorKind::relu_mlp})
    CHECK(mprg::parse_prior_kind(mprg::to_string(kind)) == kind);
  for (auto act : {mprg::Activation::relu, mprg::Activation::none})
    CHECK(mprg::parse_activation(mprg::to_string(act)) == act);
  for (auto b : {mprg::SubspaceBasis::block, mprg::SubspaceBasis::gaussian})
    CHECK(mprg::parse_subspace_basis(mprg::to_string(b)) == b);
  for (auto init : {mprg::LatentInit::zero, mprg::LatentInit::gaussian, mprg::LatentInit::warm_start})
    CHECK(mprg::parse_latent_init(mprg::to_string(init)) == init);
  CHECK_THROWS_AS(mprg::parse_prior_kind("vae"), mprg::ConfigError);
  CHECK_THROWS_AS(mprg::parse_activation("sigmoid"), mprg::ConfigError);
  CHECK_THROWS_AS(mprg::parse_projection_method("gan"), mprg::ConfigError);
}

TEST_CASE("linear-subspace bases are orthonormal") {
  const auto block = block_prior(5, 23, 4);
  const Eigen::MatrixXd& w = block.basis();
  CHECK((w.transpose() * w - Eigen::MatrixXd::Identity(5, 5)).norm() <= 1e-14);
  CHECK(w.minCoeff() >= 0.0);
  for (Eigen::Index i = 0; i < w.rows(); ++i) CHECK((w.row(i).array() > 0.0).count() == 1);
  CHECK(block.nonnegative_latents());

  const auto gauss = gaussian_prior(5, 23, 4);
  CHECK((gauss.basis().transpose() * gauss.basis() - Eigen::MatrixXd::Identity(5, 5)).norm() <=
        1e-13);
  CHECK_FALSE(gauss.nonnegative_latents());
}

TEST_CASE("evaluate examples") {
  SUBCASE("first basis column for z = e1") {
    for (const auto& prior : {block_prior(), gaussian_prior()})
      CHECK((prior.evaluate(Eigen::VectorXd::Unit(5, 0)) - prior.basis().col(0)).norm() <= 1e-15);
  }
  SUBCASE("positive homogeneity with all pre-activations positive") {
    mprg::Rng rng(3);
    Eigen::MatrixXd w1(6, 3), w2(9, 6);
    for (Eigen::Index i = 0; i < w1.size(); ++i) w1(i) = std::abs(rng.normal());
    for (Eigen::Index i = 0; i < w2.size(); ++i) w2(i) = std::abs(rng.normal());
    const auto prior = GenerativePrior::from_layers(mprg::PriorKind::relu_mlp, {w1, w2}, 30.0, 0,
                                                    mprg::Activation::relu);
    const Eigen::Vector3d z(0.5, 1.0, 0.25);
    CHECK(prior.evaluate(z) == prior.evaluate(2.0 * z));
  }
  SUBCASE("unit norm for random latents") {
    mprg::Rng rng(5);
    for (const auto& prior : {block_prior(), gaussian_prior(), mlp_prior()}) {
      for (int i = 0; i < 50; ++i) {
        const Eigen::VectorXd out = prior.evaluate(rng.normal_vector(5) * 3.0);
        CHECK(std::abs(out.norm() - 1.0) <= 1e-12);
      }
    }
  }
  SUBCASE("relu-mlp range is nonnegative") {
    mprg::Rng rng(6);
    const auto prior = mlp_prior();
    for (int i = 0; i < 20; ++i) CHECK(prior.evaluate(rng.normal_vector(5)).minCoeff() >= 0.0);
  }
  SUBCASE("latents beyond the radius are clipped") {
    const auto prior = GenerativePrior::relu_mlp(5, {50}, 100, 2, 1.5);
    mprg::Rng rng(7);
    const Eigen::VectorXd z = rng.normal_vector(5).normalized() * 4.0;
    CHECK((prior.evaluate(z) - prior.evaluate(z * (1.5 / 4.0))).norm() <= 1e-15);
    CHECK(prior.clip_to_ball(z).norm() <= 1.5 + 1e-12);
  }
  SUBCASE("nonnegative latent domain clamps negative coordinates") {
    const auto prior = block_prior();
    Eigen::VectorXd z(5);
    z << 1.0, -2.0, 0.5, -0.1, 0.0;
    const Eigen::VectorXd clipped = prior.clip_to_ball(z);
    CHECK(clipped.minCoeff() == 0.0);
    CHECK(clipped(0) == 1.0);
    CHECK(prior.evaluate(z).minCoeff() >= 0.0);
  }
  SUBCASE("zero output is a degenerate latent") {
    CHECK_THROWS_AS(mlp_prior().evaluate(Eigen::VectorXd::Zero(5)), mprg::DegenerateLatent);
    CHECK_THROWS_AS(block_prior().evaluate(-Eigen::VectorXd::Ones(5)), mprg::DegenerateLatent);
  }
}

TEST_CASE("prior construction errors") {
  CHECK_THROWS_AS(GenerativePrior::linear_subspace(5, 5, 1), mprg::ConfigError);
  CHECK_THROWS_AS(GenerativePrior::linear_subspace(0, 5, 1), mprg::ConfigError);
  CHECK_THROWS_AS(GenerativePrior::linear_subspace(2, 5, 1, -1.0), mprg::ConfigError);
  CHECK_THROWS_AS(GenerativePrior::relu_mlp(5, {0}, 10, 1), mprg::ConfigError);
  try {
    GenerativePrior::from_layers(mprg::PriorKind::relu_mlp,
                                 {Eigen::MatrixXd::Ones(4, 3), Eigen::MatrixXd::Ones(2, 5)}, 0.0,
                                 0, mprg::Activation::relu);
    FAIL("expected ConfigError");
  } catch (const mprg::ConfigError& e) {
    CHECK(e.problems().size() == 3);  // width mismatch, k >= n, radius
  }
}

TEST_CASE("weights are seeded with variance 1/fan-in") {
  const auto a = GenerativePrior::relu_mlp(200, {400}, 500, 9);
  const auto b = GenerativePrior::relu_mlp(200, {400}, 500, 9);
  CHECK(a.layers()[0] == b.layers()[0]);
  CHECK(a.layers()[1] == b.layers()[1]);
  const Eigen::MatrixXd& w = a.layers()[0];
  const double mean = w.mean();
  const double var = (w.array() - mean).square().sum() / static_cast<double>(w.size() - 1);
  CHECK(std::abs(mean) <= 3.0 * std::sqrt(1.0 / 200.0 / static_cast<double>(w.size())));
  CHECK(var == doctest::Approx(1.0 / 200.0).epsilon(0.03));
  CHECK(GenerativePrior::relu_mlp(200, {400}, 500, 10).layers()[0] != w);
}

TEST_CASE("lipschitz proxy is the product of layer spectral norms") {
  const auto prior = mlp_prior();
  double product = 1.0;
  for (const auto& w : prior.layers())
    product *= Eigen::JacobiSVD<Eigen::MatrixXd>(w).singularValues()(0);
  CHECK(prior.lipschitz_proxy() <= product * (1.0 + 1e-12));
  CHECK(prior.lipschitz_proxy() == doctest::Approx(product).epsilon(1e-3));
  CHECK(block_prior().lipschitz_proxy() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("project_exact") {
  SUBCASE("range points are fixed") {
    const auto prior = block_prior();
    const Eigen::VectorXd x = prior.evaluate(Eigen::Vector<double, 5>(1, 2, 0, 3, 0.5));
    const Eigen::VectorXd v = 2.5 * x;
    const auto res = mprg::project_exact(prior, v);
    CHECK((res.point - x).norm() <= 1e-15);
    CHECK(res.objective == doctest::Approx((v - res.point).norm()).epsilon(1e-15));
    CHECK(res.objective == doctest::Approx(1.5));
    CHECK_FALSE(res.fallback);
  }
  SUBCASE("orthogonal targets fall back to the first basis column") {
    const auto prior = gaussian_prior(4, 20, 3);
    mprg::Rng rng(2);
    const Eigen::VectorXd g = rng.normal_vector(20);
    const Eigen::VectorXd v = g - prior.basis() * (prior.basis().transpose() * g);
    CHECK_THROWS_AS(mprg::project_exact(prior, v), mprg::DegenerateProjection);
    const auto res = mprg::project(prior, v, {}, 1);
    CHECK(res.fallback);
    CHECK(res.point == prior.basis().col(0));
    CHECK(res.latent == Eigen::VectorXd::Unit(4, 0));
  }
  SUBCASE("targets with nonpositive cone coefficients fall back") {
    const auto prior = block_prior();
    const auto res = mprg::project(prior, -prior.basis().col(2), {}, 1);
    CHECK(res.fallback);
    CHECK(res.point == prior.basis().col(0));
  }
  SUBCASE("beats brute-force latent sampling") {
    for (const auto& prior : {block_prior(4, 20, 5), gaussian_prior(4, 20, 5)}) {
      mprg::Rng rng(11);
      Eigen::VectorXd v = rng.normal_vector(20);
      while ((prior.basis().transpose() * v).maxCoeff() <= 0.0) v = rng.normal_vector(20);
      const auto res = mprg::project_exact(prior, v);
      CHECK(res.latent.norm() <= prior.radius());
      int violations = 0;
      for (int i = 0; i < 10000; ++i) {
        const Eigen::VectorXd z = rng.normal_vector(4) * 2.0;
        Eigen::VectorXd u;
        try {
          u = prior.evaluate(z);
        } catch (const mprg::DegenerateLatent&) {
          continue;
        }
        if (res.objective > (u - v).norm() + 1e-9) ++violations;
      }
      CHECK(violations == 0);
    }
  }
  SUBCASE("idempotent") {
    mprg::Rng rng(13);
    for (const auto& prior : {block_prior(), gaussian_prior()}) {
      for (int i = 0; i < 20; ++i) {
        Eigen::VectorXd v = rng.normal_vector(100);
        while ((prior.basis().transpose() * v).maxCoeff() <= 0.0) v = rng.normal_vector(100);
        const auto once = mprg::project_exact(prior, v);
        const auto twice = mprg::project_exact(prior, once.point);
        CHECK((once.point - twice.point).norm() <= 1e-9);
        CHECK(std::abs(once.point.norm() - 1.0) <= 1e-9);
      }
    }
  }
  SUBCASE("needs a linear-subspace prior") {
    CHECK_THROWS_AS(mprg::project_exact(mlp_prior(), Eigen::VectorXd::Ones(100)),
                    mprg::InvalidArgument);
  }
}

TEST_CASE("project_iterative") {
  ProjectionConfig cfg;
  cfg.method = mprg::ProjectionMethod::iterative;

  SUBCASE("warm start at the optimum") {
    const auto prior = mlp_prior();
    mprg::Rng rng(21);
    const Eigen::VectorXd z = rng.normal_vector(5);
    const Eigen::VectorXd v = prior.evaluate(z);
    const auto res = mprg::project_iterative(prior, v, cfg, 1, &z);
    CHECK(res.objective <= 1e-6);
    CHECK(res.restart_index == 0);
  }
  SUBCASE("matches the exact projector on linear subspaces") {
    mprg::Rng rng(22);
    for (const auto& prior : {block_prior(), gaussian_prior()}) {
      for (std::uint64_t i = 0; i < 10; ++i) {
        Eigen::VectorXd v = rng.normal_vector(100);
        while ((prior.basis().transpose() * v).maxCoeff() <= 0.0) v = rng.normal_vector(100);
        const auto exact = mprg::project_exact(prior, v);
        const auto iter = mprg::project_iterative(prior, v, cfg, i);
        CHECK((exact.point - iter.point).norm() <= 1e-3);
      }
    }
  }
  SUBCASE("recovers a noisy relu-mlp output with restarts") {
    const auto prior = mlp_prior();
    mprg::Rng rng(23);
    const Eigen::VectorXd target = prior.evaluate(rng.normal_vector(5));
    const Eigen::VectorXd v = target + 0.01 * rng.normal_vector(100).normalized();
    ProjectionConfig many = cfg;
    many.restarts = 10;
    many.steps = 200;
    const auto res = mprg::project_iterative(prior, v, many, 4);
    CHECK(res.objective <= 0.05);
    CHECK((res.point - target).norm() <= 0.05);
    CHECK(std::abs(res.point.norm() - 1.0) <= 1e-9);
    CHECK(res.latent.norm() <= prior.radius());
  }
  SUBCASE("best restart wins and the result is deterministic") {
    const auto prior = mlp_prior();
    mprg::Rng rng(24);
    const Eigen::VectorXd v = rng.normal_vector(100).cwiseAbs();
    ProjectionConfig many = cfg;
    many.restarts = 4;
    const auto a = mprg::project_iterative(prior, v, many, 8);
    const auto b = mprg::project_iterative(prior, v, many, 8);
    CHECK(a.point == b.point);
    CHECK(a.latent == b.latent);
    CHECK(a.restart_index == b.restart_index);
    ProjectionConfig single = cfg;
    for (int r = 0; r < 4; ++r) {
      single.restarts = r + 1;
      CHECK(a.objective <= mprg::project_iterative(prior, v, single, 8).objective);
    }
  }
  SUBCASE("zero latent init degenerates on bias-free networks") {
    ProjectionConfig zero = cfg;
    zero.latent_init = mprg::LatentInit::zero;
    zero.restarts = 3;
    CHECK_THROWS_AS(mprg::project_iterative(mlp_prior(), Eigen::VectorXd::Ones(100), zero, 1),
                    mprg::ProjectionFailure);
  }
  SUBCASE("rejects bad targets and configs") {
    CHECK_THROWS_AS(mprg::project_iterative(mlp_prior(), Eigen::VectorXd::Zero(100), cfg, 1),
                    mprg::InvalidArgument);
    ProjectionConfig bad = cfg;
    bad.steps = 0;
    bad.restarts = 0;
    try {
      bad.validate();
      FAIL("expected ConfigError");
    } catch (const mprg::ConfigError& e) {
      CHECK(e.problems().size() == 2);
    }
  }
}

TEST_CASE("backprop gradients match central differences") {
  mprg::Rng rng(31);
  const auto mlp = mlp_prior();
  const auto deep = GenerativePrior::relu_mlp(4, {30, 40}, 60, 3);
  const auto block = block_prior();
  for (int c = 0; c < 20; ++c) {
    const GenerativePrior& prior = c % 3 == 0 ? mlp : (c % 3 == 1 ? deep : block);
    const Eigen::VectorXd z = prior.sample_latent(rng);
    const Eigen::VectorXd v = rng.normal_vector(prior.n()).normalized();
    CHECK(relative_fd_error(prior, z, v) <= 1e-4);
  }
}

TEST_CASE("projector hands each call its own seed") {
  const auto prior = mlp_prior();
  ProjectionConfig cfg;
  cfg.steps = 20;
  mprg::Projector a(prior, cfg, 5), b(prior, cfg, 5);
  const Eigen::VectorXd v = Eigen::VectorXd::Ones(100);
  const auto first = a(v);
  const auto second = a(v);
  CHECK(a.calls() == 2);
  CHECK(first.point != second.point);
  CHECK(b(v).point == first.point);
}

TEST_CASE("model files reproduce evaluate bit-identically") {
  const auto dir = std::filesystem::temp_directory_path() / "mprg_test_genprior";
  std::filesystem::create_directories(dir);
  mprg::Rng rng(41);
  for (const auto& prior : {block_prior(), gaussian_prior(), mlp_prior()}) {
    mprg::write_model(prior, dir / "model.json");
    const auto back = mprg::read_model(dir / "model.json");
    CHECK(back.kind() == prior.kind());
    CHECK(back.radius() == prior.radius());
    CHECK(back.seed() == prior.seed());
    CHECK(back.nonnegative_latents() == prior.nonnegative_latents());
    for (int i = 0; i < 5; ++i) {
      const Eigen::VectorXd z = rng.normal_vector(5).cwiseAbs();
      CHECK(back.evaluate(z) == prior.evaluate(z));
    }
  }
  CHECK_THROWS_AS(mprg::read_model(dir / "missing.json"), mprg::IoError);
  std::filesystem::remove_all(dir);
}
