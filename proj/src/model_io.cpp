#include <fstream>

#include <json.hpp>

#include "mprg/errors.hpp"
#include "mprg/genprior.hpp"

namespace mprg {

void write_model(const GenerativePrior& prior, const std::filesystem::path& path) {
  nlohmann::json doc;
  doc["kind"] = std::string(to_string(prior.kind()));
  doc["k"] = prior.k();
  doc["n"] = prior.n();
  doc["r"] = prior.radius();
  doc["seed"] = prior.seed();
  doc["activation"] = std::string(to_string(prior.activation()));
  doc["lipschitz_proxy"] = prior.lipschitz_proxy();
  doc["latent_domain"] = prior.nonnegative_latents() ? "nonnegative-ball" : "ball";
  nlohmann::json layers = nlohmann::json::array();
  for (const Eigen::MatrixXd& w : prior.layers()) {
    std::vector<double> row_major;
    row_major.reserve(static_cast<std::size_t>(w.size()));
    for (Eigen::Index i = 0; i < w.rows(); ++i)
      for (Eigen::Index j = 0; j < w.cols(); ++j) row_major.push_back(w(i, j));
    layers.push_back({{"rows", w.rows()}, {"cols", w.cols()}, {"weights", row_major}});
  }
  doc["layers"] = std::move(layers);

  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << doc.dump(1) << '\n';
  if (!out) throw IoError("write failed for " + path.string());
}

GenerativePrior read_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    nlohmann::json doc;
    in >> doc;
    std::vector<Eigen::MatrixXd> layers;
    for (const auto& layer : doc.at("layers")) {
      const auto rows = layer.at("rows").get<Eigen::Index>();
      const auto cols = layer.at("cols").get<Eigen::Index>();
      const auto weights = layer.at("weights").get<std::vector<double>>();
      if (static_cast<Eigen::Index>(weights.size()) != rows * cols)
        throw IoError(path.string() + ": layer weight count does not match its shape");
      Eigen::MatrixXd w(rows, cols);
      for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j = 0; j < cols; ++j)
          w(i, j) = weights[static_cast<std::size_t>(i * cols + j)];
      layers.push_back(std::move(w));
    }
    const std::string domain = doc.value("latent_domain", std::string("ball"));
    if (domain != "ball" && domain != "nonnegative-ball")
      throw IoError(path.string() + ": unknown latent_domain '" + domain + "'");
    GenerativePrior prior = GenerativePrior::from_layers(
        parse_prior_kind(doc.at("kind").get<std::string>()), std::move(layers),
        doc.at("r").get<double>(), doc.at("seed").get<std::uint64_t>(),
        parse_activation(doc.at("activation").get<std::string>()), domain == "nonnegative-ball");
    if (prior.k() != doc.at("k").get<Eigen::Index>() || prior.n() != doc.at("n").get<Eigen::Index>())
      throw IoError(path.string() + ": declared k/n disagree with the layer shapes");
    return prior;
  } catch (const nlohmann::json::exception& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

}  // namespace mprg
