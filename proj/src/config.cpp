#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "mprg/errors.hpp"
#include "mprg/harness.hpp"

namespace mprg {

namespace {

using nlohmann::json;

// Collects every problem in one pass instead of stopping at the first.
class Reader {
 public:
  template <typename T>
  void read(const json& obj, const std::string& path, const char* key, T& out) {
    if (!obj.contains(key)) return;
    try {
      out = obj.at(key).get<T>();
    } catch (const json::exception&) {
      problems.push_back(path + key + ": wrong type");
    }
  }

  template <typename T, typename Parse>
  void read_enum(const json& obj, const std::string& path, const char* key, T& out,
                 Parse parse) {
    std::string text;
    if (!obj.contains(key)) return;
    read(obj, path, key, text);
    try {
      out = parse(text);
    } catch (const ConfigError& e) {
      problems.push_back(path + key + ": " + e.what());
    }
  }

  void unknown_keys(const json& obj, const std::string& path,
                    std::initializer_list<const char*> known) {
    if (!obj.is_object()) {
      problems.push_back((path.empty() ? std::string("config") : path) + " must be an object");
      return;
    }
    const std::set<std::string> allowed(known.begin(), known.end());
    for (const auto& item : obj.items())
      if (!allowed.count(item.key())) problems.push_back(path + item.key() + ": unknown key");
  }

  std::vector<std::string> problems;
};

}  // namespace

void ExperimentConfig::validate() const {
  std::vector<std::string> problems;
  if (prior.k < 1) problems.push_back("prior.k must be at least 1");
  if (prior.k >= prior.n) problems.push_back("prior.k must be smaller than prior.n");
  if (prior.r && !(*prior.r > 0.0)) problems.push_back("prior.r must be positive");
  for (Eigen::Index h : prior.hidden)
    if (h < 1) problems.push_back("prior.hidden widths must be positive");
  if (!(link.sigma >= 0.0)) problems.push_back("link.sigma must be nonnegative");
  if (m_grid.empty()) problems.push_back("m_grid must not be empty");
  for (std::size_t i = 0; i < m_grid.size(); ++i) {
    if (m_grid[i] < 1) problems.push_back("m_grid entries must be at least 1");
    if (i > 0 && m_grid[i] <= m_grid[i - 1]) problems.push_back("m_grid must be strictly increasing");
  }
  if (trials < 1) problems.push_back("trials must be at least 1");
  if (restarts < 1) problems.push_back("restarts must be at least 1");
  if (algorithms.empty()) problems.push_back("algorithms must not be empty");
  try {
    solver.validate();
  } catch (const ConfigError& e) {
    for (const auto& p : e.problems()) problems.push_back("solver." + p);
  }
  if (!problems.empty()) throw ConfigError(problems);
}

ExperimentConfig parse_experiment_config(std::string_view json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }

  ExperimentConfig cfg;
  Reader r;
  r.unknown_keys(doc, "", {"prior", "link", "m_grid", "trials", "restarts", "algorithms",
                           "solver", "master_seed", "selection", "aggregation", "threads"});
  if (!r.problems.empty() && !doc.is_object()) throw ConfigError(r.problems);

  if (doc.contains("prior")) {
    const json& p = doc["prior"];
    r.unknown_keys(p, "prior.", {"kind", "k", "n", "r", "seed", "hidden", "activation", "basis"});
    if (p.is_object()) {
      r.read_enum(p, "prior.", "kind", cfg.prior.kind, parse_prior_kind);
      r.read(p, "prior.", "k", cfg.prior.k);
      r.read(p, "prior.", "n", cfg.prior.n);
      if (p.contains("r") && !p["r"].is_null()) {
        double radius = 0.0;
        r.read(p, "prior.", "r", radius);
        cfg.prior.r = radius;
      }
      r.read(p, "prior.", "seed", cfg.prior.seed);
      r.read(p, "prior.", "hidden", cfg.prior.hidden);
      r.read_enum(p, "prior.", "activation", cfg.prior.activation, parse_activation);
      r.read_enum(p, "prior.", "basis", cfg.prior.basis, parse_subspace_basis);
    }
  }

  if (doc.contains("link")) {
    const json& l = doc["link"];
    r.unknown_keys(l, "link.", {"name", "sigma", "terms"});
    if (l.is_object()) {
      std::string name = "abs-noise-out";
      std::string terms;
      double sigma = 0.0;
      r.read(l, "link.", "name", name);
      r.read(l, "link.", "sigma", sigma);
      r.read(l, "link.", "terms", terms);
      try {
        cfg.link = name == "custom" ? LinkModel::custom(parse_link_terms(terms), sigma)
                                    : LinkModel::named(name, sigma);
      } catch (const ConfigError& e) {
        for (const auto& p : e.problems()) r.problems.push_back("link: " + p);
      }
    }
  }

  if (doc.is_object()) {
    r.read(doc, "", "m_grid", cfg.m_grid);
    r.read(doc, "", "trials", cfg.trials);
    r.read(doc, "", "restarts", cfg.restarts);
    r.read(doc, "", "master_seed", cfg.master_seed);
    r.read(doc, "", "threads", cfg.threads);
    r.read_enum(doc, "", "selection", cfg.selection, [](const std::string& s) {
      if (s == "error") return Selection::error;
      if (s == "residual") return Selection::residual;
      throw ConfigError("unknown selection '" + s + "'");
    });
    r.read_enum(doc, "", "aggregation", cfg.aggregation, [](const std::string& s) {
      if (s == "best") return Aggregation::best;
      if (s == "mean") return Aggregation::mean;
      throw ConfigError("unknown aggregation '" + s + "'");
    });
    if (doc.contains("algorithms")) {
      std::vector<std::string> names;
      r.read(doc, "", "algorithms", names);
      cfg.algorithms.clear();
      for (const auto& name : names) {
        try {
          cfg.algorithms.push_back(parse_algorithm(name));
        } catch (const ConfigError& e) {
          r.problems.push_back(std::string("algorithms: ") + e.what());
        }
      }
    }
  }

  if (doc.contains("solver")) {
    const json& s = doc["solver"];
    r.unknown_keys(s, "solver.", {"t1", "t2", "tau", "nu_floor", "zeta_fixed", "appgd_count_init",
                                  "projection"});
    if (s.is_object()) {
      r.read(s, "solver.", "t1", cfg.solver.t1);
      r.read(s, "solver.", "t2", cfg.solver.t2);
      r.read(s, "solver.", "tau", cfg.solver.tau);
      r.read(s, "solver.", "nu_floor", cfg.solver.nu_floor);
      r.read(s, "solver.", "appgd_count_init", cfg.solver.appgd_count_init);
      if (s.contains("zeta_fixed") && !s["zeta_fixed"].is_null()) {
        double z = 0.0;
        r.read(s, "solver.", "zeta_fixed", z);
        cfg.solver.zeta_fixed = z;
      }
      if (s.contains("projection")) {
        const json& p = s["projection"];
        const std::string path = "solver.projection.";
        r.unknown_keys(p, path,
                       {"steps", "learning_rate", "restarts", "latent_init", "tolerance", "method"});
        if (p.is_object()) {
          ProjectionConfig& pc = cfg.solver.proj;
          r.read(p, path, "steps", pc.steps);
          r.read(p, path, "learning_rate", pc.learning_rate);
          r.read(p, path, "restarts", pc.restarts);
          r.read(p, path, "tolerance", pc.tolerance);
          r.read_enum(p, path, "latent_init", pc.latent_init, parse_latent_init);
          r.read_enum(p, path, "method", pc.method, parse_projection_method);
        }
      }
    }
  }

  try {
    cfg.validate();
  } catch (const ConfigError& e) {
    r.problems.insert(r.problems.end(), e.problems().begin(), e.problems().end());
  }
  if (!r.problems.empty()) throw ConfigError(r.problems);
  return cfg;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_experiment_config(buf.str());
}

}  // namespace mprg
