#include "mprg/linkmodels.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "mprg/errors.hpp"
#include "mprg/numfmt.hpp"
#include "mprg/rng.hpp"

namespace mprg {

namespace {

constexpr std::array<std::pair<LinkKind, std::string_view>, 7> kLinkNames{{
    {LinkKind::abs_noise_out, "abs-noise-out"},
    {LinkKind::abs_noise_in, "abs-noise-in"},
    {LinkKind::square_noise, "square-noise"},
    {LinkKind::abs_tanh, "abs-tanh"},
    {LinkKind::square_sin, "square-sin"},
    {LinkKind::linear, "linear"},
    {LinkKind::custom, "custom"},
}};

constexpr std::array<std::pair<LinkOp::Kind, std::string_view>, 6> kOpNames{{
    {LinkOp::Kind::abs, "abs"},
    {LinkOp::Kind::square, "square"},
    {LinkOp::Kind::tanh, "tanh"},
    {LinkOp::Kind::sin, "sin"},
    {LinkOp::Kind::scale, "scale"},
    {LinkOp::Kind::add_noise, "add-noise"},
}};

std::vector<std::string_view> split(std::string_view text, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = text.find(sep, start);
    out.push_back(text.substr(start, pos == std::string_view::npos ? pos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

double apply_term(const LinkTerm& term, double g, double eta) {
  double v = g;
  for (const LinkOp& op : term) {
    switch (op.kind) {
      case LinkOp::Kind::abs: v = std::abs(v); break;
      case LinkOp::Kind::square: v = v * v; break;
      case LinkOp::Kind::tanh: v = std::tanh(v); break;
      case LinkOp::Kind::sin: v = std::sin(v); break;
      case LinkOp::Kind::scale: v *= op.value; break;
      case LinkOp::Kind::add_noise: v += eta; break;
    }
  }
  return v;
}

struct LinkSamples {
  Eigen::VectorXd g;
  Eigen::VectorXd y;
};

LinkSamples draw_link_samples(const LinkModel& link, std::size_t count, std::uint64_t seed) {
  LinkSamples s{Eigen::VectorXd(static_cast<Eigen::Index>(count)),
                Eigen::VectorXd(static_cast<Eigen::Index>(count))};
  Eigen::Index idx = 0;
  for (std::size_t c = 0; c < kMonteCarloChunks; ++c) {
    const std::size_t chunk = count / kMonteCarloChunks + (c < count % kMonteCarloChunks ? 1 : 0);
    Rng rng(derive_seed(seed, StreamRole::monte_carlo, {c}));
    for (std::size_t i = 0; i < chunk; ++i, ++idx) {
      const double g = rng.normal();
      const double eta = link.sigma * rng.normal();
      s.g[idx] = g;
      s.y[idx] = apply_link(link, g, eta);
    }
  }
  return s;
}

void require_samples(std::size_t mc_samples) {
  if (mc_samples < 10000) {
    throw InvalidArgument("Monte Carlo estimates need at least 1e4 samples, got " +
                          std::to_string(mc_samples));
  }
}

}  // namespace

std::string_view to_string(LinkKind kind) {
  for (const auto& [k, name] : kLinkNames)
    if (k == kind) return name;
  return "unknown";
}

LinkKind parse_link_kind(std::string_view name) {
  for (const auto& [k, text] : kLinkNames)
    if (text == name) return k;
  throw ConfigError("unknown link name '" + std::string(name) + "'");
}

std::vector<LinkTerm> parse_link_terms(std::string_view text) {
  std::vector<LinkTerm> terms;
  if (trim(text).empty()) return terms;
  for (std::string_view term_text : split(text, ';')) {
    LinkTerm term;
    for (std::string_view op_text : split(term_text, ',')) {
      op_text = trim(op_text);
      if (op_text.empty()) continue;
      std::string_view head = op_text;
      std::optional<double> arg;
      if (const auto colon = op_text.find(':'); colon != std::string_view::npos) {
        head = trim(op_text.substr(0, colon));
        try {
          arg = parse_double(trim(op_text.substr(colon + 1)));
        } catch (const IoError&) {
          throw ConfigError("bad argument in link op '" + std::string(op_text) + "'");
        }
      }
      const auto it = std::find_if(kOpNames.begin(), kOpNames.end(),
                                   [&](const auto& entry) { return entry.second == head; });
      if (it == kOpNames.end())
        throw ConfigError("unknown link primitive '" + std::string(head) + "'");
      LinkOp op{it->first, 1.0};
      if (op.kind == LinkOp::Kind::scale) {
        if (!arg) throw ConfigError("link primitive 'scale' needs a value, e.g. scale:2");
        op.value = *arg;
      } else if (arg) {
        throw ConfigError("link primitive '" + std::string(head) + "' takes no argument");
      }
      term.push_back(op);
    }
    terms.push_back(std::move(term));
  }
  return terms;
}

std::string format_link_terms(const std::vector<LinkTerm>& terms) {
  std::string out;
  for (std::size_t t = 0; t < terms.size(); ++t) {
    if (t) out += ';';
    for (std::size_t i = 0; i < terms[t].size(); ++i) {
      if (i) out += ',';
      const LinkOp& op = terms[t][i];
      for (const auto& [k, name] : kOpNames)
        if (k == op.kind) out += name;
      if (op.kind == LinkOp::Kind::scale) out += ":" + format_double(op.value);
    }
  }
  return out;
}

LinkModel LinkModel::named(std::string_view name, double sigma) {
  LinkModel link;
  link.kind = parse_link_kind(name);
  if (link.kind == LinkKind::custom)
    throw ConfigError("link 'custom' needs a term list; use LinkModel::custom");
  if (!(sigma >= 0.0)) throw ConfigError("link sigma must be nonnegative");
  link.sigma = sigma;
  return link;
}

LinkModel LinkModel::custom(std::vector<LinkTerm> terms, double sigma) {
  if (!(sigma >= 0.0)) throw ConfigError("link sigma must be nonnegative");
  LinkModel link;
  link.kind = LinkKind::custom;
  link.sigma = sigma;
  link.terms = std::move(terms);
  return link;
}

bool LinkModel::noise_outside() const {
  switch (kind) {
    case LinkKind::abs_noise_in: return false;
    case LinkKind::custom:
      for (const LinkTerm& term : terms)
        for (std::size_t i = 0; i + 1 < term.size(); ++i)
          if (term[i].kind == LinkOp::Kind::add_noise) return false;
      return true;
    default: return true;
  }
}

double apply_link(const LinkModel& link, double g, double eta) {
  switch (link.kind) {
    case LinkKind::abs_noise_out: return std::abs(g) + eta;
    case LinkKind::abs_noise_in: return std::abs(g + eta);
    case LinkKind::square_noise: return g * g + eta;
    case LinkKind::abs_tanh: return std::abs(g) + 2.0 * std::tanh(std::abs(g)) + eta;
    case LinkKind::square_sin: return 2.0 * g * g + 3.0 * std::sin(std::abs(g)) + eta;
    case LinkKind::linear: return g + eta;
    case LinkKind::custom: {
      double y = 0.0;
      for (const LinkTerm& term : link.terms) y += apply_term(term, g, eta);
      return y;
    }
  }
  throw ConfigError("link has no formula bound");
}

std::optional<double> analytic_nu(const LinkModel& link) {
  switch (link.kind) {
    case LinkKind::linear: return 0.0;
    case LinkKind::square_noise: return 2.0;
    default: return std::nullopt;
  }
}

std::optional<double> analytic_mean_y(const LinkModel& link) {
  switch (link.kind) {
    case LinkKind::linear: return 0.0;
    case LinkKind::square_noise: return 1.0;
    default: return std::nullopt;
  }
}

MeasurementSet sample_measurements(const LinkModel& link, const Eigen::VectorXd& signal,
                                   Eigen::Index m, std::uint64_t seed) {
  if (m < 1) throw InvalidArgument("sample_measurements: m must be at least 1");
  if (signal.size() == 0 || std::abs(signal.norm() - 1.0) > 1e-12)
    throw InvalidArgument("sample_measurements: signal must have unit l2 norm");

  const Eigen::Index n = signal.size();
  MeasurementSet data;
  data.signal = signal;
  data.sensing.resize(m, n);
  data.observations.resize(m);
  data.seed = seed;
  data.link = link;

  Rng rng(seed);
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) data.sensing(i, j) = rng.normal();
    const double eta = link.sigma * rng.normal();
    data.observations[i] = apply_link(link, data.sensing.row(i).dot(signal), eta);
  }
  return data;
}

MomentReport population_nu(const LinkModel& link, std::size_t mc_samples, std::uint64_t seed,
                           bool force_monte_carlo) {
  MomentReport report;
  const auto nu = analytic_nu(link);
  if (nu && !force_monte_carlo) {
    report.nu = *nu;
    report.mean_y = *analytic_mean_y(link);
    report.analytic = true;
    report.mc_stderr = 0.0;
    if (mc_samples >= 10000) {
      report.subexp_norm_proxy = subexp_norm_proxy(link, mc_samples, seed);
      report.mc_samples = mc_samples;
    }
    return report;
  }
  require_samples(mc_samples);

  const LinkSamples s = draw_link_samples(link, mc_samples, seed);
  const double count = static_cast<double>(mc_samples);
  const Eigen::ArrayXd q = s.g.array().square();
  const double mean_y = s.y.mean();
  const double mean_q = q.mean();
  const Eigen::ArrayXd products = (s.y.array() - mean_y) * (q - mean_q);
  const double cov = products.sum() / (count - 1.0);
  const double spread = std::sqrt((products - products.mean()).square().sum() / (count - 1.0));

  report.nu = cov;
  report.mean_y = mean_y;
  report.subexp_norm_proxy = subexp_norm_proxy(s.y);
  report.mc_samples = mc_samples;
  report.mc_stderr = spread / std::sqrt(count);
  report.analytic = false;
  return report;
}

double subexp_norm_proxy(const Eigen::Ref<const Eigen::VectorXd>& y) {
  const Eigen::ArrayXd abs_y = y.array().abs();
  double best = 0.0;
  for (int p = 1; p <= 8; ++p) {
    const double moment = abs_y.pow(static_cast<double>(p)).mean();
    best = std::max(best, std::pow(moment, 1.0 / p) / p);
  }
  return best;
}

double subexp_norm_proxy(const LinkModel& link, std::size_t mc_samples, std::uint64_t seed) {
  require_samples(mc_samples);
  return subexp_norm_proxy(draw_link_samples(link, mc_samples, seed).y);
}

void write_measurements(const MeasurementSet& data, const std::filesystem::path& csv,
                        const std::filesystem::path& metadata) {
  std::ofstream out(csv);
  if (!out) throw IoError("cannot open " + csv.string() + " for writing");
  out << 'y';
  for (Eigen::Index j = 0; j < data.n(); ++j) out << ",a_" << (j + 1);
  out << '\n';
  for (Eigen::Index i = 0; i < data.m(); ++i) {
    out << format_double(data.observations[i]);
    for (Eigen::Index j = 0; j < data.n(); ++j) out << ',' << format_double(data.sensing(i, j));
    out << '\n';
  }
  if (!out) throw IoError("write failed for " + csv.string());

  nlohmann::json meta;
  meta["n"] = data.n();
  meta["m"] = data.m();
  meta["seed"] = data.seed;
  meta["link"] = data.link.name();
  meta["sigma"] = data.link.sigma;
  if (data.link.kind == LinkKind::custom) meta["terms"] = format_link_terms(data.link.terms);
  meta["signal"] = std::vector<double>(data.signal.data(), data.signal.data() + data.signal.size());
  std::ofstream mout(metadata);
  if (!mout) throw IoError("cannot open " + metadata.string() + " for writing");
  mout << meta.dump(2) << '\n';
  if (!mout) throw IoError("write failed for " + metadata.string());
}

MeasurementSet read_measurements(const std::filesystem::path& csv,
                                 const std::filesystem::path& metadata) {
  std::ifstream min(metadata);
  if (!min) throw IoError("cannot open " + metadata.string());
  nlohmann::json meta;
  try {
    min >> meta;
  } catch (const nlohmann::json::exception& e) {
    throw IoError(metadata.string() + ": " + e.what());
  }

  MeasurementSet data;
  try {
    const auto n = meta.at("n").get<Eigen::Index>();
    const auto m = meta.at("m").get<Eigen::Index>();
    data.seed = meta.at("seed").get<std::uint64_t>();
    const auto name = meta.at("link").get<std::string>();
    const double sigma = meta.at("sigma").get<double>();
    data.link = name == "custom"
                    ? LinkModel::custom(parse_link_terms(meta.value("terms", std::string())), sigma)
                    : LinkModel::named(name, sigma);
    const auto signal = meta.value("signal", std::vector<double>{});
    data.signal = Eigen::Map<const Eigen::VectorXd>(signal.data(),
                                                    static_cast<Eigen::Index>(signal.size()));
    data.sensing.resize(m, n);
    data.observations.resize(m);
  } catch (const nlohmann::json::exception& e) {
    throw IoError(metadata.string() + ": " + e.what());
  }

  std::ifstream in(csv);
  if (!in) throw IoError("cannot open " + csv.string());
  std::string line;
  std::getline(in, line);
  Eigen::Index i = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (i >= data.m()) throw IoError(csv.string() + ": more rows than metadata m");
    const auto fields = split(line, ',');
    if (static_cast<Eigen::Index>(fields.size()) != data.n() + 1)
      throw IoError(csv.string() + ": row " + std::to_string(i + 1) + " has wrong field count");
    data.observations[i] = parse_double(fields[0]);
    for (Eigen::Index j = 0; j < data.n(); ++j) data.sensing(i, j) = parse_double(fields[j + 1]);
    ++i;
  }
  if (i != data.m()) throw IoError(csv.string() + ": fewer rows than metadata m");
  return data;
}

}  // namespace mprg
