// Command-line front end: model generation, simulation, moment reports,
// single runs and sweeps.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mprg/baselines.hpp"
#include "mprg/errors.hpp"
#include "mprg/genprior.hpp"
#include "mprg/harness.hpp"
#include "mprg/linkmodels.hpp"
#include "mprg/numfmt.hpp"
#include "mprg/rng.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;

struct LinkOptions {
  std::string name = "abs-noise-out";
  double sigma = 0.0;
  std::string terms;

  void attach(CLI::App* cmd) {
    cmd->add_option("--link", name, "link name (abs-noise-out, abs-noise-in, square-noise, "
                                    "abs-tanh, square-sin, linear, custom)");
    cmd->add_option("--sigma", sigma, "noise standard deviation");
    cmd->add_option("--terms", terms, "custom link terms, e.g. 'abs;abs,tanh,scale:2,add-noise'");
  }
  mprg::LinkModel build() const {
    return name == "custom" ? mprg::LinkModel::custom(mprg::parse_link_terms(terms), sigma)
                            : mprg::LinkModel::named(name, sigma);
  }
};

struct SolverOptions {
  mprg::SolverConfig cfg;
  std::string latent_init = "warm-start";
  std::string method = "auto";
  double zeta_fixed = 0.0;
  bool exclude_init = false;

  void attach(CLI::App* cmd) {
    cmd->add_option("--t1", cfg.t1, "power iterations");
    cmd->add_option("--t2", cfg.t2, "refinement iterations");
    cmd->add_option("--tau", cfg.tau, "APPGD step size");
    cmd->add_option("--nu-floor", cfg.nu_floor, "floor on nu-hat for the adaptive step");
    cmd->add_option("--zeta-fixed", zeta_fixed, "fixed step size for mprgf (default 1/nu-hat(0))");
    cmd->add_option("--proj-steps", cfg.proj.steps, "Adam steps per projection");
    cmd->add_option("--proj-lr", cfg.proj.learning_rate, "Adam learning rate");
    cmd->add_option("--proj-restarts", cfg.proj.restarts, "latent restarts per projection");
    cmd->add_option("--latent-init", latent_init, "zero, gaussian or warm-start");
    cmd->add_option("--projection", method, "auto, exact or iterative");
    cmd->add_flag("--appgd-exclude-init", exclude_init,
                  "do not count APPGD's power-step initialization against its budget");
  }
  mprg::SolverConfig build() const {
    mprg::SolverConfig out = cfg;
    out.proj.latent_init = mprg::parse_latent_init(latent_init);
    out.proj.method = mprg::parse_projection_method(method);
    if (zeta_fixed > 0.0) out.zeta_fixed = zeta_fixed;
    out.appgd_count_init = !exclude_init;
    return out;
  }
};

std::vector<Eigen::Index> parse_widths(const std::string& text) {
  std::vector<Eigen::Index> out;
  std::size_t start = 0;
  while (start < text.size()) {
    const auto comma = text.find(',', start);
    const std::string item = text.substr(start, comma == std::string::npos ? comma : comma - start);
    try {
      out.push_back(std::stol(item));
    } catch (const std::logic_error&) {
      throw mprg::ConfigError("bad layer width '" + item + "'");
    }
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

void print_report(const mprg::MomentReport& r) {
  std::cout << "nu: " << mprg::format_double(r.nu) << '\n'
            << "mean_y: " << mprg::format_double(r.mean_y) << '\n'
            << "subexp_norm_proxy: " << mprg::format_double(r.subexp_norm_proxy) << '\n'
            << "mc_samples: " << r.mc_samples << '\n'
            << "mc_stderr: " << mprg::format_double(r.mc_stderr) << '\n'
            << "analytic: " << (r.analytic ? "true" : "false") << '\n';
}

void print_sweep(const mprg::SweepResult& result) {
  std::cout << "m,algorithm,mean,stderr\n";
  for (const auto& a : result.aggregates)
    std::cout << a.m << ',' << a.algorithm << ',' << mprg::format_double(a.mean) << ','
              << mprg::format_double(a.stderr_) << '\n';
  for (const auto& [algo, fit] : result.slopes) {
    std::cout << "slope " << algo << ": " << fit.slope << " (95% CI " << fit.ci_low << ", "
              << fit.ci_high << ")\n";
    for (const auto& w : fit.warnings) std::cerr << "warning: " << w << '\n';
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Misspecified phase retrieval with generative priors"};
  app.require_subcommand(1);

  // gen-model
  auto* gen = app.add_subcommand("gen-model", "write a generative prior model file");
  std::string kind = "linear-subspace", activation = "relu", hidden = "50", basis = "block",
              model_out;
  Eigen::Index k = 5, n = 100;
  double radius = 0.0;
  std::uint64_t model_seed = 1;
  gen->add_option("--kind", kind, "linear-subspace or relu-mlp");
  gen->add_option("--k", k, "latent dimension");
  gen->add_option("--n", n, "ambient dimension");
  gen->add_option("--hidden", hidden, "comma-separated hidden widths (relu-mlp)");
  gen->add_option("--activation", activation, "relu or none");
  gen->add_option("--basis", basis, "block or gaussian (linear-subspace)");
  gen->add_option("--r", radius, "latent radius (default 10 sqrt(k))");
  gen->add_option("--seed", model_seed, "weight seed");
  gen->add_option("--out", model_out, "model file")->required();

  // simulate
  auto* sim = app.add_subcommand("simulate", "sample a measurement set from a model's range");
  std::string sim_model, sim_csv, sim_meta;
  Eigen::Index sim_m = 1000;
  std::uint64_t sim_seed = 1, signal_seed = 1;
  LinkOptions sim_link;
  sim->add_option("--model", sim_model, "model file")->required();
  sim_link.attach(sim);
  sim->add_option("--m", sim_m, "number of measurements");
  sim->add_option("--seed", sim_seed, "measurement seed");
  sim->add_option("--signal-seed", signal_seed, "seed for the latent of the signal");
  sim->add_option("--out", sim_csv, "measurement CSV")->required();
  sim->add_option("--meta", sim_meta, "metadata file (default: <out>.meta.json)");

  // nu
  auto* nu = app.add_subcommand("nu", "print population moments of a link");
  LinkOptions nu_link;
  std::size_t nu_samples = 1000000;
  std::uint64_t nu_seed = 1;
  bool force_mc = false;
  nu_link.attach(nu);
  nu->add_option("--samples", nu_samples, "Monte Carlo samples");
  nu->add_option("--seed", nu_seed, "Monte Carlo seed");
  nu->add_flag("--monte-carlo", force_mc, "estimate by Monte Carlo even when analytic");

  // run
  auto* run = app.add_subcommand("run", "run one algorithm on a measurement set");
  std::string run_algo = "mprg", run_model, run_csv, run_meta, run_out;
  std::uint64_t run_seed = 1;
  SolverOptions run_solver;
  run->add_option("--algorithm", run_algo, "mprg, mprgf, ppower, step2 or appgd");
  run->add_option("--model", run_model, "model file")->required();
  run->add_option("--data", run_csv, "measurement CSV")->required();
  run->add_option("--meta", run_meta, "metadata file (default: <data>.meta.json)");
  run->add_option("--seed", run_seed, "projection seed");
  run->add_option("--out", run_out, "trajectory CSV");
  run_solver.attach(run);

  // sweep
  auto* sweep = app.add_subcommand("sweep", "run an experiment config");
  std::string sweep_cfg, sweep_out, sweep_svg;
  sweep->add_option("--config", sweep_cfg, "experiment config (JSON)")->required();
  sweep->add_option("--out", sweep_out, "sweep CSV")->required();
  sweep->add_option("--svg", sweep_svg, "optional SVG plot");

  // plot
  auto* plot = app.add_subcommand("plot", "render a sweep CSV as SVG");
  std::string plot_in, plot_out;
  plot->add_option("--in", plot_in, "sweep CSV")->required();
  plot->add_option("--out", plot_out, "SVG file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    if (*gen) {
      const auto prior_kind = mprg::parse_prior_kind(kind);
      const std::optional<double> r = radius > 0.0 ? std::optional<double>(radius) : std::nullopt;
      const auto prior = prior_kind == mprg::PriorKind::linear_subspace
                             ? mprg::GenerativePrior::linear_subspace(k, n, model_seed, r,
                                                                     mprg::parse_subspace_basis(basis))
                             : mprg::GenerativePrior::relu_mlp(k, parse_widths(hidden), n,
                                                               model_seed, r,
                                                               mprg::parse_activation(activation));
      mprg::write_model(prior, model_out);
      std::cout << "wrote " << model_out << " (lipschitz_proxy "
                << mprg::format_double(prior.lipschitz_proxy()) << ")\n";
    } else if (*sim) {
      const auto prior = mprg::read_model(sim_model);
      const auto signal = mprg::draw_signal(prior, signal_seed, 0);
      const auto data = mprg::sample_measurements(sim_link.build(), signal, sim_m, sim_seed);
      const std::string meta = sim_meta.empty() ? sim_csv + ".meta.json" : sim_meta;
      mprg::write_measurements(data, sim_csv, meta);
      std::cout << "wrote " << sim_csv << " and " << meta << '\n';
    } else if (*nu) {
      print_report(mprg::population_nu(nu_link.build(), nu_samples, nu_seed, force_mc));
    } else if (*run) {
      const auto prior = mprg::read_model(run_model);
      const auto data =
          mprg::read_measurements(run_csv, run_meta.empty() ? run_csv + ".meta.json" : run_meta);
      const auto algo = mprg::parse_algorithm(run_algo);
      const auto trace = mprg::run_algorithm(algo, data, prior, run_solver.build(), run_seed);
      if (!run_out.empty()) {
        if (algo == mprg::Algorithm::ppower)
          mprg::write_power_trajectory(trace, run_out);
        else
          mprg::write_refine_trajectory(trace, run_out);
      }
      std::cout << "final_error: " << mprg::format_double(trace.final_error) << '\n'
                << "projection_calls: " << trace.projection_calls << '\n'
                << "wall_time: " << trace.wall_time << '\n';
    } else if (*sweep) {
      const auto cfg = mprg::load_experiment_config(sweep_cfg);
      const auto result = mprg::run_experiment(cfg);
      mprg::emit_outputs(result, mprg::OutputFormat::csv, sweep_out);
      if (!sweep_svg.empty()) mprg::emit_outputs(result, mprg::OutputFormat::svg, sweep_svg);
      print_sweep(result);
    } else if (*plot) {
      mprg::emit_outputs(mprg::read_sweep_csv(plot_in), mprg::OutputFormat::svg, plot_out);
    }
  } catch (const mprg::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const mprg::NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
