// Command-line harness: each subcommand builds an experiment configuration
// from defaults, an optional key=value config file, and explicit flags (in
// that order), runs it, writes per-replica records to --out, and prints a
// JSON summary to stdout.
//
// Exit codes: 0 success, 1 invalid configuration or usage, 2 numeric abort
// (partial records and summary are still written when available).

#include "coupling/config.hpp"
#include "coupling/geometry.hpp"
#include "coupling/harness.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <fstream>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

namespace {

using coupling::ExperimentKind;

struct FlagBinding {
  CLI::Option* opt = nullptr;
  std::string key;
  std::shared_ptr<std::string> value;
};

struct Subcommand {
  ExperimentKind kind = ExperimentKind::kFullCoupling;
  CLI::App* app = nullptr;
  std::shared_ptr<std::string> config_path = std::make_shared<std::string>();
  CLI::Option* config_opt = nullptr;
  std::vector<FlagBinding> bindings;
};

void bind(Subcommand& sc, const std::string& flag, const std::string& key,
          const std::string& help) {
  auto store = std::make_shared<std::string>();
  CLI::Option* opt = sc.app->add_option(flag, *store, help);
  sc.bindings.push_back({opt, key, store});
}

void bind_common(Subcommand& sc) {
  sc.config_opt = sc.app->add_option(
      "--config", *sc.config_path,
      "key=value configuration file, applied before explicit flags");
  bind(sc, "--seed", "seed", "base seed; replica streams are derived from it");
  bind(sc, "--replicas", "replicas", "number of independent replicas");
  bind(sc, "--workers", "workers", "worker threads (results are identical for any count)");
  bind(sc, "--out", "out", "write per-replica records to this path");
  bind(sc, "--format", "format", "records format: csv or json");
}

void bind_strategy(Subcommand& sc) {
  bind(sc, "--mode", "mode",
       "control strategy: reflection-synchronous, reflection-rotation, or pure-reflection");
  bind(sc, "--alpha-sq", "alpha_sq", "reflection cutoff parameter (alpha^2)");
  bind(sc, "--beta", "beta", "rotation intensity parameter");
}

int run_subcommand(const Subcommand& sc) {
  coupling::ExperimentConfig cfg = coupling::default_config(sc.kind);
  if (sc.config_opt->count() > 0) {
    coupling::apply_config_file(cfg, *sc.config_path);
  }
  for (const FlagBinding& b : sc.bindings) {
    if (b.opt->count() > 0) coupling::apply_override(cfg, b.key, *b.value);
  }

  const coupling::ExperimentResult res = coupling::run_experiment(cfg);
  if (!cfg.output_path.empty()) {
    std::ofstream out(cfg.output_path, std::ios::binary);
    if (!out) {
      throw std::invalid_argument("out: cannot open '" + cfg.output_path +
                                  "' for writing");
    }
    out << res.records;
  }
  std::cout << res.summary_json << std::endl;
  if (res.aborted > 0) {
    std::cerr << "numeric abort in " << res.aborted
              << " replica(s); partial results written" << std::endl;
    return 2;
  }
  return 0;
}

int run_describe(const std::string& which) {
  const ExperimentKind kinds[] = {
      ExperimentKind::kFullCoupling, ExperimentKind::kReducedCouplingDist,
      ExperimentKind::kDufresneCheck, ExperimentKind::kItoValidate,
      ExperimentKind::kKolmogorov};
  nlohmann::ordered_json out;
  for (ExperimentKind k : kinds) {
    const std::string name = coupling::kind_name(k);
    if (!which.empty() && which != name) continue;
    out[name] = nlohmann::ordered_json::parse(
        coupling::describe_config(coupling::default_config(k)));
  }
  if (!which.empty() && out.empty()) {
    throw std::invalid_argument("experiment: unknown name '" + which + "'");
  }
  std::cout << out.dump(2) << std::endl;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "Monte Carlo experiments on co-adapted couplings of Brownian motion "
      "and its stochastic areas"};
  app.require_subcommand(1);

  std::vector<std::unique_ptr<Subcommand>> subs;
  auto add_sub = [&](ExperimentKind kind, const char* name, const char* help) {
    auto sc = std::make_unique<Subcommand>();
    sc->kind = kind;
    sc->app = app.add_subcommand(name, help);
    bind_common(*sc);
    subs.push_back(std::move(sc));
    return subs.back().get();
  };

  Subcommand* full = add_sub(
      ExperimentKind::kFullCoupling, "simulate-full",
      "simulate the coupled Brownian pair and its areas until coupling");
  bind_strategy(*full);
  bind(*full, "--n", "n", "state dimension (>= 2)");
  bind(*full, "--V0", "V0", "initial separation of the two positions");
  bind(*full, "--W0", "W0", "initial area-to-separation ratio U0 / V0^2");
  bind(*full, "--dt-max", "dt_max", "time step ceiling");
  bind(*full, "--dt-scale-c", "dt_scale_c", "adaptive step factor: dt <= c * V^2");
  bind(*full, "--eps-V-rel", "eps_V_rel", "position coupling tolerance, relative to V0");
  bind(*full, "--eps-U-rel", "eps_U_rel", "area coupling tolerance, relative to U0");
  bind(*full, "--switch-threshold", "switch_threshold",
       "ratio level below which the control switches to pure reflection");
  bind(*full, "--max-steps", "max_steps", "per-replica step budget");
  bind(*full, "--horizon", "horizon", "time horizon per replica");

  Subcommand* reduced = add_sub(
      ExperimentKind::kReducedCouplingDist, "simulate-reduced",
      "simulate the two-coordinate log-scale system and record scaled coupling times");
  bind_strategy(*reduced);
  bind(*reduced, "--W0", "W0", "initial area-to-separation ratio");
  bind(*reduced, "--dtau", "dtau", "intrinsic-time step");
  bind(*reduced, "--switch-threshold", "switch_threshold",
       "ratio level defining the absorbed (never-dipped) event");
  bind(*reduced, "--tail-mass", "tail_mass",
       "relative tail mass allowed to remain beyond the truncation point");
  bind(*reduced, "--tail-prob", "tail_prob",
       "probability budget for the remaining-tail bound at truncation");
  bind(*reduced, "--horizon", "horizon", "intrinsic-time horizon per replica");
  bind(*reduced, "--k-fraction", "k_fraction",
       "fraction of upper order statistics used by the tail-index estimator");

  Subcommand* dufresne = add_sub(
      ExperimentKind::kDufresneCheck, "dufresne-check",
      "sample the exponential Brownian functional and test its inverse-gamma law");
  bind(*dufresne, "--a", "a", "diffusion coefficient of the exponent");
  bind(*dufresne, "--b", "b", "drift rate of the exponent (must be positive)");
  bind(*dufresne, "--dt", "dt", "integration step");

  Subcommand* ito = add_sub(
      ExperimentKind::kItoValidate, "ito-validate",
      "check empirical one-step moments against the closed-form coefficient table");
  bind(*ito, "--n", "n", "state dimension (>= 2)");
  bind(*ito, "--dt", "dt", "one-step horizon");
  bind(*ito, "--cases", "cases", "number of random state/control cases");

  Subcommand* kol = add_sub(
      ExperimentKind::kKolmogorov, "kolmogorov",
      "couple the Kolmogorov diffusion: Brownian motion plus its time integral");
  bind(*kol, "--U0", "U0", "initial velocity separation");
  bind(*kol, "--V0", "V0", "initial integral separation");
  bind(*kol, "--dt", "dt", "base reflection step at unit scale");
  bind(*kol, "--horizon", "horizon", "time horizon per replica");

  std::string describe_which;
  CLI::App* describe =
      app.add_subcommand("describe", "print default configurations as JSON");
  describe->add_option("experiment", describe_which,
                       "optional experiment name (default: all)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (describe->parsed()) return run_describe(describe_which);
    for (const auto& sc : subs) {
      if (sc->app->parsed()) return run_subcommand(*sc);
    }
    std::cerr << "no subcommand selected" << std::endl;
    return 1;
  } catch (const coupling::NumericError& e) {
    std::cerr << "numeric abort: " << e.what() << std::endl;
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "invalid configuration: " << e.what() << std::endl;
    return 1;
  } catch (const std::domain_error& e) {
    std::cerr << "invalid configuration: " << e.what() << std::endl;
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 2;
  }
}
