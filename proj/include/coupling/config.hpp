#pragma once
// Experiment configuration: one flat struct covering every experiment kind,
// with per-kind defaults, a flat key=value config-file reader, and
// single-key overrides (command-line flags win over file values).

#include "coupling/controls.hpp"

#include <cstdint>
#include <string>

namespace coupling {

enum class ExperimentKind {
  kFullCoupling,        // simulate-full
  kReducedCouplingDist, // simulate-reduced
  kDufresneCheck,       // dufresne-check
  kItoValidate,         // ito-validate
  kKolmogorov,          // kolmogorov
};

struct ExperimentConfig {
  ExperimentKind experiment = ExperimentKind::kFullCoupling;

  // Common
  std::uint64_t seed = 1;
  int replicas = 200;
  int workers = 1;  // default_config raises this to the available core count
  std::string output_path;      // empty: records are not written
  std::string format = "csv";   // records format: csv | json

  // Strategy
  int n = 2;
  StrategyParams strategy;

  // Full engine
  double V0 = 1.0;
  double W0 = 1.5;
  double dt_max = 1e-3;
  double dt_scale_c = 5e-3;
  double eps_V_rel = 0.05;      // coupling threshold as a fraction of V0
  double eps_U_rel = 0.05;      // coupling threshold as a fraction of U0
  double switch_threshold = 10.0;
  std::uint64_t max_steps = 50000000ULL;

  // Reduced engine
  double dtau = 1e-3;
  double tail_mass = 1e-2;
  double tail_prob = 1e-6;

  // Horizon: process time for simulate-full and kolmogorov, intrinsic time
  // for simulate-reduced.
  double horizon = 1e3;

  // Analytics
  double k_fraction = 0.05;
  double a = 1.0;               // exponential functional volatility
  double b = 1.0;               // exponential functional drift
  double dt = 1e-4;             // plain step for dufresne-check / ito-validate / kolmogorov
  int cases = 5;                // frozen state/control pairs for ito-validate

  // Kolmogorov coupler start
  double U0 = 1.0;
  double kol_V0 = 0.0;
};

const char* kind_name(ExperimentKind kind);
ExperimentKind parse_kind(const std::string& name);
const char* mode_name(StrategyMode mode);
StrategyMode parse_mode(const std::string& name);

// Defaults tuned per experiment kind.
ExperimentConfig default_config(ExperimentKind kind);

// Apply one key=value override. Unknown keys and unparsable values raise
// std::invalid_argument naming the key.
void apply_override(ExperimentConfig& cfg, const std::string& key,
                    const std::string& value);

// Read a flat key=value file ('#' starts a comment, blank lines ignored).
// An `experiment` key must agree with the kind the config was built for.
void apply_config_file(ExperimentConfig& cfg, const std::string& path);

// Cross-field validation; throws std::invalid_argument naming the field.
void validate_config(const ExperimentConfig& cfg);

// Effective configuration as a deterministic JSON string.
std::string describe_config(const ExperimentConfig& cfg);

}  // namespace coupling
