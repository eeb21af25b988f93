#pragma once
// Experiment driver: runs the configured experiment over a worker pool with
// per-replica deterministic RNG streams, merges results in replica order,
// and renders the per-replica records (CSV or JSON) plus a deterministic
// JSON summary. Output is byte-identical for any worker count.

#include "coupling/config.hpp"

#include <string>

namespace coupling {

struct ExperimentResult {
  std::string records;       // per-replica records, cfg.format (csv | json)
  std::string summary_json;  // experiment summary, always JSON
  int aborted = 0;           // replicas that ended in a numeric abort
};

ExperimentResult run_experiment(const ExperimentConfig& cfg);

}  // namespace coupling
