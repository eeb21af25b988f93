#include "coupling/config.hpp"

#include <json.hpp>

#include <algorithm>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace coupling {

namespace {

double parse_double(const std::string& key, const std::string& value) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(value, &pos);
    if (pos != value.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw std::invalid_argument(key + ": expected a real number, got '" + value + "'");
  }
}

int parse_int(const std::string& key, const std::string& value) {
  try {
    std::size_t pos = 0;
    const long v = std::stol(value, &pos);
    if (pos != value.size()) throw std::invalid_argument("trailing characters");
    return static_cast<int>(v);
  } catch (const std::exception&) {
    throw std::invalid_argument(key + ": expected an integer, got '" + value + "'");
  }
}

std::uint64_t parse_u64(const std::string& key, const std::string& value) {
  try {
    // stoull accepts a leading '-' and wraps around; reject it explicitly.
    if (value.find('-') != std::string::npos) {
      throw std::invalid_argument("negative");
    }
    std::size_t pos = 0;
    const unsigned long long v = std::stoull(value, &pos);
    if (pos != value.size()) throw std::invalid_argument("trailing characters");
    return static_cast<std::uint64_t>(v);
  } catch (const std::exception&) {
    throw std::invalid_argument(key + ": expected an unsigned integer, got '" + value + "'");
  }
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

}  // namespace

const char* kind_name(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::kFullCoupling: return "full-coupling";
    case ExperimentKind::kReducedCouplingDist: return "reduced-coupling-dist";
    case ExperimentKind::kDufresneCheck: return "dufresne-check";
    case ExperimentKind::kItoValidate: return "ito-validate";
    case ExperimentKind::kKolmogorov: return "kolmogorov";
  }
  return "unknown";
}

ExperimentKind parse_kind(const std::string& name) {
  if (name == "full-coupling") return ExperimentKind::kFullCoupling;
  if (name == "reduced-coupling-dist") return ExperimentKind::kReducedCouplingDist;
  if (name == "dufresne-check") return ExperimentKind::kDufresneCheck;
  if (name == "ito-validate") return ExperimentKind::kItoValidate;
  if (name == "kolmogorov") return ExperimentKind::kKolmogorov;
  throw std::invalid_argument("experiment: unknown kind '" + name + "'");
}

const char* mode_name(StrategyMode mode) {
  switch (mode) {
    case StrategyMode::kReflectionSynchronous: return "reflection-synchronous";
    case StrategyMode::kReflectionRotation: return "reflection-rotation";
    case StrategyMode::kPureReflection: return "pure-reflection";
  }
  return "unknown";
}

StrategyMode parse_mode(const std::string& name) {
  if (name == "reflection-synchronous") return StrategyMode::kReflectionSynchronous;
  if (name == "reflection-rotation") return StrategyMode::kReflectionRotation;
  if (name == "pure-reflection") return StrategyMode::kPureReflection;
  throw std::invalid_argument("mode: unknown strategy '" + name + "'");
}

ExperimentConfig default_config(ExperimentKind kind) {
  ExperimentConfig cfg;
  cfg.experiment = kind;
  cfg.workers = std::max(1u, std::thread::hardware_concurrency());
  switch (kind) {
    case ExperimentKind::kFullCoupling:
      cfg.replicas = 200;
      cfg.horizon = 1e3;
      break;
    case ExperimentKind::kReducedCouplingDist:
      cfg.replicas = 10000;
      cfg.W0 = 1e3;
      cfg.horizon = 1e6;
      break;
    case ExperimentKind::kDufresneCheck:
      cfg.replicas = 20000;
      cfg.dt = 2.5e-4;
      cfg.horizon = 0.0;  // unused
      break;
    case ExperimentKind::kItoValidate:
      cfg.replicas = 100000;
      cfg.dt = 1e-5;
      cfg.horizon = 0.0;  // unused
      break;
    case ExperimentKind::kKolmogorov:
      cfg.replicas = 500;
      cfg.dt = 1e-4;
      cfg.horizon = 1e9;
      break;
  }
  return cfg;
}

void apply_override(ExperimentConfig& cfg, const std::string& key,
                    const std::string& value) {
  if (key == "experiment") {
    if (parse_kind(value) != cfg.experiment) {
      throw std::invalid_argument(
          "experiment: config file value '" + value +
          "' conflicts with the selected subcommand '" +
          kind_name(cfg.experiment) + "'");
    }
  } else if (key == "seed") {
    cfg.seed = parse_u64(key, value);
  } else if (key == "replicas") {
    cfg.replicas = parse_int(key, value);
  } else if (key == "workers") {
    cfg.workers = parse_int(key, value);
  } else if (key == "out") {
    cfg.output_path = value;
  } else if (key == "format") {
    cfg.format = value;
  } else if (key == "n") {
    cfg.n = parse_int(key, value);
  } else if (key == "mode") {
    cfg.strategy.mode = parse_mode(value);
  } else if (key == "alpha_sq") {
    cfg.strategy.alpha_sq = parse_double(key, value);
  } else if (key == "beta") {
    cfg.strategy.beta = parse_double(key, value);
  } else if (key == "V0") {
    if (cfg.experiment == ExperimentKind::kKolmogorov) {
      cfg.kol_V0 = parse_double(key, value);
    } else {
      cfg.V0 = parse_double(key, value);
    }
  } else if (key == "W0") {
    cfg.W0 = parse_double(key, value);
  } else if (key == "U0") {
    cfg.U0 = parse_double(key, value);
  } else if (key == "dt_max") {
    cfg.dt_max = parse_double(key, value);
  } else if (key == "dt_scale_c") {
    cfg.dt_scale_c = parse_double(key, value);
  } else if (key == "eps_V_rel") {
    cfg.eps_V_rel = parse_double(key, value);
  } else if (key == "eps_U_rel") {
    cfg.eps_U_rel = parse_double(key, value);
  } else if (key == "switch_threshold") {
    cfg.switch_threshold = parse_double(key, value);
  } else if (key == "max_steps") {
    cfg.max_steps = parse_u64(key, value);
  } else if (key == "dtau") {
    cfg.dtau = parse_double(key, value);
  } else if (key == "tail_mass") {
    cfg.tail_mass = parse_double(key, value);
  } else if (key == "tail_prob") {
    cfg.tail_prob = parse_double(key, value);
  } else if (key == "horizon") {
    cfg.horizon = parse_double(key, value);
  } else if (key == "k_fraction") {
    cfg.k_fraction = parse_double(key, value);
  } else if (key == "a") {
    cfg.a = parse_double(key, value);
  } else if (key == "b") {
    cfg.b = parse_double(key, value);
  } else if (key == "dt") {
    cfg.dt = parse_double(key, value);
  } else if (key == "cases") {
    cfg.cases = parse_int(key, value);
  } else {
    throw std::invalid_argument("unknown configuration key '" + key + "'");
  }
}

void apply_config_file(ExperimentConfig& cfg, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("config: cannot open file '" + path + "'");
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("config: line " + std::to_string(lineno) +
                                  " is not of the form key=value");
    }
    apply_override(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
}

void validate_config(const ExperimentConfig& cfg) {
  if (cfg.replicas < 1) throw std::invalid_argument("replicas: must be at least 1");
  if (cfg.workers < 1) throw std::invalid_argument("workers: must be at least 1");
  if (cfg.workers > 1024) throw std::invalid_argument("workers: unreasonably large");
  if (cfg.format != "csv" && cfg.format != "json") {
    throw std::invalid_argument("format: must be 'csv' or 'json'");
  }
  if (cfg.n < 2) throw std::invalid_argument("n: dimension must be at least 2");
  if (!(cfg.strategy.alpha_sq > 0.0)) {
    throw std::invalid_argument("alpha_sq: must be positive");
  }
  if (cfg.strategy.beta < 0.0) throw std::invalid_argument("beta: must be nonnegative");

  switch (cfg.experiment) {
    case ExperimentKind::kFullCoupling:
      if (!(cfg.V0 > 0.0)) throw std::invalid_argument("V0: must be positive");
      if (!(cfg.W0 >= 0.0)) throw std::invalid_argument("W0: must be nonnegative");
      if (!(cfg.dt_max > 0.0)) throw std::invalid_argument("dt_max: must be positive");
      if (!(cfg.dt_scale_c > 0.0)) {
        throw std::invalid_argument("dt_scale_c: must be positive");
      }
      if (!(cfg.eps_V_rel > 0.0) || !(cfg.eps_U_rel > 0.0)) {
        throw std::invalid_argument("eps_V_rel/eps_U_rel: must be positive");
      }
      if (!(cfg.switch_threshold > 0.0)) {
        throw std::invalid_argument("switch_threshold: must be positive");
      }
      if (!(cfg.horizon > 0.0)) throw std::invalid_argument("horizon: must be positive");
      break;
    case ExperimentKind::kReducedCouplingDist:
      if (!(cfg.W0 > 0.0)) throw std::invalid_argument("W0: must be positive");
      if (!(cfg.dtau > 0.0)) throw std::invalid_argument("dtau: must be positive");
      if (!(cfg.horizon > 0.0)) throw std::invalid_argument("horizon: must be positive");
      if (!(cfg.switch_threshold > 0.0)) {
        throw std::invalid_argument("switch_threshold: must be positive");
      }
      if (!(cfg.tail_mass > 0.0)) throw std::invalid_argument("tail_mass: must be positive");
      if (!(cfg.tail_prob > 0.0 && cfg.tail_prob < 1.0)) {
        throw std::invalid_argument("tail_prob: must lie in (0, 1)");
      }
      if (!(cfg.k_fraction > 0.0 && cfg.k_fraction <= 0.5)) {
        throw std::invalid_argument("k_fraction: must lie in (0, 0.5]");
      }
      break;
    case ExperimentKind::kDufresneCheck:
      if (!(cfg.b > 0.0)) throw std::invalid_argument("b: must be positive");
      if (!(cfg.a >= 0.0)) throw std::invalid_argument("a: must be nonnegative");
      if (!(cfg.dt > 0.0)) throw std::invalid_argument("dt: must be positive");
      break;
    case ExperimentKind::kItoValidate:
      if (!(cfg.dt > 0.0)) throw std::invalid_argument("dt: must be positive");
      if (cfg.cases < 1) throw std::invalid_argument("cases: must be at least 1");
      if (cfg.replicas < 2) throw std::invalid_argument("replicas: must be at least 2");
      break;
    case ExperimentKind::kKolmogorov:
      if (!(cfg.dt > 0.0)) throw std::invalid_argument("dt: must be positive");
      if (!(cfg.horizon > 0.0)) throw std::invalid_argument("horizon: must be positive");
      break;
  }
}

std::string describe_config(const ExperimentConfig& cfg) {
  nlohmann::ordered_json j;
  j["experiment"] = kind_name(cfg.experiment);
  j["seed"] = cfg.seed;
  j["replicas"] = cfg.replicas;
  j["workers"] = cfg.workers;
  j["out"] = cfg.output_path;
  j["format"] = cfg.format;
  switch (cfg.experiment) {
    case ExperimentKind::kFullCoupling:
      j["n"] = cfg.n;
      j["mode"] = mode_name(cfg.strategy.mode);
      j["alpha_sq"] = cfg.strategy.alpha_sq;
      j["beta"] = cfg.strategy.beta;
      j["V0"] = cfg.V0;
      j["W0"] = cfg.W0;
      j["dt_max"] = cfg.dt_max;
      j["dt_scale_c"] = cfg.dt_scale_c;
      j["eps_V_rel"] = cfg.eps_V_rel;
      j["eps_U_rel"] = cfg.eps_U_rel;
      j["switch_threshold"] = cfg.switch_threshold;
      j["horizon"] = cfg.horizon;
      j["max_steps"] = cfg.max_steps;
      break;
    case ExperimentKind::kReducedCouplingDist:
      j["mode"] = mode_name(cfg.strategy.mode);
      j["alpha_sq"] = cfg.strategy.alpha_sq;
      j["beta"] = cfg.strategy.beta;
      j["W0"] = cfg.W0;
      j["dtau"] = cfg.dtau;
      j["horizon"] = cfg.horizon;
      j["switch_threshold"] = cfg.switch_threshold;
      j["tail_mass"] = cfg.tail_mass;
      j["tail_prob"] = cfg.tail_prob;
      j["k_fraction"] = cfg.k_fraction;
      break;
    case ExperimentKind::kDufresneCheck:
      j["a"] = cfg.a;
      j["b"] = cfg.b;
      j["dt"] = cfg.dt;
      break;
    case ExperimentKind::kItoValidate:
      j["n"] = cfg.n;
      j["cases"] = cfg.cases;
      j["dt"] = cfg.dt;
      break;
    case ExperimentKind::kKolmogorov:
      j["U0"] = cfg.U0;
      j["V0"] = cfg.kol_V0;
      j["dt"] = cfg.dt;
      j["horizon"] = cfg.horizon;
      break;
  }
  return j.dump(2);
}

}  // namespace coupling
