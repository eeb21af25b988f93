// Tests for experiment configuration: per-kind defaults, key=value
// overrides, config-file parsing, cross-field validation, and the
// deterministic JSON description.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "coupling/config.hpp"

#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <string>

using namespace coupling;

namespace {

struct TempFile {
  std::string path;
  explicit TempFile(const std::string& name, const std::string& contents)
      : path(name) {
    std::ofstream out(path);
    out << contents;
  }
  ~TempFile() { std::remove(path.c_str()); }
};

}  // namespace

TEST_CASE("experiment kinds and strategy modes round-trip by name") {
  const ExperimentKind kinds[] = {
      ExperimentKind::kFullCoupling, ExperimentKind::kReducedCouplingDist,
      ExperimentKind::kDufresneCheck, ExperimentKind::kItoValidate,
      ExperimentKind::kKolmogorov};
  for (ExperimentKind k : kinds) CHECK(parse_kind(kind_name(k)) == k);
  CHECK_THROWS_AS(parse_kind("bogus"), std::invalid_argument);
  CHECK_THROWS_AS(parse_kind(""), std::invalid_argument);

  const StrategyMode modes[] = {StrategyMode::kReflectionSynchronous,
                                StrategyMode::kReflectionRotation,
                                StrategyMode::kPureReflection};
  for (StrategyMode m : modes) CHECK(parse_mode(mode_name(m)) == m);
  CHECK_THROWS_AS(parse_mode("sync"), std::invalid_argument);
}

TEST_CASE("per-kind defaults are tuned and self-consistent") {
  const ExperimentConfig full = default_config(ExperimentKind::kFullCoupling);
  CHECK(full.replicas == 200);
  CHECK(full.horizon == 1e3);
  CHECK(full.n == 2);
  CHECK(full.format == "csv");
  CHECK(full.workers >= 1);  // defaults to the available core count

  const ExperimentConfig red =
      default_config(ExperimentKind::kReducedCouplingDist);
  CHECK(red.replicas == 10000);
  CHECK(red.W0 == 1e3);
  CHECK(red.horizon == 1e6);

  const ExperimentConfig duf = default_config(ExperimentKind::kDufresneCheck);
  CHECK(duf.replicas == 20000);
  CHECK(duf.dt == 2.5e-4);

  const ExperimentConfig ito = default_config(ExperimentKind::kItoValidate);
  CHECK(ito.replicas == 100000);
  CHECK(ito.dt == 1e-5);

  const ExperimentConfig kol = default_config(ExperimentKind::kKolmogorov);
  CHECK(kol.replicas == 500);
  CHECK(kol.horizon == 1e9);

  // Every kind's defaults pass validation as-is.
  for (ExperimentKind k :
       {ExperimentKind::kFullCoupling, ExperimentKind::kReducedCouplingDist,
        ExperimentKind::kDufresneCheck, ExperimentKind::kItoValidate,
        ExperimentKind::kKolmogorov}) {
    CHECK_NOTHROW(validate_config(default_config(k)));
  }
}

TEST_CASE("apply_override: typed keys, routing, and error reporting") {
  ExperimentConfig cfg = default_config(ExperimentKind::kFullCoupling);
  apply_override(cfg, "seed", "12345");
  apply_override(cfg, "replicas", "37");
  apply_override(cfg, "workers", "4");
  apply_override(cfg, "format", "json");
  apply_override(cfg, "out", "runs/out.json");
  apply_override(cfg, "n", "5");
  apply_override(cfg, "mode", "reflection-rotation");
  apply_override(cfg, "alpha_sq", "2.5");
  apply_override(cfg, "beta", "1.2");
  apply_override(cfg, "V0", "0.75");
  apply_override(cfg, "W0", "40");
  apply_override(cfg, "dt_max", "5e-4");
  apply_override(cfg, "switch_threshold", "12.5");
  apply_override(cfg, "max_steps", "123456789012");
  CHECK(cfg.seed == 12345);
  CHECK(cfg.replicas == 37);
  CHECK(cfg.workers == 4);
  CHECK(cfg.format == "json");
  CHECK(cfg.output_path == "runs/out.json");
  CHECK(cfg.n == 5);
  CHECK(cfg.strategy.mode == StrategyMode::kReflectionRotation);
  CHECK(cfg.strategy.alpha_sq == 2.5);
  CHECK(cfg.strategy.beta == 1.2);
  CHECK(cfg.V0 == 0.75);
  CHECK(cfg.W0 == 40.0);
  CHECK(cfg.dt_max == 5e-4);
  CHECK(cfg.switch_threshold == 12.5);
  CHECK(cfg.max_steps == 123456789012ULL);

  // V0 routes to the Kolmogorov start when that experiment is selected.
  ExperimentConfig kol = default_config(ExperimentKind::kKolmogorov);
  apply_override(kol, "V0", "3.5");
  apply_override(kol, "U0", "2.0");
  CHECK(kol.kol_V0 == 3.5);
  CHECK(kol.U0 == 2.0);
  CHECK(kol.V0 == 1.0);  // the full-engine field is untouched

  CHECK_THROWS_AS(apply_override(cfg, "not_a_key", "1"), std::invalid_argument);
  CHECK_THROWS_AS(apply_override(cfg, "replicas", "abc"),
                  std::invalid_argument);
  CHECK_THROWS_AS(apply_override(cfg, "replicas", "12x"),
                  std::invalid_argument);
  CHECK_THROWS_AS(apply_override(cfg, "alpha_sq", "1.2.3"),
                  std::invalid_argument);
  CHECK_THROWS_AS(apply_override(cfg, "seed", "-1"), std::invalid_argument);
  CHECK_THROWS_AS(apply_override(cfg, "mode", "mirror"),
                  std::invalid_argument);

  // Error messages name the offending key.
  try {
    apply_override(cfg, "dt_max", "fast");
    FAIL("expected an exception");
  } catch (const std::invalid_argument& e) {
    CHECK(std::string(e.what()).find("dt_max") != std::string::npos);
  }
}

TEST_CASE("apply_config_file: comments, spacing, agreement, and errors") {
  const TempFile good("test_config_good.cfg",
                      "# full-coupling run\n"
                      "experiment = full-coupling\n"
                      "\n"
                      "seed=99\n"
                      "  replicas = 12   # inline comment\n"
                      "alpha_sq = 1.9\n"
                      "mode = reflection-synchronous\n");
  ExperimentConfig cfg = default_config(ExperimentKind::kFullCoupling);
  apply_config_file(cfg, good.path);
  CHECK(cfg.seed == 99);
  CHECK(cfg.replicas == 12);
  CHECK(cfg.strategy.alpha_sq == 1.9);
  CHECK(cfg.strategy.mode == StrategyMode::kReflectionSynchronous);

  // Command-line overrides applied after the file win.
  apply_override(cfg, "seed", "7");
  CHECK(cfg.seed == 7);

  // A config file written for a different experiment is rejected.
  ExperimentConfig other = default_config(ExperimentKind::kKolmogorov);
  CHECK_THROWS_AS(apply_config_file(other, good.path), std::invalid_argument);

  const TempFile bad_line("test_config_badline.cfg", "seed 99\n");
  ExperimentConfig c2 = default_config(ExperimentKind::kFullCoupling);
  CHECK_THROWS_AS(apply_config_file(c2, bad_line.path), std::invalid_argument);

  const TempFile bad_key("test_config_badkey.cfg", "inertia = 2\n");
  CHECK_THROWS_AS(apply_config_file(c2, bad_key.path), std::invalid_argument);

  CHECK_THROWS_AS(apply_config_file(c2, "no_such_file_here.cfg"),
                  std::invalid_argument);
}

TEST_CASE("validate_config rejects out-of-domain fields per experiment") {
  auto broken = [](ExperimentKind kind, const std::string& key,
                   const std::string& value) {
    ExperimentConfig cfg = default_config(kind);
    apply_override(cfg, key, value);
    return cfg;
  };
  using K = ExperimentKind;
  CHECK_THROWS_AS(validate_config(broken(K::kFullCoupling, "replicas", "0")),
                  std::invalid_argument);
  CHECK_THROWS_AS(validate_config(broken(K::kFullCoupling, "workers", "0")),
                  std::invalid_argument);
  CHECK_THROWS_AS(validate_config(broken(K::kFullCoupling, "workers", "9999")),
                  std::invalid_argument);
  CHECK_THROWS_AS(validate_config(broken(K::kFullCoupling, "format", "xml")),
                  std::invalid_argument);
  CHECK_THROWS_AS(validate_config(broken(K::kFullCoupling, "n", "1")),
                  std::invalid_argument);
  CHECK_THROWS_AS(validate_config(broken(K::kFullCoupling, "alpha_sq", "0")),
                  std::invalid_argument);
  CHECK_THROWS_AS(validate_config(broken(K::kFullCoupling, "beta", "-0.5")),
                  std::invalid_argument);
  CHECK_THROWS_AS(validate_config(broken(K::kFullCoupling, "V0", "0")),
                  std::invalid_argument);
  CHECK_THROWS_AS(validate_config(broken(K::kFullCoupling, "W0", "-1")),
                  std::invalid_argument);
  CHECK_THROWS_AS(validate_config(broken(K::kFullCoupling, "dt_max", "0")),
                  std::invalid_argument);
  CHECK_THROWS_AS(validate_config(broken(K::kFullCoupling, "horizon", "0")),
                  std::invalid_argument);
  CHECK_THROWS_AS(
      validate_config(broken(K::kReducedCouplingDist, "W0", "0")),
      std::invalid_argument);
  CHECK_THROWS_AS(
      validate_config(broken(K::kReducedCouplingDist, "dtau", "0")),
      std::invalid_argument);
  CHECK_THROWS_AS(
      validate_config(broken(K::kReducedCouplingDist, "k_fraction", "0.6")),
      std::invalid_argument);
  CHECK_THROWS_AS(
      validate_config(broken(K::kReducedCouplingDist, "tail_prob", "1.5")),
      std::invalid_argument);
  CHECK_THROWS_AS(validate_config(broken(K::kDufresneCheck, "b", "0")),
                  std::invalid_argument);
  CHECK_THROWS_AS(validate_config(broken(K::kDufresneCheck, "a", "-1")),
                  std::invalid_argument);
  CHECK_THROWS_AS(validate_config(broken(K::kDufresneCheck, "dt", "0")),
                  std::invalid_argument);
  CHECK_THROWS_AS(validate_config(broken(K::kItoValidate, "cases", "0")),
                  std::invalid_argument);
  CHECK_THROWS_AS(validate_config(broken(K::kItoValidate, "replicas", "1")),
                  std::invalid_argument);
  CHECK_THROWS_AS(validate_config(broken(K::kKolmogorov, "dt", "0")),
                  std::invalid_argument);
  CHECK_THROWS_AS(validate_config(broken(K::kKolmogorov, "horizon", "-2")),
                  std::invalid_argument);
}

TEST_CASE("describe_config emits deterministic JSON with per-kind fields") {
  ExperimentConfig cfg = default_config(ExperimentKind::kFullCoupling);
  apply_override(cfg, "seed", "42");
  apply_override(cfg, "alpha_sq", "1.5");
  const std::string text = describe_config(cfg);
  CHECK(text == describe_config(cfg));  // byte-for-byte deterministic

  const nlohmann::json j = nlohmann::json::parse(text);
  CHECK(j.at("experiment") == "full-coupling");
  CHECK(j.at("seed") == 42);
  CHECK(j.at("replicas") == 200);
  CHECK(j.at("alpha_sq") == 1.5);
  CHECK(j.at("mode") == "reflection-synchronous");
  CHECK(j.contains("dt_max"));
  CHECK(j.contains("eps_V_rel"));
  CHECK_FALSE(j.contains("dtau"));  // reduced-engine-only field

  ExperimentConfig kol = default_config(ExperimentKind::kKolmogorov);
  apply_override(kol, "V0", "2.25");
  const nlohmann::json jk = nlohmann::json::parse(describe_config(kol));
  CHECK(jk.at("experiment") == "kolmogorov");
  CHECK(jk.at("V0") == 2.25);  // the routed Kolmogorov start
  CHECK(jk.at("U0") == 1.0);
  CHECK_FALSE(jk.contains("alpha_sq"));

  const nlohmann::json jr = nlohmann::json::parse(
      describe_config(default_config(ExperimentKind::kReducedCouplingDist)));
  CHECK(jr.at("W0") == 1e3);
  CHECK(jr.at("k_fraction") == 0.05);
  CHECK_FALSE(jr.contains("V0"));
}
