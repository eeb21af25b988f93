// Tests for the experiment driver: byte-identical output across worker
// counts, record shapes in both formats, summary structure, and the
// replica-order / per-replica-seed contract.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "coupling/harness.hpp"
#include "coupling/rng.hpp"

#include <json.hpp>

#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

using namespace coupling;
using nlohmann::json;

namespace {

std::vector<std::string> split_lines(const std::string& text) {
  std::vector<std::string> lines;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) lines.push_back(line);
  return lines;
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> fields;
  std::istringstream in(line);
  std::string f;
  while (std::getline(in, f, ',')) fields.push_back(f);
  return fields;
}

ExperimentConfig quick_full_config() {
  ExperimentConfig cfg = default_config(ExperimentKind::kFullCoupling);
  cfg.seed = 2024;
  cfg.replicas = 24;
  cfg.V0 = 0.5;
  cfg.W0 = 1.0;
  cfg.eps_V_rel = 0.4;
  cfg.eps_U_rel = 1.0;
  cfg.horizon = 200.0;
  return cfg;
}

}  // namespace

TEST_CASE("run_experiment validates the configuration up front") {
  ExperimentConfig cfg = quick_full_config();
  cfg.replicas = 0;
  CHECK_THROWS_AS(run_experiment(cfg), std::invalid_argument);
  cfg = quick_full_config();
  cfg.format = "yaml";
  CHECK_THROWS_AS(run_experiment(cfg), std::invalid_argument);
}

TEST_CASE("output is byte-identical for any worker count") {
  // Replicas draw from per-replica derived streams and land in replica
  // order, so scheduling must not leak into the rendered output.
  ExperimentConfig cfg = default_config(ExperimentKind::kKolmogorov);
  cfg.seed = 7;
  cfg.replicas = 64;
  cfg.dt = 1e-3;
  cfg.U0 = 1.0;
  cfg.kol_V0 = 0.25;

  cfg.workers = 1;
  const ExperimentResult serial = run_experiment(cfg);
  cfg.workers = 4;
  const ExperimentResult pooled = run_experiment(cfg);
  CHECK(serial.records == pooled.records);
  CHECK(serial.aborted == pooled.aborted);
  // Summaries echo the configuration, which includes the worker count;
  // everything else must agree.
  json js = json::parse(serial.summary_json);
  json jp = json::parse(pooled.summary_json);
  js["config"].erase("workers");
  jp["config"].erase("workers");
  CHECK(js == jp);

  // Same for the full engine, whose replicas have very uneven run lengths.
  ExperimentConfig fc = quick_full_config();
  fc.workers = 1;
  const ExperimentResult fs = run_experiment(fc);
  fc.workers = 3;
  const ExperimentResult fp = run_experiment(fc);
  CHECK(fs.records == fp.records);
}

TEST_CASE("full-coupling CSV records: header, order, and seed column") {
  const ExperimentConfig cfg = quick_full_config();
  const ExperimentResult res = run_experiment(cfg);
  const std::vector<std::string> lines = split_lines(res.records);
  REQUIRE(lines.size() == static_cast<std::size_t>(cfg.replicas) + 1);
  CHECK(lines[0] ==
        "replica_id,seed_used,coupled,T,steps,final_Vsq,final_Usq,truncated");
  for (int i = 0; i < cfg.replicas; ++i) {
    const std::vector<std::string> f = split_fields(lines[static_cast<std::size_t>(i) + 1]);
    REQUIRE(f.size() == 8);
    CHECK(f[0] == std::to_string(i));
    CHECK(f[1] == std::to_string(replica_seed(cfg.seed, static_cast<std::uint64_t>(i))));
    CHECK((f[2] == "0" || f[2] == "1"));
    CHECK((f[7] == "0" || f[7] == "1"));
    if (f[2] == "1") CHECK(std::stod(f[3]) > 0.0);
  }

  const json s = json::parse(res.summary_json);
  CHECK(s.at("experiment") == "full-coupling");
  CHECK(s.at("config").at("seed") == cfg.seed);
  CHECK(s.at("replicas") == cfg.replicas);
  const int coupled = s.at("coupled").get<int>();
  CHECK(coupled >= 0);
  CHECK(coupled <= cfg.replicas);
  CHECK(s.at("coupled_fraction").get<double>() ==
        doctest::Approx(static_cast<double>(coupled) / cfg.replicas));
  if (coupled > 0) {
    const json q = s.at("coupling_time");
    CHECK(q.at("count") == coupled);
    CHECK(q.at("q25").get<double>() <= q.at("q50").get<double>());
    CHECK(q.at("q50").get<double>() <= q.at("q75").get<double>());
  }
}

TEST_CASE("json record format parses and matches the CSV content") {
  ExperimentConfig cfg = quick_full_config();
  cfg.format = "json";
  const ExperimentResult res = run_experiment(cfg);
  const json records = json::parse(res.records);
  REQUIRE(records.is_array());
  REQUIRE(records.size() == static_cast<std::size_t>(cfg.replicas));
  int coupled = 0;
  for (int i = 0; i < cfg.replicas; ++i) {
    const json& r = records[static_cast<std::size_t>(i)];
    CHECK(r.at("replica_id") == i);
    CHECK(r.at("seed_used") ==
          replica_seed(cfg.seed, static_cast<std::uint64_t>(i)));
    for (const char* key : {"coupled", "T", "steps", "final_Vsq", "final_Usq",
                            "truncated"}) {
      CHECK(r.contains(key));
    }
    if (r.at("coupled").get<bool>()) coupled += 1;
  }
  // The coupled count agrees with a CSV run of the same configuration.
  ExperimentConfig csv_cfg = cfg;
  csv_cfg.format = "csv";
  const json s = json::parse(run_experiment(csv_cfg).summary_json);
  CHECK(s.at("coupled") == coupled);
}

TEST_CASE("a horizon below the coupling scale yields an all-truncated run") {
  ExperimentConfig cfg = quick_full_config();
  cfg.replicas = 8;
  cfg.horizon = 1e-4;  // far below any coupling time at these thresholds
  const ExperimentResult res = run_experiment(cfg);
  const json s = json::parse(res.summary_json);
  CHECK(s.at("coupled") == 0);
  CHECK(s.at("truncated") == 8);
  CHECK(s.at("coupling_time").is_null());  // no coupled replicas: no block
  CHECK(res.aborted == 0);
  CHECK(s.at("aborted") == 0);
}

TEST_CASE("exponential-functional experiment summarizes mean and fit") {
  ExperimentConfig cfg = default_config(ExperimentKind::kDufresneCheck);
  cfg.seed = 11;
  cfg.replicas = 1500;
  cfg.dt = 1e-3;
  cfg.a = 1.0;
  cfg.b = 2.0;
  const ExperimentResult res = run_experiment(cfg);
  const std::vector<std::string> lines = split_lines(res.records);
  REQUIRE(lines.size() == 1501);
  CHECK(lines[0] == "replica_id,seed_used,value");

  const json s = json::parse(res.summary_json);
  CHECK(s.at("expected_mean").get<double>() == doctest::Approx(1.0 / 1.5));
  const double mean = s.at("value").at("mean").get<double>();
  const double se = s.at("std_error_of_mean").get<double>();
  CHECK(std::abs(mean - 1.0 / 1.5) < 4.0 * se + 2e-2);
  CHECK(s.at("limit_law").at("index").get<double>() == doctest::Approx(4.0));
  CHECK(s.at("limit_law").at("scale").get<double>() == doctest::Approx(2.0));
  const double p = s.at("ks").at("p").get<double>();
  CHECK(p >= 0.0);
  CHECK(p <= 1.0);
  CHECK(p > 1e-4);  // the sample follows its own limit law

  // Driftless-in-the-exponent case: the value is deterministic 1/b.
  ExperimentConfig det = cfg;
  det.replicas = 50;
  det.a = 0.0;
  det.b = 4.0;
  const json sd = json::parse(run_experiment(det).summary_json);
  CHECK(sd.at("limit_law").is_null());
  CHECK(sd.at("expected_mean").get<double>() == doctest::Approx(0.25));
  CHECK(sd.at("value").at("mean").get<double>() == doctest::Approx(0.25));
}

TEST_CASE("coefficient-validation experiment reports per-case tables") {
  ExperimentConfig cfg = default_config(ExperimentKind::kItoValidate);
  cfg.seed = 5;
  cfg.replicas = 3000;
  cfg.cases = 2;
  cfg.n = 2;
  const ExperimentResult res = run_experiment(cfg);

  const std::vector<std::string> lines = split_lines(res.records);
  CHECK(lines[0] == "case,name,empirical,std_error,theory,z_score");
  REQUIRE(lines.size() == 1 + 2 * 5);  // cases x five coefficients

  const json s = json::parse(res.summary_json);
  REQUIRE(s.at("cases").size() == 2);
  for (const json& c : s.at("cases")) {
    REQUIRE(c.at("coefficients").size() == 5);
    for (const json& row : c.at("coefficients")) {
      CHECK(row.at("std_error").get<double>() > 0.0);
      CHECK(std::abs(row.at("z_score").get<double>()) < 6.0);
    }
  }
  CHECK(s.at("max_abs_z").get<double>() < 6.0);
  CHECK(s.at("all_within_4se").get<bool>());
}

TEST_CASE("kolmogorov experiment counts loops and couples every replica") {
  ExperimentConfig cfg = default_config(ExperimentKind::kKolmogorov);
  cfg.seed = 3;
  cfg.replicas = 50;
  cfg.dt = 1e-3;
  cfg.U0 = 1.0;
  cfg.kol_V0 = 0.0;
  const ExperimentResult res = run_experiment(cfg);
  const std::vector<std::string> lines = split_lines(res.records);
  REQUIRE(lines.size() == 51);
  CHECK(lines[0] == "replica_id,seed_used,coupled,T,loops,steps");
  const json s = json::parse(res.summary_json);
  CHECK(s.at("coupled") == 50);
  CHECK(s.at("coupled_fraction").get<double>() == 1.0);
  CHECK(s.at("loops").at("q50").get<double>() >= 1.0);
  CHECK(s.at("coupling_time").at("q50").get<double>() > 0.0);
}
