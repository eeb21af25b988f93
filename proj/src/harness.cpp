#include "coupling/harness.hpp"

#include "coupling/dufresne.hpp"
#include "coupling/kolmogorov.hpp"
#include "coupling/reduced_engine.hpp"
#include "coupling/rng.hpp"
#include "coupling/sde_engine.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>
#include <thread>
#include <vector>

namespace coupling {

namespace {

using json = nlohmann::ordered_json;

constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

std::string fmt17(double v) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double mean_of(const std::vector<double>& v) {
  if (v.empty()) return kNan;
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double stderr_of(const std::vector<double>& v) {
  if (v.size() < 2) return kNan;
  const double m = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1) /
                   static_cast<double>(v.size()));
}

json quantile_block(std::vector<double> vals) {
  if (vals.empty()) return nullptr;
  std::sort(vals.begin(), vals.end());
  auto at = [&](double p) {
    const double h = p * static_cast<double>(vals.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(h);
    const double fr = h - static_cast<double>(lo);
    return lo + 1 < vals.size() ? vals[lo] * (1.0 - fr) + vals[lo + 1] * fr
                                : vals[lo];
  };
  json q;
  q["count"] = vals.size();
  q["mean"] = mean_of(vals);
  q["q05"] = at(0.05);
  q["q25"] = at(0.25);
  q["q50"] = at(0.50);
  q["q75"] = at(0.75);
  q["q95"] = at(0.95);
  return q;
}

json tail_block(const std::vector<double>& vals, double k_fraction) {
  try {
    const TailIndexEstimate e = tail_index_estimate(vals, k_fraction);
    json t;
    t["kappa_hat"] = e.kappa_hat;
    t["std_error"] = e.std_error;
    t["k"] = e.k;
    return t;
  } catch (const std::exception&) {
    return nullptr;
  }
}

// ---- Parallel replica runner ----

// Rows must have fields: id, seed_used, aborted. Results land in replica
// order regardless of scheduling; each replica gets its own derived stream.
template <typename Row, typename Fn>
std::vector<Row> run_replicas(const ExperimentConfig& cfg, Fn fn) {
  const int total = cfg.replicas;
  std::vector<Row> rows(static_cast<std::size_t>(total));
  std::atomic<int> next{0};
  auto worker = [&]() {
    for (;;) {
      const int i = next.fetch_add(1);
      if (i >= total) return;
      Row& row = rows[static_cast<std::size_t>(i)];
      row.id = i;
      row.seed_used = replica_seed(cfg.seed, static_cast<std::uint64_t>(i));
      std::mt19937_64 rng(row.seed_used);
      try {
        fn(rng, row);
      } catch (...) {
        row.aborted = true;  // recorded per replica; the experiment continues
      }
    }
  };
  const int nw = std::min(cfg.workers, total);
  if (nw <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(nw));
    for (int w = 0; w < nw; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  return rows;
}

json config_json(const ExperimentConfig& cfg) {
  return json::parse(describe_config(cfg));
}

// ---- full-coupling ----

struct FullRow {
  int id = 0;
  std::uint64_t seed_used = 0;
  bool coupled = false;
  double T = kNan;
  std::uint64_t steps = 0;
  double V_sq = kNan;
  double U_sq = kNan;
  bool truncated = false;
  bool aborted = false;
};

ExperimentResult run_full(const ExperimentConfig& cfg) {
  FullRunConfig rc;
  rc.n = cfg.n;
  rc.V0 = cfg.V0;
  rc.W0 = cfg.W0;
  rc.strategy = cfg.strategy;
  rc.dt_max = cfg.dt_max;
  rc.dt_scale_c = cfg.dt_scale_c;
  const double U0 = cfg.W0 * cfg.V0 * cfg.V0;
  rc.eps_V = cfg.eps_V_rel * cfg.V0;
  rc.eps_U = cfg.eps_U_rel * std::max(U0, cfg.V0 * cfg.V0);
  rc.switch_threshold = cfg.switch_threshold;
  rc.t_horizon = cfg.horizon;
  rc.max_steps = cfg.max_steps;

  auto rows = run_replicas<FullRow>(cfg, [&](std::mt19937_64& rng, FullRow& row) {
    const CouplingOutcome o = run_until_coupled(rc, rng);
    row.coupled = o.coupled;
    row.T = o.coupled ? o.T : kNan;
    row.steps = o.steps;
    row.V_sq = o.final_diag.V_sq;
    row.U_sq = o.final_diag.U_sq;
    row.truncated = o.truncated;
    row.aborted = o.aborted;
  });

  ExperimentResult res;
  std::ostringstream csv;
  json jrecords = json::array();
  const bool as_json = cfg.format == "json";
  if (!as_json) {
    csv << "replica_id,seed_used,coupled,T,steps,final_Vsq,final_Usq,truncated\n";
  }
  int coupled = 0, truncated = 0;
  std::vector<double> times;
  for (const FullRow& r : rows) {
    if (r.aborted) res.aborted += 1;
    if (r.coupled) {
      coupled += 1;
      times.push_back(r.T);
    }
    if (r.truncated) truncated += 1;
    if (as_json) {
      json o;
      o["replica_id"] = r.id;
      o["seed_used"] = r.seed_used;
      o["coupled"] = r.coupled;
      o["T"] = r.T;
      o["steps"] = r.steps;
      o["final_Vsq"] = r.V_sq;
      o["final_Usq"] = r.U_sq;
      o["truncated"] = r.truncated;
      jrecords.push_back(o);
    } else {
      csv << r.id << ',' << r.seed_used << ',' << (r.coupled ? 1 : 0) << ','
          << fmt17(r.T) << ',' << r.steps << ',' << fmt17(r.V_sq) << ','
          << fmt17(r.U_sq) << ',' << (r.truncated ? 1 : 0) << '\n';
    }
  }
  res.records = as_json ? jrecords.dump(2) : csv.str();

  json s;
  s["experiment"] = kind_name(cfg.experiment);
  s["config"] = config_json(cfg);
  s["replicas"] = cfg.replicas;
  s["aborted"] = res.aborted;
  s["coupled"] = coupled;
  s["coupled_fraction"] =
      static_cast<double>(coupled) / static_cast<double>(cfg.replicas);
  s["truncated"] = truncated;
  s["coupling_time"] = quantile_block(times);
  res.summary_json = s.dump(2);
  return res;
}

// ---- reduced-coupling-dist ----

struct ReducedRow {
  int id = 0;
  std::uint64_t seed_used = 0;
  double scaledT = kNan;
  bool absorbed = false;
  bool truncated = false;
  bool aborted = false;
  double tau_end = kNan;
};

ExperimentResult run_reduced(const ExperimentConfig& cfg) {
  ReducedRunConfig rc;
  rc.strategy = cfg.strategy;
  rc.W0 = cfg.W0;
  rc.dtau = cfg.dtau;
  rc.tau_horizon = cfg.horizon;
  rc.switch_threshold = cfg.switch_threshold;
  rc.tail_mass = cfg.tail_mass;
  rc.tail_prob = cfg.tail_prob;

  auto rows =
      run_replicas<ReducedRow>(cfg, [&](std::mt19937_64& rng, ReducedRow& row) {
        const ReducedOutcome o = simulate_scaled_coupling_time(rc, rng);
        row.scaledT = o.scaledT;
        row.absorbed = o.absorbed;
        row.truncated = o.truncated;
        row.aborted = o.aborted;
        row.tau_end = o.tau_end;
      });

  ExperimentResult res;
  std::ostringstream csv;
  json jrecords = json::array();
  const bool as_json = cfg.format == "json";
  if (!as_json) csv << "replica_id,seed_used,scaledT,absorbed,truncated,tau_end\n";

  int absorbed = 0, truncated = 0, conditioned_n = 0;
  std::vector<double> all_finite, conditioned;
  for (const ReducedRow& r : rows) {
    if (r.aborted) res.aborted += 1;
    if (r.absorbed) absorbed += 1;
    if (r.truncated) truncated += 1;
    const bool finite = std::isfinite(r.scaledT) && r.scaledT > 0.0;
    if (!r.aborted && finite) all_finite.push_back(r.scaledT);
    if (!r.aborted && !r.truncated && r.absorbed && finite) {
      conditioned.push_back(r.scaledT);
      conditioned_n += 1;
    }
    if (as_json) {
      json o;
      o["replica_id"] = r.id;
      o["seed_used"] = r.seed_used;
      o["scaledT"] = r.scaledT;
      o["absorbed"] = r.absorbed;
      o["truncated"] = r.truncated;
      o["tau_end"] = r.tau_end;
      jrecords.push_back(o);
    } else {
      csv << r.id << ',' << r.seed_used << ',' << fmt17(r.scaledT) << ','
          << (r.absorbed ? 1 : 0) << ',' << (r.truncated ? 1 : 0) << ','
          << fmt17(r.tau_end) << '\n';
    }
  }
  res.records = as_json ? jrecords.dump(2) : csv.str();

  json s;
  s["experiment"] = kind_name(cfg.experiment);
  s["config"] = config_json(cfg);
  s["replicas"] = cfg.replicas;
  s["aborted"] = res.aborted;
  s["absorbed"] = absorbed;
  s["truncated"] = truncated;
  s["conditioned"] = conditioned_n;
  s["scaledT_all"] = quantile_block(all_finite);
  s["scaledT_conditioned"] = quantile_block(conditioned);
  s["tail_index_all"] = tail_block(all_finite, cfg.k_fraction);
  s["tail_index_conditioned"] = tail_block(conditioned, cfg.k_fraction);

  // Limit-law arbitration for the reflection-synchronous strategy: report
  // both candidate scale constants and which one the empirical scale fits.
  if (cfg.strategy.mode == StrategyMode::kReflectionSynchronous &&
      cfg.strategy.alpha_sq > 1.0 && cfg.strategy.alpha_sq < 2.0) {
    const TheoremLimit lim = theorem_limit_reflection_sync(cfg.strategy.alpha_sq);
    json lj;
    lj["index"] = lim.stated.index;
    lj["stated_scale"] = lim.stated.scale;
    lj["composed_scale"] = lim.composed.scale;

    auto scale_fit = [&](const std::vector<double>& v) -> double {
      if (v.empty()) return kNan;
      double inv = 0.0;
      for (double x : v) inv += 1.0 / x;
      inv /= static_cast<double>(v.size());
      return lim.stated.index / inv;  // E[1/X] = index / scale
    };
    auto match_name = [&](double fit) -> std::string {
      if (!std::isfinite(fit)) return "undetermined";
      const bool st = std::abs(fit / lim.stated.scale - 1.0) <= 0.2;
      const bool co = std::abs(fit / lim.composed.scale - 1.0) <= 0.2;
      if (st && !co) return "stated";
      if (co && !st) return "composed";
      if (st && co) return "both";
      return "neither";
    };
    const double fit_cond = scale_fit(conditioned);
    const double fit_all = scale_fit(all_finite);
    lj["scale_fit_conditioned"] = fit_cond;
    lj["scale_fit_conditioned_matches"] = match_name(fit_cond);
    lj["scale_fit_all"] = fit_all;
    lj["scale_fit_all_matches"] = match_name(fit_all);

    if (conditioned.size() >= 20) {
      const KsResult ks_st = ks_statistic(
          conditioned, [&](double x) { return inv_gamma_cdf(lim.stated, x); });
      const KsResult ks_co = ks_statistic(
          conditioned, [&](double x) { return inv_gamma_cdf(lim.composed, x); });
      lj["ks_conditioned_stated"] = {{"D", ks_st.D}, {"p", ks_st.p}};
      lj["ks_conditioned_composed"] = {{"D", ks_co.D}, {"p", ks_co.p}};
    }
    s["limit_law"] = lj;
  } else if (cfg.strategy.mode == StrategyMode::kReflectionRotation) {
    try {
      const DufresneSpec spec =
          limit_params_rotation(cfg.strategy.alpha_sq, cfg.strategy.beta);
      json lj;
      lj["a"] = spec.a;
      lj["b"] = spec.b;
      lj["index"] = 2.0 * spec.b / a_squared(spec);
      s["limit_law"] = lj;
    } catch (const std::exception&) {
      s["limit_law"] = nullptr;
    }
  }

  res.summary_json = s.dump(2);
  return res;
}

// ---- dufresne-check ----

struct ValueRow {
  int id = 0;
  std::uint64_t seed_used = 0;
  double value = kNan;
  bool aborted = false;
};

ExperimentResult run_dufresne(const ExperimentConfig& cfg) {
  const DufresneSpec spec{cfg.a, cfg.b};
  auto rows = run_replicas<ValueRow>(cfg, [&](std::mt19937_64& rng, ValueRow& row) {
    row.value = mc_exponential_functional(spec, cfg.dt, rng);
  });

  ExperimentResult res;
  std::ostringstream csv;
  json jrecords = json::array();
  const bool as_json = cfg.format == "json";
  if (!as_json) csv << "replica_id,seed_used,value\n";
  std::vector<double> vals;
  for (const ValueRow& r : rows) {
    if (r.aborted) res.aborted += 1;
    if (!r.aborted && std::isfinite(r.value)) vals.push_back(r.value);
    if (as_json) {
      json o;
      o["replica_id"] = r.id;
      o["seed_used"] = r.seed_used;
      o["value"] = r.value;
      jrecords.push_back(o);
    } else {
      csv << r.id << ',' << r.seed_used << ',' << fmt17(r.value) << '\n';
    }
  }
  res.records = as_json ? jrecords.dump(2) : csv.str();

  json s;
  s["experiment"] = kind_name(cfg.experiment);
  s["config"] = config_json(cfg);
  s["replicas"] = cfg.replicas;
  s["aborted"] = res.aborted;
  s["value"] = quantile_block(vals);
  s["std_error_of_mean"] = stderr_of(vals);
  if (cfg.a > 0.0) {
    const InvGammaSpec law = dufresne_distribution(spec);
    s["limit_law"] = {{"index", law.index}, {"scale", law.scale}};
    if (vals.size() >= 20) {
      const KsResult ks =
          ks_statistic(vals, [&](double x) { return inv_gamma_cdf(law, x); });
      s["ks"] = {{"D", ks.D}, {"p", ks.p}};
    }
    if (spec.b > 0.5 * spec.a * spec.a) {
      s["expected_mean"] = 1.0 / (spec.b - 0.5 * spec.a * spec.a);
    }
  } else {
    s["limit_law"] = nullptr;
    s["expected_mean"] = 1.0 / spec.b;
  }
  res.summary_json = s.dump(2);
  return res;
}

// ---- ito-validate ----

ExperimentResult run_ito(const ExperimentConfig& cfg) {
  const ZigguratNormal& zig = ziggurat();
  ExperimentResult res;
  std::ostringstream csv;
  json jrecords = json::array();
  const bool as_json = cfg.format == "json";
  if (!as_json) csv << "case,name,empirical,std_error,theory,z_score\n";

  json cases_json = json::array();
  double max_abs_z = 0.0;
  bool all_within_4se = true;

  for (int c = 0; c < cfg.cases; ++c) {
    std::mt19937_64 rng = seed_for_replica(cfg.seed, static_cast<std::uint64_t>(c));
    const int n = cfg.n;

    // Random nondegenerate state: Gaussian positions and area offsets.
    Vector A0(n), B0(n);
    for (int i = 0; i < n; ++i) A0(i) = zig(rng);
    for (int i = 0; i < n; ++i) B0(i) = 0.5 * zig(rng);
    Matrix offA = Matrix::Zero(n, n);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < i; ++j) offA(i, j) = zig(rng);
    }
    const FullState st = make_state(A0, B0, offA, Matrix());

    // Random valid control, independent of the state.
    Vector dir(n);
    for (int i = 0; i < n; ++i) dir(i) = zig(rng);
    const UnitVector nu(dir);
    Matrix zraw = Matrix::Zero(n, n);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < i; ++j) zraw(i, j) = zig(rng);
    }
    const SkewUnitMatrix Z(Matrix(zraw - zraw.transpose()));
    AdaptiveControlDecision d;
    d.p = ZigguratNormal::uniform01(rng);
    d.q = 1.0 - d.p;
    d.theta = 1.2 * (2.0 * ZigguratNormal::uniform01(rng) - 1.0);
    const ControlMatrix ctl = n == 2 ? planar_mixed_control(nu, Z, d)
                                     : mixed_nd_control(nu, Z, d);

    const auto table = validate_ito_system(st, ctl, cfg.replicas, cfg.dt, rng);
    json case_json;
    case_json["case"] = c;
    json rows_json = json::array();
    for (const ItoCoefficientRow& row : table) {
      const double z =
          row.std_error > 0.0 ? (row.empirical - row.theory) / row.std_error : 0.0;
      max_abs_z = std::max(max_abs_z, std::abs(z));
      if (std::abs(row.empirical - row.theory) > 4.0 * row.std_error) {
        all_within_4se = false;
      }
      if (as_json) {
        json o;
        o["case"] = c;
        o["name"] = row.name;
        o["empirical"] = row.empirical;
        o["std_error"] = row.std_error;
        o["theory"] = row.theory;
        o["z_score"] = z;
        jrecords.push_back(o);
      } else {
        csv << c << ',' << row.name << ',' << fmt17(row.empirical) << ','
            << fmt17(row.std_error) << ',' << fmt17(row.theory) << ','
            << fmt17(z) << '\n';
      }
      json jr;
      jr["name"] = row.name;
      jr["empirical"] = row.empirical;
      jr["std_error"] = row.std_error;
      jr["theory"] = row.theory;
      jr["z_score"] = z;
      rows_json.push_back(jr);
    }
    case_json["coefficients"] = rows_json;
    cases_json.push_back(case_json);
  }
  res.records = as_json ? jrecords.dump(2) : csv.str();

  json s;
  s["experiment"] = kind_name(cfg.experiment);
  s["config"] = config_json(cfg);
  s["cases"] = cases_json;
  s["max_abs_z"] = max_abs_z;
  s["all_within_4se"] = all_within_4se;
  res.summary_json = s.dump(2);
  return res;
}

// ---- kolmogorov ----

struct KolRow {
  int id = 0;
  std::uint64_t seed_used = 0;
  bool coupled = false;
  double T = kNan;
  int loops = 0;
  std::uint64_t steps = 0;
  bool aborted = false;
};

ExperimentResult run_kolmogorov(const ExperimentConfig& cfg) {
  auto rows = run_replicas<KolRow>(cfg, [&](std::mt19937_64& rng, KolRow& row) {
    const KolmogorovOutcome o =
        couple_kolmogorov(cfg.U0, cfg.kol_V0, cfg.dt, rng, cfg.horizon);
    row.coupled = o.coupled;
    row.T = o.coupled ? o.T : kNan;
    row.loops = o.loops;
    row.steps = o.steps;
  });

  ExperimentResult res;
  std::ostringstream csv;
  json jrecords = json::array();
  const bool as_json = cfg.format == "json";
  if (!as_json) csv << "replica_id,seed_used,coupled,T,loops,steps\n";
  int coupled = 0;
  std::vector<double> times, loops;
  for (const KolRow& r : rows) {
    if (r.aborted) res.aborted += 1;
    if (r.coupled) {
      coupled += 1;
      times.push_back(r.T);
      loops.push_back(static_cast<double>(r.loops));
    }
    if (as_json) {
      json o;
      o["replica_id"] = r.id;
      o["seed_used"] = r.seed_used;
      o["coupled"] = r.coupled;
      o["T"] = r.T;
      o["loops"] = r.loops;
      o["steps"] = r.steps;
      jrecords.push_back(o);
    } else {
      csv << r.id << ',' << r.seed_used << ',' << (r.coupled ? 1 : 0) << ','
          << fmt17(r.T) << ',' << r.loops << ',' << r.steps << '\n';
    }
  }
  res.records = as_json ? jrecords.dump(2) : csv.str();

  json s;
  s["experiment"] = kind_name(cfg.experiment);
  s["config"] = config_json(cfg);
  s["replicas"] = cfg.replicas;
  s["aborted"] = res.aborted;
  s["coupled"] = coupled;
  s["coupled_fraction"] =
      static_cast<double>(coupled) / static_cast<double>(cfg.replicas);
  s["coupling_time"] = quantile_block(times);
  s["loops"] = quantile_block(loops);
  res.summary_json = s.dump(2);
  return res;
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  validate_config(cfg);
  switch (cfg.experiment) {
    case ExperimentKind::kFullCoupling: return run_full(cfg);
    case ExperimentKind::kReducedCouplingDist: return run_reduced(cfg);
    case ExperimentKind::kDufresneCheck: return run_dufresne(cfg);
    case ExperimentKind::kItoValidate: return run_ito(cfg);
    case ExperimentKind::kKolmogorov: return run_kolmogorov(cfg);
  }
  throw std::invalid_argument("experiment: unknown kind");
}

}  // namespace coupling
