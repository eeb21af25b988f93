// Tests for the reduced (K, H) diffusion: exact coefficient formulas for
// both adaptive strategies, the correlated Euler step, and the scaled
// coupling-time driver with its probabilistic tail truncation.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>
#include <stdexcept>
#include <vector>

#include "coupling/dufresne.hpp"
#include "coupling/geometry.hpp"
#include "coupling/reduced_engine.hpp"
#include "coupling/rng.hpp"

using namespace coupling;

TEST_CASE("reflection-synchronous coefficients: exact clamped formulas") {
  // Above the clamp (W >= alpha): var_K = alpha^2, drift_K = -alpha^2/2.
  PlanarCoefficients c = coefficients_reflection_synchronous(1.5, 10.0);
  CHECK(c.var_K == doctest::Approx(1.5).epsilon(1e-15));
  CHECK(c.drift_K == doctest::Approx(-0.75).epsilon(1e-15));
  CHECK(c.cov_KH == 0.0);
  CHECK(c.var_H == 2.0);
  CHECK(c.drift_H == -1.0);
  // drift(H - 2K) = alpha^2 - 1 above the clamp.
  CHECK(c.drift_H - 2.0 * c.drift_K == doctest::Approx(0.5).epsilon(1e-15));

  // Below the clamp (W < alpha): the reflection weight saturates at p = 1,
  // leaving var_K = W^2.
  c = coefficients_reflection_synchronous(1.5, 0.5);
  CHECK(c.var_K == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(c.drift_K == doctest::Approx(-0.125).epsilon(1e-15));
  CHECK(c.var_H == 2.0);
  CHECK(c.drift_H == -1.0);

  // Continuity at the clamp boundary.
  const double Wc = std::sqrt(1.5);
  const PlanarCoefficients lo = coefficients_reflection_synchronous(1.5, Wc * (1 - 1e-9));
  const PlanarCoefficients hi = coefficients_reflection_synchronous(1.5, Wc * (1 + 1e-9));
  CHECK(lo.var_K == doctest::Approx(hi.var_K).epsilon(1e-7));

  // Astronomically large W must not produce NaN (overflow-safe clamp).
  c = coefficients_reflection_synchronous(1.5, 1e308);
  CHECK(c.var_K == doctest::Approx(1.5).epsilon(1e-12));
  CHECK(std::isfinite(c.drift_K));

  CHECK_THROWS_AS(coefficients_reflection_synchronous(0.0, 1.0), std::domain_error);
  CHECK_THROWS_AS(coefficients_reflection_synchronous(1.5, 0.0), std::domain_error);
  CHECK_THROWS_AS(coefficients_reflection_synchronous(1.5, -2.0), std::domain_error);
}

TEST_CASE("rotation-mixture coefficients: limits, saturation, reduction") {
  // Large finite W approaches the asymptotic coefficient set
  // (alpha^2 + beta^2/2, -alpha^2/2, beta, 2, -(beta + 1)).
  PlanarCoefficients c = coefficients_rotation_mixture(2.5, 1.2, 1e9);
  CHECK(c.var_K == doctest::Approx(2.5 + 0.72).epsilon(1e-8));
  CHECK(c.drift_K == doctest::Approx(-1.25).epsilon(1e-8));
  CHECK(c.cov_KH == doctest::Approx(1.2).epsilon(1e-8));
  CHECK(c.var_H == doctest::Approx(2.0).epsilon(1e-8));
  CHECK(c.drift_H == doctest::Approx(-2.2).epsilon(1e-8));

  // The overflow-safe branch returns the limit exactly and matches the
  // finite-W formula where both are usable.
  const PlanarCoefficients far = coefficients_rotation_mixture(2.5, 1.2, 1e300);
  CHECK(far.var_K == doctest::Approx(3.22).epsilon(1e-14));
  CHECK(far.drift_K == doctest::Approx(-1.25).epsilon(1e-14));
  CHECK(far.cov_KH == doctest::Approx(1.2).epsilon(1e-14));
  CHECK(far.var_H == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(far.drift_H == doctest::Approx(-2.2).epsilon(1e-14));
  // drift(H - 2K) in the far field equals alpha^2 - beta - 1.
  CHECK(far.drift_H - 2.0 * far.drift_K ==
        doctest::Approx(2.5 - 1.2 - 1.0).epsilon(1e-13));

  // Small W: both the reflection weight and the rotation angle saturate
  // (p = 1, so the rotation part vanishes and reflection coefficients rule).
  c = coefficients_rotation_mixture(2.5, 1.2, 0.5);
  CHECK(c.var_K == doctest::Approx(0.25).epsilon(1e-14));
  CHECK(c.drift_K == doctest::Approx(-0.125).epsilon(1e-14));
  CHECK(c.cov_KH == doctest::Approx(0.0).epsilon(1e-14));
  CHECK(c.var_H == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(c.drift_H == doctest::Approx(-1.0).epsilon(1e-14));

  // beta = 0 reduces to the reflection-synchronous coefficient set.
  for (double W : {0.3, 1.0, 2.0, 5.0, 50.0, 1e6}) {
    const PlanarCoefficients rot = coefficients_rotation_mixture(1.5, 0.0, W);
    const PlanarCoefficients ref = coefficients_reflection_synchronous(1.5, W);
    CHECK(rot.var_K == doctest::Approx(ref.var_K).epsilon(1e-12));
    CHECK(rot.drift_K == doctest::Approx(ref.drift_K).epsilon(1e-12));
    CHECK(rot.cov_KH == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(rot.var_H == doctest::Approx(ref.var_H).epsilon(1e-12));
    CHECK(rot.drift_H == doctest::Approx(ref.drift_H).epsilon(1e-12));
  }

  CHECK_THROWS_AS(coefficients_rotation_mixture(0.0, 1.0, 5.0), std::domain_error);
  CHECK_THROWS_AS(coefficients_rotation_mixture(2.5, -0.1, 5.0), std::domain_error);
  CHECK_THROWS_AS(coefficients_rotation_mixture(2.5, 1.2, 0.0), std::domain_error);
}

TEST_CASE("reduced Euler step: exact update for given noise") {
  PlanarCoefficients c;
  c.var_K = 1.5;
  c.var_H = 2.0;
  c.cov_KH = 0.6;
  c.drift_K = -0.75;
  c.drift_H = -1.0;
  const double dtau = 0.01;
  const double sd = std::sqrt(dtau);
  // Cholesky factor of [[var_K, cov], [cov, var_H]].
  const double L11 = std::sqrt(c.var_K);
  const double L21 = c.cov_KH / L11;
  const double L22 = std::sqrt(c.var_H - L21 * L21);

  ReducedState s;
  s.K = 0.2;
  s.H = 1.1;

  // Noise only in the first component.
  ReducedState n = step_reduced(s, c, dtau, 1.0, 0.0);
  CHECK(n.K - s.K == doctest::Approx(c.drift_K * dtau + L11 * sd).epsilon(1e-14));
  CHECK(n.H - s.H == doctest::Approx(c.drift_H * dtau + L21 * sd).epsilon(1e-14));
  CHECK(n.tau == doctest::Approx(dtau));
  // T accumulates the pre-step integrand.
  CHECK(n.T_accum - s.T_accum ==
        doctest::Approx(0.25 * std::exp(2.0 * s.H - 2.0 * s.K) * dtau).epsilon(1e-14));

  // Noise only in the second component: K feels no noise, H gets L22.
  n = step_reduced(s, c, dtau, 0.0, 1.0);
  CHECK(n.K - s.K == doctest::Approx(c.drift_K * dtau).epsilon(1e-14));
  CHECK(n.H - s.H == doctest::Approx(c.drift_H * dtau + L22 * sd).epsilon(1e-14));

  // Zero noise follows the drift alone; dtau = 0 leaves the state in place.
  n = step_reduced(s, c, dtau, 0.0, 0.0);
  CHECK(n.K - s.K == doctest::Approx(c.drift_K * dtau).epsilon(1e-14));
  CHECK(n.H - s.H == doctest::Approx(c.drift_H * dtau).epsilon(1e-14));
  n = step_reduced(s, c, 0.0, 3.0, -2.0);
  CHECK(n.K == s.K);
  CHECK(n.H == s.H);
  CHECK(n.T_accum == s.T_accum);

  CHECK_THROWS_AS(step_reduced(s, c, -0.01, 0.0, 0.0), std::invalid_argument);
  PlanarCoefficients bad = c;
  bad.cov_KH = 2.5;  // cov^2 > var_K * var_H
  CHECK_THROWS_AS(step_reduced(s, bad, dtau, 0.0, 0.0), NumericError);
  bad = c;
  bad.var_K = -1.0;
  CHECK_THROWS_AS(step_reduced(s, bad, dtau, 0.0, 0.0), NumericError);
}

TEST_CASE("reduced Euler step: sampled moments match the coefficients") {
  PlanarCoefficients c;
  c.var_K = 1.5;
  c.var_H = 2.0;
  c.cov_KH = 1.2;
  c.drift_K = -0.75;
  c.drift_H = -2.2;
  const double dtau = 0.01;
  const int N = 200000;
  const ZigguratNormal& zig = ziggurat();
  std::mt19937_64 rng = seed_for_replica(88, 0);
  ReducedState s;
  double mK = 0, mH = 0, vK = 0, vH = 0, cKH = 0;
  for (int i = 0; i < N; ++i) {
    const ReducedState n = step_reduced(s, c, dtau, zig(rng), zig(rng));
    const double dK = n.K - s.K;
    const double dH = n.H - s.H;
    mK += dK; mH += dH; vK += dK * dK; vH += dH * dH; cKH += dK * dH;
  }
  const double n_d = static_cast<double>(N);
  mK /= n_d; mH /= n_d;
  vK = vK / n_d - mK * mK;
  vH = vH / n_d - mH * mH;
  cKH = cKH / n_d - mK * mH;
  // Mean standard errors: sqrt(var dtau / N); second-moment errors ~ var dtau sqrt(2/N).
  CHECK(std::abs(mK - c.drift_K * dtau) < 4.0 * std::sqrt(c.var_K * dtau / n_d));
  CHECK(std::abs(mH - c.drift_H * dtau) < 4.0 * std::sqrt(c.var_H * dtau / n_d));
  CHECK(std::abs(vK - c.var_K * dtau) < 5.0 * c.var_K * dtau * std::sqrt(2.0 / n_d));
  CHECK(std::abs(vH - c.var_H * dtau) < 5.0 * c.var_H * dtau * std::sqrt(2.0 / n_d));
  const double se_cov =
      std::sqrt((c.var_K * c.var_H + c.cov_KH * c.cov_KH) / n_d) * dtau;
  CHECK(std::abs(cKH - c.cov_KH * dtau) < 5.0 * se_cov);
}

TEST_CASE("scaled coupling time driver: validation and basic behavior") {
  ReducedRunConfig cfg;
  cfg.strategy.alpha_sq = 1.5;
  cfg.strategy.mode = StrategyMode::kReflectionSynchronous;
  cfg.W0 = 1000.0;
  cfg.dtau = 4e-3;

  std::mt19937_64 rng = seed_for_replica(7, 0);

  ReducedRunConfig bad = cfg;
  bad.W0 = 0.0;
  CHECK_THROWS_AS(simulate_scaled_coupling_time(bad, rng), std::invalid_argument);
  bad = cfg;
  bad.dtau = -1.0;
  CHECK_THROWS_AS(simulate_scaled_coupling_time(bad, rng), std::invalid_argument);
  bad = cfg;
  bad.tau_horizon = 0.0;
  CHECK_THROWS_AS(simulate_scaled_coupling_time(bad, rng), std::invalid_argument);
  bad = cfg;
  bad.switch_threshold = -1.0;
  CHECK_THROWS_AS(simulate_scaled_coupling_time(bad, rng), std::invalid_argument);
  bad = cfg;
  bad.tail_prob = 1.5;
  CHECK_THROWS_AS(simulate_scaled_coupling_time(bad, rng), std::invalid_argument);
  bad = cfg;
  bad.strategy.mode = StrategyMode::kPureReflection;
  CHECK_THROWS_AS(simulate_scaled_coupling_time(bad, rng), std::invalid_argument);
  bad = cfg;
  bad.strategy.alpha_sq = 2.5;  // outside (0, 2) for reflection-synchronous
  CHECK_THROWS_AS(simulate_scaled_coupling_time(bad, rng), std::domain_error);

  // Starting below the regime threshold is immediately non-absorbed.
  ReducedRunConfig low = cfg;
  low.W0 = 5.0;
  low.switch_threshold = 10.0;
  const ReducedOutcome lo = simulate_scaled_coupling_time(low, rng);
  CHECK_FALSE(lo.absorbed);

  // A tiny horizon truncates.
  ReducedRunConfig shallow = cfg;
  shallow.tau_horizon = 0.5;
  const ReducedOutcome tr = simulate_scaled_coupling_time(shallow, rng);
  CHECK(tr.truncated);

  // Determinism: identical seeds give identical outcomes.
  std::mt19937_64 r1 = seed_for_replica(21, 4);
  std::mt19937_64 r2 = seed_for_replica(21, 4);
  const ReducedOutcome o1 = simulate_scaled_coupling_time(cfg, r1);
  const ReducedOutcome o2 = simulate_scaled_coupling_time(cfg, r2);
  CHECK(o1.scaledT == o2.scaledT);
  CHECK(o1.steps == o2.steps);
  CHECK(o1.absorbed == o2.absorbed);
}

TEST_CASE("scaled coupling time has the heavy tail of its limit law") {
  // Reflection-synchronous at alpha^2 = 1.5: limit tail index 1/14.
  ReducedRunConfig cfg;
  cfg.strategy.alpha_sq = 1.5;
  cfg.strategy.mode = StrategyMode::kReflectionSynchronous;
  cfg.W0 = 1000.0;
  cfg.dtau = 4e-3;

  const int N = 1200;
  std::vector<double> all;
  all.reserve(N);
  int absorbed = 0, truncated = 0;
  for (int i = 0; i < N; ++i) {
    std::mt19937_64 rng = seed_for_replica(2026, static_cast<std::uint64_t>(i));
    const ReducedOutcome o = simulate_scaled_coupling_time(cfg, rng);
    REQUIRE_FALSE(o.aborted);
    if (o.absorbed) ++absorbed;
    if (o.truncated) ++truncated;
    CHECK(o.scaledT > 0.0);
    all.push_back(o.scaledT);
  }
  // From W0 = 1000, log W sits log(100) = 4.6 nats above the regime
  // threshold and diffuses with drift +1/2 and variance 2 + 4 alpha^2 = 8
  // per unit tau, so the dip probability is exp(-2 * 0.5 * 4.6 / 8) = 0.56
  // and the absorbed fraction should land near 44%. The tail rule, not the
  // horizon, should end the runs.
  CHECK(absorbed > N * 2 / 5);
  CHECK(absorbed < N * 3 / 5);
  CHECK(truncated < N / 20);

  const TailIndexEstimate est = tail_index_estimate(all, 0.1);
  // 1/14 = 0.0714...; the Hill point estimate at this sample size sits
  // within a handful of standard errors of it.
  CHECK(est.kappa_hat > 0.0714 - 5.0 * est.std_error - 0.01);
  CHECK(est.kappa_hat < 0.0714 + 5.0 * est.std_error + 0.01);
}

TEST_CASE("rotation-mixture driver runs and shows a heavier-index tail") {
  // Interior rotation pair (2.5, 1.2): limit tail index 3.8/11.28 = 0.337,
  // far larger than the reflection-synchronous 1/14. A modest sample
  // separates them cleanly.
  ReducedRunConfig cfg;
  cfg.strategy.alpha_sq = 2.5;
  cfg.strategy.beta = 1.2;
  cfg.strategy.mode = StrategyMode::kReflectionRotation;
  cfg.W0 = 1000.0;
  cfg.dtau = 4e-3;

  const int N = 600;
  std::vector<double> all;
  all.reserve(N);
  for (int i = 0; i < N; ++i) {
    std::mt19937_64 rng = seed_for_replica(909, static_cast<std::uint64_t>(i));
    const ReducedOutcome o = simulate_scaled_coupling_time(cfg, rng);
    REQUIRE_FALSE(o.aborted);
    CHECK(o.scaledT > 0.0);
    all.push_back(o.scaledT);
  }
  const TailIndexEstimate est = tail_index_estimate(all, 0.15);
  CHECK(est.kappa_hat > 0.15);
  CHECK(est.kappa_hat < 0.6);
}
