#pragma once
// Full Euler-Maruyama engine for the coupled pair of n-dimensional Brownian
// motions (A, B) with their accumulated Levy areas. One co-adapted control
// J drives B's increments into A's, the complementary noise enters through
// the PSD square root of I - J^T J, and areas integrate with left-point
// (Ito) sums. On top of the stepper sit: the areal difference and derived
// diagnostics, the adaptive run-to-coupling driver with hysteresis, a
// single-step moment validator for the five drift/covariance coefficients
// of (V^2, U^2), and a long-run calibrator for the (K, H) drifts on the
// intrinsic clock.

#include "coupling/controls.hpp"
#include "coupling/rng.hpp"

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace coupling {

// ---- State ----

struct FullState {
  Vector A;        // first path
  Vector B;        // second path
  Matrix area_A;   // Levy area of A (exactly skew)
  Matrix area_B;   // Levy area of B (exactly skew)
  double t = 0.0;
};

// Build a state, forcing the area matrices to be exactly skew.
FullState make_state(const Vector& A0, const Vector& B0, const Matrix& area_A0,
                     const Matrix& area_B0);

// Planar convenience start: A0 = (V0, 0), B0 = 0, and an area offset on A
// chosen so that U0 = W0 * V0^2 (hence W = U/V^2 starts at W0).
FullState planar_start(double V0, double W0);

// ---- Stepping ----

// One Euler step of length dt driven by 2n standard normals: the first n
// drive B, the last n are the complementary noise. Areas use the pre-step
// positions (left-point rule). Throws NumericError if I - J^T J fails the
// PSD check, i.e. the control is invalid.
FullState step(const FullState& state, const ControlMatrix& control, double dt,
               const std::vector<double>& noise);

// Areal difference: area_A - area_B + A B^T - B A^T, exactly skew.
Matrix areal_difference(const FullState& state);

// ---- Diagnostics ----

struct Diagnostics {
  double V_sq = 0.0;          // |A - B|^2
  double U_sq = 0.0;          // Frobenius norm^2 of the areal difference
  double K = 0.0;             // log V (0 when degenerate_V)
  double H = 0.0;             // log U (0 when degenerate_U)
  double W = 0.0;             // U / V^2 (0 when degenerate)
  double tau = 0.0;           // intrinsic clock, 4 (V/U)^2 dt accumulated
  double tau_tilde = 0.0;     // distance clock, 4 dt / V^2 accumulated
  bool degenerate_V = false;  // V^2 == 0: K undefined, flag instead of -inf
  bool degenerate_U = false;  // U^2 == 0: H undefined, flag instead of -inf
};

Diagnostics diagnostics(const FullState& state, double tau = 0.0,
                        double tau_tilde = 0.0);

// ---- Run to coupling ----

struct FullRunConfig {
  int n = 2;
  Vector A0;                   // defaults to planar_start(V0, W0) when empty
  Vector B0;
  Matrix area_A0;
  Matrix area_B0;
  double V0 = 1.0;             // used only when A0/B0 are empty
  double W0 = 1.5;
  StrategyParams strategy;
  double dt_max = 1e-3;
  double dt_scale_c = 5e-3;    // adaptive dt = min(dt_max, c V^2)
  double eps_V = 0.05;         // coupling threshold on V
  double eps_U = 0.075;        // coupling threshold on U
  double switch_threshold = 10.0;  // hysteresis band [L', 2L'] on W
  double t_horizon = 1e3;
  std::uint64_t max_steps = 50000000ULL;
};

struct CouplingOutcome {
  bool coupled = false;
  double T = 0.0;              // process time at coupling (or at stop)
  std::uint64_t steps = 0;
  Diagnostics final_diag;
  bool truncated = false;      // horizon or step cap reached
  bool aborted = false;        // non-finite state
};

// Run the adaptive strategy until V and U are both inside their coupling
// thresholds. Below W = switch_threshold the control switches to pure
// reflection and switches back above twice the threshold (hysteresis).
// The rotation angle is oriented so the areal difference is damped.
CouplingOutcome run_until_coupled(const FullRunConfig& config,
                                  std::mt19937_64& rng);

// ---- Single-step moment validation ----

struct ItoCoefficientRow {
  std::string name;
  double empirical = 0.0;
  double std_error = 0.0;
  double theory = 0.0;
};

// Monte Carlo check of the five per-dt coefficients of (V^2, U^2) at a
// frozen state/control: drift of V^2, quadratic variation of V^2, the
// cross variation, quadratic variation of U^2, and drift of U^2. Both
// V and U must be nondegenerate at the base state.
std::vector<ItoCoefficientRow> validate_ito_system(const FullState& state,
                                                   const ControlMatrix& control,
                                                   int replicas, double dt,
                                                   std::mt19937_64& rng);

// ---- Long-run drift calibration on the intrinsic clock ----

struct DriftCalibrationConfig {
  double alpha_sq = 1.5;
  double V0 = 1.0;
  double W0 = 50.0;
  int replicas = 300;
  double tau_per_replica = 0.5;
  double dt_max = 1e-3;
  double dt_scale_c = 5e-3;
  // Per-replica step budget. The intrinsic clock advances by
  // 4 dt / (W^2 V^2) per step, so a replica that wanders to large W^2 V^2
  // can demand ~1e8 steps for a sliver of tau; stopping such a replica at
  // the budget censors state-space pockets that contribute negligible time
  // while keeping the estimator a ratio of adapted sums (still unbiased).
  std::uint64_t max_steps_per_replica = 2000000;
};

struct DriftCalibration {
  double drift_K = 0.0, se_K = 0.0;   // E[dK]/dtau
  double drift_H = 0.0, se_H = 0.0;   // E[dH]/dtau
  double qv_H = 0.0, se_qv_H = 0.0;   // E[(dH)^2]/dtau
  double tau_total = 0.0;
  std::uint64_t steps = 0;
};

// Accumulate dK, dH, (dH)^2 and dtau from full planar reflection-synchronous
// runs, restricted to steps whose pre-step W is at or above alpha (where the
// reduced coefficients are the constants -alpha^2/2, -1, 2). The selection
// uses only pre-step information, so the estimates stay unbiased.
DriftCalibration calibrate_planar_drifts(const DriftCalibrationConfig& config,
                                         std::mt19937_64& rng);

}  // namespace coupling
