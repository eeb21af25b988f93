#include "coupling/sde_engine.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace coupling {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

Matrix exact_skew(const Matrix& m) {
  const Eigen::Index n = m.rows();
  Matrix z = Matrix::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < i; ++j) {
      z(i, j) = m(i, j);
      z(j, i) = -m(i, j);
    }
  }
  return z;
}

// Areal difference written into a preallocated matrix.
void areal_difference_into(const FullState& s, Matrix& out) {
  const Eigen::Index n = s.A.size();
  for (Eigen::Index i = 0; i < n; ++i) {
    out(i, i) = 0.0;
    for (Eigen::Index j = 0; j < i; ++j) {
      const double v = s.area_A(i, j) - s.area_B(i, j) + s.A(i) * s.B(j) -
                       s.A(j) * s.B(i);
      out(i, j) = v;
      out(j, i) = -v;
    }
  }
}

// Accumulate the left-point area increments for one path.
void accumulate_area(Matrix& area, const Vector& pos, const Vector& inc) {
  const Eigen::Index n = pos.size();
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < i; ++j) {
      area(i, j) += pos(i) * inc(j) - pos(j) * inc(i);
      area(j, i) = -area(i, j);
    }
  }
}

// 2x2 symmetric PSD square root, closed form, no allocation. Returns false
// when the matrix has an eigenvalue below -1e-6.
bool sqrt_psd_2x2(double a, double b, double c, Matrix& out) {
  const double tr = a + c;
  const double gap = std::hypot(a - c, 2.0 * b);
  if (0.5 * (tr - gap) < -1e-6) return false;
  const double det = std::max(a * c - b * b, 0.0);
  const double s = std::sqrt(det);
  const double denom = std::sqrt(std::max(tr, 0.0) + 2.0 * s);
  if (denom > 0.0) {
    out(0, 0) = (std::max(a, 0.0) + s) / denom;
    out(1, 1) = (std::max(c, 0.0) + s) / denom;
    out(0, 1) = out(1, 0) = b / denom;
  } else {
    out.setZero();
  }
  return true;
}

}  // namespace

// ---- State construction ----

FullState make_state(const Vector& A0, const Vector& B0, const Matrix& area_A0,
                     const Matrix& area_B0) {
  const Eigen::Index n = A0.size();
  if (n < 2) throw std::invalid_argument("state: dimension must be at least 2");
  if (B0.size() != n) throw std::invalid_argument("state: A0 and B0 sizes differ");
  FullState s;
  s.A = A0;
  s.B = B0;
  s.area_A = area_A0.size() == 0 ? Matrix::Zero(n, n) : exact_skew(area_A0);
  s.area_B = area_B0.size() == 0 ? Matrix::Zero(n, n) : exact_skew(area_B0);
  if (s.area_A.rows() != n || s.area_B.rows() != n) {
    throw std::invalid_argument("state: area offset dimension mismatch");
  }
  if (!s.A.allFinite() || !s.B.allFinite() || !s.area_A.allFinite() ||
      !s.area_B.allFinite()) {
    throw std::invalid_argument("state: entries must be finite");
  }
  return s;
}

FullState planar_start(double V0, double W0) {
  if (!(V0 > 0.0) || !(W0 >= 0.0)) {
    throw std::invalid_argument("planar start: V0 must be positive and W0 nonnegative");
  }
  Vector A0 = Vector::Zero(2);
  A0(0) = V0;
  Matrix off = Matrix::Zero(2, 2);
  off(1, 0) = -W0 * V0 * V0 / std::sqrt(2.0);  // Frobenius norm W0 V0^2
  return make_state(A0, Vector::Zero(2), off, Matrix());
}

// ---- Generic single step ----

FullState step(const FullState& state, const ControlMatrix& control, double dt,
               const std::vector<double>& noise) {
  const Eigen::Index n = state.A.size();
  if (!(dt > 0.0)) throw std::invalid_argument("step: dt must be positive");
  if (control.J.rows() != n || control.J.cols() != n) {
    throw std::invalid_argument("step: control dimension mismatch");
  }
  if (noise.size() != static_cast<std::size_t>(2 * n)) {
    throw std::invalid_argument("step: need 2n noise variates");
  }

  const double sdt = std::sqrt(dt);
  Vector dB(n), dC(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    dB(i) = sdt * noise[static_cast<std::size_t>(i)];
    dC(i) = sdt * noise[static_cast<std::size_t>(n + i)];
  }
  Matrix M = Matrix::Identity(n, n) - control.J.transpose() * control.J;
  Matrix Jc = principal_sqrt_psd(M);  // throws NumericError on invalid control
  Vector dA = control.J.transpose() * dB + Jc * dC;

  FullState next = state;
  accumulate_area(next.area_A, state.A, dA);
  accumulate_area(next.area_B, state.B, dB);
  next.A += dA;
  next.B += dB;
  next.t += dt;
  return next;
}

Matrix areal_difference(const FullState& state) {
  Matrix out(state.A.size(), state.A.size());
  areal_difference_into(state, out);
  return out;
}

// ---- Diagnostics ----

Diagnostics diagnostics(const FullState& state, double tau, double tau_tilde) {
  Diagnostics d;
  d.V_sq = (state.A - state.B).squaredNorm();
  d.U_sq = areal_difference(state).squaredNorm();
  d.degenerate_V = !(d.V_sq > 0.0);
  d.degenerate_U = !(d.U_sq > 0.0);
  d.K = d.degenerate_V ? 0.0 : 0.5 * std::log(d.V_sq);
  d.H = d.degenerate_U ? 0.0 : 0.5 * std::log(d.U_sq);
  d.W = (d.degenerate_V || d.degenerate_U) ? 0.0 : std::sqrt(d.U_sq) / d.V_sq;
  d.tau = tau;
  d.tau_tilde = tau_tilde;
  return d;
}

// ---- Adaptive run loop ----

namespace {

// Shared stepping core for the run loop and the drift calibrator. Builds
// the adaptive control in place, steps the state, and reports the pre-step
// quantities needed by the callers. Each call is one Euler step.
struct AdaptiveLoop {
  explicit AdaptiveLoop(int n)
      : dim(n), X(n), nu(n), dB(n), dC(n), dA(n), Ar(n, n), J(n, n), M(n, n),
        Jc(n, n), es(n) {}

  int dim;
  Vector X, nu, dB, dC, dA;
  Matrix Ar, J, M, Jc;
  Eigen::SelfAdjointEigenSolver<Matrix> es;

  double V_sq = 0.0, U_sq = 0.0, W = 0.0;

  // Load the separation X and areal difference from a state. Call once before
  // stepping; advance() then maintains both incrementally. Recomputing them
  // from the raw position and area tallies would lose precision once those
  // tallies grow to O(t) while the differences stay small.
  bool init(const FullState& s) {
    X = s.A - s.B;
    areal_difference_into(s, Ar);
    return refresh();
  }

  // Refresh V^2, U^2, W from the maintained separation quantities. Returns
  // false on non-finite values.
  bool refresh() {
    V_sq = X.squaredNorm();
    U_sq = Ar.squaredNorm();
    if (!std::isfinite(V_sq) || !std::isfinite(U_sq)) return false;
    W = V_sq > 0.0 ? std::sqrt(U_sq) / V_sq : kInf;
    return true;
  }

  // Diagnostics built from the maintained quantities rather than the state.
  Diagnostics current_diagnostics(double tau, double tau_tilde) const {
    Diagnostics d;
    d.V_sq = V_sq;
    d.U_sq = U_sq;
    d.degenerate_V = !(d.V_sq > 0.0);
    d.degenerate_U = !(d.U_sq > 0.0);
    d.K = d.degenerate_V ? 0.0 : 0.5 * std::log(d.V_sq);
    d.H = d.degenerate_U ? 0.0 : 0.5 * std::log(d.U_sq);
    d.W = (d.degenerate_V || d.degenerate_U) ? 0.0 : std::sqrt(d.U_sq) / d.V_sq;
    d.tau = tau;
    d.tau_tilde = tau_tilde;
    return d;
  }

  // Build the control for the decision (with the area-damping orientation)
  // and advance the state by dt. Returns false if the control failed the
  // PSD check for its complementary noise.
  bool advance(FullState& s, const AdaptiveControlDecision& d, double dt,
               std::mt19937_64& rng) {
    const ZigguratNormal& zig = ziggurat();
    const double U = std::sqrt(U_sq);

    J.setIdentity();
    if (d.p > 0.0 && V_sq > 0.0) {
      nu = X / std::sqrt(V_sq);
      J.noalias() -= (2.0 * d.p) * (nu * nu.transpose());
    }
    if (d.q > 0.0 && d.theta != 0.0 && U > 0.0) {
      const double th = -d.theta;  // damping orientation
      if (dim == 2) {
        const double c = std::cos(th);
        const double sn = std::sin(th);
        J.diagonal().array() -= d.q * (1.0 - c);
        J.noalias() -= (std::sqrt(2.0) * d.q * sn / U) * Ar;
      } else {
        J.noalias() -= (d.q * th / U) * Ar;
        J.noalias() -= (d.q * th * th / U_sq) * (Ar.transpose() * Ar);
      }
    }

    M.noalias() = -(J.transpose() * J);
    M.diagonal().array() += 1.0;
    if (dim == 2) {
      if (!sqrt_psd_2x2(M(0, 0), 0.5 * (M(0, 1) + M(1, 0)), M(1, 1), Jc)) {
        return false;
      }
    } else {
      es.compute(M);
      if (es.info() != Eigen::Success) return false;
      Vector lam = es.eigenvalues();
      for (Eigen::Index i = 0; i < lam.size(); ++i) {
        if (lam(i) < -1e-6) return false;
        lam(i) = std::sqrt(std::max(lam(i), 0.0));
      }
      Jc.noalias() = es.eigenvectors() * lam.asDiagonal() *
                     es.eigenvectors().transpose();
    }

    const double sdt = std::sqrt(dt);
    for (Eigen::Index i = 0; i < dim; ++i) {
      dB(i) = sdt * zig(rng);
      dC(i) = sdt * zig(rng);
    }
    dA.noalias() = J.transpose() * dB;
    dA.noalias() += Jc * dC;

    // Position-free update of the areal difference from pre-step X:
    //   new_ij - old_ij = X_i u_j - X_j u_i + dA_i dB_j - dA_j dB_i,
    // with u = dA + dB. Algebraically identical to re-deriving it from the
    // updated area tallies, but immune to large-tally cancellation.
    for (Eigen::Index i = 0; i < dim; ++i) {
      for (Eigen::Index j = 0; j < i; ++j) {
        const double v = X(i) * (dA(j) + dB(j)) - X(j) * (dA(i) + dB(i)) +
                         dA(i) * dB(j) - dA(j) * dB(i);
        Ar(i, j) += v;
        Ar(j, i) = -Ar(i, j);
      }
    }
    X += dA;
    X -= dB;

    accumulate_area(s.area_A, s.A, dA);
    accumulate_area(s.area_B, s.B, dB);
    s.A += dA;
    s.B += dB;
    s.t += dt;
    return true;
  }
};

FullState initial_state(const FullRunConfig& cfg) {
  if (cfg.A0.size() == 0) {
    if (cfg.n != 2) {
      // Generalized default start in the (e1, e2) plane.
      Vector A0 = Vector::Zero(cfg.n);
      A0(0) = cfg.V0;
      Matrix off = Matrix::Zero(cfg.n, cfg.n);
      off(1, 0) = -cfg.W0 * cfg.V0 * cfg.V0 / std::sqrt(2.0);
      return make_state(A0, Vector::Zero(cfg.n), off, Matrix());
    }
    return planar_start(cfg.V0, cfg.W0);
  }
  return make_state(cfg.A0, cfg.B0, cfg.area_A0, cfg.area_B0);
}

}  // namespace

CouplingOutcome run_until_coupled(const FullRunConfig& cfg, std::mt19937_64& rng) {
  if (cfg.n < 2) throw std::invalid_argument("run: dimension must be at least 2");
  if (!(cfg.dt_max > 0.0)) throw std::invalid_argument("run: dt_max must be positive");
  if (!(cfg.dt_scale_c > 0.0)) {
    throw std::invalid_argument("run: dt_scale_c must be positive");
  }
  if (!(cfg.eps_V >= 0.0) || !(cfg.eps_U >= 0.0)) {
    throw std::invalid_argument("run: coupling thresholds must be nonnegative");
  }
  if (!(cfg.switch_threshold > 0.0)) {
    throw std::invalid_argument("run: switch_threshold must be positive");
  }
  if (!(cfg.t_horizon > 0.0)) throw std::invalid_argument("run: t_horizon must be positive");

  FullState st = initial_state(cfg);
  if (st.A.size() != cfg.n) {
    throw std::invalid_argument("run: initial state dimension differs from n");
  }

  const double eps_V_sq = cfg.eps_V * cfg.eps_V;
  const double eps_U_sq = cfg.eps_U * cfg.eps_U;
  const double L_lo = cfg.switch_threshold;
  const double L_hi = 2.0 * cfg.switch_threshold;

  AdaptiveLoop loop(cfg.n);
  CouplingOutcome out;
  bool pure = false;
  double tau = 0.0, tau_tilde = 0.0;
  // Scale divisor for the large-W step acceleration; covers the variance the
  // reflection and rotation parts inject per unit of the U-relative clock.
  const double g_sq = std::max({1.0, cfg.strategy.alpha_sq,
                                2.0 * cfg.strategy.beta * cfg.strategy.beta});

  bool finite = loop.init(st);
  for (;;) {
    if (!finite) {
      out.aborted = true;
      break;
    }
    if (loop.V_sq <= eps_V_sq && loop.U_sq <= eps_U_sq) {
      out.coupled = true;
      out.T = st.t;
      break;
    }
    if (st.t >= cfg.t_horizon || out.steps >= cfg.max_steps) {
      out.truncated = true;
      break;
    }

    if (!pure && loop.W < L_lo) pure = true;
    if (pure && loop.W >= L_hi) pure = false;

    AdaptiveControlDecision d;
    if (pure || !(loop.W > 0.0)) {
      d.p = 1.0;
      d.q = 0.0;
      d.theta = 0.0;
    } else if (std::isinf(loop.W)) {
      d.p = 0.0;  // V == 0: reflection direction undefined, run synchronously
      d.q = 1.0;
      d.theta = 0.0;
    } else {
      d = adapt_parameters(loop.W, cfg.strategy, cfg.n);
    }

    double dt = std::min(cfg.dt_max, cfg.dt_scale_c * loop.V_sq);
    if (!(dt > 0.0)) dt = cfg.dt_max * 1e-12;
    // In the nearly synchronous regime the reflection weight decays like
    // W^-2, so every intrinsic rate of the (K, H, log W) system slows by that
    // factor. Growing dt with W^2 keeps per-step increments of those
    // variables uniformly bounded instead of freezing the simulation; the
    // absolute cap keeps coupling times resolved relative to the horizon.
    if (!pure && std::isfinite(loop.W)) {
      const double r = loop.W * loop.W / g_sq;
      const double cap = std::max(dt, 0.05 * cfg.t_horizon);
      if (r > 1.0) dt = std::min(dt * r, cap);
    }
    dt = std::min(dt, cfg.t_horizon - st.t);
    if (!(dt > 0.0)) dt = cfg.dt_max * 1e-12;

    const double pre_V_sq = loop.V_sq;
    const double pre_U_sq = loop.U_sq;
    if (!loop.advance(st, d, dt, rng)) {
      out.aborted = true;
      break;
    }
    tau_tilde += 4.0 * dt / pre_V_sq;
    if (pre_U_sq > 0.0) tau += 4.0 * dt * pre_V_sq / pre_U_sq;
    out.steps += 1;
    finite = loop.refresh();
  }

  out.final_diag = loop.current_diagnostics(tau, tau_tilde);
  return out;
}

// ---- Single-step moment validation ----

std::vector<ItoCoefficientRow> validate_ito_system(const FullState& state,
                                                   const ControlMatrix& control,
                                                   int replicas, double dt,
                                                   std::mt19937_64& rng) {
  if (replicas < 2) {
    throw std::invalid_argument("moment validation: need at least 2 replicas");
  }
  if (!(dt > 0.0)) throw std::invalid_argument("moment validation: dt must be positive");
  const Eigen::Index n = state.A.size();
  if (control.J.rows() != n) {
    throw std::invalid_argument("moment validation: control dimension mismatch");
  }

  const Vector X = state.A - state.B;
  const double V_sq = X.squaredNorm();
  const Matrix Ar = areal_difference(state);
  const double U_sq = Ar.squaredNorm();
  if (!(V_sq > 0.0) || !(U_sq > 0.0)) {
    throw std::invalid_argument(
        "moment validation: state must have nondegenerate V and U");
  }
  const double V = std::sqrt(V_sq);
  const double U = std::sqrt(U_sq);
  const Vector nu = X / V;
  const Matrix Z = Ar / U;
  const Matrix I = Matrix::Identity(n, n);
  const Matrix& S = control.S;
  const Matrix& Askew = control.A;

  const Vector Znu = Z * nu;
  const double nu_ImS = nu.dot((I - S) * nu);
  const double nu_IpS = nu.dot((I + S) * nu);
  const double znu_IpS = Znu.dot((I + S) * Znu);
  const double cross_form = Znu.dot(Askew * nu);  // nu^T Z^T A nu
  const double tr_ZA = (Z.transpose() * Askew).trace();

  const double theory[5] = {
      2.0 * (I - S).trace(),                                   // drift of V^2
      8.0 * nu_ImS * V_sq,                                     // qv of V^2
      -16.0 * cross_form * U * V_sq,                           // cross variation
      32.0 * znu_IpS * U_sq * V_sq,                            // qv of U^2
      -4.0 * tr_ZA * U + 4.0 * (2.0 * static_cast<double>(n) -
                                (I - S).trace() - nu_IpS) * V_sq  // drift of U^2
  };

  const ZigguratNormal& zig = ziggurat();
  std::vector<double> noise(static_cast<std::size_t>(2 * n));
  double sum[5] = {0, 0, 0, 0, 0};
  double sum_sq[5] = {0, 0, 0, 0, 0};
  for (int r = 0; r < replicas; ++r) {
    for (double& x : noise) x = zig(rng);
    const FullState next = step(state, control, dt, noise);
    const double dv = (next.A - next.B).squaredNorm() - V_sq;
    const double du = areal_difference(next).squaredNorm() - U_sq;
    const double obs[5] = {dv, dv * dv, dv * du, du * du, du};
    for (int k = 0; k < 5; ++k) {
      sum[k] += obs[k];
      sum_sq[k] += obs[k] * obs[k];
    }
  }

  const double R = static_cast<double>(replicas);
  static const char* kNames[5] = {"drift_V2", "qv_V2", "cross_V2_U2", "qv_U2",
                                  "drift_U2"};
  std::vector<ItoCoefficientRow> rows;
  rows.reserve(5);
  for (int k = 0; k < 5; ++k) {
    const double mean = sum[k] / R;
    const double var = std::max(sum_sq[k] / R - mean * mean, 0.0);
    ItoCoefficientRow row;
    row.name = kNames[k];
    row.empirical = mean / dt;
    row.std_error = std::sqrt(var / R) / dt;
    row.theory = theory[k];
    rows.push_back(row);
  }
  return rows;
}

// ---- Long-run drift calibration ----

DriftCalibration calibrate_planar_drifts(const DriftCalibrationConfig& cfg,
                                         std::mt19937_64& rng) {
  if (!(cfg.alpha_sq > 0.0)) {
    throw std::invalid_argument("drift calibration: alpha^2 must be positive");
  }
  if (cfg.replicas < 2) {
    throw std::invalid_argument("drift calibration: need at least 2 replicas");
  }
  if (!(cfg.tau_per_replica > 0.0) || !(cfg.dt_max > 0.0) ||
      !(cfg.dt_scale_c > 0.0)) {
    throw std::invalid_argument("drift calibration: time parameters must be positive");
  }
  if (cfg.max_steps_per_replica < 1000) {
    throw std::invalid_argument(
        "drift calibration: per-replica step budget must be at least 1000");
  }

  const double alpha = std::sqrt(cfg.alpha_sq);
  StrategyParams strat;
  strat.alpha_sq = cfg.alpha_sq;
  strat.mode = StrategyMode::kReflectionSynchronous;

  const int R = cfg.replicas;
  std::vector<double> sK(R, 0.0), sH(R, 0.0), sH2(R, 0.0), sTau(R, 0.0);
  AdaptiveLoop loop(2);
  DriftCalibration out;

  for (int r = 0; r < R; ++r) {
    FullState st = planar_start(cfg.V0, cfg.W0);
    double tau_r = 0.0;
    std::uint64_t steps_r = 0;
    if (!loop.init(st)) {
      throw NumericError("drift calibration: state became non-finite");
    }
    while (tau_r < cfg.tau_per_replica &&
           steps_r < cfg.max_steps_per_replica) {
      if (!(loop.V_sq > 0.0) || !(loop.U_sq > 0.0)) break;  // degenerate corner
      const double W_pre = loop.W;
      const double V_sq_pre = loop.V_sq;
      const double U_sq_pre = loop.U_sq;

      const AdaptiveControlDecision d = adapt_parameters(W_pre, strat, 2);
      const double dt = std::min(cfg.dt_max, cfg.dt_scale_c * V_sq_pre);
      if (!loop.advance(st, d, dt, rng)) {
        throw NumericError("drift calibration: control PSD check failed");
      }
      if (!loop.refresh()) {
        throw NumericError("drift calibration: state became non-finite");
      }
      const double dtau = 4.0 * dt * V_sq_pre / U_sq_pre;
      tau_r += dtau;
      steps_r += 1;
      out.steps += 1;

      if (W_pre >= alpha && loop.V_sq > 0.0 && loop.U_sq > 0.0) {
        const double dK = 0.5 * std::log(loop.V_sq / V_sq_pre);
        const double dH = 0.5 * std::log(loop.U_sq / U_sq_pre);
        sK[r] += dK;
        sH[r] += dH;
        sH2[r] += dH * dH;
        sTau[r] += dtau;
      }
    }
  }

  double tot_tau = 0.0, totK = 0.0, totH = 0.0, totH2 = 0.0;
  for (int r = 0; r < R; ++r) {
    tot_tau += sTau[r];
    totK += sK[r];
    totH += sH[r];
    totH2 += sH2[r];
  }
  if (!(tot_tau > 0.0)) {
    throw NumericError("drift calibration: no time accumulated above the selection level");
  }
  out.drift_K = totK / tot_tau;
  out.drift_H = totH / tot_tau;
  out.qv_H = totH2 / tot_tau;
  double vK = 0.0, vH = 0.0, vH2 = 0.0;
  for (int r = 0; r < R; ++r) {
    const double eK = sK[r] - out.drift_K * sTau[r];
    const double eH = sH[r] - out.drift_H * sTau[r];
    const double eH2 = sH2[r] - out.qv_H * sTau[r];
    vK += eK * eK;
    vH += eH * eH;
    vH2 += eH2 * eH2;
  }
  out.se_K = std::sqrt(vK) / tot_tau;
  out.se_H = std::sqrt(vH) / tot_tau;
  out.se_qv_H = std::sqrt(vH2) / tot_tau;
  out.tau_total = tot_tau;
  return out;
}

}  // namespace coupling
