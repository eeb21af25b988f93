#include "coupling/reduced_engine.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace coupling {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// log(exp(x) + exp(y)) without overflow; x, y may be -inf.
double log_add_exp(double x, double y) {
  if (x == -kInf) return y;
  if (y == -kInf) return x;
  const double m = std::max(x, y);
  return m + std::log1p(std::exp(-std::abs(x - y)));
}

// Lower-triangular Cholesky factor of [[var_K, cov], [cov, var_H]].
struct Chol2 {
  double l11, l21, l22;
};

Chol2 cholesky2(const PlanarCoefficients& c) {
  if (!(c.var_K >= 0.0) || !(c.var_H >= 0.0)) {
    throw NumericError("reduced step: negative variance coefficient");
  }
  Chol2 f{};
  f.l11 = std::sqrt(c.var_K);
  if (f.l11 > 0.0) {
    f.l21 = c.cov_KH / f.l11;
    const double rest = c.var_H - f.l21 * f.l21;
    if (rest < -1e-12 * std::max(1.0, c.var_H)) {
      throw NumericError("reduced step: coefficient covariance is not PSD");
    }
    f.l22 = std::sqrt(std::max(rest, 0.0));
  } else {
    if (std::abs(c.cov_KH) > 1e-12) {
      throw NumericError("reduced step: coefficient covariance is not PSD");
    }
    f.l21 = 0.0;
    f.l22 = std::sqrt(c.var_H);
  }
  return f;
}

struct Increment {
  double dK, dH;
};

Increment advance(const PlanarCoefficients& c, double dtau, double n1, double n2) {
  const Chol2 f = cholesky2(c);
  const double sd = std::sqrt(dtau);
  return Increment{c.drift_K * dtau + sd * f.l11 * n1,
                   c.drift_H * dtau + sd * (f.l21 * n1 + f.l22 * n2)};
}

}  // namespace

// ---- Coefficients ----

PlanarCoefficients coefficients_reflection_synchronous(double alpha_sq, double W) {
  if (!(alpha_sq > 0.0)) {
    throw std::domain_error("reflection-synchronous coefficients: alpha^2 must be positive");
  }
  if (!(W > 0.0)) {
    throw std::domain_error("reflection-synchronous coefficients: W must be positive");
  }
  const double m = std::min(W * W, alpha_sq);
  PlanarCoefficients c;
  c.var_K = m;
  c.drift_K = -0.5 * m;
  c.cov_KH = 0.0;
  c.var_H = 2.0;
  c.drift_H = -1.0;
  return c;
}

PlanarCoefficients coefficients_rotation_mixture(double alpha_sq, double beta,
                                                 double W) {
  if (!(alpha_sq > 0.0)) {
    throw std::domain_error("rotation coefficients: alpha^2 must be positive");
  }
  if (!(beta >= 0.0)) {
    throw std::domain_error("rotation coefficients: beta must be nonnegative");
  }
  if (!(W > 0.0)) {
    throw std::domain_error("rotation coefficients: W must be positive");
  }

  PlanarCoefficients c;
  if (W > 1e12) {
    // Large-W limit; finite-W corrections are below double precision here,
    // and evaluating the generic form at overflowing W would produce inf * 0.
    c.var_K = alpha_sq + 0.5 * beta * beta;
    c.drift_K = -0.5 * alpha_sq;
    c.cov_KH = beta;
    c.var_H = 2.0;
    c.drift_H = -(beta + 1.0);
    return c;
  }

  const double p = std::min(1.0, alpha_sq / (W * W));
  const double q = 1.0 - p;
  const double sin_th = std::min(1.0, std::sqrt(2.0) * beta / W);
  const double cos_th = std::sqrt(std::max(0.0, 1.0 - sin_th * sin_th));
  const double one_minus_cos = sin_th * sin_th / (1.0 + cos_th);

  c.var_K = (p + 0.5 * q * one_minus_cos) * (W * W);
  c.drift_K = -0.5 * p * (W * W);
  c.cov_KH = q * sin_th * W / std::sqrt(2.0);
  c.var_H = 2.0 - q * one_minus_cos;
  c.drift_H = -q * sin_th * W / std::sqrt(2.0) - (1.0 - 0.5 * q * one_minus_cos);
  return c;
}

// ---- Single Euler step ----

ReducedState step_reduced(const ReducedState& state,
                          const PlanarCoefficients& coeffs, double dtau,
                          double n1, double n2) {
  if (!(dtau >= 0.0)) {
    throw std::invalid_argument("reduced step: dtau must be nonnegative");
  }
  ReducedState next = state;
  next.T_accum += 0.25 * std::exp(2.0 * state.H - 2.0 * state.K) * dtau;
  const Increment inc = advance(coeffs, dtau, n1, n2);
  next.K += inc.dK;
  next.H += inc.dH;
  next.tau += dtau;
  return next;
}

// ---- Scaled coupling time driver ----

ReducedOutcome simulate_scaled_coupling_time(const ReducedRunConfig& config,
                                             std::mt19937_64& rng) {
  if (!(config.W0 > 0.0) || !std::isfinite(config.W0)) {
    throw std::invalid_argument("reduced run: W0 must be positive and finite");
  }
  if (!(config.dtau >= 0.0)) {
    throw std::invalid_argument("reduced run: dtau must be nonnegative");
  }
  if (!(config.tau_horizon > 0.0)) {
    throw std::invalid_argument("reduced run: tau_horizon must be positive");
  }
  if (!(config.switch_threshold > 0.0)) {
    throw std::invalid_argument("reduced run: switch_threshold must be positive");
  }
  if (!(config.tail_mass > 0.0) || !(config.tail_prob > 0.0) ||
      !(config.tail_prob < 1.0)) {
    throw std::invalid_argument("reduced run: tail_mass must be > 0 and tail_prob in (0, 1)");
  }

  const StrategyParams& sp = config.strategy;
  const bool rotation = sp.mode == StrategyMode::kReflectionRotation;
  if (sp.mode == StrategyMode::kPureReflection) {
    throw std::invalid_argument(
        "reduced run: strategy must be reflection-synchronous or reflection-rotation");
  }

  // Asymptotic drift/volatility of G = 2 dH - 2 dK; the stopping rule and
  // the wide-step sizes are derived from these constants.
  double drift_b;
  double vol_a_sq;
  if (rotation) {
    const DufresneSpec limit = limit_params_rotation(sp.alpha_sq, sp.beta);
    drift_b = limit.b;
    vol_a_sq = a_squared(limit);
  } else {
    if (!(sp.alpha_sq > 0.0 && sp.alpha_sq < 2.0)) {
      throw std::domain_error(
          "reduced run: reflection-synchronous strategy needs alpha^2 in (0, 2)");
    }
    drift_b = 2.0 - sp.alpha_sq;
    vol_a_sq = 4.0 * (2.0 + sp.alpha_sq);
  }
  const double vol_a = std::sqrt(vol_a_sq);
  const double kappa = 2.0 * drift_b / vol_a_sq;
  // Stop once P(remaining tail > tail_mass * accumulated) <= tail_prob:
  //   G <= logT + log(2 a^2 eps) + (log p + lgamma(1 + kappa)) / kappa.
  const double stop_offset = std::log(2.0 * vol_a_sq * config.tail_mass) +
                             (std::log(config.tail_prob) + std::lgamma(1.0 + kappa)) / kappa;

  // Volatility of log W = H - 2K in the large-W regime, for wide-step caps.
  const double var_lw = rotation
      ? 2.0 + 4.0 * (sp.alpha_sq + 0.5 * sp.beta * sp.beta) - 4.0 * sp.beta
      : 2.0 + 4.0 * sp.alpha_sq;
  const double sd_lw = std::sqrt(var_lw);
  // Below this level the coefficients are state-dependent (clamps active).
  const double coef_floor =
      std::log(std::max({std::sqrt(sp.alpha_sq), std::sqrt(2.0) * sp.beta, 1.0}));
  const double log_thresh = std::log(config.switch_threshold);

  const ZigguratNormal& zig = ziggurat();

  ReducedOutcome out;
  double K = 0.0;
  const double H0 = std::log(config.W0);
  double H = H0;
  double logT = -kInf;
  double lw_min = H0;  // running minimum of log W
  double tau = 0.0;

  if (config.dtau > 0.0) {
    bool converged = false;
    for (std::uint64_t step = 0; step < 4000000000ULL; ++step) {
      const double logW = H - 2.0 * K;
      const double G = 2.0 * (H - H0) - 2.0 * K;

      const double W = std::max(std::exp(logW), 1e-300);
      const PlanarCoefficients coeffs =
          rotation ? coefficients_rotation_mixture(sp.alpha_sq, sp.beta, W)
                   : coefficients_reflection_synchronous(sp.alpha_sq, W);

      // Step size: fine by default; wide when the state is far above both
      // the contributing zone of the integral and every state-dependent
      // level, so the dynamics are an exact constant-coefficient Gaussian.
      double dtau_step = config.dtau;
      if (logT != -kInf) {
        const double gap = logT - G;
        const bool dipped = lw_min < log_thresh;
        const double floor_lw =
            dipped ? coef_floor + 5.0 : std::max(log_thresh, coef_floor) + 20.0;
        const bool eligible =
            dipped ? logW > coef_floor + 8.0
                   : logW > std::max(log_thresh, coef_floor) + 25.0;
        if (gap > 43.0 && eligible) {
          const double by_gap = (gap - 40.0) / (3.0 * vol_a);
          const double by_lw = (logW - floor_lw) / (4.0 * sd_lw);
          const double wide = std::min(by_gap * by_gap, by_lw * by_lw);
          dtau_step = std::max(config.dtau, wide);
        }
      }
      dtau_step = std::min(dtau_step, config.tau_horizon - tau);

      // Accumulate the pre-step contribution in log space; skip terms more
      // than 40 nats below the running total.
      const double term = std::log(0.25 * dtau_step) + G;
      if (logT == -kInf) {
        logT = term;
      } else if (term > logT - 40.0) {
        logT = log_add_exp(logT, term);
      }

      const Increment inc = advance(coeffs, dtau_step, zig(rng), zig(rng));
      K += inc.dK;
      H += inc.dH;
      tau += dtau_step;
      out.steps += 1;

      if (!std::isfinite(K) || !std::isfinite(H)) {
        out.aborted = true;
        break;
      }
      lw_min = std::min(lw_min, H - 2.0 * K);

      const double G_post = 2.0 * (H - H0) - 2.0 * K;
      if (logT != -kInf && G_post <= logT + stop_offset) {
        converged = true;
        break;
      }
      if (tau >= config.tau_horizon) {
        out.truncated = true;
        break;
      }
    }
    if (!converged && !out.aborted) out.truncated = true;
  }

  out.log_scaledT = logT;
  out.scaledT = std::exp(logT);
  out.absorbed = lw_min >= log_thresh;
  out.tau_end = tau;
  return out;
}

}  // namespace coupling
