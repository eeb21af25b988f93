#include "coupling/kolmogorov.hpp"

#include "coupling/rng.hpp"

#include <bit>
#include <cmath>
#include <stdexcept>

namespace coupling {

namespace {

// Stepping state for one coupling run. Reflection phases use a
// distance-adaptive step (resolution `dt_base` at distances comparable to
// `scale`, scaled quadratically), so long excursions away from the target
// cost O(1) steps per multiplicative change while near-target hitting stays
// finely resolved. Synchronization is deterministic and integrated exactly.
struct KolmogorovSim {
  double U, V, t;
  double eps_U, eps_V, scale, dt_base, horizon;
  std::uint64_t steps = 0;
  std::mt19937_64& rng;
  const ZigguratNormal& zig;

  KolmogorovSim(double U0, double V0, double eU, double eV, double s,
                double dt0, double hor, std::mt19937_64& r)
      : U(U0), V(V0), t(0.0), eps_U(eU), eps_V(eV), scale(s), dt_base(dt0),
        horizon(hor), rng(r), zig(ziggurat()) {}

  bool coupled() const { return std::abs(U) <= eps_U && std::abs(V) <= eps_V; }

  double local_step(double ref) const {
    const double rel = ref / scale;
    return dt_base * rel * rel;
  }

  // Reflection (dU = 2 dB, dV = U dt, left point) until U hits `target`
  // exactly; the crossing step is linearly interpolated and U is snapped to
  // the target. Returns false on horizon exhaustion.
  bool reflect_to_target(double target) {
    for (;;) {
      if (t >= horizon) return false;
      const double g = U - target;
      if (g == 0.0) return true;
      double h = local_step(std::max(std::abs(g), std::abs(target)));
      h = std::min(h, horizon - t);
      const double U_new = U + 2.0 * std::sqrt(h) * zig(rng);
      ++steps;
      const double g_new = U_new - target;
      if (g * g_new <= 0.0) {
        const double f = g / (g - g_new);
        V += U * f * h;
        t += f * h;
        U = target;
        return true;
      }
      V += U * h;
      t += h;
      U = U_new;
    }
  }

  // Reflection until U is strictly on the opposite side of zero from V
  // (so a synchronization phase will drive V toward zero). No snapping:
  // any post-step sign flip ends the phase.
  bool reflect_to_flip() {
    const double v_sign = V > 0.0 ? 1.0 : -1.0;
    const double ref0 = std::max(std::abs(U), eps_U);
    for (;;) {
      if (t >= horizon) return false;
      if (U * v_sign < 0.0) return true;
      double h = local_step(std::max(std::abs(U), ref0));
      h = std::min(h, horizon - t);
      const double U_new = U + 2.0 * std::sqrt(h) * zig(rng);
      ++steps;
      V += U * h;
      t += h;
      U = U_new;
    }
  }

  // Synchronization: U frozen, V moves at rate U; exact jump to V = 0.
  // Requires U and V on opposite sides (or V already zero).
  bool sync_to_zero() {
    if (V == 0.0) return true;
    const double need = -V / U;
    if (!(need > 0.0) || t + need >= horizon) {
      V += U * std::max(horizon - t, 0.0);
      t = horizon;
      return false;
    }
    t += need;
    V = 0.0;
    return true;
  }

  // Ensure V == 0 with U on a usable side: flip U first when signs agree.
  bool settle_V() {
    if (V == 0.0) return true;
    if (U * V >= 0.0 && !reflect_to_flip()) return false;
    return sync_to_zero();
  }
};

}  // namespace

KolmogorovOutcome couple_kolmogorov(double U0, double V0, double dt,
                                    std::mt19937_64& rng, double horizon) {
  if (!(dt > 0.0)) throw std::invalid_argument("kolmogorov coupling: dt must be positive");
  if (!(horizon > 0.0)) {
    throw std::invalid_argument("kolmogorov coupling: horizon must be positive");
  }
  if (!std::isfinite(U0) || !std::isfinite(V0)) {
    throw std::invalid_argument("kolmogorov coupling: start must be finite");
  }

  KolmogorovOutcome out;
  const double scale = std::abs(U0) > 0.0 ? std::abs(U0) : std::cbrt(std::abs(V0));
  if (scale == 0.0) {  // already at the origin
    out.coupled = true;
    return out;
  }
  const double eps_U = 1e-4 * scale;
  const double eps_V = 1e-4 * scale * scale * scale;

  KolmogorovSim sim(U0, V0, eps_U, eps_V, scale, dt, horizon, rng);

  // Preliminary: bring V to zero so the halve-and-flip loop starts clean.
  bool alive = sim.settle_V();

  // Halve-and-flip rounds. The recorded target sequence is exact binary
  // arithmetic: each round's target is minus half the previous one.
  double target = -0.5 * sim.U;
  while (alive && !sim.coupled()) {
    alive = sim.reflect_to_target(target) && sim.settle_V();
    if (alive) {
      out.loops += 1;
      target *= -0.5;
    }
  }

  out.coupled = sim.coupled();
  out.T = sim.t;
  out.steps = sim.steps;
  return out;
}

std::vector<int> morse_thue(int length) {
  if (length < 1) {
    throw std::invalid_argument("morse-thue: length must be at least 1");
  }
  std::vector<int> bits(static_cast<std::size_t>(length));
  for (int n = 0; n < length; ++n) {
    bits[static_cast<std::size_t>(n)] =
        std::popcount(static_cast<unsigned>(n)) & 1;
  }
  return bits;
}

}  // namespace coupling
