#pragma once
// Coupling for the two-dimensional Kolmogorov diffusion (U, V) with
// dU = 2 dB under reflection (dU = 0 under synchronization) and dV = U dt:
// alternate reflection phases that drive U to a halved, sign-flipped target
// with synchronization phases that return V to zero, plus the Morse-Thue
// binary sequence whose digit parities mirror the sign-flip bookkeeping.

#include <cstdint>
#include <random>
#include <vector>

namespace coupling {

struct KolmogorovOutcome {
  bool coupled = false;
  double T = 0.0;         // time at coupling (or at the horizon)
  int loops = 0;          // completed halve-and-flip rounds
  std::uint64_t steps = 0;
};

// Run the halve-and-flip coupling from (U0, V0) until |U| <= 1e-4 |U0| and
// |V| <= 1e-4 |U0|^3 (thresholds follow the cubic Brownian scaling of the
// pair). `dt` is the time resolution at distances comparable to |U0|;
// reflection phases scale their step size quadratically with the current
// distance to the target, and synchronization phases (V moves at constant
// rate U) are integrated exactly. When V and U share a sign, an extra
// reflection phase first flips U across zero so synchronization converges.
KolmogorovOutcome couple_kolmogorov(double U0, double V0, double dt,
                                    std::mt19937_64& rng, double horizon);

// First `length` digits of the Morse-Thue sequence: digit n is the parity
// of the number of ones in the binary expansion of n.
std::vector<int> morse_thue(int length);

}  // namespace coupling
