#pragma once
// The coupling control family: pure reflection, the quadratic rotation
// control, the n-dimensional mixed control, its planar closed form, and the
// state-adaptive parameter rule that feeds them.

#include "coupling/geometry.hpp"

namespace coupling {

// Which adaptive strategy drives the coupling.
enum class StrategyMode {
  kReflectionSynchronous,  // mix reflection with synchronous noise
  kReflectionRotation,     // mix reflection with an area-damping rotation
  kPureReflection,         // p = 1 always
};

struct StrategyParams {
  double alpha_sq = 1.5;  // reflection weight scale (alpha^2)
  double beta = 0.0;      // rotation angle scale
  StrategyMode mode = StrategyMode::kReflectionSynchronous;
};

// Output of the adaptive rule: reflection proportion p in [0,1], its
// complement q = 1 - p, and the rotation angle theta.
struct AdaptiveControlDecision {
  double p = 1.0;
  double q = 0.0;
  double theta = 0.0;
};

// J = I - 2 nu nu^T: reflect the noise across the hyperplane orthogonal to nu.
ControlMatrix reflection_control(const UnitVector& nu);

// J = I - theta Z - theta^2 Z^T Z, admissible for theta^2 <= 2.
ControlMatrix quadratic_rotation_control(const SkewUnitMatrix& Z, double theta);

// J = I - 2 p nu nu^T - q theta Z - q theta^2 Z^T Z with q = 1 - p:
// the affine blend of reflection with the quadratic rotation control.
ControlMatrix mixed_nd_control(const UnitVector& nu, const SkewUnitMatrix& Z,
                               const AdaptiveControlDecision& decision);

// Planar specialization: p (I - 2 nu nu^T) + q (cos(theta) I -
// sqrt(2) sin(theta) Z). Computed two equivalent ways and cross-checked.
ControlMatrix planar_mixed_control(const UnitVector& nu, const SkewUnitMatrix& Z,
                                   const AdaptiveControlDecision& decision);

// State-adaptive parameters given the area-to-distance ratio W = U / V^2.
//   reflection-synchronous: p = min{1, alpha^2 / W^2}, theta = 0
//   reflection-rotation (planar, dim == 2): p as above,
//       theta = arcsin(min{1, sqrt(2) beta / W})
//   reflection-rotation (dim > 2): theta = min{sqrt(2), beta / W}
//   pure-reflection: p = 1, theta = 0
AdaptiveControlDecision adapt_parameters(double W, const StrategyParams& params,
                                         int dim = 2);

}  // namespace coupling
