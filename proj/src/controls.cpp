#include "coupling/controls.hpp"

#include <cmath>

namespace coupling {

namespace {

void require_proportion(double p) {
  if (!(p >= 0.0 && p <= 1.0)) {
    throw std::invalid_argument("mixed control: proportion p must lie in [0, 1]");
  }
}

void require_theta(double theta) {
  if (!(theta * theta <= 2.0 + 1e-12)) {
    throw std::invalid_argument("rotation control: theta^2 must not exceed 2");
  }
}

}  // namespace

// ---- Individual controls ----

ControlMatrix reflection_control(const UnitVector& nu) {
  const Vector& v = nu.entries();
  const Eigen::Index n = v.size();
  Matrix J = Matrix::Identity(n, n) - 2.0 * (v * v.transpose());
  return decompose_control(J);
}

ControlMatrix quadratic_rotation_control(const SkewUnitMatrix& Z, double theta) {
  require_theta(theta);
  const Matrix& z = Z.entries();
  const Eigen::Index n = z.rows();
  Matrix J = Matrix::Identity(n, n) - theta * z -
             (theta * theta) * (z.transpose() * z);
  return decompose_control(J);
}

ControlMatrix mixed_nd_control(const UnitVector& nu, const SkewUnitMatrix& Z,
                               const AdaptiveControlDecision& decision) {
  require_proportion(decision.p);
  require_theta(decision.theta);
  if (nu.dim() != Z.dim()) {
    throw std::invalid_argument("mixed control: vector and skew direction dimensions differ");
  }
  const Vector& v = nu.entries();
  const Matrix& z = Z.entries();
  const Eigen::Index n = z.rows();
  const double p = decision.p;
  const double q = 1.0 - p;
  const double th = decision.theta;
  Matrix J = Matrix::Identity(n, n) - 2.0 * p * (v * v.transpose()) -
             q * th * z - q * th * th * (z.transpose() * z);
  return decompose_control(J);
}

ControlMatrix planar_mixed_control(const UnitVector& nu, const SkewUnitMatrix& Z,
                                   const AdaptiveControlDecision& decision) {
  if (nu.dim() != 2 || Z.dim() != 2) {
    throw std::invalid_argument("planar mixed control: inputs must be two-dimensional");
  }
  require_proportion(decision.p);
  const Vector& v = nu.entries();
  const Matrix& z = Z.entries();
  const double p = decision.p;
  const double q = 1.0 - p;
  const double th = decision.theta;

  // Route 1: blend the two building blocks directly.
  Matrix J_blend = p * (Matrix::Identity(2, 2) - 2.0 * (v * v.transpose())) +
                   q * planar_rotation(Z, th);

  // Route 2: expanded closed form.
  Matrix J = Matrix::Identity(2, 2) - 2.0 * p * (v * v.transpose()) -
             q * (1.0 - std::cos(th)) * Matrix::Identity(2, 2) -
             std::sqrt(2.0) * q * std::sin(th) * z;

  if (!((J - J_blend).cwiseAbs().maxCoeff() <= 1e-12)) {
    throw NumericError("planar mixed control: closed forms disagree");
  }
  return decompose_control(J);
}

// ---- Adaptive parameter rule ----

AdaptiveControlDecision adapt_parameters(double W, const StrategyParams& params,
                                         int dim) {
  if (!(W > 0.0)) {
    throw std::domain_error("adaptive parameters: W must be positive");
  }
  if (!(params.alpha_sq > 0.0)) {
    throw std::domain_error("adaptive parameters: alpha^2 must be positive");
  }
  if (params.beta < 0.0) {
    throw std::domain_error("adaptive parameters: beta must be nonnegative");
  }
  if (dim < 2) {
    throw std::domain_error("adaptive parameters: dimension must be at least 2");
  }

  AdaptiveControlDecision d;
  switch (params.mode) {
    case StrategyMode::kPureReflection:
      d.p = 1.0;
      d.theta = 0.0;
      break;
    case StrategyMode::kReflectionSynchronous:
      d.p = std::min(1.0, params.alpha_sq / (W * W));
      d.theta = 0.0;
      break;
    case StrategyMode::kReflectionRotation:
      d.p = std::min(1.0, params.alpha_sq / (W * W));
      if (dim == 2) {
        d.theta = std::asin(std::min(1.0, std::sqrt(2.0) * params.beta / W));
      } else {
        d.theta = std::min(std::sqrt(2.0), params.beta / W);
      }
      break;
  }
  d.q = 1.0 - d.p;
  return d;
}

}  // namespace coupling
