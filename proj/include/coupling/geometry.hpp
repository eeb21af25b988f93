#pragma once
// Dense linear-algebra primitives for the coupling library: unit direction
// vectors, unit-norm skew matrices, the symmetric/skew decomposition of a
// coupling control, planar rotations generated by a skew matrix, and
// symmetric PSD square roots.

#include <Eigen/Dense>

#include <optional>
#include <stdexcept>
#include <utility>

namespace coupling {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Thrown when a numeric routine (eigensolve, matrix square root, state
// update) cannot produce a valid finite result.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Unit vector: Euclidean norm 1 after construction.
class UnitVector {
 public:
  explicit UnitVector(const Vector& v);
  const Vector& entries() const { return v_; }
  Eigen::Index dim() const { return v_.size(); }

 private:
  Vector v_;
};

// Skew matrix with unit Hilbert-Schmidt norm: trace(Z^T Z) = 1. The stored
// matrix is exactly skew: the upper triangle is written as the negated
// mirror of the lower triangle and the diagonal is zero.
class SkewUnitMatrix {
 public:
  explicit SkewUnitMatrix(const Matrix& m);
  const Matrix& entries() const { return z_; }
  Eigen::Index dim() const { return z_.rows(); }

 private:
  Matrix z_;
};

// A coupling control J together with its symmetric part S and skew part A,
// J = S + A.
struct ControlMatrix {
  Matrix J;
  Matrix S;
  Matrix A;
};

// Split a square matrix into symmetric and skew parts. S is computed as
// (J + J^T)/2 and A as J - S, so J = S + A is exact in floating point.
ControlMatrix decompose_control(const Matrix& J);

// A control is admissible iff every eigenvalue of J^T J is at most 1 + tol.
bool validate_control(const ControlMatrix& control, double tol);

// Frobenius norm U of a skew matrix and, when U > 0, the unit-norm
// direction Z = M / U. U == 0 is degenerate: no direction is returned and
// the caller must branch.
std::pair<double, std::optional<SkewUnitMatrix>> normalize_area(const Matrix& m);

// cos(theta) I - sqrt(2) sin(theta) Z for a planar skew unit matrix Z
// (which satisfies Z Z = -I/2); this equals the matrix exponential of
// -sqrt(2) theta Z restricted to the plane.
Matrix planar_rotation(const SkewUnitMatrix& Z, double theta);

// Symmetric PSD square root R with R R = M. Eigenvalues in [-1e-6, 0) are
// treated as roundoff and clamped to zero; anything below -1e-6 raises
// NumericError. A closed-form 2x2 path keeps the simulation loops cheap.
Matrix principal_sqrt_psd(const Matrix& M);

}  // namespace coupling
