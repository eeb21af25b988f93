#include "coupling/geometry.hpp"

#include <cmath>
#include <string>

namespace coupling {

namespace {

void require_square(const Matrix& m, const char* what) {
  if (m.rows() != m.cols() || m.rows() < 1) {
    throw std::invalid_argument(std::string(what) + ": matrix must be square and non-empty");
  }
}

void require_skew(const Matrix& m, const char* what) {
  const double scale = 1.0 + m.cwiseAbs().maxCoeff();
  const double asym = (m + m.transpose()).cwiseAbs().maxCoeff();
  if (!(asym <= 1e-10 * scale)) {
    throw std::invalid_argument(std::string(what) + ": matrix must be skew-symmetric");
  }
}

// Copy the strict lower triangle and mirror it with exact negation, so the
// result is skew to the last bit even if the input was only skew to roundoff.
Matrix mirror_skew(const Matrix& m) {
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

}  // namespace

// ---- UnitVector ----

UnitVector::UnitVector(const Vector& v) {
  if (v.size() < 1) throw std::invalid_argument("unit vector: empty input");
  const double norm = v.norm();
  if (!(norm > 0.0) || !std::isfinite(norm)) {
    throw std::invalid_argument("unit vector: input must be nonzero and finite");
  }
  v_ = v / norm;
}

// ---- SkewUnitMatrix ----

SkewUnitMatrix::SkewUnitMatrix(const Matrix& m) {
  require_square(m, "skew unit matrix");
  require_skew(m, "skew unit matrix");
  Matrix z = mirror_skew(m);
  const double norm = z.norm();  // Frobenius
  if (!(norm > 0.0) || !std::isfinite(norm)) {
    throw std::invalid_argument("skew unit matrix: input must be nonzero and finite");
  }
  z_ = z / norm;
}

// ---- Control decomposition and validity ----

ControlMatrix decompose_control(const Matrix& J) {
  require_square(J, "control decomposition");
  if (!J.allFinite()) {
    throw std::invalid_argument("control decomposition: entries must be finite");
  }
  ControlMatrix c;
  c.J = J;
  c.S = 0.5 * (J + J.transpose());
  c.A = J - c.S;  // complement of S, so S + A reproduces J to roundoff
  return c;
}

bool validate_control(const ControlMatrix& control, double tol) {
  if (!(tol >= 0.0)) throw std::invalid_argument("control validity: tolerance must be >= 0");
  require_square(control.J, "control validity");
  Eigen::SelfAdjointEigenSolver<Matrix> es(control.J.transpose() * control.J,
                                           Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) {
    throw NumericError("control validity: eigenvalue solve failed");
  }
  return es.eigenvalues().maxCoeff() <= 1.0 + tol;
}

// ---- Areal direction ----

std::pair<double, std::optional<SkewUnitMatrix>> normalize_area(const Matrix& m) {
  require_square(m, "area normalization");
  require_skew(m, "area normalization");
  const double u = mirror_skew(m).norm();
  if (!std::isfinite(u)) {
    throw std::invalid_argument("area normalization: entries must be finite");
  }
  if (u == 0.0) return {0.0, std::nullopt};
  return {u, SkewUnitMatrix(m)};
}

// ---- Planar rotation ----

Matrix planar_rotation(const SkewUnitMatrix& Z, double theta) {
  if (Z.dim() != 2) {
    throw std::invalid_argument("planar rotation: skew direction must be 2x2");
  }
  const Matrix& z = Z.entries();
  const Matrix defect = z * z + 0.5 * Matrix::Identity(2, 2);
  if (!(defect.cwiseAbs().maxCoeff() <= 1e-12)) {
    throw std::invalid_argument("planar rotation: Z Z must equal -I/2");
  }
  return std::cos(theta) * Matrix::Identity(2, 2) -
         std::sqrt(2.0) * std::sin(theta) * z;
}

// ---- PSD square root ----

Matrix principal_sqrt_psd(const Matrix& M) {
  require_square(M, "psd square root");
  const double scale = 1.0 + M.cwiseAbs().maxCoeff();
  if (!((M - M.transpose()).cwiseAbs().maxCoeff() <= 1e-8 * scale)) {
    throw std::invalid_argument("psd square root: matrix must be symmetric");
  }
  const Eigen::Index n = M.rows();

  if (n == 1) {
    double v = M(0, 0);
    if (v < -1e-6) throw NumericError("psd square root: matrix is not PSD");
    Matrix r(1, 1);
    r(0, 0) = std::sqrt(std::max(v, 0.0));
    return r;
  }

  if (n == 2) {
    // Closed form: R = (M + sqrt(det) I) / sqrt(trace + 2 sqrt(det)).
    const double a = M(0, 0);
    const double b = 0.5 * (M(0, 1) + M(1, 0));
    const double c = M(1, 1);
    const double tr = a + c;
    const double gap = std::hypot(a - c, 2.0 * b);
    const double lmin = 0.5 * (tr - gap);
    if (lmin < -1e-6) throw NumericError("psd square root: matrix is not PSD");
    const double det = std::max(a * c - b * b, 0.0);
    const double s = std::sqrt(det);
    const double denom = std::sqrt(std::max(tr, 0.0) + 2.0 * s);
    Matrix r = Matrix::Zero(2, 2);
    if (denom > 0.0) {
      r(0, 0) = (std::max(a, 0.0) + s) / denom;
      r(1, 1) = (std::max(c, 0.0) + s) / denom;
      r(0, 1) = r(1, 0) = b / denom;
    }
    return r;
  }

  Eigen::SelfAdjointEigenSolver<Matrix> es(M);
  if (es.info() != Eigen::Success) {
    throw NumericError("psd square root: eigenvalue solve failed");
  }
  Vector lam = es.eigenvalues();
  for (Eigen::Index i = 0; i < n; ++i) {
    if (lam(i) < -1e-6) throw NumericError("psd square root: matrix is not PSD");
    lam(i) = std::sqrt(std::max(lam(i), 0.0));
  }
  Matrix r = es.eigenvectors() * lam.asDiagonal() * es.eigenvectors().transpose();
  return 0.5 * (r + r.transpose());
}

}  // namespace coupling
