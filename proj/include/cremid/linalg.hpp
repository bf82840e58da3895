#pragma once

#include <Eigen/Dense>

namespace cremid {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Symmetric positive-definite matrix with its lower Cholesky factor.
///
/// Construction checks symmetry (1e-12 relative) and that every Cholesky
/// pivot is positive, throwing NumericalError otherwise. The stored matrix
/// is exactly symmetrized.
class SpdMatrix {
 public:
  SpdMatrix() = default;
  explicit SpdMatrix(const Matrix& m);

  static SpdMatrix identity(int dim);
  /// Builds from a lower Cholesky factor; the matrix is L L'.
  static SpdMatrix from_cholesky(const Matrix& lower);

  int dim() const { return static_cast<int>(m_.rows()); }
  const Matrix& matrix() const { return m_; }
  const Matrix& cholesky() const { return l_; }
  double log_det() const { return log_det_; }
  double operator()(int r, int c) const { return m_(r, c); }

  SpdMatrix inverse() const;
  SpdMatrix scaled(double factor) const;

  /// M^{-1} x through two triangular solves.
  Vector solve(const Vector& x) const;
  /// x' M^{-1} x.
  double inverse_quad_form(const Vector& x) const;

 private:
  Matrix m_;
  Matrix l_;
  double log_det_ = 0.0;
};

/// Packs the lower triangle row by row: (0,0), (1,0), (1,1), (2,0), ...
Vector pack_lower(const Matrix& m);
Matrix unpack_lower(const Vector& packed, int dim);

}  // namespace cremid
