#include "cremid/linalg.hpp"

#include <cmath>
#include <string>

#include "cremid/errors.hpp"

namespace cremid {
namespace {

Matrix cholesky_lower(const Matrix& m) {
  const Eigen::Index n = m.rows();
  Matrix l = Matrix::Zero(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    double d = m(j, j);
    for (Eigen::Index k = 0; k < j; ++k) d -= l(j, k) * l(j, k);
    if (!(d > 0.0) || !std::isfinite(d)) {
      throw NumericalError("Cholesky factorization failed at pivot " + std::to_string(j));
    }
    const double ljj = std::sqrt(d);
    l(j, j) = ljj;
    for (Eigen::Index i = j + 1; i < n; ++i) {
      double s = m(i, j);
      for (Eigen::Index k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
      l(i, j) = s / ljj;
    }
  }
  return l;
}

}  // namespace

SpdMatrix::SpdMatrix(const Matrix& m) {
  if (m.rows() != m.cols() || m.rows() == 0) {
    throw NumericalError("SPD matrix must be square and non-empty");
  }
  if (!m.allFinite()) throw NumericalError("SPD matrix has non-finite entries");
  const double scale = m.cwiseAbs().maxCoeff();
  const double asym = (m - m.transpose()).cwiseAbs().maxCoeff();
  if (asym > 1e-12 * std::max(scale, 1e-300)) {
    throw NumericalError("matrix is not symmetric");
  }
  m_ = 0.5 * (m + m.transpose());
  l_ = cholesky_lower(m_);
  log_det_ = 2.0 * l_.diagonal().array().log().sum();
}

SpdMatrix SpdMatrix::identity(int dim) { return SpdMatrix(Matrix::Identity(dim, dim)); }

SpdMatrix SpdMatrix::from_cholesky(const Matrix& lower) {
  Matrix l = lower.triangularView<Eigen::Lower>();
  for (Eigen::Index i = 0; i < l.rows(); ++i) {
    if (!(l(i, i) != 0.0) || !std::isfinite(l(i, i))) {
      throw NumericalError("degenerate Cholesky factor");
    }
    // Canonical factor has a positive diagonal.
    if (l(i, i) < 0.0) l.col(i) = -l.col(i);
  }
  SpdMatrix out;
  out.m_ = l * l.transpose();
  out.m_.triangularView<Eigen::StrictlyUpper>() = out.m_.transpose();
  out.l_ = l;
  out.log_det_ = 2.0 * l.diagonal().array().log().sum();
  return out;
}

SpdMatrix SpdMatrix::inverse() const {
  const Eigen::Index n = m_.rows();
  Matrix linv = l_.triangularView<Eigen::Lower>().solve(Matrix::Identity(n, n));
  Matrix inv = linv.transpose() * linv;
  return SpdMatrix(Matrix(0.5 * (inv + inv.transpose())));
}

SpdMatrix SpdMatrix::scaled(double factor) const {
  if (!(factor > 0.0) || !std::isfinite(factor)) {
    throw NumericalError("SPD scale factor must be positive and finite");
  }
  SpdMatrix out;
  out.m_ = m_ * factor;
  out.l_ = l_ * std::sqrt(factor);
  out.log_det_ = log_det_ + static_cast<double>(m_.rows()) * std::log(factor);
  return out;
}

Vector SpdMatrix::solve(const Vector& x) const {
  Vector y = l_.triangularView<Eigen::Lower>().solve(x);
  return l_.transpose().triangularView<Eigen::Upper>().solve(y);
}

double SpdMatrix::inverse_quad_form(const Vector& x) const {
  return l_.triangularView<Eigen::Lower>().solve(x).squaredNorm();
}

Vector pack_lower(const Matrix& m) {
  const Eigen::Index n = m.rows();
  Vector out(n * (n + 1) / 2);
  Eigen::Index idx = 0;
  for (Eigen::Index r = 0; r < n; ++r)
    for (Eigen::Index c = 0; c <= r; ++c) out(idx++) = m(r, c);
  return out;
}

Matrix unpack_lower(const Vector& packed, int dim) {
  if (packed.size() != static_cast<Eigen::Index>(dim) * (dim + 1) / 2) {
    throw NumericalError("packed lower-triangular vector has wrong length");
  }
  Matrix m(dim, dim);
  Eigen::Index idx = 0;
  for (int r = 0; r < dim; ++r)
    for (int c = 0; c <= r; ++c) {
      m(r, c) = packed(idx);
      m(c, r) = packed(idx);
      ++idx;
    }
  return m;
}

}  // namespace cremid
