#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>

#include "srlte/errors.hpp"

namespace srlte {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

namespace linalg {

inline Mat identity(Eigen::Index dim) { return Mat::Identity(dim, dim); }

inline Mat symmetrize(const Mat& a) { return 0.5 * (a + a.transpose()); }

inline bool is_symmetric(const Mat& a, double rel_tol = 1e-10) {
  if (a.rows() != a.cols()) return false;
  const double scale = std::max(1.0, a.cwiseAbs().maxCoeff());
  return (a - a.transpose()).cwiseAbs().maxCoeff() <= rel_tol * scale;
}

// Cholesky factor of a symmetric matrix, or nullopt when the matrix is not
// numerically positive definite.
inline std::optional<Eigen::LLT<Mat>> try_cholesky(const Mat& a) {
  Eigen::LLT<Mat> llt(symmetrize(a));
  if (llt.info() != Eigen::Success) return std::nullopt;
  const auto diag = llt.matrixL().toDenseMatrix().diagonal();
  if (diag.minCoeff() <= 0.0 || !std::isfinite(diag.maxCoeff())) return std::nullopt;
  return llt;
}

inline bool is_spd(const Mat& a) {
  return a.rows() == a.cols() && a.rows() > 0 && is_symmetric(a) && try_cholesky(a).has_value();
}

inline Eigen::LLT<Mat> cholesky_or_throw(const Mat& a, const std::string& what) {
  auto llt = try_cholesky(a);
  if (!llt) throw NumericalError("conditioning", what + " is not numerically positive definite");
  return *llt;
}

// Explicit inverse of an SPD matrix through its Cholesky factor. Used only
// where a formula needs the inverse matrix itself.
inline Mat spd_inverse(const Mat& a, const std::string& what) {
  return symmetrize(cholesky_or_throw(a, what).solve(identity(a.rows())));
}

inline Vec sym_eigenvalues(const Mat& a) {
  Eigen::SelfAdjointEigenSolver<Mat> es(symmetrize(a), Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) throw NumericalError("conditioning", "eigendecomposition failed");
  return es.eigenvalues();
}

inline double min_eigenvalue(const Mat& a) { return sym_eigenvalues(a).minCoeff(); }

// Largest absolute eigenvalue of a symmetric matrix (its spectral norm).
inline double spectral_norm(const Mat& a) {
  if (a.size() == 0) return 0.0;
  return sym_eigenvalues(a).cwiseAbs().maxCoeff();
}

// lambda_max(N M^{-1}) via the congruent symmetric form L^{-1} N L^{-T},
// M = L L^T. Both forms share eigenvalues and the latter has real ones.
inline double max_eigenvalue_of_ratio(const Eigen::LLT<Mat>& m_factor, const Mat& n) {
  const Mat left = m_factor.matrixL().solve(symmetrize(n));
  const Mat congruent = m_factor.matrixL().solve(left.transpose());
  return sym_eigenvalues(congruent).maxCoeff();
}

inline double condition_number(const Mat& spd) {
  const Vec ev = sym_eigenvalues(spd);
  return ev.maxCoeff() / ev.minCoeff();
}

inline Eigen::Index rank(const Mat& a) {
  if (a.size() == 0) return 0;
  Eigen::ColPivHouseholderQR<Mat> qr(a);
  qr.setThreshold(1e-12);
  return qr.rank();
}

}  // namespace linalg
}  // namespace srlte
