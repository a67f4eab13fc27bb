#pragma once

// Liu, Liu-type and stochastic restricted estimators built on a converged
// logistic MLE fit.

#include <array>
#include <cctype>
#include <optional>
#include <string>
#include <string_view>
#include <utility>

#include "srlte/errors.hpp"
#include "srlte/linalg.hpp"
#include "srlte/model.hpp"

namespace srlte {

enum class EstimatorKind { MLE, LE, LTE, SRE, SRLE, SRLTE };

inline constexpr std::array<EstimatorKind, 6> kAllEstimators = {
    EstimatorKind::MLE, EstimatorKind::LE,   EstimatorKind::LTE,
    EstimatorKind::SRE, EstimatorKind::SRLE, EstimatorKind::SRLTE};

inline std::string_view to_string(EstimatorKind kind) {
  switch (kind) {
    case EstimatorKind::MLE: return "MLE";
    case EstimatorKind::LE: return "LE";
    case EstimatorKind::LTE: return "LTE";
    case EstimatorKind::SRE: return "SRE";
    case EstimatorKind::SRLE: return "SRLE";
    case EstimatorKind::SRLTE: return "SRLTE";
  }
  return "?";
}

// Case-insensitive.
inline EstimatorKind parse_estimator(std::string_view name) {
  std::string upper(name);
  for (auto& c : upper) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  for (auto kind : kAllEstimators)
    if (to_string(kind) == upper) return kind;
  throw InputError("unknown estimator '" + std::string(name) + "'");
}

inline bool uses_restriction(EstimatorKind kind) {
  return kind == EstimatorKind::SRE || kind == EstimatorKind::SRLE ||
         kind == EstimatorKind::SRLTE;
}

inline bool uses_params(EstimatorKind kind) {
  return kind != EstimatorKind::MLE && kind != EstimatorKind::SRE;
}

// Stochastic linear restriction h = H beta + v, Cov(v) = Psi. q = 0 (no
// rows) encodes "no restriction".
class RestrictionSpec {
 public:
  RestrictionSpec(Mat h_matrix, Vec h, Mat psi)
      : h_matrix_(std::move(h_matrix)), h_(std::move(h)), psi_(std::move(psi)) {
    validate();
    if (q() > 0) {
      const auto psi_llt = Eigen::LLT<Mat>(psi_);
      precision_ = linalg::symmetrize(h_matrix_.transpose() * psi_llt.solve(h_matrix_));
      precision_rhs_ = h_matrix_.transpose() * psi_llt.solve(h_);
    } else {
      precision_ = Mat::Zero(dim(), dim());
      precision_rhs_ = Vec::Zero(dim());
    }
  }

  static RestrictionSpec empty(Eigen::Index dim) {
    return RestrictionSpec(Mat(0, dim), Vec(0), Mat(0, 0));
  }

  const Mat& h_matrix() const noexcept { return h_matrix_; }
  const Vec& h() const noexcept { return h_; }
  const Mat& psi() const noexcept { return psi_; }
  Eigen::Index q() const noexcept { return h_matrix_.rows(); }
  Eigen::Index dim() const noexcept { return h_matrix_.cols(); }

  // H^T Psi^{-1} H and H^T Psi^{-1} h.
  const Mat& precision() const noexcept { return precision_; }
  const Vec& precision_rhs() const noexcept { return precision_rhs_; }

 private:
  void validate() const {
    const auto q = h_matrix_.rows();
    if (h_.size() != q)
      throw InputError("dimension-mismatch", "restriction vector h has " +
                                                 std::to_string(h_.size()) + " entries, H has " +
                                                 std::to_string(q) + " rows");
    if (psi_.rows() != q || psi_.cols() != q)
      throw InputError("dimension-mismatch", "Psi must be " + std::to_string(q) + "x" +
                                                 std::to_string(q));
    if (q > h_matrix_.cols())
      throw InputError("restriction has more rows than coefficients");
    if (q == 0) return;
    if (!h_matrix_.allFinite() || !h_.allFinite() || !psi_.allFinite())
      throw InputError("restriction contains non-finite values");
    if (linalg::rank(h_matrix_) != q) throw InputError("H must have full row rank");
    if (!linalg::is_spd(psi_)) throw InputError("Psi must be symmetric positive definite");
  }

  Mat h_matrix_;
  Vec h_;
  Mat psi_;
  Mat precision_;
  Vec precision_rhs_;
};

struct EstimatorParams {
  double k = 1.0;
  double d = 0.0;
};

struct EstimateResult {
  EstimatorKind kind = EstimatorKind::MLE;
  Vec beta;
  std::optional<EstimatorParams> params;
  std::optional<RestrictionSpec> restriction;
};

namespace detail {

inline void require_converged(const MleFit& fit) {
  if (!fit.converged)
    throw NumericalError("not-converged", "estimators require a converged MLE fit");
}

inline void require_liu_d(double d) {
  if (!(d > 0.0 && d < 1.0))
    throw ParameterDomainError("Liu parameter d must lie in (0, 1), got " + std::to_string(d));
}

inline void require_positive_k(double k) {
  if (!(k > 0.0))
    throw ParameterDomainError("biasing parameter k must be positive, got " + std::to_string(k));
}

inline void require_dim(const MleFit& fit, const RestrictionSpec& r) {
  if (r.dim() != fit.dim())
    throw InputError("dimension-mismatch", "restriction acts on " + std::to_string(r.dim()) +
                                               " coefficients, fit has " +
                                               std::to_string(fit.dim()));
}

}  // namespace detail

// F_d = (C + I)^{-1} (C + d I)
inline Mat filter_fd(const Mat& c, double d) {
  const auto dim = c.rows();
  const Mat shifted = c + linalg::identity(dim);
  return linalg::cholesky_or_throw(shifted, "C + I").solve(c + d * linalg::identity(dim));
}

// F_kd = (C + k I)^{-1} (C - d I)
inline Mat filter_fkd(const Mat& c, double k, double d) {
  detail::require_positive_k(k);
  const auto dim = c.rows();
  const Mat shifted = c + k * linalg::identity(dim);
  return linalg::cholesky_or_throw(shifted, "C + kI").solve(c - d * linalg::identity(dim));
}

inline EstimateResult mle(const MleFit& fit) {
  detail::require_converged(fit);
  return {EstimatorKind::MLE, fit.beta, std::nullopt, std::nullopt};
}

inline EstimateResult liu(const MleFit& fit, double d) {
  detail::require_converged(fit);
  detail::require_liu_d(d);
  return {EstimatorKind::LE, filter_fd(fit.info, d) * fit.beta, EstimatorParams{1.0, d},
          std::nullopt};
}

inline EstimateResult liu_type(const MleFit& fit, double k, double d) {
  detail::require_converged(fit);
  detail::require_positive_k(k);
  return {EstimatorKind::LTE, filter_fkd(fit.info, k, d) * fit.beta, EstimatorParams{k, d},
          std::nullopt};
}

// (C + H^T Psi^{-1} H)^{-1} (X^T W z + H^T Psi^{-1} h)
inline Vec sre_beta(const MleFit& fit, const RestrictionSpec& r) {
  detail::require_dim(fit, r);
  if (r.q() == 0) return fit.beta;
  const Mat combined = fit.info + r.precision();
  return linalg::cholesky_or_throw(combined, "C + H^T Psi^{-1} H")
      .solve(fit.xtwz + r.precision_rhs());
}

inline EstimateResult sre(const MleFit& fit, const RestrictionSpec& r) {
  detail::require_converged(fit);
  return {EstimatorKind::SRE, sre_beta(fit, r), std::nullopt, r};
}

inline EstimateResult srle(const MleFit& fit, const RestrictionSpec& r, double d) {
  detail::require_converged(fit);
  detail::require_liu_d(d);
  return {EstimatorKind::SRLE, filter_fd(fit.info, d) * sre_beta(fit, r),
          EstimatorParams{1.0, d}, r};
}

inline EstimateResult srlte(const MleFit& fit, const RestrictionSpec& r, double k, double d) {
  detail::require_converged(fit);
  detail::require_positive_k(k);
  return {EstimatorKind::SRLTE, filter_fkd(fit.info, k, d) * sre_beta(fit, r),
          EstimatorParams{k, d}, r};
}

// Dispatch by tag. `params` is required for LE/LTE/SRLE/SRLTE and `r` for the
// restricted kinds.
inline EstimateResult estimate(EstimatorKind kind, const MleFit& fit,
                               const std::optional<RestrictionSpec>& r,
                               const std::optional<EstimatorParams>& params) {
  if (uses_params(kind) && !params)
    throw InputError(std::string(to_string(kind)) + " needs biasing parameters");
  if (uses_restriction(kind) && !r)
    throw InputError(std::string(to_string(kind)) + " needs a restriction (H, h, Psi)");
  switch (kind) {
    case EstimatorKind::MLE: return mle(fit);
    case EstimatorKind::LE: return liu(fit, params->d);
    case EstimatorKind::LTE: return liu_type(fit, params->k, params->d);
    case EstimatorKind::SRE: return sre(fit, *r);
    case EstimatorKind::SRLE: return srle(fit, *r, params->d);
    case EstimatorKind::SRLTE: return srlte(fit, *r, params->k, params->d);
  }
  throw InputError("unknown estimator kind");
}

}  // namespace srlte
