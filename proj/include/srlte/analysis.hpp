#pragma once

// Asymptotic bias, covariance and mean squared error matrices of the
// estimator family, and the MSEM superiority checks of SRLTE against SRE,
// SRLE, LTE and LE.

#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <string_view>

#include "srlte/errors.hpp"
#include "srlte/estimators.hpp"
#include "srlte/linalg.hpp"
#include "srlte/model.hpp"

namespace srlte {

struct MsemReport {
  EstimatorKind kind = EstimatorKind::MLE;
  Vec bias;
  Mat cov;
  Mat msem;  // cov + bias bias^T
  double smse = 0.0;
};

// A boolean verdict with the scalar it was decided on.
struct LemmaResult {
  bool holds = false;
  double value = 0.0;
};

enum class Theorem { T1, T2, T3, T4 };

inline std::string_view to_string(Theorem t) {
  switch (t) {
    case Theorem::T1: return "T1";
    case Theorem::T2: return "T2";
    case Theorem::T3: return "T3";
    case Theorem::T4: return "T4";
  }
  return "?";
}

// Estimator SRLTE is compared against for each theorem.
inline EstimatorKind competitor(Theorem t) {
  switch (t) {
    case Theorem::T1: return EstimatorKind::SRE;
    case Theorem::T2: return EstimatorKind::SRLE;
    case Theorem::T3: return EstimatorKind::LTE;
    case Theorem::T4: return EstimatorKind::LE;
  }
  return EstimatorKind::SRE;
}

struct ComparisonVerdict {
  Theorem theorem = Theorem::T1;
  EstimatorKind other = EstimatorKind::SRE;
  // Unset for T3, which has no hypotheses.
  std::optional<double> eigencondition_value;
  std::optional<bool> eigencondition_holds;
  // +inf when the matrix inside the quadratic form is not invertible.
  std::optional<double> quadform_value;
  std::optional<bool> quadform_holds;
  // Direct check: Delta = MSEM[other] - MSEM[SRLTE] is PSD up to tolerance.
  bool delta_psd = false;
  double delta_min_eigenvalue = 0.0;
  double delta_norm = 0.0;
  // Delta vanishes: the two estimators have the same MSEM.
  bool tie = false;
  Mat delta;

  bool hypotheses_hold() const {
    return eigencondition_holds.value_or(true) && quadform_holds.value_or(true);
  }
};

inline constexpr double kLemmaTolerance = 1e-12;
inline constexpr double kPsdTolerance = 1e-8;

// M - a a^T >= 0  iff  a^T M^{-1} a <= 1, for M > 0.
inline LemmaResult lemma_psd_minus_dyad(const Mat& m, const Vec& a) {
  if (!linalg::is_spd(m)) throw InputError("lemma_psd_minus_dyad: M must be SPD");
  if (a.size() != m.rows()) throw InputError("dimension-mismatch", "vector length mismatch");
  const double value = a.dot(Eigen::LLT<Mat>(m).solve(a));
  return {value <= 1.0 + kLemmaTolerance, value};
}

// M > N  iff  lambda_max(N M^{-1}) < 1, for M, N > 0.
inline LemmaResult lemma_ordering(const Mat& m, const Mat& n) {
  if (!linalg::is_spd(m) || !linalg::is_spd(n))
    throw InputError("lemma_ordering: both matrices must be SPD");
  if (m.rows() != n.rows()) throw InputError("dimension-mismatch", "matrix size mismatch");
  const double value = linalg::max_eigenvalue_of_ratio(Eigen::LLT<Mat>(m), n);
  return {value < 1.0 - kLemmaTolerance, value};
}

namespace detail {

// Everything the MSEM formulas share for one fit/restriction pair.
struct MsemTerms {
  Mat c;
  Mat c_inv;
  Mat s_inv;  // (C + H^T Psi^{-1} H)^{-1}
};

inline MsemTerms msem_terms(const MleFit& fit, const std::optional<RestrictionSpec>& r) {
  MsemTerms t;
  t.c = fit.info;
  t.c_inv = linalg::spd_inverse(fit.info, "C");
  if (r && r->q() > 0) {
    detail::require_dim(fit, *r);
    t.s_inv = linalg::spd_inverse(fit.info + r->precision(), "C + H^T Psi^{-1} H");
  } else {
    t.s_inv = t.c_inv;
  }
  return t;
}

// Bias of F_kd-filtered estimators: (F_kd - I) beta = -(d + k)(C + kI)^{-1} beta.
inline Vec liu_type_bias(const Mat& c, double k, double d, const Vec& beta) {
  const Mat shifted = c + k * linalg::identity(c.rows());
  return -(d + k) * linalg::cholesky_or_throw(shifted, "C + kI").solve(beta);
}

// Bias of F_d-filtered estimators: (F_d - I) beta = (d - 1)(C + I)^{-1} beta.
inline Vec liu_bias(const Mat& c, double d, const Vec& beta) {
  const Mat shifted = c + linalg::identity(c.rows());
  return (d - 1.0) * linalg::cholesky_or_throw(shifted, "C + I").solve(beta);
}

inline MsemReport assemble(EstimatorKind kind, Vec bias, const Mat& cov) {
  MsemReport rep;
  rep.kind = kind;
  rep.bias = std::move(bias);
  rep.cov = linalg::symmetrize(cov);
  rep.msem = rep.cov + rep.bias * rep.bias.transpose();
  rep.smse = rep.msem.trace();
  return rep;
}

inline MsemReport msem_from_terms(EstimatorKind kind, const MsemTerms& t,
                                  const std::optional<EstimatorParams>& params,
                                  const Vec& beta_true) {
  const auto dim = t.c.rows();
  switch (kind) {
    case EstimatorKind::MLE: return assemble(kind, Vec::Zero(dim), t.c_inv);
    case EstimatorKind::SRE: return assemble(kind, Vec::Zero(dim), t.s_inv);
    case EstimatorKind::LE:
    case EstimatorKind::SRLE: {
      const Mat fd = filter_fd(t.c, params->d);
      const Mat& inner = kind == EstimatorKind::LE ? t.c_inv : t.s_inv;
      return assemble(kind, liu_bias(t.c, params->d, beta_true), fd * inner * fd.transpose());
    }
    case EstimatorKind::LTE:
    case EstimatorKind::SRLTE: {
      const Mat fkd = filter_fkd(t.c, params->k, params->d);
      const Mat& inner = kind == EstimatorKind::LTE ? t.c_inv : t.s_inv;
      return assemble(kind, liu_type_bias(t.c, params->k, params->d, beta_true),
                      fkd * inner * fkd.transpose());
    }
  }
  throw InputError("unknown estimator kind");
}

}  // namespace detail

// MSEM of an estimator at the true coefficient vector `beta_true`. The
// restricted kinds use (C + H^T Psi^{-1} H)^{-1} as the covariance core.
inline MsemReport msem_of(EstimatorKind kind, const MleFit& fit,
                          const std::optional<RestrictionSpec>& r,
                          const std::optional<EstimatorParams>& params, const Vec& beta_true) {
  if (uses_params(kind) && !params)
    throw InputError(std::string(to_string(kind)) + " MSEM needs biasing parameters");
  if (uses_restriction(kind) && !r)
    throw InputError(std::string(to_string(kind)) + " MSEM needs a restriction");
  if (beta_true.size() != fit.dim())
    throw InputError("dimension-mismatch", "beta_true length does not match the fit");
  if (params) {
    if (kind == EstimatorKind::LE || kind == EstimatorKind::SRLE) detail::require_liu_d(params->d);
    if (kind == EstimatorKind::LTE || kind == EstimatorKind::SRLTE)
      detail::require_positive_k(params->k);
  }
  const auto terms = detail::msem_terms(fit, uses_restriction(kind) ? r : std::nullopt);
  return detail::msem_from_terms(kind, terms, params, beta_true);
}

namespace detail {

// u^T M^{-1} u, or +inf when M is not positive definite. A zero vector gives
// zero regardless of M.
inline double quadratic_form(const Mat& m, const Vec& u) {
  if (u.squaredNorm() == 0.0) return 0.0;
  auto llt = linalg::try_cholesky(m);
  if (!llt) return std::numeric_limits<double>::infinity();
  return u.dot(llt->solve(u));
}

// lambda_max(N M^{-1}); +inf when M is not positive definite.
inline double ordering_value(const Mat& m, const Mat& n) {
  auto llt = linalg::try_cholesky(m);
  if (!llt) return std::numeric_limits<double>::infinity();
  return linalg::max_eigenvalue_of_ratio(*llt, n);
}

inline void finish_delta(ComparisonVerdict& v, const Mat& delta, double scale) {
  v.delta = linalg::symmetrize(delta);
  const Vec ev = linalg::sym_eigenvalues(v.delta);
  v.delta_min_eigenvalue = ev.minCoeff();
  v.delta_norm = ev.cwiseAbs().maxCoeff();
  v.tie = v.delta_norm <= kLemmaTolerance * std::max(scale, 1.0);
  v.delta_psd = v.tie || v.delta_min_eigenvalue >= -kPsdTolerance * v.delta_norm;
}

}  // namespace detail

// Evaluates one of the four superiority theorems of SRLTE(k, d) against
// `competitor(theorem)`. `other` carries d for the Liu competitors (T2, T4);
// T1 and T3 ignore it.
inline ComparisonVerdict compare(Theorem theorem, const MleFit& fit, const RestrictionSpec& r,
                                 const EstimatorParams& srlte_params,
                                 const std::optional<EstimatorParams>& other,
                                 const Vec& beta_true) {
  detail::require_dim(fit, r);
  detail::require_positive_k(srlte_params.k);
  if (beta_true.size() != fit.dim())
    throw InputError("dimension-mismatch", "beta_true length does not match the fit");
  const bool liu_competitor = theorem == Theorem::T2 || theorem == Theorem::T4;
  if (liu_competitor) {
    if (!other) throw InputError("Liu competitor needs its d parameter");
    detail::require_liu_d(other->d);
  }

  const auto t = detail::msem_terms(fit, r);
  const Mat fkd = filter_fkd(t.c, srlte_params.k, srlte_params.d);
  const Vec b1 = detail::liu_type_bias(t.c, srlte_params.k, srlte_params.d, beta_true);
  const Mat srlte_cov = linalg::symmetrize(fkd * t.s_inv * fkd.transpose());
  const Mat srlte_msem = srlte_cov + b1 * b1.transpose();

  ComparisonVerdict v;
  v.theorem = theorem;
  v.other = competitor(theorem);

  switch (theorem) {
    case Theorem::T1: {
      // D1 = S^{-1} - F_kd S^{-1} F_kd, Delta1 = D1 - b1 b1^T.
      const Mat d1 = t.s_inv - srlte_cov;
      v.eigencondition_value = detail::ordering_value(t.s_inv, srlte_cov);
      v.quadform_value = detail::quadratic_form(d1, b1);
      detail::finish_delta(v, d1 - b1 * b1.transpose(), linalg::spectral_norm(t.s_inv));
      break;
    }
    case Theorem::T3: {
      // Bias terms cancel; Delta3 = F_kd (C^{-1} - S^{-1}) F_kd.
      const Mat delta = fkd * (t.c_inv - t.s_inv) * fkd.transpose();
      detail::finish_delta(v, delta, linalg::spectral_norm(srlte_msem));
      break;
    }
    case Theorem::T2:
    case Theorem::T4: {
      // M = F_d core F_d with core S^{-1} (SRLE) or C^{-1} (LE).
      const Mat fd = filter_fd(t.c, other->d);
      const Vec b2 = detail::liu_bias(t.c, other->d, beta_true);
      const Mat& core = theorem == Theorem::T2 ? t.s_inv : t.c_inv;
      const Mat other_cov = linalg::symmetrize(fd * core * fd.transpose());
      const Mat dmat = other_cov - srlte_cov;
      const Mat with_b2 = dmat + b2 * b2.transpose();
      v.eigencondition_value = detail::ordering_value(other_cov, srlte_cov);
      v.quadform_value = detail::quadratic_form(with_b2, b1);
      detail::finish_delta(v, with_b2 - b1 * b1.transpose(),
                           linalg::spectral_norm(other_cov + b2 * b2.transpose()));
      break;
    }
  }
  if (v.eigencondition_value)
    v.eigencondition_holds = *v.eigencondition_value < 1.0 - kLemmaTolerance;
  if (v.quadform_value) v.quadform_holds = *v.quadform_value <= 1.0 + kLemmaTolerance;
  return v;
}

}  // namespace srlte
