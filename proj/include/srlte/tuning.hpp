#pragma once

// Spectral SMSE of SRLTE and the two-step (d first, then k) selection of its
// biasing parameters, plus plug-in defaults for LE, SRLE and LTE.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <vector>

#include "srlte/errors.hpp"
#include "srlte/estimators.hpp"
#include "srlte/linalg.hpp"
#include "srlte/model.hpp"

namespace srlte {

// Eigen-decomposition of C = Q diag(lambda) Q^T (lambda descending), the MLE
// in that basis, and the diagonal of Q^T (C + H^T Psi^{-1} H)^{-1} Q.
struct SpectralContext {
  Vec lambda;
  Mat q;
  Vec alpha;
  Vec b_diag;
  // ||offdiag(Q^T S^{-1} Q)||_F / ||Q^T S^{-1} Q||_F; zero when the restriction
  // commutes with C (in particular when q = 0).
  double offdiag_energy_ratio = 0.0;
};

inline SpectralContext make_spectral_context(const Vec& lambda, const Vec& b_diag,
                                             const Vec& alpha) {
  if (lambda.size() != b_diag.size() || lambda.size() != alpha.size())
    throw InputError("dimension-mismatch", "spectral context vectors differ in length");
  if (lambda.size() == 0 || lambda.minCoeff() <= 0.0 || b_diag.minCoeff() <= 0.0)
    throw InputError("spectral context needs positive eigenvalues and b entries");
  return {lambda, linalg::identity(lambda.size()), alpha, b_diag, 0.0};
}

inline SpectralContext spectral_context(const MleFit& fit,
                                        const std::optional<RestrictionSpec>& r = std::nullopt) {
  detail::require_converged(fit);
  Eigen::SelfAdjointEigenSolver<Mat> es(linalg::symmetrize(fit.info));
  if (es.info() != Eigen::Success)
    throw NumericalError("conditioning", "eigendecomposition of C failed");
  SpectralContext ctx;
  ctx.lambda = es.eigenvalues().reverse();
  ctx.q = es.eigenvectors().rowwise().reverse();
  if (ctx.lambda.minCoeff() <= 0.0)
    throw NumericalError("conditioning", "C has a non-positive eigenvalue");
  ctx.alpha = ctx.q.transpose() * fit.beta;

  if (!r || r->q() == 0) {
    ctx.b_diag = ctx.lambda.cwiseInverse();
    return ctx;
  }
  detail::require_dim(fit, *r);
  const Mat s_inv = linalg::spd_inverse(fit.info + r->precision(), "C + H^T Psi^{-1} H");
  const Mat rotated = linalg::symmetrize(ctx.q.transpose() * s_inv * ctx.q);
  ctx.b_diag = rotated.diagonal();
  Mat off = rotated;
  off.diagonal().setZero();
  ctx.offdiag_energy_ratio = off.norm() / rotated.norm();
  return ctx;
}

// Sum_i ((lambda_i - d)^2 b_ii + (d + k)^2 alpha_i^2) / (lambda_i + k)^2
inline double smse_spectral(const SpectralContext& ctx, double k, double d) {
  detail::require_positive_k(k);
  double total = 0.0;
  for (Eigen::Index i = 0; i < ctx.lambda.size(); ++i) {
    const double lam = ctx.lambda[i];
    const double num = (lam - d) * (lam - d) * ctx.b_diag[i] +
                       (d + k) * (d + k) * ctx.alpha[i] * ctx.alpha[i];
    total += num / ((lam + k) * (lam + k));
  }
  return total;
}

// Summand i of smse_spectral.
inline double smse_spectral_term(const SpectralContext& ctx, Eigen::Index i, double k, double d) {
  const double lam = ctx.lambda[i];
  return ((lam - d) * (lam - d) * ctx.b_diag[i] + (d + k) * (d + k) * ctx.alpha[i] * ctx.alpha[i]) /
         ((lam + k) * (lam + k));
}

struct DSelection {
  double d = 0.0;
  Eigen::Index index = 0;  // arg min, smallest index on ties
  Vec bounds;              // lambda_i b_ii / (b_ii + 1)
};

// d = min_i lambda_i b_ii / (b_ii + 1).
inline DSelection select_d(const SpectralContext& ctx) {
  DSelection out;
  out.bounds = (ctx.lambda.array() * ctx.b_diag.array()) / (ctx.b_diag.array() + 1.0);
  out.d = out.bounds[0];
  for (Eigen::Index i = 1; i < out.bounds.size(); ++i) {
    if (out.bounds[i] < out.d) {
      out.d = out.bounds[i];
      out.index = i;
    }
  }
  return out;
}

// How the per-index k_i are formed.
//  Stationary: k_i = ((lambda_i - d) b_ii - d alpha_i^2) / alpha_i^2, the root
//    of d/dk of summand i.
//  Printed: k_i = ((lambda_i - d) b_ii - d) / alpha_i^2. Coincides with
//    Stationary only when alpha_i^2 = 1.
enum class KRule { Stationary, Printed };

inline constexpr double kAlphaFloor = 1e-12;

struct KSelection {
  double k = 0.0;
  std::vector<double> k_values;        // +inf where the index was skipped
  std::vector<Eigen::Index> skipped;   // |alpha_i| below kAlphaFloor
  std::optional<Eigen::Index> index;   // arg min among positive k_i
  bool fallback = false;               // no positive k_i; k = 1/||alpha||^2
};

inline double k_candidate(const SpectralContext& ctx, Eigen::Index i, double d, KRule rule) {
  const double a2 = ctx.alpha[i] * ctx.alpha[i];
  const double base = (ctx.lambda[i] - d) * ctx.b_diag[i];
  return rule == KRule::Stationary ? (base - d * a2) / a2 : (base - d) / a2;
}

inline KSelection select_k(const SpectralContext& ctx, double d,
                           KRule rule = KRule::Stationary) {
  KSelection out;
  const auto dim = ctx.lambda.size();
  out.k_values.resize(static_cast<std::size_t>(dim));
  double best = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < dim; ++i) {
    if (std::abs(ctx.alpha[i]) < kAlphaFloor) {
      out.k_values[static_cast<std::size_t>(i)] = std::numeric_limits<double>::infinity();
      out.skipped.push_back(i);
      continue;
    }
    const double ki = k_candidate(ctx, i, d, rule);
    out.k_values[static_cast<std::size_t>(i)] = ki;
    if (ki > 0.0 && ki < best) {
      best = ki;
      out.index = i;
    }
  }
  if (out.index) {
    out.k = best;
  } else {
    out.fallback = true;
    const double a2 = ctx.alpha.squaredNorm();
    out.k = a2 > 0.0 ? 1.0 / a2 : 1.0;
  }
  return out;
}

struct TunedParams {
  EstimatorParams params;
  DSelection d_selection;
  KSelection k_selection;
};

inline TunedParams select_params(const SpectralContext& ctx, KRule rule = KRule::Stationary) {
  TunedParams out;
  out.d_selection = select_d(ctx);
  out.k_selection = select_k(ctx, out.d_selection.d, rule);
  out.params = {out.k_selection.k, out.d_selection.d};
  return out;
}

// Liu d defaults are clipped into [kLiuDFloor, 1 - kLiuDFloor].
inline constexpr double kLiuDFloor = 1e-6;

struct ParamOverrides {
  std::optional<double> k;
  std::optional<double> d;
};

// Library defaults for the comparison estimators, all from the unrestricted
// spectral context:
//  LE, SRLE: d = max(0, min_i (alpha_i^2 - 1/lambda_i) / (1/lambda_i + alpha_i^2)),
//            clipped into (0, 1);
//  LTE:      k = select_k(ctx, 0), then d = select_d(ctx).
// Overrides replace the corresponding value.
inline EstimatorParams default_params_for(EstimatorKind kind, const MleFit& fit,
                                          const ParamOverrides& overrides = {}) {
  const SpectralContext ctx = spectral_context(fit);
  EstimatorParams out;
  switch (kind) {
    case EstimatorKind::LE:
    case EstimatorKind::SRLE: {
      double d = std::numeric_limits<double>::infinity();
      for (Eigen::Index i = 0; i < ctx.lambda.size(); ++i) {
        const double inv = 1.0 / ctx.lambda[i];
        const double a2 = ctx.alpha[i] * ctx.alpha[i];
        d = std::min(d, (a2 - inv) / (inv + a2));
      }
      d = std::clamp(std::max(0.0, d), kLiuDFloor, 1.0 - kLiuDFloor);
      out = {1.0, overrides.d.value_or(d)};
      break;
    }
    case EstimatorKind::LTE: {
      const double k = select_k(ctx, 0.0).k;
      out = {overrides.k.value_or(k), overrides.d.value_or(select_d(ctx).d)};
      break;
    }
    default:
      throw InputError("default parameters are defined for LE, SRLE and LTE only");
  }
  return out;
}

}  // namespace srlte
