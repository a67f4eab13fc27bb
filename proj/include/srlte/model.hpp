#pragma once

// Binary logistic model and its maximum likelihood fit by iteratively
// reweighted least squares.

#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <utility>

#include "srlte/errors.hpp"
#include "srlte/linalg.hpp"

namespace srlte {

// Weights w_i = pi_i (1 - pi_i) below this floor are treated as degenerate.
inline constexpr double kWeightFloor = 1e-10;

// Design matrix with a leading intercept column plus a 0/1 response.
class Dataset {
 public:
  Dataset(Mat x, Vec y) : x_(std::move(x)), y_(std::move(y)) { validate(); }

  // Prepends the intercept column to `predictors`.
  static Dataset from_predictors(const Mat& predictors, Vec y) {
    Mat x(predictors.rows(), predictors.cols() + 1);
    x.col(0).setOnes();
    x.rightCols(predictors.cols()) = predictors;
    return Dataset(std::move(x), std::move(y));
  }

  const Mat& x() const noexcept { return x_; }
  const Vec& y() const noexcept { return y_; }
  Eigen::Index n() const noexcept { return x_.rows(); }
  Eigen::Index p() const noexcept { return x_.cols() - 1; }

 private:
  void validate() const {
    if (x_.cols() < 1) throw InputError("design matrix has no columns");
    if (y_.size() != x_.rows())
      throw InputError("dimension-mismatch", "response length " + std::to_string(y_.size()) +
                                                 " does not match " + std::to_string(x_.rows()) +
                                                 " design rows");
    if (x_.rows() <= x_.cols())
      throw InputError("need more observations (" + std::to_string(x_.rows()) +
                       ") than coefficients (" + std::to_string(x_.cols()) + ")");
    for (Eigen::Index i = 0; i < x_.rows(); ++i) {
      if (x_(i, 0) != 1.0)
        throw InputError("first design column must be the intercept (row " + std::to_string(i) +
                         ")");
      if (y_[i] != 0.0 && y_[i] != 1.0)
        throw InputError("response must be 0 or 1 (row " + std::to_string(i) + ")");
    }
    if (!x_.allFinite()) throw InputError("design matrix contains non-finite values");
  }

  Mat x_;
  Vec y_;
};

// Converged (or last) IRLS state. Everything downstream reuses the weights
// and working response frozen here.
struct MleFit {
  Vec beta;
  Vec pi_hat;
  Vec weights;
  Vec z_hat;
  Mat info;  // C = X^T W X
  Vec xtwz;  // X^T W z
  double log_likelihood = 0.0;
  int iterations = 0;
  bool converged = false;

  Eigen::Index dim() const noexcept { return beta.size(); }
};

struct FitOptions {
  double tol = 1e-8;
  int max_iter = 100;
  std::optional<Vec> start;
  bool step_halving = true;
  int max_halvings = 30;
};

namespace detail {

inline double stable_logistic(double eta) {
  // 1/(1+e^{-eta}) for eta >= 0 and e^{eta}/(1+e^{eta}) otherwise avoid overflow.
  double p = 0.0;
  if (eta >= 0.0) {
    p = 1.0 / (1.0 + std::exp(-eta));
  } else {
    const double e = std::exp(eta);
    p = e / (1.0 + e);
  }
  constexpr double lo = std::numeric_limits<double>::denorm_min();
  const double hi = std::nextafter(1.0, 0.0);
  return std::clamp(p, lo, hi);
}

// log(1 + e^eta) without overflow.
inline double softplus(double eta) {
  return std::max(eta, 0.0) + std::log1p(std::exp(-std::abs(eta)));
}

inline void check_columns(const Mat& x, const Vec& beta) {
  if (x.cols() != beta.size())
    throw InputError("dimension-mismatch", "design has " + std::to_string(x.cols()) +
                                               " columns but beta has " +
                                               std::to_string(beta.size()) + " entries");
}

}  // namespace detail

inline Vec logistic_probs(const Mat& x, const Vec& beta) {
  detail::check_columns(x, beta);
  const Vec eta = x * beta;
  return eta.unaryExpr(&detail::stable_logistic);
}

inline double log_likelihood(const Mat& x, const Vec& y, const Vec& beta) {
  detail::check_columns(x, beta);
  const Vec eta = x * beta;
  double ll = 0.0;
  for (Eigen::Index i = 0; i < eta.size(); ++i) ll += y[i] * eta[i] - detail::softplus(eta[i]);
  return ll;
}

// z_i = eta_i + (y_i - pi_i) / (pi_i (1 - pi_i)).
inline Vec working_response(const Mat& x, const Vec& beta, const Vec& y) {
  detail::check_columns(x, beta);
  if (y.size() != x.rows()) throw InputError("dimension-mismatch", "response length mismatch");
  const Vec eta = x * beta;
  Vec z(eta.size());
  for (Eigen::Index i = 0; i < eta.size(); ++i) {
    const double pi = detail::stable_logistic(eta[i]);
    const double w = pi * (1.0 - pi);
    if (w < kWeightFloor)
      throw NumericalError("degenerate-weight",
                           "fitted probability at row " + std::to_string(i) + " is within " +
                               "the weight floor of 0 or 1");
    z[i] = eta[i] + (y[i] - pi) / w;
  }
  return z;
}

namespace detail {

// True when the linear predictor strictly separates the two response classes.
inline bool separates(const Vec& eta, const Vec& y) {
  for (Eigen::Index i = 0; i < eta.size(); ++i) {
    if (y[i] == 1.0 && eta[i] <= 0.0) return false;
    if (y[i] == 0.0 && eta[i] >= 0.0) return false;
  }
  return true;
}

[[noreturn]] inline void throw_separation() {
  throw NumericalError("complete-separation",
                       "the response is completely separated by the predictors; "
                       "the maximum likelihood estimate does not exist");
}

// Fills pi/weights/z/info/xtwz of `fit` at fit.beta.
inline void evaluate_state(const Mat& x, const Vec& y, MleFit& fit) {
  const Vec eta = x * fit.beta;
  fit.pi_hat = eta.unaryExpr(&stable_logistic);
  fit.weights = fit.pi_hat.array() * (1.0 - fit.pi_hat.array());
  for (Eigen::Index i = 0; i < fit.weights.size(); ++i) {
    if (fit.weights[i] < kWeightFloor) {
      if (separates(eta, y)) throw_separation();
      throw NumericalError("degenerate-weight", "IRLS weight at row " + std::to_string(i) +
                                                    " fell below the floor");
    }
  }
  fit.z_hat = eta.array() + (y - fit.pi_hat).array() / fit.weights.array();
  fit.info = linalg::symmetrize(x.transpose() * fit.weights.asDiagonal() * x);
  fit.xtwz = x.transpose() * (fit.weights.asDiagonal() * fit.z_hat);
  fit.log_likelihood = log_likelihood(x, y, fit.beta);
}

}  // namespace detail

// IRLS: beta <- beta + (X^T W X)^{-1} X^T (y - pi), with step halving on a
// likelihood decrease. Returns converged=false with the last iterate when the
// iteration cap is hit.
inline MleFit fit_mle(const Dataset& data, const FitOptions& opts = {}) {
  const Mat& x = data.x();
  const Vec& y = data.y();
  const double ones = y.sum();
  if (ones == 0.0 || ones == static_cast<double>(y.size())) detail::throw_separation();

  MleFit fit;
  fit.beta = opts.start.value_or(Vec::Zero(x.cols()));
  detail::check_columns(x, fit.beta);

  detail::evaluate_state(x, y, fit);
  for (int iter = 1; iter <= opts.max_iter; ++iter) {
    auto llt = linalg::try_cholesky(fit.info);
    if (!llt || fit.info.diagonal().minCoeff() <= 0.0 ||
        linalg::condition_number(fit.info) > 1e15) {
      throw NumericalError("singular-information",
                           "X^T W X is singular at iteration " + std::to_string(iter) +
                               " (collinear design or separation)");
    }
    Vec step = llt->solve(x.transpose() * (y - fit.pi_hat));
    const double ll_old = fit.log_likelihood;
    Vec candidate = fit.beta + step;
    if (opts.step_halving) {
      for (int h = 0; h < opts.max_halvings; ++h) {
        const double ll_new = log_likelihood(x, y, candidate);
        if (std::isfinite(ll_new) && ll_new >= ll_old) break;
        step *= 0.5;
        candidate = fit.beta + step;
      }
    }
    fit.beta = candidate;
    fit.iterations = iter;
    detail::evaluate_state(x, y, fit);
    if (step.cwiseAbs().maxCoeff() < opts.tol) {
      fit.converged = true;
      break;
    }
  }
  if (!fit.converged && detail::separates(x * fit.beta, y)) detail::throw_separation();
  return fit;
}

}  // namespace srlte
