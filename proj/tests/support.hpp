#pragma once

// Test oracles (plain loops, Gaussian elimination, QR least squares) and
// fixture generators.

#include <cmath>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "srlte/estimators.hpp"
#include "srlte/model.hpp"
#include "srlte/simulation.hpp"

namespace srlte::test {

// ------------------------------------------------------------------ oracles

// Dense solve by Gaussian elimination with partial pivoting.
inline std::vector<double> gauss_solve(std::vector<std::vector<double>> a, std::vector<double> b) {
  const std::size_t n = b.size();
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t piv = col;
    for (std::size_t r = col + 1; r < n; ++r)
      if (std::abs(a[r][col]) > std::abs(a[piv][col])) piv = r;
    std::swap(a[col], a[piv]);
    std::swap(b[col], b[piv]);
    for (std::size_t r = col + 1; r < n; ++r) {
      const double f = a[r][col] / a[col][col];
      for (std::size_t c = col; c < n; ++c) a[r][c] -= f * a[col][c];
      b[r] -= f * b[col];
    }
  }
  std::vector<double> x(n);
  for (std::size_t i = n; i-- > 0;) {
    double s = b[i];
    for (std::size_t c = i + 1; c < n; ++c) s -= a[i][c] * x[c];
    x[i] = s / a[i][i];
  }
  return x;
}

inline double bernoulli_loglik(const std::vector<std::vector<double>>& x,
                               const std::vector<double>& y, const std::vector<double>& beta) {
  double ll = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    double eta = 0.0;
    for (std::size_t j = 0; j < beta.size(); ++j) eta += x[i][j] * beta[j];
    ll += y[i] * eta - (eta > 0 ? eta + std::log1p(std::exp(-eta)) : std::log1p(std::exp(eta)));
  }
  return ll;
}

// Damped Newton-Raphson on the Bernoulli log-likelihood, written against
// nested std::vectors.
inline std::vector<double> newton_mle(const std::vector<std::vector<double>>& x,
                                      const std::vector<double>& y) {
  const std::size_t n = y.size(), m = x[0].size();
  std::vector<double> beta(m, 0.0);
  for (int iter = 0; iter < 200; ++iter) {
    std::vector<double> grad(m, 0.0);
    std::vector<std::vector<double>> hess(m, std::vector<double>(m, 0.0));
    for (std::size_t i = 0; i < n; ++i) {
      double eta = 0.0;
      for (std::size_t j = 0; j < m; ++j) eta += x[i][j] * beta[j];
      const double pi = 1.0 / (1.0 + std::exp(-eta));
      for (std::size_t j = 0; j < m; ++j) {
        grad[j] += x[i][j] * (y[i] - pi);
        for (std::size_t l = 0; l < m; ++l) hess[j][l] += pi * (1.0 - pi) * x[i][j] * x[i][l];
      }
    }
    const auto step = gauss_solve(hess, grad);
    const double ll0 = bernoulli_loglik(x, y, beta);
    double t = 1.0;
    std::vector<double> next(m);
    for (int h = 0; h < 50; ++h, t *= 0.5) {
      for (std::size_t j = 0; j < m; ++j) next[j] = beta[j] + t * step[j];
      if (bernoulli_loglik(x, y, next) >= ll0) break;
    }
    double change = 0.0;
    for (std::size_t j = 0; j < m; ++j) change = std::max(change, std::abs(next[j] - beta[j]));
    beta = next;
    if (change < 1e-13) break;
  }
  return beta;
}

inline std::vector<std::vector<double>> rows_of(const Mat& m) {
  std::vector<std::vector<double>> out(static_cast<std::size_t>(m.rows()));
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) out[static_cast<std::size_t>(i)].push_back(m(i, j));
  return out;
}

inline std::vector<double> std_vec(const Vec& v) { return {v.data(), v.data() + v.size()}; }

// Inverse square root of an SPD matrix through its eigendecomposition.
inline Mat inv_sqrt(const Mat& a) {
  Eigen::SelfAdjointEigenSolver<Mat> es(a);
  return es.eigenvectors() * es.eigenvalues().cwiseSqrt().cwiseInverse().asDiagonal() *
         es.eigenvectors().transpose();
}

// SRE as least squares on [W^{1/2} X; Psi^{-1/2} H] against
// [W^{1/2} z; Psi^{-1/2} h], solved by Householder QR.
inline Vec stacked_gls(const Mat& x, const MleFit& fit, const RestrictionSpec& r) {
  const Vec sw = fit.weights.cwiseSqrt();
  const Mat ps = inv_sqrt(r.psi());
  Mat a(x.rows() + r.q(), x.cols());
  Vec b(x.rows() + r.q());
  a.topRows(x.rows()) = sw.asDiagonal() * x;
  a.bottomRows(r.q()) = ps * r.h_matrix();
  b.head(x.rows()) = sw.cwiseProduct(fit.z_hat);
  b.tail(r.q()) = ps * r.h();
  return a.householderQr().solve(b);
}

inline double min_sym_eigenvalue(const Mat& a) {
  return Eigen::SelfAdjointEigenSolver<Mat>(0.5 * (a + a.transpose())).eigenvalues().minCoeff();
}

// ----------------------------------------------------------------- fixtures

using Rng = std::mt19937_64;

inline Mat random_matrix(Rng& rng, Eigen::Index rows, Eigen::Index cols) {
  std::normal_distribution<double> normal;
  Mat m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = normal(rng);
  return m;
}

inline Vec random_vector(Rng& rng, Eigen::Index n) { return random_matrix(rng, n, 1).col(0); }

// SPD with eigenvalues spread over several orders of magnitude.
inline Mat random_spd(Rng& rng, Eigen::Index dim) {
  const Mat q = random_matrix(rng, dim, dim).householderQr().householderQ();
  std::uniform_real_distribution<double> logu(-2.0, 2.0);
  Vec ev(dim);
  for (Eigen::Index i = 0; i < dim; ++i) ev[i] = std::pow(10.0, logu(rng));
  return 0.5 * (q * ev.asDiagonal() * q.transpose() + (q * ev.asDiagonal() * q.transpose()).transpose());
}

// A converged fit carrying only what the estimators and MSEM code read.
inline MleFit synthetic_fit(const Mat& c, const Vec& beta) {
  MleFit fit;
  fit.beta = beta;
  fit.info = c;
  fit.xtwz = c * beta;
  fit.converged = true;
  return fit;
}

inline RestrictionSpec random_restriction(Rng& rng, Eigen::Index q, Eigen::Index dim) {
  const Mat h = random_matrix(rng, q, dim);
  const Mat a = random_matrix(rng, q, q);
  const Mat psi = a * a.transpose() + 0.1 * Mat::Identity(q, q);
  return RestrictionSpec(h, random_vector(rng, q), psi);
}

// Collinear logistic dataset with the simulation's design recipe.
inline Dataset collinear_dataset(std::uint64_t seed, Eigen::Index n, Eigen::Index p, double rho,
                                 const Vec& beta) {
  Stream s(seed);
  const Mat x = gen_design(n, p, rho, s);
  for (int attempt = 0;; ++attempt) {
    const Vec y = gen_response(x, beta, s);
    const double m = y.mean();
    if (m > 0.1 && m < 0.9) return Dataset(x, y);
  }
}

// The 3 x 5 first-difference restriction over the four slopes.
inline Mat difference_h() {
  Mat h = Mat::Zero(3, 5);
  for (int i = 0; i < 3; ++i) {
    h(i, i + 1) = 1.0;
    h(i, i + 2) = -1.0;
  }
  return h;
}

inline Vec unit_beta5() {
  Vec b(5);
  b << 0.3, 0.6, 0.5, 0.4, 0.4;
  return b / b.norm();
}

// Fixed p = 4 fixture used across suites: n = 100, rho = 0.99.
inline Dataset fixture_p4() { return collinear_dataset(4242, 100, 4, 0.99, unit_beta5()); }

inline RestrictionSpec fixture_restriction_p4() {
  Vec h(3);
  h << 0.05, -0.1, 0.02;
  return RestrictionSpec(difference_h(), h, Mat::Identity(3, 3));
}

}  // namespace srlte::test
