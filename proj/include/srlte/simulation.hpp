#pragma once

// Monte Carlo comparison of the estimator family on collinear logistic
// designs with a stochastic first-difference restriction.

#include <algorithm>
#include <atomic>
#include <bit>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "srlte/analysis.hpp"
#include "srlte/errors.hpp"
#include "srlte/estimators.hpp"
#include "srlte/model.hpp"
#include "srlte/tuning.hpp"

namespace srlte {

using Stream = std::mt19937_64;

// Purposes that get independent streams within a cell.
enum class StreamPurpose : std::uint64_t { Beta = 1, Design = 2, Replication = 3 };

// Deterministic stream for (seed, cell key, purpose, index). Nothing depends on
// scheduling, so replications can run on any thread in any order.
inline Stream make_stream(std::uint64_t seed, std::uint64_t cell_key, StreamPurpose purpose,
                          std::uint64_t index = 0) {
  const auto lo = [](std::uint64_t v) { return static_cast<std::uint32_t>(v & 0xffffffffu); };
  const auto hi = [](std::uint64_t v) { return static_cast<std::uint32_t>(v >> 32); };
  const auto tag = static_cast<std::uint64_t>(purpose);
  std::seed_seq seq{lo(seed),     hi(seed), lo(cell_key), hi(cell_key),
                    lo(tag),      hi(tag),  lo(index),    hi(index)};
  return Stream(seq);
}

inline std::uint64_t cell_key(Eigen::Index n, double rho) {
  // splitmix64 finalizer over (n, bits of rho)
  std::uint64_t z = static_cast<std::uint64_t>(n) * 0x9E3779B97F4A7C15ull ^
                    std::bit_cast<std::uint64_t>(rho);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

enum class BetaScheme { UniformNormalized, OnesNormalized, UserSupplied };

struct RestrictionTemplate {
  Mat h_matrix;
  Mat psi;
};

// (p-1) x (p+1) first differences of the slopes, leading zero column for the
// intercept, Psi = I.
inline RestrictionTemplate default_restriction_template(Eigen::Index p) {
  if (p < 2) throw InputError("the first-difference restriction needs p >= 2");
  RestrictionTemplate t;
  t.h_matrix = Mat::Zero(p - 1, p + 1);
  for (Eigen::Index i = 0; i < p - 1; ++i) {
    t.h_matrix(i, i + 1) = 1.0;
    t.h_matrix(i, i + 2) = -1.0;
  }
  t.psi = linalg::identity(p - 1);
  return t;
}

struct SimulationConfig {
  std::vector<Eigen::Index> n_values{50, 100, 200};
  Eigen::Index p = 4;
  std::vector<double> rho_values{0.9, 0.99, 0.999};
  int reps = 5000;
  BetaScheme beta_scheme = BetaScheme::UniformNormalized;
  std::optional<Vec> user_beta;
  std::optional<RestrictionTemplate> restriction;  // default: first differences
  std::uint64_t seed = kDefaultSeed;
  std::vector<EstimatorKind> estimators{kAllEstimators.begin(), kAllEstimators.end()};
  std::map<EstimatorKind, ParamOverrides> overrides;
  bool fix_design_per_cell = false;
  int threads = 1;
  FitOptions fit;
  KRule k_rule = KRule::Stationary;

  static constexpr std::uint64_t kDefaultSeed = 20170611;

  void validate() const {
    if (reps < 1) throw InputError("reps must be at least 1");
    if (p < 1) throw InputError("p must be at least 1");
    if (n_values.empty() || rho_values.empty()) throw InputError("empty simulation grid");
    for (auto n : n_values)
      if (n <= p + 1) throw InputError("every n must exceed p + 1");
    for (double rho : rho_values)
      if (!(rho >= 0.0 && rho < 1.0)) throw InputError("rho must lie in [0, 1)");
    if (estimators.empty()) throw InputError("no estimators selected");
    if (beta_scheme == BetaScheme::UserSupplied && !user_beta)
      throw InputError("user-supplied beta scheme needs a beta vector");
  }

  RestrictionTemplate restriction_template() const {
    return restriction.value_or(default_restriction_template(p));
  }
};

// n x (p+1) design: x_ij = sqrt(1 - rho^2) w_ij + rho w_i,p+1 with standard
// normal w, each predictor column centered and scaled to unit sample standard
// deviation (divisor n - 1), then the intercept column is prepended.
inline Mat gen_design(Eigen::Index n, Eigen::Index p, double rho, Stream& stream) {
  if (!(rho >= 0.0 && rho < 1.0)) throw InputError("rho must lie in [0, 1)");
  std::normal_distribution<double> normal;
  Mat w(n, p + 1);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j <= p; ++j) w(i, j) = normal(stream);
  const double own = std::sqrt(1.0 - rho * rho);
  Mat x(n, p + 1);
  x.col(0).setOnes();
  for (Eigen::Index j = 0; j < p; ++j) {
    Vec col = own * w.col(j) + rho * w.col(p);
    col.array() -= col.mean();
    const double sd = std::sqrt(col.squaredNorm() / static_cast<double>(n - 1));
    x.col(j + 1) = col / sd;
  }
  return x;
}

// Unit-norm coefficient vector of length p+1.
inline Vec gen_beta(Eigen::Index p, BetaScheme scheme, Stream& stream,
                    const std::optional<Vec>& user = std::nullopt) {
  Vec beta(p + 1);
  switch (scheme) {
    case BetaScheme::OnesNormalized: beta.setOnes(); break;
    case BetaScheme::UniformNormalized: {
      // Normalized Gaussian draw: uniform direction on the sphere.
      std::normal_distribution<double> normal;
      do {
        for (Eigen::Index i = 0; i <= p; ++i) beta[i] = normal(stream);
      } while (beta.norm() == 0.0);
      break;
    }
    case BetaScheme::UserSupplied:
      if (!user || user->size() != p + 1)
        throw InputError("user-supplied beta must have p + 1 = " + std::to_string(p + 1) +
                         " entries");
      beta = *user;
      if (!beta.allFinite() || beta.norm() == 0.0)
        throw InputError("user-supplied beta must be finite and nonzero");
      break;
  }
  return beta / beta.norm();
}

inline Vec gen_response(const Mat& x, const Vec& beta, Stream& stream) {
  const Vec pi = logistic_probs(x, beta);
  Vec y(pi.size());
  for (Eigen::Index i = 0; i < pi.size(); ++i) y[i] = std::bernoulli_distribution(pi[i])(stream) ? 1.0 : 0.0;
  return y;
}

// h = H beta_true + v, v ~ N(0, Psi). `noiseless` forces v = 0.
inline RestrictionSpec gen_restriction(const Vec& beta_true, const RestrictionTemplate& tmpl,
                                       Stream& stream, bool noiseless = false) {
  const auto q = tmpl.h_matrix.rows();
  if (tmpl.h_matrix.cols() != beta_true.size())
    throw InputError("dimension-mismatch", "restriction template width does not match beta");
  if (linalg::rank(tmpl.h_matrix) != q) throw InputError("restriction template is rank deficient");
  Vec v = Vec::Zero(q);
  if (!noiseless && q > 0) {
    const auto llt = linalg::cholesky_or_throw(tmpl.psi, "Psi");
    std::normal_distribution<double> normal;
    Vec e(q);
    for (Eigen::Index i = 0; i < q; ++i) e[i] = normal(stream);
    v = llt.matrixL() * e;
  }
  return RestrictionSpec(tmpl.h_matrix, tmpl.h_matrix * beta_true + v, tmpl.psi);
}

struct EstimatorSummary {
  EstimatorKind kind = EstimatorKind::MLE;
  double mse = 0.0;
  // Mean of sum_i E[(y*_i - pi~_i)^2] over replications, y*_i a new
  // Bernoulli(pi_i) response at the same design point. Equals
  // sum_i pi_i (1 - pi_i) + sum_i (pi~_i - pi_i)^2.
  double pmse = 0.0;
  // Mean of sum_i (pi~_i - pi_i)^2.
  double pmse_true = 0.0;
  std::optional<EstimatorParams> mean_params;
};

struct CellReport {
  Eigen::Index n = 0;
  double rho = 0.0;
  int successes = 0;
  int failures = 0;
  bool failed = false;  // every replication failed
  Vec beta_true;
  std::vector<EstimatorSummary> estimators;

  const EstimatorSummary& at(EstimatorKind kind) const {
    for (const auto& e : estimators)
      if (e.kind == kind) return e;
    throw InputError("estimator " + std::string(to_string(kind)) + " not in cell report");
  }
};

struct SimulationReport {
  SimulationConfig config;
  std::vector<CellReport> cells;

  const CellReport& cell(Eigen::Index n, double rho) const {
    for (const auto& c : cells)
      if (c.n == n && c.rho == rho) return c;
    throw InputError("no cell for n=" + std::to_string(n) + " rho=" + std::to_string(rho));
  }
  bool any_failed() const {
    return std::any_of(cells.begin(), cells.end(), [](const auto& c) { return c.failed; });
  }
};

namespace detail {

struct ReplicationOutcome {
  bool ok = false;
  std::vector<double> sq_error;    // per configured estimator
  std::vector<double> pred_error;  // expected squared error against a fresh response
  std::vector<double> prob_error;  // squared error against the true probabilities
  std::vector<EstimatorParams> params;
};

inline EstimatorParams srlte_params(const MleFit& fit, const RestrictionSpec& r,
                                    const ParamOverrides& ov, KRule rule) {
  if (ov.k && ov.d) return {*ov.k, *ov.d};
  const auto ctx = spectral_context(fit, r);
  const double d = ov.d.value_or(select_d(ctx).d);
  const double k = ov.k.value_or(select_k(ctx, d, rule).k);
  return {k, d};
}

inline EstimatorParams params_for(EstimatorKind kind, const MleFit& fit, const RestrictionSpec& r,
                                  const SimulationConfig& cfg) {
  const auto it = cfg.overrides.find(kind);
  const ParamOverrides ov = it == cfg.overrides.end() ? ParamOverrides{} : it->second;
  if (kind == EstimatorKind::SRLTE) return srlte_params(fit, r, ov, cfg.k_rule);
  if (uses_params(kind)) return default_params_for(kind, fit, ov);
  return {};
}

inline ReplicationOutcome run_replication(const SimulationConfig& cfg, const Mat& x_fixed,
                                          bool use_fixed, Eigen::Index n, double rho,
                                          const Vec& beta_true, const RestrictionTemplate& tmpl,
                                          Stream stream) {
  ReplicationOutcome out;
  try {
    const Mat x = use_fixed ? x_fixed : gen_design(n, cfg.p, rho, stream);
    const Vec y = gen_response(x, beta_true, stream);
    const RestrictionSpec r = gen_restriction(beta_true, tmpl, stream);
    const Dataset data(x, y);
    const MleFit fit = fit_mle(data, cfg.fit);
    if (!fit.converged) return out;
    const Vec pi_true = logistic_probs(x, beta_true);
    const double response_variance = (pi_true.array() * (1.0 - pi_true.array())).sum();
    for (auto kind : cfg.estimators) {
      const EstimatorParams params = params_for(kind, fit, r, cfg);
      const EstimateResult est = estimate(kind, fit, r, params);
      if (!est.beta.allFinite()) return out;
      out.sq_error.push_back((est.beta - beta_true).squaredNorm());
      const double deviation = (logistic_probs(x, est.beta) - pi_true).squaredNorm();
      out.pred_error.push_back(deviation + response_variance);
      out.prob_error.push_back(deviation);
      out.params.push_back(params);
    }
    out.ok = true;
  } catch (const NumericalError&) {
    out = ReplicationOutcome{};
  }
  return out;
}

}  // namespace detail

// The true coefficient vector. It depends only on (seed, p, scheme), so every
// cell of a grid shares it.
inline Vec simulation_beta(const SimulationConfig& cfg) {
  auto stream = make_stream(cfg.seed, 0, StreamPurpose::Beta);
  return gen_beta(cfg.p, cfg.beta_scheme, stream, cfg.user_beta);
}

// Runs all replications of one (n, rho) cell. Failed replications (IRLS
// failure or non-convergence) are counted and excluded; the averages divide
// by the number of successes.
inline CellReport run_cell(const SimulationConfig& cfg, Eigen::Index n, double rho) {
  cfg.validate();
  const std::uint64_t key = cell_key(n, rho);
  CellReport cell;
  cell.n = n;
  cell.rho = rho;
  cell.beta_true = simulation_beta(cfg);
  const RestrictionTemplate tmpl = cfg.restriction_template();

  Mat x_fixed;
  if (cfg.fix_design_per_cell) {
    auto design_stream = make_stream(cfg.seed, key, StreamPurpose::Design);
    x_fixed = gen_design(n, cfg.p, rho, design_stream);
  }

  const auto reps = static_cast<std::size_t>(cfg.reps);
  std::vector<detail::ReplicationOutcome> outcomes(reps);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t r = next++; r < reps; r = next++) {
      outcomes[r] = detail::run_replication(
          cfg, x_fixed, cfg.fix_design_per_cell, n, rho, cell.beta_true, tmpl,
          make_stream(cfg.seed, key, StreamPurpose::Replication, r));
    }
  };
  const int threads = std::clamp(cfg.threads, 1, cfg.reps);
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(static_cast<std::size_t>(threads));
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
  }

  // Fixed-order reduction.
  const std::size_t m = cfg.estimators.size();
  std::vector<double> sq(m, 0.0), pred(m, 0.0), prob(m, 0.0), ksum(m, 0.0), dsum(m, 0.0);
  for (const auto& o : outcomes) {
    if (!o.ok) {
      ++cell.failures;
      continue;
    }
    ++cell.successes;
    for (std::size_t e = 0; e < m; ++e) {
      sq[e] += o.sq_error[e];
      pred[e] += o.pred_error[e];
      prob[e] += o.prob_error[e];
      ksum[e] += o.params[e].k;
      dsum[e] += o.params[e].d;
    }
  }
  cell.failed = cell.successes == 0;
  for (std::size_t e = 0; e < m; ++e) {
    EstimatorSummary s;
    s.kind = cfg.estimators[e];
    if (!cell.failed) {
      const double denom = cell.successes;
      s.mse = sq[e] / denom;
      s.pmse = pred[e] / denom;
      s.pmse_true = prob[e] / denom;
      if (uses_params(s.kind)) s.mean_params = EstimatorParams{ksum[e] / denom, dsum[e] / denom};
    }
    cell.estimators.push_back(s);
  }
  return cell;
}

// Cells in table order: rho blocks, n rows within each block.
inline std::vector<std::pair<Eigen::Index, double>> grid_cells(const SimulationConfig& cfg) {
  std::vector<std::pair<Eigen::Index, double>> cells;
  for (double rho : cfg.rho_values)
    for (auto n : cfg.n_values) cells.emplace_back(n, rho);
  return cells;
}

// `done` holds cells already computed (e.g. from an interrupted run); they are
// reused instead of recomputed. `on_cell` fires after every cell.
inline SimulationReport run_simulation(
    const SimulationConfig& cfg, const std::vector<CellReport>& done = {},
    const std::function<void(const CellReport&, std::size_t, std::size_t)>& on_cell = {}) {
  cfg.validate();
  SimulationReport report;
  report.config = cfg;
  const auto cells = grid_cells(cfg);
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const auto [n, rho] = cells[i];
    const auto hit = std::find_if(done.begin(), done.end(),
                                  [&](const CellReport& c) { return c.n == n && c.rho == rho; });
    report.cells.push_back(hit != done.end() ? *hit : run_cell(cfg, n, rho));
    if (on_cell) on_cell(report.cells.back(), i + 1, cells.size());
  }
  return report;
}

}  // namespace srlte
