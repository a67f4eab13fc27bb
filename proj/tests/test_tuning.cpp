#include <cmath>

#include <gtest/gtest.h>

#include "srlte/analysis.hpp"
#include "srlte/tuning.hpp"
#include "support.hpp"

using namespace srlte;
using namespace srlte::test;

namespace {

Vec v2(double a, double b) {
  Vec v(2);
  v << a, b;
  return v;
}

SpectralContext toy(double a1, double a2) {
  return make_spectral_context(v2(4.0, 1.0), v2(0.25, 1.0), v2(a1, a2));
}

}  // namespace

TEST(Smse, WorkedExample) {
  EXPECT_NEAR(smse_spectral(toy(1.0, 0.0), 1.0, 0.5), 0.275, 1e-15);
}

TEST(Smse, RequiresPositiveK) {
  EXPECT_THROW(smse_spectral(toy(1.0, 0.0), 0.0, 0.5), ParameterDomainError);
}

TEST(Smse, AtDEqualMinusKReducesToTraceOfB) {
  const auto ctx = toy(0.7, -1.3);
  for (double k : {0.01, 0.5, 3.0}) EXPECT_NEAR(smse_spectral(ctx, k, -k), 1.25, 1e-14);
}

TEST(Smse, MatchesTraceOfSrlteMsemForUnrestrictedFit) {
  const auto data = fixture_p4();
  const auto fit = fit_mle(data);
  const auto ctx = spectral_context(fit);
  EXPECT_EQ(ctx.offdiag_energy_ratio, 0.0);
  const auto empty = RestrictionSpec::empty(fit.dim());
  for (double k : {0.05, 0.4, 2.0}) {
    const EstimatorParams p{k, 0.3};
    const auto m = msem_of(EstimatorKind::SRLTE, fit, empty, p, fit.beta);
    EXPECT_NEAR(smse_spectral(ctx, k, 0.3), m.smse, 1e-8 * m.smse);
  }
}

TEST(Smse, TermsSumToTotal) {
  const auto ctx = toy(0.3, 2.0);
  const double total = smse_spectral_term(ctx, 0, 0.6, 0.2) + smse_spectral_term(ctx, 1, 0.6, 0.2);
  EXPECT_NEAR(total, smse_spectral(ctx, 0.6, 0.2), 1e-15);
}

TEST(SelectD, WorkedExample) {
  const auto sel = select_d(toy(1.0, 1.0));
  EXPECT_NEAR(sel.d, 0.5, 1e-15);
  EXPECT_EQ(sel.index, 1);
  EXPECT_NEAR(sel.bounds[0], 0.8, 1e-15);
}

TEST(SelectD, TiesResolveToSmallestIndex) {
  const auto ctx = make_spectral_context(v2(2.0, 2.0), v2(1.0, 1.0), v2(1.0, 1.0));
  EXPECT_EQ(select_d(ctx).index, 0);
}

TEST(SelectK, WorkedExample) {
  const auto sel = select_k(toy(1.0, 1.0), 0.5);
  EXPECT_NEAR(sel.k, 0.375, 1e-15);
  ASSERT_TRUE(sel.index.has_value());
  EXPECT_EQ(*sel.index, 0);
  EXPECT_FALSE(sel.fallback);
}

TEST(SelectK, PrintedRuleAgreesWhenAlphaSquaredIsOne) {
  const auto a = select_k(toy(1.0, -1.0), 0.5, KRule::Stationary);
  const auto b = select_k(toy(1.0, -1.0), 0.5, KRule::Printed);
  EXPECT_DOUBLE_EQ(a.k, b.k);
}

TEST(SelectK, StationaryCandidateZeroesTheDerivative) {
  Rng rng(21);
  std::uniform_real_distribution<double> u(0.1, 3.0);
  for (int t = 0; t < 50; ++t) {
    const auto ctx = make_spectral_context(v2(u(rng) * 5.0, u(rng)), v2(u(rng), u(rng)),
                                           v2(u(rng) - 1.5, u(rng)));
    const double d = 0.05;
    for (Eigen::Index i = 0; i < 2; ++i) {
      const double k = k_candidate(ctx, i, d, KRule::Stationary);
      if (k <= 1e-3) continue;
      const double h = 1e-6 * k;
      const double deriv =
          (smse_spectral_term(ctx, i, k + h, d) - smse_spectral_term(ctx, i, k - h, d)) / (2 * h);
      const double scale = smse_spectral_term(ctx, i, k, d) / k;
      EXPECT_LT(std::abs(deriv), 1e-5 * (1.0 + scale)) << "trial " << t << " index " << i;
    }
  }
}

TEST(SelectK, SkipsNegligibleAlphaAndFallsBack) {
  const auto ctx = make_spectral_context(v2(4.0, 1.0), v2(0.25, 1.0), v2(0.0, 1e-13));
  const auto sel = select_k(ctx, 0.5);
  EXPECT_EQ(sel.skipped.size(), 2u);
  EXPECT_TRUE(sel.fallback);
  EXPECT_TRUE(std::isfinite(sel.k));
  EXPECT_GT(sel.k, 0.0);
}

TEST(SelectK, FallbackUsesInverseAlphaNorm) {
  // k_i <= 0 everywhere: d at least lambda_i b_ii.
  const auto ctx = make_spectral_context(v2(1.0, 1.0), v2(1.0, 1.0), v2(1.0, 1.0));
  const auto sel = select_k(ctx, 2.0);
  EXPECT_TRUE(sel.fallback);
  EXPECT_NEAR(sel.k, 0.5, 1e-15);
}

TEST(SelectParams, WorkedExample) {
  const auto tuned = select_params(toy(1.0, 1.0));
  EXPECT_NEAR(tuned.params.k, 0.375, 1e-15);
  EXPECT_NEAR(tuned.params.d, 0.5, 1e-15);
}

TEST(SpectralContext, UnrestrictedBIsInverseEigenvalues) {
  const auto fit = fit_mle(fixture_p4());
  const auto ctx = spectral_context(fit);
  for (Eigen::Index i = 0; i < ctx.lambda.size(); ++i)
    EXPECT_NEAR(ctx.b_diag[i] * ctx.lambda[i], 1.0, 1e-12);
  for (Eigen::Index i = 1; i < ctx.lambda.size(); ++i) EXPECT_GE(ctx.lambda[i - 1], ctx.lambda[i]);
  EXPECT_LT((ctx.q * ctx.alpha - fit.beta).norm(), 1e-10);
}

TEST(SpectralContext, RestrictionShrinksB) {
  const auto fit = fit_mle(fixture_p4());
  const auto ctx0 = spectral_context(fit);
  const auto ctx = spectral_context(fit, fixture_restriction_p4());
  for (Eigen::Index i = 0; i < ctx.lambda.size(); ++i) EXPECT_LE(ctx.b_diag[i], ctx0.b_diag[i] + 1e-15);
  EXPECT_GE(ctx.offdiag_energy_ratio, 0.0);
  EXPECT_LT(ctx.offdiag_energy_ratio, 1.0);
}

TEST(Defaults, LiuDIsClippedIntoOpenInterval) {
  const auto fit = fit_mle(fixture_p4());
  const auto p = default_params_for(EstimatorKind::LE, fit);
  EXPECT_GE(p.d, kLiuDFloor);
  EXPECT_LE(p.d, 1.0 - kLiuDFloor);
  ParamOverrides o;
  o.d = 0.4;
  EXPECT_EQ(default_params_for(EstimatorKind::SRLE, fit, o).d, 0.4);
}

TEST(Defaults, LiuTypeUsesSpectralSelection) {
  const auto fit = fit_mle(fixture_p4());
  const auto ctx = spectral_context(fit);
  const auto p = default_params_for(EstimatorKind::LTE, fit);
  EXPECT_DOUBLE_EQ(p.k, select_k(ctx, 0.0).k);
  EXPECT_DOUBLE_EQ(p.d, select_d(ctx).d);
  EXPECT_THROW(default_params_for(EstimatorKind::MLE, fit), InputError);
}
