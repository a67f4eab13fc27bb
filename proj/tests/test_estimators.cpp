#include <gtest/gtest.h>

#include "srlte/errors.hpp"
#include "srlte/estimators.hpp"
#include "support.hpp"

using namespace srlte;
using namespace srlte::test;

namespace {

Mat diag2(double a, double b) {
  Mat m = Mat::Zero(2, 2);
  m(0, 0) = a;
  m(1, 1) = b;
  return m;
}

double max_abs(const Mat& m) { return m.cwiseAbs().maxCoeff(); }

struct Fixture {
  Dataset data = fixture_p4();
  MleFit fit = fit_mle(data);
  RestrictionSpec r = fixture_restriction_p4();
};

}  // namespace

TEST(Filters, LiuFilterOnDiagonalMatrix) {
  const Mat fd = filter_fd(diag2(2, 4), 0.5);
  EXPECT_NEAR(fd(0, 0), 2.5 / 3.0, 1e-15);
  EXPECT_NEAR(fd(1, 1), 0.9, 1e-15);
  EXPECT_EQ(fd(0, 1), 0.0);
}

TEST(Filters, LiuTypeFilterOnDiagonalMatrix) {
  const Mat fkd = filter_fkd(diag2(2, 4), 1.0, 0.5);
  EXPECT_NEAR(fkd(0, 0), 0.5, 1e-15);
  EXPECT_NEAR(fkd(1, 1), 0.7, 1e-15);
}

TEST(Filters, LiuTypeRejectsNonPositiveK) {
  EXPECT_THROW(filter_fkd(diag2(2, 4), 0.0, 0.5), ParameterDomainError);
  EXPECT_THROW(filter_fkd(diag2(2, 4), -1.0, 0.5), ParameterDomainError);
}

TEST(Filters, FiltersCommuteWithC) {
  Rng rng(3);
  const Mat c = random_spd(rng, 4);
  const Mat fd = filter_fd(c, 0.3);
  const Mat fkd = filter_fkd(c, 0.7, -0.2);
  EXPECT_LT(max_abs(fd * c - c * fd), 1e-9 * c.norm());
  EXPECT_LT(max_abs(fkd * c - c * fkd), 1e-9 * c.norm());
}

TEST(Estimators, LiuRejectsDOutsideOpenUnitInterval) {
  Fixture f;
  EXPECT_THROW(liu(f.fit, 0.0), ParameterDomainError);
  EXPECT_THROW(liu(f.fit, 1.0), ParameterDomainError);
  EXPECT_THROW(srle(f.fit, f.r, 1.5), ParameterDomainError);
}

TEST(Estimators, LiuMatchesDualForm) {
  Fixture f;
  const Mat c = f.fit.info;
  const Mat i = Mat::Identity(5, 5);
  const double d = 0.4;
  const Vec dual = (c + i).ldlt().solve(f.fit.xtwz + d * f.fit.beta);
  EXPECT_LT((liu(f.fit, d).beta - dual).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(Estimators, LiuTypeMatchesDualForm) {
  Fixture f;
  const Mat c = f.fit.info;
  const Mat i = Mat::Identity(5, 5);
  const double k = 0.8, d = 0.3;
  const Vec dual = (c + k * i).ldlt().solve(f.fit.xtwz - d * f.fit.beta);
  EXPECT_LT((liu_type(f.fit, k, d).beta - dual).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(Estimators, SreMatchesStackedLeastSquares) {
  Fixture f;
  const Vec oracle = stacked_gls(f.data.x(), f.fit, f.r);
  EXPECT_LT((sre(f.fit, f.r).beta - oracle).cwiseAbs().maxCoeff(), 1e-7);
}

TEST(Estimators, SreMatchesStackedLeastSquaresWithGeneralPsi) {
  Fixture f;
  Rng rng(8);
  const auto r = random_restriction(rng, 2, 5);
  const Vec oracle = stacked_gls(f.data.x(), f.fit, r);
  EXPECT_LT((sre(f.fit, r).beta - oracle).cwiseAbs().maxCoeff(), 1e-7);
}

TEST(Estimators, SreIsInvariantToRestrictionScaling) {
  Fixture f;
  const double a = 3.7;
  const RestrictionSpec scaled(a * f.r.h_matrix(), a * f.r.h(), a * a * f.r.psi());
  EXPECT_LT((sre(f.fit, scaled).beta - sre(f.fit, f.r).beta).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Reductions, EmptyRestrictionCollapsesToUnrestricted) {
  Fixture f;
  const auto empty = RestrictionSpec::empty(5);
  EXPECT_EQ(empty.q(), 0);
  EXPECT_LT((sre(f.fit, empty).beta - f.fit.beta).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LT((srle(f.fit, empty, 0.3).beta - liu(f.fit, 0.3).beta).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LT((srlte::srlte(f.fit, empty, 0.6, 0.2).beta - liu_type(f.fit, 0.6, 0.2).beta)
                .cwiseAbs()
                .maxCoeff(),
            1e-12);
}

TEST(Reductions, LiuTypeWithDEqualMinusKIsIdentity) {
  Fixture f;
  for (double k : {0.1, 1.0, 5.0}) {
    EXPECT_LT((liu_type(f.fit, k, -k).beta - f.fit.beta).cwiseAbs().maxCoeff(), 1e-9);
    EXPECT_LT((srlte::srlte(f.fit, f.r, k, -k).beta - sre(f.fit, f.r).beta).cwiseAbs().maxCoeff(), 1e-9);
  }
}

TEST(Reductions, SrleWithDNearOneApproachesSre) {
  Fixture f;
  const Vec sre_b = sre(f.fit, f.r).beta;
  const double gap = (srle(f.fit, f.r, 1.0 - 1e-9).beta - sre_b).norm();
  EXPECT_LT(gap, 1e-7 * (1.0 + sre_b.norm()));
}

TEST(Reductions, SrleMatchesSrlteAtUnitKWithNegatedD) {
  // F_d = (C + I)^{-1}(C + d I) equals F_{k=1, d'=-d}.
  Fixture f;
  const double d = 0.35;
  EXPECT_LT((srle(f.fit, f.r, d).beta - srlte::srlte(f.fit, f.r, 1.0, -d).beta).cwiseAbs().maxCoeff(),
            1e-10);
}

TEST(Restriction, ValidatesShapesAndRank) {
  Mat h = Mat::Zero(2, 3);
  h(0, 0) = 1.0;
  h(1, 0) = 2.0;
  EXPECT_THROW(RestrictionSpec(h, Vec::Zero(2), Mat::Identity(2, 2)), InputError);
  h(1, 1) = 1.0;
  EXPECT_THROW(RestrictionSpec(h, Vec::Zero(3), Mat::Identity(2, 2)), InputError);
  Mat psi = Mat::Identity(2, 2);
  psi(1, 1) = -1.0;
  EXPECT_THROW(RestrictionSpec(h, Vec::Zero(2), psi), InputError);
  EXPECT_NO_THROW(RestrictionSpec(h, Vec::Zero(2), Mat::Identity(2, 2)));
}

TEST(Restriction, RejectsDimensionMismatchWithFit) {
  Fixture f;
  const RestrictionSpec wrong(Mat::Identity(2, 4), Vec::Zero(2), Mat::Identity(2, 2));
  EXPECT_THROW(sre(f.fit, wrong), InputError);
}

TEST(Estimators, DispatchRequiresParametersAndRestriction) {
  Fixture f;
  EXPECT_THROW(estimate(EstimatorKind::LE, f.fit, std::nullopt, std::nullopt), InputError);
  EXPECT_THROW(estimate(EstimatorKind::SRE, f.fit, std::nullopt, std::nullopt), InputError);
  const auto r = estimate(EstimatorKind::SRLTE, f.fit, f.r, EstimatorParams{0.5, 0.1});
  EXPECT_LT((r.beta - srlte::srlte(f.fit, f.r, 0.5, 0.1).beta).norm(), 1e-15);
}

TEST(Estimators, ParseNamesCaseInsensitively) {
  EXPECT_EQ(parse_estimator("srlte"), EstimatorKind::SRLTE);
  EXPECT_EQ(parse_estimator("Mle"), EstimatorKind::MLE);
  EXPECT_THROW(parse_estimator("ridge"), InputError);
  for (auto k : kAllEstimators) EXPECT_EQ(parse_estimator(to_string(k)), k);
}

TEST(Estimators, RequireConvergedFit) {
  Fixture f;
  f.fit.converged = false;
  EXPECT_THROW(sre(f.fit, f.r), Error);
}
