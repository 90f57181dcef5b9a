#include <cmath>
#include <numbers>
#include <random>
#include <span>

#include <gtest/gtest.h>

#include "bayesbench/model/gaussian_fit.hpp"
#include "bayesbench/oracle/gaussian_evidence.hpp"

using namespace bayesbench;

TEST(MuMarginalCoefficients, EmptyDataRow) {
  std::vector<double> row;
  auto c = oracle::mu_marginal_coefficients(0.7, row, 10.0);
  EXPECT_DOUBLE_EQ(c.b, 0.0);
  EXPECT_NEAR(c.c, 0.7 * 0.7 / 20.0, 1e-15);
  EXPECT_NEAR(c.a, 0.05, 1e-15);
}

TEST(MuMarginalCoefficients, TwoZeroObservations) {
  std::vector<double> row = {0.0, 0.0};
  auto c = oracle::mu_marginal_coefficients(0.0, row, 10.0);
  EXPECT_NEAR(c.a, 1.05, 1e-15);  // 0.5 * (0.1 + 2)
  EXPECT_DOUBLE_EQ(c.b, 0.0);
  EXPECT_DOUBLE_EQ(c.c, 0.0);
}

TEST(MuMarginalCoefficients, ReproduceExponentPolynomial) {
  // a mu^2 + b mu + c must equal the collected exponent of prior x likelihood
  std::vector<double> row = {0.4, -1.1, 0.9};
  const double c_value = 0.6, s2 = 10.0;
  auto coef = oracle::mu_marginal_coefficients(c_value, row, s2);
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> umu(-8.0, 8.0);
  for (int trial = 0; trial < 100; ++trial) {
    const double mu = umu(rng);
    double direct = mu * mu / (2.0 * s2) + c_value * c_value / (2.0 * s2);
    for (double y : row) direct += (y - mu) * (y - mu) / (2.0 * std::exp(c_value));
    const double poly = coef.a * mu * mu + coef.b * mu + coef.c;
    EXPECT_NEAR(poly, direct, 1e-11 * std::max(1.0, std::abs(direct)));
  }
}

TEST(MuGaussianIntegral, StandardGaussian) {
  EXPECT_NEAR(oracle::mu_gaussian_integral(0.5, 0.0, 0.0), math::kSqrtTwoPi, 1e-12);
}

TEST(MuGaussianIntegral, CompletedSquareCase) {
  // a=1, b=2, c=1: exponent minimum 0, integral sqrt(pi)
  EXPECT_NEAR(oracle::mu_gaussian_integral(1.0, 2.0, 1.0), std::sqrt(std::numbers::pi), 1e-12);
}

TEST(MuGaussianIntegral, MatchesQuadrature) {
  const double a = 0.8, b = -0.6, c = 0.25;
  const int n = 400001;
  const double lo = -50.0, hi = 50.0, h = (hi - lo) / (n - 1);
  double quad = 0.0;
  for (int i = 0; i < n; ++i) {
    const double mu = lo + i * h;
    const double w = (i == 0 || i == n - 1) ? 0.5 * h : h;
    quad += w * std::exp(-(a * mu * mu + b * mu + c));
  }
  const double closed = oracle::mu_gaussian_integral(a, b, c);
  EXPECT_LT(std::abs(closed - quad) / quad, 1e-9);
}

TEST(MuGaussianIntegral, RejectsNonPositiveQuadraticCoefficient) {
  EXPECT_THROW(oracle::mu_gaussian_integral(0.0, 0.0, 0.0), std::invalid_argument);
  EXPECT_THROW(oracle::mu_gaussian_integral(-1.0, 0.0, 0.0), std::invalid_argument);
}

TEST(LogEvidenceOracle, NoDataGivesUnitEvidence) {
  // priors integrate to one: k=1 group with an empty observation row
  model::GaussianFitModel m;
  m.data = {{}};
  // validate() rejects empty rows, so call the internal path directly
  const oracle::Grid1D grid{-50.0, 50.0, 151};
  const double log_group =
      oracle::detail::log_group_integral(std::span<const double>(m.data[0]), 10.0, grid);
  EXPECT_NEAR(log_group, 0.0, 1e-6);
}

TEST(LogEvidenceOracle, BruteForceAgreementTinyCase) {
  // full 2k-dimensional trapezoid (no analytic reduction) on k=1, n=1
  model::GaussianFitModel m;
  m.data = {{0.3}};
  const double lo = -10.0, hi = 10.0;
  const int n = 3001;
  const double h = (hi - lo) / (n - 1);
  math::LogSumExp acc;
  const double prior_sd = std::sqrt(10.0);
  for (int i = 0; i < n; ++i) {
    const double mu = lo + i * h;
    const double wi = (i == 0 || i == n - 1) ? 0.5 * h : h;
    for (int j = 0; j < n; ++j) {
      const double c_value = lo + j * h;
      const double wj = (j == 0 || j == n - 1) ? 0.5 * h : h;
      const double lg = math::normal_logpdf(mu, 0.0, prior_sd) +
                        math::normal_logpdf(c_value, 0.0, prior_sd) -
                        0.5 * math::kLogTwoPi - 0.5 * c_value -
                        0.5 * (0.3 - mu) * (0.3 - mu) * std::exp(-c_value);
      acc.add(std::log(wi * wj) + lg);
    }
  }
  const double reduced = oracle::log_evidence_at(m, oracle::QuadratureGrid{lo, hi, 3001});
  EXPECT_NEAR(acc.value(), reduced, 1e-4);
}

TEST(LogEvidenceOracle, ConvergenceTraceOnPinnedDataset) {
  const auto m = model::reference_gaussian_fit_dataset();
  auto result = oracle::log_evidence_oracle(m, oracle::QuadratureGrid{-50.0, 50.0, 151});
  EXPECT_TRUE(result.converged);
  // monotone shrinking error beyond the convergence knee
  const double final_value = result.convergence_trace.back().second;
  double prev_err = std::numeric_limits<double>::infinity();
  for (const auto& [points, value] : result.convergence_trace) {
    if (points < 61) continue;
    const double err = std::abs(value - final_value);
    EXPECT_LE(err, prev_err + 1e-12);
    prev_err = err;
  }
}

TEST(LogEvidenceOracle, RefinementStableBeyondDefaultGrid) {
  const auto m = model::reference_gaussian_fit_dataset();
  const double z151 = oracle::log_evidence_at(m, oracle::QuadratureGrid{-50.0, 50.0, 151});
  const double z241 = oracle::log_evidence_at(m, oracle::QuadratureGrid{-50.0, 50.0, 241});
  EXPECT_LT(std::abs(z151 - z241), 0.005);
}

TEST(MarginalContour, FullMassLevelIsZero) {
  const auto m = model::reference_gaussian_fit_dataset();
  const oracle::Grid1D inner{-50.0, 50.0, 101};
  const oracle::Grid1D ug{-8.0, 5.0, 61}, vg{-6.0, 7.0, 61};
  auto field = oracle::marginal_field(m, 0, 3, ug, vg, inner);
  EXPECT_EQ(oracle::contour_level(field, 1.0), math::kNegInf);
  EXPECT_NEAR(oracle::superlevel_mass_fraction(field, math::kNegInf), 1.0, 1e-12);
}

TEST(MarginalContour, SuperlevelMassSelfConsistency) {
  const auto m = model::reference_gaussian_fit_dataset();
  const oracle::Grid1D inner{-50.0, 50.0, 151};
  const oracle::Grid1D ug{-9.0, 6.0, 151}, vg{-7.0, 8.0, 151};
  auto field = oracle::marginal_field(m, 0, 3, ug, vg, inner);
  for (double target : {0.68, 0.95}) {
    const double level = oracle::contour_level(field, target);
    EXPECT_NEAR(oracle::superlevel_mass_fraction(field, level), target, 0.005);
  }
}

TEST(MarginalContour, FieldIntegratesToEvidence) {
  // the 2-D marginal over a wide window integrates back to the evidence
  const auto m = model::reference_gaussian_fit_dataset();
  const oracle::Grid1D inner{-50.0, 50.0, 151};
  const oracle::Grid1D ug{-12.0, 9.0, 201}, vg{-12.0, 12.0, 201};
  auto field = oracle::marginal_field(m, 0, 3, ug, vg, inner);
  math::LogSumExp acc;
  for (int iu = 0; iu < ug.n; ++iu)
    for (int iv = 0; iv < vg.n; ++iv)
      acc.add(std::log(ug.weight(iu) * vg.weight(iv)) + field.at(iu, iv));
  const double evidence = oracle::log_evidence_at(m, oracle::QuadratureGrid{-50.0, 50.0, 151});
  EXPECT_NEAR(acc.value(), evidence, 1e-3);
}

TEST(Marginal1D, CurveIntervalOnKnownGaussian) {
  // with no data the mu_1 marginal is the prior N(0, 10); the equal-tailed
  // 68% interval inverts the normal CDF
  model::GaussianFitModel m;
  m.data = {{}, {0.5, -0.5}};
  // bypass validate of empty first row by using the curve machinery directly
  const oracle::Grid1D grid{-15.0, 15.0, 2001};
  std::vector<double> curve(static_cast<std::size_t>(grid.n));
  const double prior_sd = std::sqrt(10.0);
  for (int i = 0; i < grid.n; ++i)
    curve[static_cast<std::size_t>(i)] = math::normal_logpdf(grid.point(i), 0.0, prior_sd);
  auto [lo, hi] = oracle::curve_equal_tailed_interval(grid, curve, 0.68);
  const double expected = prior_sd * math::probit(0.84);
  EXPECT_NEAR(hi, expected, 2e-2);
  EXPECT_NEAR(lo, -expected, 2e-2);
}

TEST(Marginal1D, MatchesFieldProjection) {
  // projecting the 2-D (mu_1, C_1) field onto mu_1 reproduces the 1-D curve
  const auto m = model::reference_gaussian_fit_dataset();
  const oracle::Grid1D inner{-50.0, 50.0, 151};
  const oracle::Grid1D ug{-9.0, 5.0, 81};
  const oracle::Grid1D vg{-50.0, 50.0, 151};
  auto field = oracle::marginal_field(m, 0, 3, ug, vg, inner);
  auto curve = oracle::marginal_density_1d(m, 0, ug, inner);
  for (int iu = 0; iu < ug.n; ++iu) {
    math::LogSumExp acc;
    for (int iv = 0; iv < vg.n; ++iv) acc.add(std::log(vg.weight(iv)) + field.at(iu, iv));
    EXPECT_NEAR(acc.value(), curve[static_cast<std::size_t>(iu)],
                1e-9 * std::max(1.0, std::abs(curve[static_cast<std::size_t>(iu)])));
  }
}

TEST(QuadratureGrid, Validation) {
  EXPECT_THROW((oracle::QuadratureGrid{1.0, 1.0, 151}).validate(), std::invalid_argument);
  EXPECT_THROW((oracle::QuadratureGrid{-1.0, 1.0, 1}).validate(), std::invalid_argument);
}
