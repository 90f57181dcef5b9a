#include <cmath>
#include <random>
#include <span>

#include <gtest/gtest.h>

#include "bayesbench/math/special.hpp"
#include "bayesbench/model/transform.hpp"

using namespace bayesbench;
using model::CoordinateMap;
using model::SupportTransform;

TEST(LogisticTransform, MidpointUnitScale) {
  SupportTransform t({CoordinateMap::logistic_scaled(1.0, 0.0)});
  std::vector<double> u = {0.5}, theta(1);
  const double log_jac = t.cube_to_model(std::span<const double>(u), std::span<double>(theta));
  EXPECT_NEAR(theta[0], 0.0, 1e-15);
  EXPECT_NEAR(log_jac, std::log(4.0), 1e-14);  // d logit/du at 0.5 is 4
}

TEST(LogisticTransform, BoundaryInputThrows) {
  SupportTransform t({CoordinateMap::logistic_scaled(1.0, 0.0)});
  std::vector<double> theta(1);
  std::vector<double> u0 = {0.0}, u1 = {1.0};
  EXPECT_THROW(t.cube_to_model(std::span<const double>(u0), std::span<double>(theta)),
               std::domain_error);
  EXPECT_THROW(t.cube_to_model(std::span<const double>(u1), std::span<double>(theta)),
               std::domain_error);
}

TEST(SupportTransform, CubeRoundTripAllKinds) {
  SupportTransform t({CoordinateMap::logistic_scaled(12.6, -0.5),
                      CoordinateMap::interval(-5.0, 5.0),
                      CoordinateMap::gaussian_quantile(1.0, 2.0)});
  std::mt19937_64 rng(101);
  std::uniform_real_distribution<double> u01(0.001, 0.999);
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<double> u = {u01(rng), u01(rng), u01(rng)};
    std::vector<double> theta(3), back(3);
    t.cube_to_model(std::span<const double>(u), std::span<double>(theta));
    t.model_to_cube(theta, back);
    for (int i = 0; i < 3; ++i) EXPECT_NEAR(back[i], u[i], 1e-12);
  }
}

TEST(SupportTransform, UnconstrainedRoundTrip) {
  SupportTransform t({CoordinateMap::logistic_scaled(3.0, 1.0),
                      CoordinateMap::interval(-2.0, 7.0),
                      CoordinateMap::gaussian_quantile(0.0, 1.0)});
  std::mt19937_64 rng(55);
  std::uniform_real_distribution<double> uv(-6.0, 6.0);
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<double> v = {uv(rng), uv(rng), uv(rng)};
    std::vector<double> theta(3), back(3);
    t.unconstrained_to_model(std::span<const double>(v), std::span<double>(theta));
    t.model_to_unconstrained(theta, back);
    for (int i = 0; i < 3; ++i) EXPECT_NEAR(back[i], v[i], 1e-9);
  }
}

TEST(SupportTransform, QuantileVariantReproducesNormalDensity) {
  // uniform cube density plus the log-Jacobian of the Gaussian-quantile map
  // must cancel the matching normal density: N(theta) + log|d theta/d u| = 0.
  const double mean = -0.7, sigma = 1.9;
  SupportTransform t({CoordinateMap::gaussian_quantile(mean, sigma)});
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> u01(0.001, 0.999);
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<double> u = {u01(rng)}, theta(1);
    const double log_jac = t.cube_to_model(std::span<const double>(u), std::span<double>(theta));
    const double normal = math::normal_logpdf(theta[0], mean, sigma);
    EXPECT_NEAR(normal + log_jac, 0.0, 1e-11);
  }
}

TEST(SupportTransform, ChangeOfVariablesPreservesIntegral) {
  // integral over the cube of exp(model log-density + log-Jacobian) equals
  // the integral of the density over model space; quadrature on both sides.
  SupportTransform t({CoordinateMap::logistic_scaled(4.0, 0.5)});
  auto model_log_density = [](double theta) {
    return math::normal_logpdf(theta, 0.3, 1.4) + std::log(0.8);  // total mass 0.8
  };
  const int n = 200001;
  double cube_integral = 0.0;
  for (int i = 1; i + 1 < n; ++i) {
    const double u = static_cast<double>(i) / (n - 1);
    std::vector<double> uv = {u}, theta(1);
    const double log_jac = t.cube_to_model(std::span<const double>(uv), std::span<double>(theta));
    cube_integral += std::exp(model_log_density(theta[0]) + log_jac) / (n - 1);
  }
  double model_integral = 0.0;
  const double lo = -20.0, hi = 20.0;
  const int m = 40001;
  const double h = (hi - lo) / (m - 1);
  for (int i = 0; i < m; ++i) {
    const double w = (i == 0 || i == m - 1) ? 0.5 * h : h;
    model_integral += w * std::exp(model_log_density(lo + i * h));
  }
  EXPECT_NEAR(cube_integral, model_integral, 1e-4);
  EXPECT_NEAR(model_integral, 0.8, 1e-6);
}

TEST(SupportTransform, UnconstrainedJacobianMatchesNumericalDerivative) {
  SupportTransform t({CoordinateMap::interval(-5.0, 5.0)});
  for (double v : {-3.0, -0.5, 0.0, 1.2, 4.0}) {
    std::vector<double> vv = {v}, theta_p(1), theta_m(1);
    const double h = 1e-6;
    std::vector<double> vp = {v + h}, vm = {v - h};
    t.unconstrained_to_model(std::span<const double>(vp), std::span<double>(theta_p));
    t.unconstrained_to_model(std::span<const double>(vm), std::span<double>(theta_m));
    const double numeric = (theta_p[0] - theta_m[0]) / (2.0 * h);
    std::vector<double> theta(1);
    const double log_jac =
        t.unconstrained_to_model(std::span<const double>(vv), std::span<double>(theta));
    EXPECT_NEAR(log_jac, std::log(std::abs(numeric)), 1e-8);
  }
}

TEST(CoordinateMap, RejectsBadParameters) {
  EXPECT_THROW(CoordinateMap::interval(2.0, 2.0), std::invalid_argument);
  EXPECT_THROW(CoordinateMap::logistic_scaled(0.0, 1.0), std::invalid_argument);
  EXPECT_THROW(CoordinateMap::gaussian_quantile(0.0, -1.0), std::invalid_argument);
}

TEST(SupportTransform, DimensionMismatchThrows) {
  SupportTransform t({CoordinateMap::interval(0.0, 1.0)});
  std::vector<double> u = {0.5, 0.5}, theta(2);
  EXPECT_THROW(t.cube_to_model(std::span<const double>(u), std::span<double>(theta)),
               std::invalid_argument);
}
