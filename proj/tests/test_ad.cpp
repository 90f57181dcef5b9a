#include <cmath>
#include <random>
#include <span>

#include <gtest/gtest.h>

#include "bayesbench/ad/tape.hpp"
#include "bayesbench/math/special.hpp"
#include "bayesbench/model/gaussian_fit.hpp"
#include "bayesbench/model/nsi.hpp"

using namespace bayesbench;
using ad::Var;

TEST(ValueAndGrad, SquareOfCoordinate) {
  auto f = [](std::span<const Var> x) { return x[0] * x[0]; };
  std::vector<double> point = {3.0};
  auto rec = ad::value_and_grad(f, point);
  EXPECT_FALSE(rec.divergent);
  EXPECT_DOUBLE_EQ(rec.value, 9.0);
  EXPECT_DOUBLE_EQ(rec.gradient[0], 6.0);
}

TEST(ValueAndGrad, ProductRuleComposite) {
  // f = exp(x0) * x1 at (0, 2): value 2, grad (2, 1)
  auto f = [](std::span<const Var> x) { return exp(x[0]) * x[1]; };
  std::vector<double> point = {0.0, 2.0};
  auto rec = ad::value_and_grad(f, point);
  EXPECT_DOUBLE_EQ(rec.value, 2.0);
  EXPECT_DOUBLE_EQ(rec.gradient[0], 2.0);
  EXPECT_DOUBLE_EQ(rec.gradient[1], 1.0);
}

TEST(ValueAndGrad, PrimitivesMatchFiniteDifferences) {
  auto f = [](auto x) {
    using T = std::decay_t<decltype(x[0])>;
    using std::erf;
    using std::exp;
    using std::log;
    using std::log1p;
    using std::pow;
    using std::sqrt;
    using std::tanh;
    using std::sin;
    using std::cos;
    T a = exp(x[0] * 0.3) + log(2.0 + x[1] * x[1]);
    T b = tanh(x[0]) * sqrt(3.0 + x[1]) + erf(x[0] - x[1]);
    T c = pow(1.0 + x[0] * x[0], 1.7) + sin(x[1]) * cos(x[0]) + log1p(exp(x[1]));
    return a * b + c / (1.0 + x[1] * x[1]);
  };
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> point = {u(rng), u(rng)};
    auto rec = ad::value_and_grad(f, point);
    auto fd = ad::finite_difference_grad(f, point, 1e-6);
    ASSERT_FALSE(rec.divergent);
    for (int i = 0; i < 2; ++i) {
      const double scale = std::max(1.0, std::abs(fd[i]));
      EXPECT_NEAR(rec.gradient[i], fd[i], 1e-6 * scale);
    }
  }
}

TEST(ValueAndGrad, GaussianFitGradientVsCentralDifferences) {
  auto m = model::reference_gaussian_fit_dataset();
  auto f = [&m](auto theta) {
    using T = std::decay_t<decltype(theta[0])>;
    return model::gaussian_fit_log_density(m, std::span<const T>(theta));
  };
  std::mt19937_64 rng(7);
  std::normal_distribution<double> normal(0.0, 1.5);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> theta(m.dimension());
    for (double& t : theta) t = normal(rng);
    auto rec = ad::value_and_grad(f, theta);
    auto fd = ad::finite_difference_grad(f, theta, 1e-5);
    ASSERT_FALSE(rec.divergent);
    for (std::size_t i = 0; i < theta.size(); ++i) {
      const double scale = std::max(1e-8, std::abs(fd[i]));
      EXPECT_LT(std::abs(rec.gradient[i] - fd[i]) / scale, 1e-5);
    }
  }
}

TEST(ValueAndGrad, NsiGradientAgreesWithFiniteDifferences) {
  model::NsiObservation obs;
  model::SurrogateRatePlugin plugin;
  auto f = [&](auto theta) {
    using T = std::decay_t<decltype(theta[0])>;
    return model::nsi_log_density(std::span<const T>(theta), obs, plugin);
  };
  std::mt19937_64 rng(19);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> theta(model::kNsiDimension);
    for (std::size_t i = 0; i < 6; ++i) theta[i] = -4.0 + 8.0 * u01(rng);
    theta[6] = -1.4 + 2.8 * u01(rng);
    theta[7] = -0.95 + 1.9 * u01(rng);
    auto rec = ad::value_and_grad(f, theta);
    auto fd = ad::finite_difference_grad(f, theta, 1e-6);
    ASSERT_FALSE(rec.divergent);
    for (std::size_t i = 0; i < theta.size(); ++i) {
      const double scale = std::max(1e-6, std::abs(fd[i]));
      EXPECT_LT(std::abs(rec.gradient[i] - fd[i]) / scale, 1e-5);
    }
  }
}

TEST(ValueAndGrad, LinearityOverPrimitiveCombinations) {
  auto f = [](std::span<const Var> x) { return tanh(x[0]) + x[1] * x[1]; };
  auto g = [](std::span<const Var> x) { return exp(0.5 * x[0]) - log(2.0 + x[1]); };
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1.5, 1.5);
  for (int trial = 0; trial < 20; ++trial) {
    const double a = u(rng), b = u(rng);
    auto combo = [&](std::span<const Var> x) { return a * f(x) + b * g(x); };
    std::vector<double> point = {u(rng), u(rng)};
    auto rf = ad::value_and_grad(f, point);
    auto rg = ad::value_and_grad(g, point);
    auto rc = ad::value_and_grad(combo, point);
    for (int i = 0; i < 2; ++i)
      EXPECT_NEAR(rc.gradient[i], a * rf.gradient[i] + b * rg.gradient[i], 1e-12);
  }
}

TEST(ValueAndGrad, ConstantHasZeroGradient) {
  auto f = [](std::span<const Var>) { return Var(4.2); };
  std::vector<double> point = {1.0, -2.0, 3.0};
  auto rec = ad::value_and_grad(f, point);
  EXPECT_FALSE(rec.divergent);
  EXPECT_DOUBLE_EQ(rec.value, 4.2);
  for (double g : rec.gradient) EXPECT_EQ(g, 0.0);
}

TEST(ValueAndGrad, ReplayIsBitwiseIdentical) {
  auto m = model::reference_gaussian_fit_dataset();
  auto f = [&m](std::span<const Var> theta) {
    return model::gaussian_fit_log_density(m, theta);
  };
  std::vector<double> theta = {0.3, -0.8, 1.1, 0.2, -0.4, 0.9};
  ad::Tape tape;
  auto r1 = ad::value_and_grad(f, theta, tape);
  auto r2 = ad::value_and_grad(f, theta, tape);
  EXPECT_EQ(r1.value, r2.value);
  for (std::size_t i = 0; i < theta.size(); ++i) EXPECT_EQ(r1.gradient[i], r2.gradient[i]);
}

TEST(ValueAndGrad, NonFiniteIntermediateFlagsDivergence) {
  auto f = [](std::span<const Var> x) { return log(x[0] - 1.0) + x[1]; };
  std::vector<double> point = {0.5, 1.0};  // log of negative -> NaN
  auto rec = ad::value_and_grad(f, point);
  EXPECT_TRUE(rec.divergent);
}

TEST(ValueAndGrad, NegInfOutputFlagsDivergenceWithoutThrowing) {
  model::NsiObservation obs;
  model::SurrogateRatePlugin plugin;
  auto f = [&](std::span<const Var> theta) {
    return model::nsi_log_density(std::span<const Var>(theta), obs, plugin);
  };
  std::vector<double> theta(model::kNsiDimension, 0.0);
  theta[0] = 5.1;  // outside the uniform support
  auto rec = ad::value_and_grad(f, theta);
  EXPECT_TRUE(rec.divergent);
  EXPECT_EQ(rec.value, math::kNegInf);
}

TEST(FiniteDifferences, IdentityCoordinate) {
  auto f = [](std::span<const double> x) { return x[1]; };
  std::vector<double> point = {0.4, 0.7, -0.1};
  auto fd = ad::finite_difference_grad(f, point, 1e-5);
  EXPECT_NEAR(fd[0], 0.0, 1e-10);
  EXPECT_NEAR(fd[1], 1.0, 1e-10);
  EXPECT_NEAR(fd[2], 0.0, 1e-10);
}

TEST(FiniteDifferences, QuadraticIsNearlyExact) {
  auto f = [](std::span<const double> x) { return 3.0 * x[0] * x[0] - 2.0 * x[0] + 1.0; };
  std::vector<double> point = {1.3};
  auto fd = ad::finite_difference_grad(f, point, 1e-4);
  EXPECT_NEAR(fd[0], 6.0 * 1.3 - 2.0, 1e-8);
}

TEST(FiniteDifferences, RejectsNonPositiveStep) {
  auto f = [](std::span<const double> x) { return x[0]; };
  std::vector<double> point = {0.0};
  EXPECT_THROW(ad::finite_difference_grad(f, point, 0.0), std::invalid_argument);
}
