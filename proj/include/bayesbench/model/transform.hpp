#pragma once

// Per-parameter support transforms between three coordinate systems:
//   unit cube (0,1)^k  -- nested sampling works here
//   unconstrained R^k  -- NUTS and the flow work here
//   model space        -- the model's own parameterization
// The two systems are linked per coordinate by u = sigmoid(v). Every forward
// map returns the log |Jacobian| so densities can be carried across.

#include <cmath>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "bayesbench/math/special.hpp"

namespace bayesbench::model {

struct CoordinateMap {
  enum class Kind {
    Interval,          // theta = a + (b - a) u, for Uniform(a, b) priors
    LogisticScaled,    // theta = b + a logit(u), for unbounded parameters
    GaussianQuantile,  // theta = a + b probit(u), Gaussian reference map
  };

  Kind kind = Kind::LogisticScaled;
  double a = 1.0;
  double b = 0.0;

  static CoordinateMap interval(double lo, double hi) {
    if (!(lo < hi)) throw std::invalid_argument("CoordinateMap::interval: need lo < hi");
    return CoordinateMap{Kind::Interval, lo, hi};
  }
  static CoordinateMap logistic_scaled(double scale, double shift) {
    if (!(scale > 0.0))
      throw std::invalid_argument("CoordinateMap::logistic_scaled: scale must be positive");
    return CoordinateMap{Kind::LogisticScaled, scale, shift};
  }
  static CoordinateMap gaussian_quantile(double mean, double sigma) {
    if (!(sigma > 0.0))
      throw std::invalid_argument("CoordinateMap::gaussian_quantile: sigma must be positive");
    return CoordinateMap{Kind::GaussianQuantile, mean, sigma};
  }
};

class SupportTransform {
 public:
  SupportTransform() = default;
  explicit SupportTransform(std::vector<CoordinateMap> maps) : maps_(std::move(maps)) {}

  std::size_t dimension() const { return maps_.size(); }
  const std::vector<CoordinateMap>& coordinate_maps() const { return maps_; }

  // Cube -> model. Throws on boundary input (u_i not in the open interval).
  template <class T>
  T cube_to_model(std::span<const T> unit, std::span<T> theta) const {
    using bayesbench::ad::value_of;
    using bayesbench::math::logit;
    using bayesbench::math::probit;
    using std::log;
    using std::log1p;
    check_size(unit.size());
    T log_jac = T(0.0);
    for (std::size_t i = 0; i < maps_.size(); ++i) {
      const CoordinateMap& m = maps_[i];
      const double u_val = value_of(unit[i]);
      if (!(u_val > 0.0 && u_val < 1.0))
        throw std::domain_error("SupportTransform: cube coordinate on boundary");
      switch (m.kind) {
        case CoordinateMap::Kind::Interval: {
          theta[i] = m.a + (m.b - m.a) * unit[i];
          log_jac += std::log(m.b - m.a);
          break;
        }
        case CoordinateMap::Kind::LogisticScaled: {
          theta[i] = m.b + m.a * logit(unit[i]);
          log_jac += std::log(m.a) - log(unit[i]) - log1p(-unit[i]);
          break;
        }
        case CoordinateMap::Kind::GaussianQuantile: {
          const T z = probit(unit[i]);
          theta[i] = m.a + m.b * z;
          log_jac += std::log(m.b) + 0.5 * z * z + 0.5 * math::kLogTwoPi;
          break;
        }
      }
    }
    return log_jac;
  }

  // Unconstrained -> model (through u = sigmoid(v)).
  template <class T>
  T unconstrained_to_model(std::span<const T> v, std::span<T> theta) const {
    using bayesbench::math::log_sigmoid;
    using bayesbench::math::probit;
    using bayesbench::math::sigmoid;
    check_size(v.size());
    T log_jac = T(0.0);
    for (std::size_t i = 0; i < maps_.size(); ++i) {
      const CoordinateMap& m = maps_[i];
      switch (m.kind) {
        case CoordinateMap::Kind::Interval: {
          theta[i] = m.a + (m.b - m.a) * sigmoid(v[i]);
          log_jac += std::log(m.b - m.a) + log_sigmoid(v[i]) + log_sigmoid(-v[i]);
          break;
        }
        case CoordinateMap::Kind::LogisticScaled: {
          theta[i] = m.b + m.a * v[i];
          log_jac += std::log(m.a);
          break;
        }
        case CoordinateMap::Kind::GaussianQuantile: {
          const T u = sigmoid(v[i]);
          const T z = probit(u);
          theta[i] = m.a + m.b * z;
          log_jac += std::log(m.b) + 0.5 * z * z + 0.5 * math::kLogTwoPi +
                     log_sigmoid(v[i]) + log_sigmoid(-v[i]);
          break;
        }
      }
    }
    return log_jac;
  }

  void model_to_cube(std::span<const double> theta, std::span<double> unit) const {
    check_size(theta.size());
    for (std::size_t i = 0; i < maps_.size(); ++i) {
      const CoordinateMap& m = maps_[i];
      switch (m.kind) {
        case CoordinateMap::Kind::Interval:
          unit[i] = (theta[i] - m.a) / (m.b - m.a);
          break;
        case CoordinateMap::Kind::LogisticScaled:
          unit[i] = math::sigmoid((theta[i] - m.b) / m.a);
          break;
        case CoordinateMap::Kind::GaussianQuantile:
          unit[i] = math::normal_cdf((theta[i] - m.a) / m.b);
          break;
      }
    }
  }

  void model_to_unconstrained(std::span<const double> theta, std::span<double> v) const {
    check_size(theta.size());
    for (std::size_t i = 0; i < maps_.size(); ++i) {
      const CoordinateMap& m = maps_[i];
      switch (m.kind) {
        case CoordinateMap::Kind::Interval:
          v[i] = math::logit((theta[i] - m.a) / (m.b - m.a));
          break;
        case CoordinateMap::Kind::LogisticScaled:
          v[i] = (theta[i] - m.b) / m.a;
          break;
        case CoordinateMap::Kind::GaussianQuantile:
          v[i] = math::logit(math::normal_cdf((theta[i] - m.a) / m.b));
          break;
      }
    }
  }

 private:
  void check_size(std::size_t n) const {
    if (n != maps_.size())
      throw std::invalid_argument("SupportTransform: dimension mismatch");
  }

  std::vector<CoordinateMap> maps_;
};

}  // namespace bayesbench::model
