#pragma once

// Type-erased posterior bundle. A DensityFn wraps one functor with a
// templated call operator so the same expression is usable with plain
// doubles (evaluation) and ad::Var (gradient recording).

#include <functional>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "bayesbench/ad/tape.hpp"
#include "bayesbench/model/transform.hpp"

namespace bayesbench::model {

class DensityFn {
 public:
  DensityFn() = default;

  template <class F, class = std::enable_if_t<!std::is_same_v<std::decay_t<F>, DensityFn>>>
  DensityFn(F f) : dbl_(f), var_(std::move(f)) {}

  double operator()(std::span<const double> x) const { return dbl_(x); }
  ad::Var operator()(std::span<const ad::Var> x) const { return var_(x); }

  explicit operator bool() const { return static_cast<bool>(dbl_); }

 private:
  std::function<double(std::span<const double>)> dbl_;
  std::function<ad::Var(std::span<const ad::Var>)> var_;
};

struct PosteriorModel {
  std::size_t dimension = 0;
  std::vector<std::string> parameter_names;
  DensityFn log_prior;
  DensityFn log_likelihood;
  SupportTransform transform;
  std::function<std::vector<double>(std::mt19937_64&)> sample_prior;

  template <class T>
  T log_joint(std::span<const T> theta) const {
    const T lp = log_prior(theta);
    using bayesbench::ad::value_of;
    if (value_of(lp) == math::kNegInf) return lp;
    return lp + log_likelihood(theta);
  }
};

// A density with both a cheap value path and a reverse-mode gradient path.
class DiffDensity {
 public:
  DiffDensity() = default;
  DiffDensity(std::size_t dim, DensityFn f) : dim_(dim), f_(std::move(f)) {}

  std::size_t dimension() const { return dim_; }

  double value(std::span<const double> x) const { return f_(x); }

  ad::GradientRecord value_and_grad(std::span<const double> x, ad::Tape& tape) const {
    return ad::value_and_grad([this](std::span<const ad::Var> v) { return f_(v); }, x, tape);
  }

 private:
  std::size_t dim_ = 0;
  DensityFn f_;
};

}  // namespace bayesbench::model
