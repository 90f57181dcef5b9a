#pragma once

#include <cmath>
#include <stdexcept>

namespace bayesbench::nuts {

// Dual-averaging step-size adaptation (Nesterov primal-dual averaging on
// log epsilon), driving the mean acceptance statistic to a target.
class DualAverage {
 public:
  DualAverage(double initial_step, double target_accept, double gamma = 0.05, double t0 = 10.0,
              double kappa = 0.75)
      : target_(target_accept), gamma_(gamma), t0_(t0), kappa_(kappa) {
    if (!(initial_step > 0.0)) throw std::invalid_argument("DualAverage: step must be positive");
    restart(initial_step);
  }

  void restart(double step) {
    mu_ = std::log(10.0 * step);
    log_step_ = std::log(step);
    log_step_avg_ = std::log(step);
    h_avg_ = 0.0;
    count_ = 0;
  }

  void update(double accept_prob) {
    accept_prob = std::min(1.0, std::max(0.0, accept_prob));
    count_ += 1;
    const double t = static_cast<double>(count_);
    const double eta = 1.0 / (t + t0_);
    h_avg_ = (1.0 - eta) * h_avg_ + eta * (target_ - accept_prob);
    log_step_ = mu_ - std::sqrt(t) / gamma_ * h_avg_;
    const double w = std::pow(t, -kappa_);
    log_step_avg_ = w * log_step_ + (1.0 - w) * log_step_avg_;
  }

  double current() const { return std::exp(log_step_); }
  double averaged() const { return std::exp(log_step_avg_); }
  double target() const { return target_; }

 private:
  double target_;
  double gamma_;
  double t0_;
  double kappa_;
  double mu_ = 0.0;
  double log_step_ = 0.0;
  double log_step_avg_ = 0.0;
  double h_avg_ = 0.0;
  long count_ = 0;
};

}  // namespace bayesbench::nuts
