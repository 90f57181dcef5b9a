#pragma once

// ELBO training of the flow against a model posterior. The ELBO Monte Carlo
// estimate over standard-normal draws z is
//   (1/B) sum_b [ log p_latent(z_b) - log N(z_b; 0, I) ]
// which is maximized by adaptive-moment gradient ascent on the flow
// parameters (cosine-decayed learning rate). Training is single-threaded and
// bitwise reproducible given the seed.

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

#include "bayesbench/ad/tape.hpp"
#include "bayesbench/flow/bnaf.hpp"
#include "bayesbench/flow/neutra.hpp"
#include "bayesbench/math/special.hpp"
#include "bayesbench/model/posterior.hpp"
#include "bayesbench/rng.hpp"

namespace bayesbench::flow {

struct FlowTrainConfig {
  std::size_t epochs = 5000;
  std::size_t batch = 30;
  double learning_rate = 1e-2;
  double learning_rate_final = 1e-3;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  std::size_t nan_failure_limit = 50;
  std::uint64_t seed = 0;
};

struct TrainingTrace {
  std::vector<double> elbo_per_epoch;
  double final_mean_elbo = 0.0;  // mean over the last 100 epochs
};

namespace detail {

template <class TP>
TP elbo_objective(const BnafFlow& flow, std::span<const TP> params,
                  const model::PosteriorModel& posterior, std::span<const double> batch_z,
                  std::size_t batch) {
  const std::size_t dim = flow.dimension();
  TP total = TP(0.0);
  for (std::size_t b = 0; b < batch; ++b) {
    std::span<const double> z = batch_z.subspan(b * dim, dim);
    TP term = neutra_log_density_params(flow, params, posterior, z);
    for (double zi : z) term -= math::normal_logpdf(zi, 0.0, 1.0);
    total += term;
  }
  return total * (1.0 / static_cast<double>(batch));
}

}  // namespace detail

// Single Monte Carlo ELBO estimate at the flow's current parameters.
inline double elbo_estimate(const BnafFlow& flow, const model::PosteriorModel& posterior,
                            std::size_t batch, std::mt19937_64& rng) {
  if (batch == 0) throw std::invalid_argument("elbo_estimate: batch must be positive");
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> z(batch * flow.dimension());
  for (double& zi : z) zi = normal(rng);
  return detail::elbo_objective<double>(flow, flow.parameters(), posterior, z, batch);
}

inline std::pair<BnafFlow, TrainingTrace> train_neutra(const model::PosteriorModel& posterior,
                                                       const BnafConfig& flow_config,
                                                       const FlowTrainConfig& train) {
  if (train.epochs == 0) throw std::invalid_argument("train_neutra: epochs must be positive");
  if (train.batch == 0) throw std::invalid_argument("train_neutra: batch must be positive");

  BnafFlow flow(flow_config, derive_seed(train.seed, 0xF10));
  const std::size_t n_params = flow.n_params();
  const std::size_t dim = flow.dimension();

  auto rng = make_engine(train.seed, 0xE1B0);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> batch_z(train.batch * dim);

  std::vector<double> m(n_params, 0.0), v(n_params, 0.0);
  ad::Tape tape;
  TrainingTrace trace;
  trace.elbo_per_epoch.reserve(train.epochs);
  std::size_t consecutive_bad = 0;

  for (std::size_t epoch = 0; epoch < train.epochs; ++epoch) {
    for (double& zi : batch_z) zi = normal(rng);

    auto objective = [&](std::span<const ad::Var> params) {
      return detail::elbo_objective(flow, params, posterior, std::span<const double>(batch_z),
                                    train.batch);
    };
    ad::GradientRecord rec = ad::value_and_grad(objective, flow.parameters(), tape);
    trace.elbo_per_epoch.push_back(rec.value);

    if (rec.divergent) {
      if (++consecutive_bad >= train.nan_failure_limit)
        throw std::runtime_error("train_neutra: ELBO not finite for " +
                                 std::to_string(consecutive_bad) + " consecutive epochs");
      continue;
    }
    consecutive_bad = 0;

    const double progress = static_cast<double>(epoch) / static_cast<double>(train.epochs);
    const double lr = train.learning_rate_final +
                      0.5 * (train.learning_rate - train.learning_rate_final) *
                          (1.0 + std::cos(std::numbers::pi * progress));
    const double t = static_cast<double>(epoch + 1);
    const double bias1 = 1.0 - std::pow(train.adam_beta1, t);
    const double bias2 = 1.0 - std::pow(train.adam_beta2, t);
    std::span<double> params = flow.parameters_mut();
    for (std::size_t i = 0; i < n_params; ++i) {
      const double g = rec.gradient[i];
      m[i] = train.adam_beta1 * m[i] + (1.0 - train.adam_beta1) * g;
      v[i] = train.adam_beta2 * v[i] + (1.0 - train.adam_beta2) * g * g;
      const double m_hat = m[i] / bias1;
      const double v_hat = v[i] / bias2;
      params[i] += lr * m_hat / (std::sqrt(v_hat) + train.adam_epsilon);  // ascent
    }
  }

  const std::size_t tail = std::min<std::size_t>(100, trace.elbo_per_epoch.size());
  double tail_sum = 0.0;
  for (std::size_t i = trace.elbo_per_epoch.size() - tail; i < trace.elbo_per_epoch.size(); ++i)
    tail_sum += trace.elbo_per_epoch[i];
  trace.final_mean_elbo = tail_sum / static_cast<double>(tail);
  return {std::move(flow), std::move(trace)};
}

}  // namespace bayesbench::flow
