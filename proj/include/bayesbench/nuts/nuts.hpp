#pragma once

// No-U-Turn sampler with multinomial trajectory sampling within doubling,
// diagonal mass-matrix estimation over warmup windows, and dual-averaging
// step-size adaptation. Divergences are declared when the simulated energy
// error exceeds a threshold or a non-finite density/gradient is hit; the
// divergent subtree is discarded.
//
// Chains are independent: each owns its RNG stream and tape, so multi-chain
// runs are reproducible regardless of scheduling.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <mutex>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "bayesbench/ad/tape.hpp"
#include "bayesbench/model/posterior.hpp"
#include "bayesbench/nuts/dual_average.hpp"
#include "bayesbench/rng.hpp"

namespace bayesbench::nuts {

struct NutsTarget {
  model::DiffDensity log_density;  // over the sampling coordinates
  // sampling coordinates -> model-space parameters, for output
  std::function<std::vector<double>(std::span<const double>)> to_model;
  // overdispersed initial draw in sampling coordinates
  std::function<std::vector<double>(std::mt19937_64&)> initial_point;
  std::vector<std::string> parameter_names;
};

struct NutsConfig {
  std::size_t n_chains = 4;
  std::size_t n_warmup = 1000;
  std::size_t n_samples = 1000;
  double target_accept = 0.8;
  std::optional<double> fixed_step_size;  // disables dual averaging when set
  std::size_t max_tree_depth = 10;
  double divergence_threshold = 1000.0;
  bool adapt_mass_matrix = true;
  std::uint64_t seed = 0;
  std::size_t n_threads = 0;  // 0 -> hardware concurrency
};

struct ChainState {
  std::vector<double> position;
  double log_density = 0.0;
  std::vector<double> gradient;
  double step_size = 1.0;
  std::vector<double> inv_mass_diag;
};

struct ChainResult {
  std::vector<std::vector<double>> draws;  // model space, n_samples x dim
  std::size_t divergence_count = 0;        // sampling phase
  double mean_accept_stat = 0.0;           // sampling phase
  std::size_t n_gradient_evals = 0;        // warmup + sampling
  double adapted_step_size = 0.0;
  std::vector<double> inv_mass_diag;
  bool adaptation_failed = false;
  std::string failure_message;
};

struct NutsRunResult {
  std::vector<ChainResult> chains;
  std::vector<std::string> parameter_names;
  std::size_t total_gradient_evals = 0;
  std::size_t total_divergences = 0;
};

namespace detail {

struct PhasePoint {
  std::vector<double> position;
  std::vector<double> momentum;
  std::vector<double> gradient;
  double log_density = 0.0;
  bool valid = false;  // finite density and gradient

  double hamiltonian(std::span<const double> inv_mass) const {
    double kinetic = 0.0;
    for (std::size_t i = 0; i < momentum.size(); ++i)
      kinetic += 0.5 * momentum[i] * momentum[i] * inv_mass[i];
    return -log_density + kinetic;
  }
};

}  // namespace detail

struct LeapfrogResult {
  std::vector<double> position;
  std::vector<double> momentum;
  double log_density = 0.0;
  std::vector<double> gradient;
  double energy_change = 0.0;
  bool divergent_gradient = false;
};

// One leapfrog step: half momentum kick, full position drift under the
// inverse mass diagonal, half momentum kick.
inline LeapfrogResult leapfrog(std::span<const double> position, std::span<const double> momentum,
                               std::span<const double> gradient, double log_density, double step,
                               std::span<const double> inv_mass_diag,
                               const model::DiffDensity& target, ad::Tape& tape) {
  if (!(step > 0.0)) throw std::invalid_argument("leapfrog: step must be positive");
  const std::size_t dim = position.size();
  LeapfrogResult out;
  out.position.resize(dim);
  out.momentum.resize(dim);

  double h0_kinetic = 0.0;
  for (std::size_t i = 0; i < dim; ++i)
    h0_kinetic += 0.5 * momentum[i] * momentum[i] * inv_mass_diag[i];
  const double h0 = -log_density + h0_kinetic;

  for (std::size_t i = 0; i < dim; ++i) {
    out.momentum[i] = momentum[i] + 0.5 * step * gradient[i];
    out.position[i] = position[i] + step * inv_mass_diag[i] * out.momentum[i];
  }
  ad::GradientRecord rec = target.value_and_grad(out.position, tape);
  out.log_density = rec.value;
  out.gradient = std::move(rec.gradient);
  out.divergent_gradient = rec.divergent;
  for (std::size_t i = 0; i < dim; ++i) out.momentum[i] += 0.5 * step * out.gradient[i];

  double h1_kinetic = 0.0;
  for (std::size_t i = 0; i < dim; ++i)
    h1_kinetic += 0.5 * out.momentum[i] * out.momentum[i] * inv_mass_diag[i];
  out.energy_change = (-out.log_density + h1_kinetic) - h0;
  return out;
}

struct NutsStepResult {
  bool divergent = false;
  std::size_t tree_depth = 0;
  double accept_stat = 0.0;
  std::size_t n_gradient_evals = 0;
};

namespace detail {

struct TreeBuild {
  PhasePoint outer;      // outermost state in the expansion direction
  PhasePoint proposal;   // multinomial draw from the subtree
  double log_sum_weight = -std::numeric_limits<double>::infinity();
  double sum_accept = 0.0;
  std::size_t n_accept = 0;
  std::size_t n_grad = 0;
  bool divergent = false;
  bool turning = false;
};

inline bool is_uturn(const PhasePoint& minus, const PhasePoint& plus,
                     std::span<const double> inv_mass) {
  double dot_minus = 0.0, dot_plus = 0.0;
  for (std::size_t i = 0; i < inv_mass.size(); ++i) {
    const double dq = plus.position[i] - minus.position[i];
    dot_minus += dq * inv_mass[i] * minus.momentum[i];
    dot_plus += dq * inv_mass[i] * plus.momentum[i];
  }
  return dot_minus < 0.0 || dot_plus < 0.0;
}

inline double log_add_exp(double a, double b) {
  if (a == -std::numeric_limits<double>::infinity()) return b;
  if (b == -std::numeric_limits<double>::infinity()) return a;
  const double m = std::max(a, b);
  return m + std::log(std::exp(a - m) + std::exp(b - m));
}

// Recursively builds a subtree of 2^depth leapfrog states in one direction.
// Weights are exp(h0 - H(state)); a state with energy error beyond the
// divergence threshold (or a non-finite evaluation) poisons the subtree.
template <class Rng>
TreeBuild build_tree(std::size_t depth, const PhasePoint& from, int direction, double h0,
                     double step, std::span<const double> inv_mass,
                     const model::DiffDensity& target, double divergence_threshold, Rng& rng,
                     ad::Tape& tape) {
  TreeBuild tree;
  if (depth == 0) {
    LeapfrogResult leap =
        leapfrog(from.position, from.momentum, from.gradient, from.log_density,
                 direction * step, inv_mass, target, tape);
    tree.n_grad = 1;
    PhasePoint state;
    state.position = std::move(leap.position);
    state.momentum = std::move(leap.momentum);
    state.gradient = std::move(leap.gradient);
    state.log_density = leap.log_density;
    state.valid = !leap.divergent_gradient && std::isfinite(leap.log_density);

    const double h = state.valid ? state.hamiltonian(inv_mass)
                                 : std::numeric_limits<double>::infinity();
    const double energy_error = h - h0;
    tree.divergent = !state.valid || energy_error > divergence_threshold;
    tree.sum_accept = std::isfinite(energy_error) ? std::min(1.0, std::exp(-energy_error)) : 0.0;
    tree.n_accept = 1;
    tree.log_sum_weight = tree.divergent ? -std::numeric_limits<double>::infinity() : -energy_error;
    tree.proposal = state;
    tree.outer = std::move(state);
    return tree;
  }

  TreeBuild inner = build_tree(depth - 1, from, direction, h0, step, inv_mass, target,
                               divergence_threshold, rng, tape);
  if (inner.divergent || inner.turning) return inner;

  TreeBuild outer = build_tree(depth - 1, inner.outer, direction, h0, step, inv_mass, target,
                               divergence_threshold, rng, tape);
  TreeBuild merged;
  merged.n_grad = inner.n_grad + outer.n_grad;
  merged.sum_accept = inner.sum_accept + outer.sum_accept;
  merged.n_accept = inner.n_accept + outer.n_accept;
  merged.divergent = outer.divergent;
  merged.log_sum_weight = log_add_exp(inner.log_sum_weight, outer.log_sum_weight);
  if (merged.divergent) {
    merged.proposal = inner.proposal;
    merged.outer = outer.outer;
    return merged;
  }
  // multinomial draw between the two halves
  const double p_outer = std::exp(outer.log_sum_weight - merged.log_sum_weight);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  merged.proposal = (u01(rng) < p_outer) ? outer.proposal : inner.proposal;

  const PhasePoint& minus = direction > 0 ? from : outer.outer;
  const PhasePoint& plus = direction > 0 ? outer.outer : from;
  merged.turning = is_uturn(minus, plus, inv_mass);
  merged.outer = outer.outer;
  return merged;
}

}  // namespace detail

// One NUTS transition. The trajectory doubles until a U-turn, a divergence,
// or the depth cap; across doublings the new subtree is accepted with
// probability min(1, w_new / w_old) (biased progressive sampling).
template <class Rng>
NutsStepResult nuts_step(ChainState& chain, const model::DiffDensity& target, Rng& rng,
                         ad::Tape& tape, std::size_t max_depth = 10,
                         double divergence_threshold = 1000.0) {
  const std::size_t dim = chain.position.size();
  std::normal_distribution<double> normal(0.0, 1.0);

  detail::PhasePoint current;
  current.position = chain.position;
  current.gradient = chain.gradient;
  current.log_density = chain.log_density;
  current.momentum.resize(dim);
  for (std::size_t i = 0; i < dim; ++i)
    current.momentum[i] = normal(rng) / std::sqrt(chain.inv_mass_diag[i]);
  current.valid = true;

  const double h0 = current.hamiltonian(chain.inv_mass_diag);

  detail::PhasePoint leftmost = current;
  detail::PhasePoint rightmost = current;
  detail::PhasePoint proposal = current;
  double log_sum_weight = 0.0;  // weight of the initial state: exp(h0 - h0)

  NutsStepResult result;
  double sum_accept = 0.0;
  std::size_t n_accept = 0;
  std::uniform_real_distribution<double> u01(0.0, 1.0);

  for (std::size_t depth = 0; depth < max_depth; ++depth) {
    const int direction = u01(rng) < 0.5 ? 1 : -1;
    detail::PhasePoint& edge = direction > 0 ? rightmost : leftmost;
    detail::TreeBuild subtree =
        detail::build_tree(depth, edge, direction, h0, chain.step_size, chain.inv_mass_diag,
                           target, divergence_threshold, rng, tape);
    result.n_gradient_evals += subtree.n_grad;
    sum_accept += subtree.sum_accept;
    n_accept += subtree.n_accept;

    if (subtree.divergent) {
      result.divergent = true;
      break;
    }
    // biased progressive acceptance of the new half
    if (std::log(u01(rng)) < subtree.log_sum_weight - log_sum_weight)
      proposal = subtree.proposal;
    log_sum_weight = detail::log_add_exp(log_sum_weight, subtree.log_sum_weight);

    edge = subtree.outer;
    result.tree_depth = depth + 1;
    if (subtree.turning || detail::is_uturn(leftmost, rightmost, chain.inv_mass_diag)) break;
  }

  chain.position = proposal.position;
  chain.gradient = proposal.gradient;
  chain.log_density = proposal.log_density;
  result.accept_stat = n_accept ? sum_accept / static_cast<double>(n_accept) : 0.0;
  return result;
}

namespace detail {

// Doubling-and-halving search for a step size whose single-step acceptance
// straddles 0.5; the usual starting point for dual averaging.
template <class Rng>
double find_reasonable_step_size(const ChainState& chain, const model::DiffDensity& target,
                                 Rng& rng, ad::Tape& tape, std::size_t& grad_evals) {
  const std::size_t dim = chain.position.size();
  std::normal_distribution<double> normal(0.0, 1.0);
  PhasePoint state;
  state.position = chain.position;
  state.gradient = chain.gradient;
  state.log_density = chain.log_density;
  state.momentum.resize(dim);
  for (std::size_t i = 0; i < dim; ++i)
    state.momentum[i] = normal(rng) / std::sqrt(chain.inv_mass_diag[i]);

  double step = 1.0;
  auto log_accept = [&](double eps) {
    LeapfrogResult leap = leapfrog(state.position, state.momentum, state.gradient,
                                   state.log_density, eps, chain.inv_mass_diag, target, tape);
    ++grad_evals;
    if (leap.divergent_gradient || !std::isfinite(leap.energy_change))
      return -std::numeric_limits<double>::infinity();
    return std::min(0.0, -leap.energy_change);
  };

  double la = log_accept(step);
  const double direction = la > std::log(0.5) ? 1.0 : -1.0;
  for (int iter = 0; iter < 60; ++iter) {
    if (direction > 0.0 && !(la > std::log(0.5))) break;
    if (direction < 0.0 && !(la < std::log(0.5))) break;
    step *= direction > 0.0 ? 2.0 : 0.5;
    if (step > 1e7 || step < 1e-10) break;
    la = log_accept(step);
  }
  return step;
}

struct AdaptationSchedule {
  std::size_t init_buffer = 75;
  std::size_t term_buffer = 50;
  std::size_t base_window = 25;

  static AdaptationSchedule for_warmup(std::size_t n_warmup) {
    AdaptationSchedule s;
    if (n_warmup < 150) {
      s.init_buffer = n_warmup * 15 / 100;
      s.term_buffer = n_warmup * 10 / 100;
      s.base_window = std::max<std::size_t>(1, n_warmup - s.init_buffer - s.term_buffer);
    }
    return s;
  }

  bool in_mass_window(std::size_t iter, std::size_t n_warmup) const {
    return iter >= init_buffer && iter < n_warmup - term_buffer;
  }

  // last iteration of the current expanding window
  bool window_closes(std::size_t iter, std::size_t n_warmup) const {
    if (!in_mass_window(iter, n_warmup)) return false;
    std::size_t window_start = init_buffer;
    std::size_t width = base_window;
    while (true) {
      std::size_t window_end = window_start + width;
      const bool last = window_end + 2 * width > n_warmup - term_buffer;
      if (last) window_end = n_warmup - term_buffer;
      if (iter + 1 == window_end) return true;
      if (iter + 1 < window_end) return false;
      window_start = window_end;
      width *= 2;
    }
  }
};

}  // namespace detail

struct WarmupOutcome {
  bool failed = false;
  std::string message;
  std::size_t n_gradient_evals = 0;
};

// Warmup adaptation: dual averaging on the step size (unless a fixed step is
// supplied) and diagonal mass-matrix estimation over expanding windows.
template <class Rng>
WarmupOutcome warmup_adapt(ChainState& chain, const model::DiffDensity& target,
                           const NutsConfig& config, Rng& rng, ad::Tape& tape) {
  WarmupOutcome outcome;
  const std::size_t n_warmup = config.n_warmup;
  if (n_warmup == 0) return outcome;
  const bool adapt_step = !config.fixed_step_size.has_value();
  if (adapt_step && n_warmup < 100)
    throw std::invalid_argument("warmup_adapt: need at least 100 warmup steps when adapting");

  if (adapt_step) {
    chain.step_size =
        detail::find_reasonable_step_size(chain, target, rng, tape, outcome.n_gradient_evals);
  }
  DualAverage averager(chain.step_size, config.target_accept);

  const auto schedule = detail::AdaptationSchedule::for_warmup(n_warmup);
  std::vector<std::vector<double>> window_draws;
  std::size_t pinned_zero_accepts = 0;

  for (std::size_t iter = 0; iter < n_warmup; ++iter) {
    NutsStepResult step = nuts_step(chain, target, rng, tape, config.max_tree_depth,
                                    config.divergence_threshold);
    outcome.n_gradient_evals += step.n_gradient_evals;

    if (step.accept_stat < 1e-12) {
      if (++pinned_zero_accepts >= 200) {
        outcome.failed = true;
        outcome.message = "adaptation failure: acceptance pinned at zero for 200 steps";
        return outcome;
      }
    } else {
      pinned_zero_accepts = 0;
    }

    if (adapt_step) {
      averager.update(step.accept_stat);
      chain.step_size = averager.current();
    }

    if (config.adapt_mass_matrix && schedule.in_mass_window(iter, n_warmup)) {
      window_draws.push_back(chain.position);
      if (schedule.window_closes(iter, n_warmup) && window_draws.size() >= 5) {
        const double n = static_cast<double>(window_draws.size());
        for (std::size_t d = 0; d < chain.position.size(); ++d) {
          double mean = 0.0;
          for (const auto& row : window_draws) mean += row[d];
          mean /= n;
          double var = 0.0;
          for (const auto& row : window_draws) var += (row[d] - mean) * (row[d] - mean);
          var /= (n - 1.0);
          // shrink toward unit scale, as usual for short windows
          chain.inv_mass_diag[d] = var * n / (n + 5.0) + 1e-3 * (5.0 / (n + 5.0));
        }
        window_draws.clear();
        if (adapt_step) averager.restart(chain.step_size);
      }
    }
  }
  if (adapt_step) chain.step_size = averager.averaged();
  return outcome;
}

namespace detail {

inline ChainResult run_single_chain(const NutsTarget& target, const NutsConfig& config,
                                    std::size_t chain_index) {
  ChainResult result;
  auto rng = make_engine(config.seed, 1000 + chain_index);
  ad::Tape tape;
  const std::size_t dim = target.log_density.dimension();

  ChainState chain;
  chain.inv_mass_diag.assign(dim, 1.0);
  chain.step_size = config.fixed_step_size.value_or(1.0);

  bool initialized = false;
  for (int attempt = 0; attempt < 100 && !initialized; ++attempt) {
    chain.position = target.initial_point(rng);
    ad::GradientRecord rec = target.log_density.value_and_grad(chain.position, tape);
    ++result.n_gradient_evals;
    if (!rec.divergent) {
      chain.log_density = rec.value;
      chain.gradient = std::move(rec.gradient);
      initialized = true;
    }
  }
  if (!initialized) {
    result.adaptation_failed = true;
    result.failure_message = "could not find a finite-density starting point";
    return result;
  }

  WarmupOutcome warmup = warmup_adapt(chain, target.log_density, config, rng, tape);
  result.n_gradient_evals += warmup.n_gradient_evals;
  if (warmup.failed) {
    result.adaptation_failed = true;
    result.failure_message = warmup.message;
    return result;
  }

  result.draws.reserve(config.n_samples);
  double accept_total = 0.0;
  for (std::size_t s = 0; s < config.n_samples; ++s) {
    NutsStepResult step = nuts_step(chain, target.log_density, rng, tape, config.max_tree_depth,
                                    config.divergence_threshold);
    result.n_gradient_evals += step.n_gradient_evals;
    accept_total += step.accept_stat;
    if (step.divergent) ++result.divergence_count;
    result.draws.push_back(target.to_model(chain.position));
  }
  result.mean_accept_stat =
      config.n_samples ? accept_total / static_cast<double>(config.n_samples) : 0.0;
  result.adapted_step_size = chain.step_size;
  result.inv_mass_diag = chain.inv_mass_diag;
  return result;
}

}  // namespace detail

// Runs all chains (concurrently when allowed) and merges results by chain
// index. A failed chain is reported in its slot, never dropped.
inline NutsRunResult run_nuts(const NutsTarget& target, const NutsConfig& config) {
  if (config.n_chains == 0) throw std::invalid_argument("run_nuts: need at least one chain");
  NutsRunResult result;
  result.parameter_names = target.parameter_names;
  result.chains.resize(config.n_chains);

  std::size_t hw = config.n_threads ? config.n_threads : std::thread::hardware_concurrency();
  hw = std::max<std::size_t>(1, std::min(hw, config.n_chains));

  if (hw == 1) {
    for (std::size_t c = 0; c < config.n_chains; ++c)
      result.chains[c] = detail::run_single_chain(target, config, c);
  } else {
    std::vector<std::thread> workers;
    std::size_t next = 0;
    std::mutex mu;
    for (std::size_t t = 0; t < hw; ++t) {
      workers.emplace_back([&]() {
        while (true) {
          std::size_t c;
          {
            std::lock_guard<std::mutex> lock(mu);
            if (next >= config.n_chains) return;
            c = next++;
          }
          result.chains[c] = detail::run_single_chain(target, config, c);
        }
      });
    }
    for (auto& w : workers) w.join();
  }

  for (const ChainResult& c : result.chains) {
    result.total_gradient_evals += c.n_gradient_evals;
    result.total_divergences += c.divergence_count;
  }
  return result;
}

namespace detail {

struct UnconstrainedJoint {
  model::PosteriorModel posterior;
  template <class T>
  T operator()(std::span<const T> v) const {
    std::vector<T> theta(posterior.dimension);
    const T log_jac = posterior.transform.unconstrained_to_model(v, std::span<T>(theta));
    using bayesbench::ad::value_of;
    const T joint = posterior.log_joint(std::span<const T>(theta));
    if (value_of(joint) == math::kNegInf) return joint;
    return joint + log_jac;
  }
};

}  // namespace detail

// Builds the NUTS target for a model: the joint density in unconstrained
// coordinates (model log-density plus transform log-Jacobian). Chain starts
// are standard-normal jitter around the transform image of a prior draw.
inline NutsTarget make_nuts_target(const model::PosteriorModel& posterior) {
  NutsTarget target;
  target.parameter_names = posterior.parameter_names;
  target.log_density = model::DiffDensity(posterior.dimension,
                                          model::DensityFn(detail::UnconstrainedJoint{posterior}));
  const model::PosteriorModel post = posterior;
  target.to_model = [post](std::span<const double> v) {
    std::vector<double> theta(post.dimension);
    post.transform.unconstrained_to_model(v, std::span<double>(theta));
    return theta;
  };
  target.initial_point = [post](std::mt19937_64& rng) {
    std::vector<double> theta = post.sample_prior(rng);
    std::vector<double> v(post.dimension);
    post.transform.model_to_unconstrained(theta, v);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (double& vi : v) vi += normal(rng);
    return v;
  };
  return target;
}

}  // namespace bayesbench::nuts
