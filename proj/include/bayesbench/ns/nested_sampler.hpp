#pragma once

// Nested sampler over the unit cube. The cube prior is uniform; the sampled
// "likelihood" is the full model joint mapped to the cube (model log-density
// plus transform log-Jacobian), so the accumulated evidence equals the model
// evidence. Replacement draws use likelihood-constrained slice sampling along
// random directions with bracket shrinkage.
//
// Volume bookkeeping uses deterministic mean shrinkage V_i = exp(-i/N) with
// exact shell widths dV_i = V_{i-1} - V_i, so the shells plus the final live
// volume telescope to exactly 1 (a constant likelihood integrates exactly).
// Stochastic shrinkage is available behind a flag for error studies.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "bayesbench/math/special.hpp"
#include "bayesbench/rng.hpp"

namespace bayesbench::ns {

struct CubeDensity {
  std::size_t dim = 0;
  // log of the cube-side joint; must return -inf (not throw) outside support
  std::function<double(std::span<const double>)> log_density;
  // cube point -> model-space parameter vector, for posterior output
  std::function<std::vector<double>(std::span<const double>)> to_model;
};

struct NsConfig {
  std::size_t n_live = 400;
  double frac_remain = 0.01;
  std::uint64_t seed = 0;
  std::size_t slice_steps = 0;  // 0 -> 2 * dim
  bool stochastic_shrinkage = false;
  std::size_t max_direction_failures = 100;
  double min_bracket_width = 1e-12;
  std::size_t max_iterations = 10'000'000;
};

struct LivePointSet {
  std::vector<std::vector<double>> points;
  std::vector<double> log_likelihoods;

  std::size_t size() const { return points.size(); }
};

struct DeadPoint {
  std::vector<double> point;  // cube coordinates
  double log_likelihood = 0.0;
  double log_volume_shell = 0.0;  // log dV_i
};

struct WeightedSample {
  std::vector<double> parameters;  // model space
  double weight = 0.0;
};

struct NsRunResult {
  double log_evidence = 0.0;
  double log_evidence_err = 0.0;
  double information_nats = 0.0;
  std::vector<WeightedSample> samples;
  std::vector<DeadPoint> dead_points;
  std::size_t n_likelihood_evals = 0;
  std::size_t n_iterations = 0;
  bool plateau_terminated = false;
};

struct EvidenceAccumulation {
  double log_evidence = 0.0;
  double log_evidence_err = 0.0;
  double information_nats = 0.0;
  std::vector<double> weights;  // dead points first, then live points; sums to 1
};

// Evidence, information, and normalized posterior weights from the dead-point
// sequence plus the terminal live set:
//   Z = sum_i dV_i L_i + (V_end / N) sum_j L_j
inline EvidenceAccumulation accumulate_evidence(std::span<const DeadPoint> dead,
                                                std::span<const double> live_log_likelihoods,
                                                double log_volume_end, std::size_t n_live) {
  if (dead.empty())
    throw std::invalid_argument("accumulate_evidence: empty dead-point sequence");
  if (n_live == 0) throw std::invalid_argument("accumulate_evidence: n_live must be positive");

  const double log_live_volume = log_volume_end - std::log(static_cast<double>(n_live));
  std::vector<double> log_terms;
  log_terms.reserve(dead.size() + live_log_likelihoods.size());
  math::LogSumExp z_acc;
  for (const DeadPoint& d : dead) {
    const double lt = d.log_volume_shell + d.log_likelihood;
    log_terms.push_back(lt);
    z_acc.add(lt);
  }
  for (double ll : live_log_likelihoods) {
    const double lt = log_live_volume + ll;
    log_terms.push_back(lt);
    z_acc.add(lt);
  }

  EvidenceAccumulation out;
  out.log_evidence = z_acc.value();
  out.weights.resize(log_terms.size());
  double information = 0.0;
  for (std::size_t i = 0; i < log_terms.size(); ++i) {
    const double w = std::exp(log_terms[i] - out.log_evidence);
    out.weights[i] = w;
    const double ll = i < dead.size() ? dead[i].log_likelihood
                                      : live_log_likelihoods[i - dead.size()];
    if (w > 0.0) information += w * ll;
  }
  // normalize away residual rounding so weights sum to one exactly
  double wsum = 0.0;
  for (double w : out.weights) wsum += w;
  for (double& w : out.weights) w /= wsum;

  information -= out.log_evidence;
  out.information_nats = std::max(information, 0.0);
  out.log_evidence_err = std::sqrt(out.information_nats / static_cast<double>(n_live));
  return out;
}

namespace detail {

template <class Rng>
std::vector<double> random_unit_direction(std::size_t dim, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> d(dim);
  double norm = 0.0;
  do {
    norm = 0.0;
    for (double& x : d) {
      x = normal(rng);
      norm += x * x;
    }
  } while (norm == 0.0);
  norm = std::sqrt(norm);
  for (double& x : d) x /= norm;
  return d;
}

// segment {t : x + t d in [0,1]^dim}
inline std::pair<double, double> box_bracket(std::span<const double> x,
                                             std::span<const double> d) {
  double t_lo = -std::numeric_limits<double>::infinity();
  double t_hi = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (d[i] == 0.0) continue;
    const double t0 = (0.0 - x[i]) / d[i];
    const double t1 = (1.0 - x[i]) / d[i];
    t_lo = std::max(t_lo, std::min(t0, t1));
    t_hi = std::min(t_hi, std::max(t0, t1));
  }
  return {t_lo, t_hi};
}

}  // namespace detail

struct ReplacementDraw {
  std::vector<double> point;
  double log_likelihood = 0.0;
};

// Draws a point from the prior restricted to log L > threshold by slice
// sampling: start at a random surviving live point, take `slice_steps`
// accepted moves along random directions, shrinking the bracket on each
// rejection. Throws after max_direction_failures collapsed brackets.
template <class Rng>
ReplacementDraw replace_lowest(const LivePointSet& live, std::size_t replace_index,
                               double log_likelihood_threshold, const CubeDensity& density,
                               Rng& rng, const NsConfig& config) {
  const std::size_t n = live.size();
  if (n < 2) throw std::invalid_argument("replace_lowest: need at least two live points");

  std::uniform_int_distribution<std::size_t> pick(0, n - 2);
  std::size_t start = pick(rng);
  if (start >= replace_index) ++start;

  std::vector<double> x = live.points[start];
  double log_l = live.log_likelihoods[start];
  const std::size_t steps = config.slice_steps ? config.slice_steps : 2 * density.dim;

  std::size_t direction_failures = 0;
  for (std::size_t step = 0; step < steps;) {
    const std::vector<double> dir = detail::random_unit_direction(density.dim, rng);
    auto [t_lo, t_hi] = detail::box_bracket(x, dir);
    bool moved = false;
    while (t_hi - t_lo >= config.min_bracket_width) {
      std::uniform_real_distribution<double> ut(t_lo, t_hi);
      const double t = ut(rng);
      std::vector<double> candidate(x.size());
      for (std::size_t i = 0; i < x.size(); ++i)
        candidate[i] = std::clamp(x[i] + t * dir[i], 0.0, 1.0);
      const double cand_log_l = density.log_density(candidate);
      if (cand_log_l > log_likelihood_threshold) {
        x = std::move(candidate);
        log_l = cand_log_l;
        moved = true;
        break;
      }
      if (t < 0.0)
        t_lo = t;
      else
        t_hi = t;
    }
    if (moved) {
      ++step;
    } else if (++direction_failures >= config.max_direction_failures) {
      throw std::runtime_error(
          "nested sampling: slice replacement failed after " +
          std::to_string(direction_failures) + " collapsed directions at threshold " +
          std::to_string(log_likelihood_threshold));
    }
  }
  if (!(log_l > log_likelihood_threshold))
    throw std::logic_error("replace_lowest: postcondition violated");
  return ReplacementDraw{std::move(x), log_l};
}

inline NsRunResult run_ns(const CubeDensity& density, const NsConfig& config) {
  if (density.dim == 0) throw std::invalid_argument("run_ns: zero-dimensional density");
  if (config.n_live < std::max<std::size_t>(2, 2 * density.dim))
    throw std::invalid_argument("run_ns: n_live must be at least 2*dim");
  if (!(config.frac_remain > 0.0 && config.frac_remain < 1.0))
    throw std::invalid_argument("run_ns: frac_remain must lie in (0, 1)");

  std::size_t n_evals = 0;
  CubeDensity counted = density;
  counted.log_density = [&n_evals, &density](std::span<const double> u) {
    ++n_evals;
    return density.log_density(u);
  };

  const std::size_t n_live = config.n_live;
  const double n_live_d = static_cast<double>(n_live);

  // initialization: uniform cube draws, redrawing any point with a
  // non-finite likelihood
  LivePointSet live;
  live.points.resize(n_live);
  live.log_likelihoods.resize(n_live);
  {
    auto init_rng = make_engine(config.seed, 1);
    for (std::size_t i = 0; i < n_live; ++i) {
      double log_l = math::kNegInf;
      std::vector<double> u(density.dim);
      std::size_t attempts = 0;
      do {
        if (++attempts > 100000)
          throw std::runtime_error("run_ns: could not find finite-likelihood prior draws");
        for (double& ui : u) ui = uniform_open01(init_rng);
        log_l = counted.log_density(u);
      } while (!std::isfinite(log_l));
      live.points[i] = u;
      live.log_likelihoods[i] = log_l;
    }
  }

  std::vector<DeadPoint> dead;
  math::LogSumExp dead_evidence;
  const double log_frac_remain = std::log(config.frac_remain);
  double log_volume = 0.0;  // log V_i, current enclosed prior volume
  bool plateau = false;
  std::size_t iteration = 0;

  auto shrink_rng = make_engine(config.seed, 2);
  while (true) {
    std::size_t lowest = 0, highest = 0;
    for (std::size_t i = 1; i < n_live; ++i) {
      if (live.log_likelihoods[i] < live.log_likelihoods[lowest]) lowest = i;
      if (live.log_likelihoods[i] > live.log_likelihoods[highest]) highest = i;
    }
    const double log_l_min = live.log_likelihoods[lowest];
    const double log_l_max = live.log_likelihoods[highest];

    // no contour above the current threshold exists; refine no further
    if (log_l_max == log_l_min) {
      plateau = true;
      break;
    }
    // remaining-evidence halting criterion
    if (!dead.empty() &&
        (log_l_max + log_volume) - dead_evidence.value() < log_frac_remain)
      break;
    if (iteration >= config.max_iterations)
      throw std::runtime_error("run_ns: iteration limit reached without termination");

    ++iteration;
    double log_volume_next;
    if (config.stochastic_shrinkage) {
      log_volume_next = log_volume + std::log(uniform_open01(shrink_rng)) / n_live_d;
    } else {
      log_volume_next = -static_cast<double>(iteration) / n_live_d;
    }
    // log(V_{i-1} - V_i), computed stably
    const double log_shell =
        log_volume + std::log(-std::expm1(log_volume_next - log_volume));

    auto replacement_rng = make_engine(config.seed, 100 + iteration);
    ReplacementDraw draw =
        replace_lowest(live, lowest, log_l_min, counted, replacement_rng, config);

    dead.push_back(DeadPoint{std::move(live.points[lowest]), log_l_min, log_shell});
    dead_evidence.add(log_shell + log_l_min);
    live.points[lowest] = std::move(draw.point);
    live.log_likelihoods[lowest] = draw.log_likelihood;
    log_volume = log_volume_next;
  }

  NsRunResult result;
  result.n_iterations = iteration;
  result.plateau_terminated = plateau;

  if (dead.empty()) {
    // terminated before any removal (constant likelihood): the live-point
    // term is the whole estimate and every weight is 1/N
    math::LogSumExp z;
    for (double ll : live.log_likelihoods) z.add(ll - std::log(n_live_d));
    result.log_evidence = z.value();
    result.log_evidence_err = 0.0;
    result.information_nats = 0.0;
    for (std::size_t j = 0; j < n_live; ++j) {
      result.samples.push_back(
          WeightedSample{density.to_model(live.points[j]), 1.0 / n_live_d});
    }
  } else {
    EvidenceAccumulation acc =
        accumulate_evidence(dead, live.log_likelihoods, log_volume, n_live);
    result.log_evidence = acc.log_evidence;
    result.log_evidence_err = acc.log_evidence_err;
    result.information_nats = acc.information_nats;
    result.samples.reserve(dead.size() + n_live);
    for (std::size_t i = 0; i < dead.size(); ++i)
      result.samples.push_back(WeightedSample{density.to_model(dead[i].point), acc.weights[i]});
    for (std::size_t j = 0; j < n_live; ++j)
      result.samples.push_back(
          WeightedSample{density.to_model(live.points[j]), acc.weights[dead.size() + j]});
  }
  result.dead_points = std::move(dead);
  result.n_likelihood_evals = n_evals;
  return result;
}

}  // namespace bayesbench::ns
