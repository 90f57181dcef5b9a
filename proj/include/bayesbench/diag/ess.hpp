#pragma once

// Effective sample sizes: autocorrelation ESS for MCMC chains (split chains,
// rank normalization, pooled-variance autocorrelation with Geyer's initial
// positive/monotone sequence truncation) and Kish's design effect for
// weighted samples.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

#include "bayesbench/math/special.hpp"

namespace bayesbench::diag {

// N_eff = N / D_eff with D_eff = 1 + (1/N) sum (N w_i - 1)^2, weights
// normalized to one.
inline double kish_ess(std::span<const double> weights) {
  const std::size_t n = weights.size();
  if (n == 0) throw std::invalid_argument("kish_ess: empty weights");
  double sum = 0.0;
  for (double w : weights) {
    if (w < 0.0) throw std::invalid_argument("kish_ess: negative weight");
    sum += w;
  }
  if (std::abs(sum - 1.0) > 1e-6)
    throw std::invalid_argument("kish_ess: weights must be normalized to 1");
  const double nd = static_cast<double>(n);
  double design_effect = 0.0;
  for (double w : weights) {
    const double d = nd * w - 1.0;
    design_effect += d * d;
  }
  design_effect = 1.0 + design_effect / nd;
  return nd / design_effect;
}

namespace detail {

// split each chain in half, dropping one trailing draw when odd
inline std::vector<std::vector<double>> split_chains(
    const std::vector<std::vector<double>>& chains) {
  std::vector<std::vector<double>> out;
  const std::size_t half = chains.front().size() / 2;
  for (const auto& chain : chains) {
    out.emplace_back(chain.begin(), chain.begin() + half);
    out.emplace_back(chain.begin() + half, chain.begin() + 2 * half);
  }
  return out;
}

// pooled rank normalization with average ranks for ties (Blom offsets)
inline void rank_normalize(std::vector<std::vector<double>>& chains) {
  struct Entry {
    double value;
    std::size_t chain;
    std::size_t index;
  };
  std::vector<Entry> entries;
  for (std::size_t c = 0; c < chains.size(); ++c)
    for (std::size_t i = 0; i < chains[c].size(); ++i)
      entries.push_back({chains[c][i], c, i});
  std::sort(entries.begin(), entries.end(),
            [](const Entry& a, const Entry& b) { return a.value < b.value; });
  const double total = static_cast<double>(entries.size());
  std::size_t pos = 0;
  while (pos < entries.size()) {
    std::size_t end = pos;
    while (end < entries.size() && entries[end].value == entries[pos].value) ++end;
    const double avg_rank = 0.5 * static_cast<double>(pos + 1 + end);  // 1-based average
    const double z = math::probit((avg_rank - 0.375) / (total + 0.25));
    for (std::size_t i = pos; i < end; ++i) chains[entries[i].chain][entries[i].index] = z;
    pos = end;
  }
}

}  // namespace detail

// Autocorrelation ESS of one parameter across M chains of equal length.
// tau = -1 + 2 sum_t P_t with P_t = rho_{2t} + rho_{2t+1}, truncated at the
// last positive pair; N_eff = (total draws) / tau.
inline double mcmc_ess(const std::vector<std::vector<double>>& chains) {
  if (chains.empty()) throw std::invalid_argument("mcmc_ess: no chains");
  const std::size_t n_in = chains.front().size();
  if (n_in < 4) throw std::invalid_argument("mcmc_ess: need at least 4 draws per chain");
  for (const auto& c : chains)
    if (c.size() != n_in) throw std::invalid_argument("mcmc_ess: unequal chain lengths");

  bool constant = true;
  const double first = chains.front().front();
  for (const auto& c : chains)
    for (double x : c)
      if (x != first) {
        constant = false;
        break;
      }
  if (constant) throw std::invalid_argument("mcmc_ess: constant chain has undefined ESS");

  auto split = detail::split_chains(chains);
  detail::rank_normalize(split);
  const std::size_t m = split.size();
  const std::size_t n = split.front().size();
  const double nd = static_cast<double>(n);

  std::vector<double> means(m, 0.0);
  std::vector<double> variances(m, 0.0);
  for (std::size_t c = 0; c < m; ++c) {
    for (double x : split[c]) means[c] += x;
    means[c] /= nd;
    for (double x : split[c]) variances[c] += (x - means[c]) * (x - means[c]);
    variances[c] /= (nd - 1.0);
  }
  const double within = std::accumulate(variances.begin(), variances.end(), 0.0) / m;
  double between_over_n = 0.0;
  if (m > 1) {
    double grand = std::accumulate(means.begin(), means.end(), 0.0) / m;
    for (double mu : means) between_over_n += (mu - grand) * (mu - grand);
    between_over_n /= static_cast<double>(m - 1);
  }
  const double var_plus = within * (nd - 1.0) / nd + between_over_n;
  if (!(var_plus > 0.0)) throw std::invalid_argument("mcmc_ess: degenerate pooled variance");

  // mean autocovariance at lag t across split chains, biased (1/n) estimate
  auto mean_autocov = [&](std::size_t t) {
    double acc = 0.0;
    for (std::size_t c = 0; c < m; ++c) {
      const auto& x = split[c];
      double s = 0.0;
      for (std::size_t i = 0; i + t < n; ++i) s += (x[i] - means[c]) * (x[i + t] - means[c]);
      acc += s / nd;
    }
    return acc / static_cast<double>(m);
  };

  double tau = -1.0;
  double prev_pair = std::numeric_limits<double>::infinity();
  for (std::size_t t = 0; 2 * t + 1 < n; ++t) {
    const double rho_even = mean_autocov(2 * t) / var_plus;
    const double rho_odd = mean_autocov(2 * t + 1) / var_plus;
    double pair = rho_even + rho_odd;
    if (pair <= 0.0) break;                       // initial positive sequence
    pair = std::min(pair, prev_pair);             // initial monotone sequence
    prev_pair = pair;
    tau += 2.0 * pair;
  }
  tau = std::max(tau, 1e-10);
  return static_cast<double>(m) * nd / tau;
}

// Minimum autocorrelation ESS across parameters; chains indexed
// [chain][draw][parameter].
inline double min_mcmc_ess(const std::vector<std::vector<std::vector<double>>>& chains) {
  if (chains.empty() || chains.front().empty())
    throw std::invalid_argument("min_mcmc_ess: empty chains");
  const std::size_t dim = chains.front().front().size();
  double min_ess = std::numeric_limits<double>::infinity();
  for (std::size_t p = 0; p < dim; ++p) {
    std::vector<std::vector<double>> per_param;
    per_param.reserve(chains.size());
    for (const auto& chain : chains) {
      std::vector<double> series(chain.size());
      for (std::size_t i = 0; i < chain.size(); ++i) series[i] = chain[i][p];
      per_param.push_back(std::move(series));
    }
    min_ess = std::min(min_ess, mcmc_ess(per_param));
  }
  return min_ess;
}

// Split R-hat on raw draws; internal convergence smoke check.
inline double split_rhat(const std::vector<std::vector<double>>& chains) {
  auto split = detail::split_chains(chains);
  const std::size_t m = split.size();
  const std::size_t n = split.front().size();
  if (m < 2 || n < 2) throw std::invalid_argument("split_rhat: need >= 1 chain of >= 4 draws");
  const double nd = static_cast<double>(n);
  std::vector<double> means(m, 0.0), vars(m, 0.0);
  for (std::size_t c = 0; c < m; ++c) {
    for (double x : split[c]) means[c] += x;
    means[c] /= nd;
    for (double x : split[c]) vars[c] += (x - means[c]) * (x - means[c]);
    vars[c] /= (nd - 1.0);
  }
  const double w = std::accumulate(vars.begin(), vars.end(), 0.0) / m;
  double grand = std::accumulate(means.begin(), means.end(), 0.0) / m;
  double b = 0.0;
  for (double mu : means) b += (mu - grand) * (mu - grand);
  b *= nd / static_cast<double>(m - 1);
  const double var_plus = (nd - 1.0) / nd * w + b / nd;
  return std::sqrt(var_plus / w);
}

}  // namespace bayesbench::diag
