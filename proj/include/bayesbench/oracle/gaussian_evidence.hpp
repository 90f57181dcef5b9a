#pragma once

// Deterministic evidence and marginal oracle for the Gaussian fit model.
// The per-group mu integrals are done analytically (the joint exponent is
// quadratic in mu), leaving one trapezoid quadrature per log-variance
// coordinate. Groups are independent, so the tensor-product trapezoid rule
// factorizes exactly into per-group 1-D rules; this evaluates the same rule
// at O(k N) cost instead of O(N^k).
//
// Convention: exp(C_i) is the variance of group i, both here and in the
// model's likelihood. The quadratic-exponent minimum is computed in a form
// free of catastrophic cancellation (the raw (b^2-4ac)/(4a) expression loses
// all precision for small n at very negative C).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "bayesbench/math/special.hpp"
#include "bayesbench/model/gaussian_fit.hpp"

namespace bayesbench::oracle {

struct QuadratureGrid {
  double lo = -50.0;
  double hi = 50.0;
  int points_per_dim = 151;  // trapezoid rule

  void validate() const {
    if (!(lo < hi)) throw std::invalid_argument("QuadratureGrid: need lo < hi");
    if (points_per_dim < 2) throw std::invalid_argument("QuadratureGrid: need >= 2 points");
  }
};

struct Grid1D {
  double lo = -50.0;
  double hi = 50.0;
  int n = 151;

  double point(int i) const { return lo + (hi - lo) * static_cast<double>(i) / (n - 1); }
  double weight(int i) const {
    const double h = (hi - lo) / (n - 1);
    return (i == 0 || i == n - 1) ? 0.5 * h : h;
  }
};

struct MuMarginalCoefficients {
  double a = 0.0;
  double b = 0.0;
  double c = 0.0;
};

// Coefficients of the quadratic exponent E(mu) = a mu^2 + b mu + c collecting
// the mu and C priors and the group likelihood at fixed C.
inline MuMarginalCoefficients mu_marginal_coefficients(double c_value,
                                                       std::span<const double> row,
                                                       double prior_variance) {
  const double n = static_cast<double>(row.size());
  const double inv_var = std::exp(-c_value);
  double sum = 0.0, sum_sq = 0.0;
  for (double y : row) {
    sum += y;
    sum_sq += y * y;
  }
  MuMarginalCoefficients out;
  out.a = 0.5 * (1.0 / prior_variance + n * inv_var);
  out.b = -inv_var * sum;
  out.c = 0.5 * (c_value * c_value / prior_variance + inv_var * sum_sq);
  return out;
}

// integral over mu of exp(-(a mu^2 + b mu + c)) = sqrt(pi/a) exp((b^2-4ac)/(4a))
inline double mu_gaussian_integral(double a, double b, double c) {
  if (!(a > 0.0)) throw std::invalid_argument("mu_gaussian_integral: a must be positive");
  return std::sqrt(std::numbers::pi / a) * std::exp((b * b - 4.0 * a * c) / (4.0 * a));
}

namespace detail {

// log of the full per-group integrand with mu integrated out analytically:
//   log[ integral dmu  N(mu;0,s2) N(C;0,s2) prod_j N(y_j; mu, e^C) ]
// The exponent minimum is evaluated cancellation-free via the pairwise sum
// n*S2 - S1^2 = 0.5 * sum_{j,l} (y_j - y_l)^2 >= 0.
inline double log_group_mu_integrated(double c_value, std::span<const double> row,
                                      double prior_variance) {
  const double n = static_cast<double>(row.size());
  if (row.empty()) {
    // no data: only the C prior remains, mu prior integrates to one
    return math::normal_logpdf(c_value, 0.0, std::sqrt(prior_variance));
  }
  double sum_sq = 0.0;
  for (double y : row) sum_sq += y * y;
  double pairwise = 0.0;
  for (std::size_t j = 0; j < row.size(); ++j)
    for (std::size_t l = j + 1; l < row.size(); ++l) {
      const double d = row[j] - row[l];
      pairwise += d * d;
    }
  const double inv_var = std::exp(-c_value);
  const double a = 0.5 * (1.0 / prior_variance + n * inv_var);
  const double q = std::exp(c_value) / prior_variance + n;
  const double exponent_min =
      c_value * c_value / (2.0 * prior_variance) + (inv_var * pairwise + sum_sq / prior_variance) / (2.0 * q);
  const double log_mu_integral = 0.5 * (std::log(std::numbers::pi) - std::log(a)) - exponent_min;
  const double log_prefactor =
      -std::log(2.0 * std::numbers::pi * prior_variance) - 0.5 * n * math::kLogTwoPi -
      0.5 * n * c_value;
  return log_prefactor + log_mu_integral;
}

// log of the full per-group joint at fixed (mu, C), priors included.
inline double log_group_joint(double mu, double c_value, std::span<const double> row,
                              double prior_variance) {
  const double prior_sd = std::sqrt(prior_variance);
  double total = math::normal_logpdf(mu, 0.0, prior_sd) +
                 math::normal_logpdf(c_value, 0.0, prior_sd);
  const double inv_var = std::exp(-c_value);
  for (double y : row) {
    const double d = y - mu;
    total += -0.5 * math::kLogTwoPi - 0.5 * c_value - 0.5 * inv_var * d * d;
  }
  return total;
}

// trapezoid in log space over C of the mu-integrated group term
inline double log_group_integral(std::span<const double> row, double prior_variance,
                                 const Grid1D& grid) {
  math::LogSumExp acc;
  for (int i = 0; i < grid.n; ++i)
    acc.add(std::log(grid.weight(i)) + log_group_mu_integrated(grid.point(i), row, prior_variance));
  return acc.value();
}

// trapezoid over C at fixed mu
inline double log_group_integral_mu_fixed(double mu, std::span<const double> row,
                                          double prior_variance, const Grid1D& grid) {
  math::LogSumExp acc;
  for (int i = 0; i < grid.n; ++i)
    acc.add(std::log(grid.weight(i)) + log_group_joint(mu, grid.point(i), row, prior_variance));
  return acc.value();
}

}  // namespace detail

inline double log_evidence_at(const model::GaussianFitModel& m, const QuadratureGrid& grid) {
  m.validate();
  grid.validate();
  const Grid1D g{grid.lo, grid.hi, grid.points_per_dim};
  double total = 0.0;
  for (const auto& row : m.data)
    total += detail::log_group_integral(row, m.prior_variance, g);
  return total;
}

struct EvidenceOracleResult {
  double log_evidence = 0.0;
  QuadratureGrid grid;
  std::vector<std::pair<int, double>> convergence_trace;  // (points_per_dim, log Z)
  bool converged = false;
  double convergence_tolerance = 0.01;
};

inline std::vector<int> default_refinement_ladder(int final_points) {
  std::vector<int> ladder;
  for (int p = 11; p < 61 && p < final_points; p += 10) ladder.push_back(p);
  for (int p = 61; p < final_points; p += 15) ladder.push_back(p);
  ladder.push_back(final_points);
  return ladder;
}

// Evidence with a grid-refinement trace. The converged flag compares the last
// two refinements against the tolerance; a non-convergent result is still
// returned, just flagged.
inline EvidenceOracleResult log_evidence_oracle(const model::GaussianFitModel& m,
                                                const QuadratureGrid& grid = QuadratureGrid{}) {
  m.validate();
  grid.validate();
  EvidenceOracleResult result;
  result.grid = grid;
  for (int p : default_refinement_ladder(grid.points_per_dim)) {
    QuadratureGrid step = grid;
    step.points_per_dim = p;
    result.convergence_trace.emplace_back(p, log_evidence_at(m, step));
  }
  result.log_evidence = result.convergence_trace.back().second;
  if (result.convergence_trace.size() >= 2) {
    const double last = result.convergence_trace.back().second;
    const double prev = result.convergence_trace[result.convergence_trace.size() - 2].second;
    result.converged = std::abs(last - prev) < result.convergence_tolerance;
  }
  return result;
}

// --- marginal fields and contours -------------------------------------------

// Unnormalized marginal of the joint over a subset of coordinates. Parameter
// indices follow the model layout: 0..k-1 are mu_i, k..2k-1 are C_i.
struct MarginalField {
  std::size_t u_param = 0;
  std::size_t v_param = 0;
  Grid1D u_grid;
  Grid1D v_grid;
  std::vector<double> log_density;  // u-major, size u_grid.n * v_grid.n

  double at(int iu, int iv) const { return log_density[static_cast<std::size_t>(iu) * v_grid.n + iv]; }
};

namespace detail {

struct FixedCoord {
  bool mu_fixed = false;
  bool c_fixed = false;
  double mu = 0.0;
  double c_value = 0.0;
};

// Per-group marginal term with the given coordinates held fixed.
inline double log_group_term(const FixedCoord& fc, std::span<const double> row,
                             double prior_variance, const Grid1D& inner) {
  if (fc.mu_fixed && fc.c_fixed) return log_group_joint(fc.mu, fc.c_value, row, prior_variance);
  if (fc.c_fixed) return log_group_mu_integrated(fc.c_value, row, prior_variance);
  if (fc.mu_fixed) return log_group_integral_mu_fixed(fc.mu, row, prior_variance, inner);
  return log_group_integral(row, prior_variance, inner);
}

}  // namespace detail

inline MarginalField marginal_field(const model::GaussianFitModel& m, std::size_t u_param,
                                    std::size_t v_param, const Grid1D& u_grid, const Grid1D& v_grid,
                                    const Grid1D& inner) {
  m.validate();
  const std::size_t k = m.groups();
  if (u_param == v_param || u_param >= 2 * k || v_param >= 2 * k)
    throw std::invalid_argument("marginal_field: invalid parameter pair");

  // groups untouched by either plotted coordinate contribute a constant
  double log_constant = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    if (i == u_param % k || i == v_param % k) continue;
    log_constant += detail::log_group_integral(m.data[i], m.prior_variance, inner);
  }

  MarginalField field;
  field.u_param = u_param;
  field.v_param = v_param;
  field.u_grid = u_grid;
  field.v_grid = v_grid;
  field.log_density.resize(static_cast<std::size_t>(u_grid.n) * v_grid.n);

  auto assign = [&](detail::FixedCoord& fc, std::size_t param, double value) {
    if (param < k) {
      fc.mu_fixed = true;
      fc.mu = value;
    } else {
      fc.c_fixed = true;
      fc.c_value = value;
    }
  };

  for (int iu = 0; iu < u_grid.n; ++iu) {
    for (int iv = 0; iv < v_grid.n; ++iv) {
      double total = log_constant;
      if (u_param % k == v_param % k) {
        detail::FixedCoord fc;
        assign(fc, u_param, u_grid.point(iu));
        assign(fc, v_param, v_grid.point(iv));
        total += detail::log_group_term(fc, m.data[u_param % k], m.prior_variance, inner);
      } else {
        detail::FixedCoord fu, fv;
        assign(fu, u_param, u_grid.point(iu));
        assign(fv, v_param, v_grid.point(iv));
        total += detail::log_group_term(fu, m.data[u_param % k], m.prior_variance, inner);
        total += detail::log_group_term(fv, m.data[v_param % k], m.prior_variance, inner);
      }
      field.log_density[static_cast<std::size_t>(iu) * v_grid.n + iv] = total;
    }
  }
  return field;
}

// Fraction of the field mass lying strictly above `level` (linear scale),
// under the 2-D trapezoid weights.
inline double superlevel_mass_fraction(const MarginalField& field, double log_level) {
  math::LogSumExp total, above;
  for (int iu = 0; iu < field.u_grid.n; ++iu)
    for (int iv = 0; iv < field.v_grid.n; ++iv) {
      const double lw = std::log(field.u_grid.weight(iu)) + std::log(field.v_grid.weight(iv));
      const double lv = field.at(iu, iv);
      total.add(lw + lv);
      if (lv > log_level) above.add(lw + lv);
    }
  if (total.empty()) throw std::runtime_error("superlevel_mass_fraction: empty field");
  if (above.empty()) return 0.0;
  return std::exp(above.value() - total.value());
}

// Bisection for the density level whose super-level set carries the target
// mass fraction. mass_fraction = 1 returns "level below everything".
inline double contour_level(const MarginalField& field, double mass_fraction,
                            double mass_tolerance = 1e-3) {
  if (!(mass_fraction > 0.0 && mass_fraction <= 1.0))
    throw std::invalid_argument("contour_level: mass fraction must be in (0, 1]");
  double max_log = math::kNegInf;
  for (double lv : field.log_density) max_log = std::max(max_log, lv);
  if (!std::isfinite(max_log)) throw std::runtime_error("contour_level: degenerate field");
  if (mass_fraction == 1.0) return math::kNegInf;

  double lo = max_log - 60.0;  // fraction(lo) ~ 1
  double hi = max_log;         // fraction(hi) = 0
  if (!(superlevel_mass_fraction(field, lo) >= mass_fraction))
    throw std::runtime_error("contour_level: target mass fraction not bracketed");
  for (int iter = 0; iter < 200; ++iter) {
    const double mid = 0.5 * (lo + hi);
    const double frac = superlevel_mass_fraction(field, mid);
    if (std::abs(frac - mass_fraction) <= mass_tolerance) return mid;
    if (frac > mass_fraction)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);  // grid-step limited; closest achievable level
}

// 1-D marginal curve of one parameter on `grid` (unnormalized log density).
inline std::vector<double> marginal_density_1d(const model::GaussianFitModel& m, std::size_t param,
                                               const Grid1D& grid, const Grid1D& inner) {
  m.validate();
  const std::size_t k = m.groups();
  if (param >= 2 * k) throw std::invalid_argument("marginal_density_1d: bad parameter index");
  double log_constant = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    if (i == param % k) continue;
    log_constant += detail::log_group_integral(m.data[i], m.prior_variance, inner);
  }
  std::vector<double> out(static_cast<std::size_t>(grid.n));
  for (int i = 0; i < grid.n; ++i) {
    detail::FixedCoord fc;
    if (param < k) {
      fc.mu_fixed = true;
      fc.mu = grid.point(i);
    } else {
      fc.c_fixed = true;
      fc.c_value = grid.point(i);
    }
    out[static_cast<std::size_t>(i)] =
        log_constant + detail::log_group_term(fc, m.data[param % k], m.prior_variance, inner);
  }
  return out;
}

// Equal-tailed interval of a 1-D curve by inverting its trapezoid CDF.
inline std::pair<double, double> curve_equal_tailed_interval(const Grid1D& grid,
                                                             std::span<const double> log_density,
                                                             double mass) {
  if (!(mass > 0.0 && mass < 1.0))
    throw std::invalid_argument("curve_equal_tailed_interval: mass in (0,1) required");
  const std::size_t n = log_density.size();
  double max_log = math::kNegInf;
  for (double lv : log_density) max_log = std::max(max_log, lv);
  std::vector<double> density(n);
  for (std::size_t i = 0; i < n; ++i) density[i] = std::exp(log_density[i] - max_log);

  // cumulative trapezoid
  std::vector<double> cdf(n, 0.0);
  const double h = (grid.hi - grid.lo) / (grid.n - 1);
  for (std::size_t i = 1; i < n; ++i)
    cdf[i] = cdf[i - 1] + 0.5 * h * (density[i - 1] + density[i]);
  const double total = cdf.back();
  if (!(total > 0.0)) throw std::runtime_error("curve_equal_tailed_interval: zero mass");

  auto invert = [&](double q) {
    const double target = q * total;
    auto it = std::lower_bound(cdf.begin(), cdf.end(), target);
    if (it == cdf.begin()) return grid.point(0);
    if (it == cdf.end()) return grid.point(grid.n - 1);
    const std::size_t j = static_cast<std::size_t>(it - cdf.begin());
    const double frac = (target - cdf[j - 1]) / (cdf[j] - cdf[j - 1]);
    return grid.point(static_cast<int>(j - 1)) + frac * h;
  };
  return {invert(0.5 * (1.0 - mass)), invert(0.5 * (1.0 + mass))};
}

}  // namespace bayesbench::oracle
