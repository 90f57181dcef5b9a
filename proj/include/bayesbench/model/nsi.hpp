#pragma once

// Neutrino non-standard-interaction statistical model. Eight parameters:
// six interaction strengths eps_ab (one per flavor pair), the charged-plane
// angle phi_angle, and sin_eta for the neutron direction. The spherical
// parameters map to per-particle couplings (proton, electron, neutron), and
// the likelihood combines a Poisson nuclear-recoil count with a truncated
// normal on the predicted electron-recoil ratio.
//
// Event-rate physics is behind the RatePlugin interface; the shipped
// SurrogateRatePlugin is a configurable stand-in, not a physics claim. At
// zero couplings any plugin must return the Standard-Model rates
// (lambda_nr = lambda_sm, er ratio = 1).

#include <array>
#include <cmath>
#include <functional>
#include <numbers>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "bayesbench/math/special.hpp"
#include "bayesbench/model/posterior.hpp"

namespace bayesbench::model {

inline constexpr std::size_t kNsiFlavorPairs = 6;
inline constexpr std::size_t kNsiDimension = kNsiFlavorPairs + 2;
inline constexpr double kNsiCouplingNorm = 2.2360679774997896964;  // sqrt(5)
inline constexpr double kNsiEpsBound = 5.0;

template <class T>
struct NsiCouplingsT {
  std::array<T, kNsiFlavorPairs> proton;
  std::array<T, kNsiFlavorPairs> electron;
  std::array<T, kNsiFlavorPairs> neutron;
};
using NsiCouplings = NsiCouplingsT<double>;

struct NsiParameters {
  std::array<double, kNsiFlavorPairs> eps;
  double phi = 0.0;      // radians, in (-pi/2, pi/2)
  double sin_eta = 0.0;  // in (-1, 1)
};

struct NsiObservation {
  long n_nr_observed = 6;
  double lambda_bkg = 5.38;
  double er_ratio_mean = 1.72;
  double er_ratio_sigma = 1.72;
};

// Spherical -> Cartesian coupling map, applied elementwise to all six
// strengths. cos(eta) = sqrt(1 - sin_eta^2) since eta lies in (-pi/2, pi/2).
template <class T>
NsiCouplingsT<T> nsi_sphere_to_cartesian(std::span<const T> eps, const T& phi, const T& sin_eta) {
  using std::cos;
  using std::sin;
  using std::sqrt;
  NsiCouplingsT<T> c;
  const T cos_eta = sqrt(1.0 - sin_eta * sin_eta);
  const T cos_phi = cos(phi);
  const T sin_phi = sin(phi);
  for (std::size_t i = 0; i < kNsiFlavorPairs; ++i) {
    const T scaled = kNsiCouplingNorm * eps[i];
    c.proton[i] = scaled * cos_eta * cos_phi;
    c.electron[i] = scaled * cos_eta * sin_phi;
    c.neutron[i] = scaled * sin_eta;
  }
  return c;
}

inline NsiCouplings nsi_sphere_to_cartesian(const NsiParameters& p) {
  return nsi_sphere_to_cartesian<double>(std::span<const double>(p.eps), p.phi, p.sin_eta);
}

// Surrogate rate model: quadratic response in the flavor-averaged couplings.
// lambda_sm is chosen so that lambda_bkg + lambda_sm matches the observed
// count at zero couplings. All constants are configuration.
struct SurrogateRatePlugin {
  double lambda_sm = 0.62;
  double weight_proton = 0.81915204428899178968;   // cos(35 deg)
  double weight_neutron = -0.57357643635104609610;  // -sin(35 deg)
  double weight_electron = 1.0;

  template <class T>
  T nr_rate(const NsiCouplingsT<T>& c) const {
    T mean_p = T(0.0), mean_n = T(0.0);
    for (std::size_t i = 0; i < kNsiFlavorPairs; ++i) {
      mean_p += c.proton[i];
      mean_n += c.neutron[i];
    }
    mean_p *= 1.0 / kNsiFlavorPairs;
    mean_n *= 1.0 / kNsiFlavorPairs;
    const T amp = weight_proton * mean_p + weight_neutron * mean_n + 1.0;
    return lambda_sm * amp * amp;
  }

  template <class T>
  T er_ratio(const NsiCouplingsT<T>& c) const {
    T mean_e = T(0.0);
    for (std::size_t i = 0; i < kNsiFlavorPairs; ++i) mean_e += c.electron[i];
    mean_e *= 1.0 / kNsiFlavorPairs;
    const T amp = weight_electron * mean_e + 1.0;
    return amp * amp;
  }
};

// Type-erased plugin so models can be built around external rate code.
class RatePlugin {
 public:
  RatePlugin() : RatePlugin(SurrogateRatePlugin{}) {}

  template <class P, class = std::enable_if_t<!std::is_same_v<std::decay_t<P>, RatePlugin>>>
  RatePlugin(P plugin)
      : nr_dbl_([plugin](const NsiCouplings& c) { return plugin.nr_rate(c); }),
        nr_var_([plugin](const NsiCouplingsT<ad::Var>& c) { return plugin.nr_rate(c); }),
        er_dbl_([plugin](const NsiCouplings& c) { return plugin.er_ratio(c); }),
        er_var_([plugin](const NsiCouplingsT<ad::Var>& c) { return plugin.er_ratio(c); }) {}

  double nr_rate(const NsiCouplings& c) const { return nr_dbl_(c); }
  ad::Var nr_rate(const NsiCouplingsT<ad::Var>& c) const { return nr_var_(c); }
  double er_ratio(const NsiCouplings& c) const { return er_dbl_(c); }
  ad::Var er_ratio(const NsiCouplingsT<ad::Var>& c) const { return er_var_(c); }

 private:
  std::function<double(const NsiCouplings&)> nr_dbl_;
  std::function<ad::Var(const NsiCouplingsT<ad::Var>&)> nr_var_;
  std::function<double(const NsiCouplings&)> er_dbl_;
  std::function<ad::Var(const NsiCouplingsT<ad::Var>&)> er_var_;
};

template <class T>
bool nsi_in_support(std::span<const T> theta) {
  using bayesbench::ad::value_of;
  for (std::size_t i = 0; i < kNsiFlavorPairs; ++i) {
    const double e = value_of(theta[i]);
    if (!(e > -kNsiEpsBound && e < kNsiEpsBound)) return false;
  }
  const double phi = value_of(theta[kNsiFlavorPairs]);
  const double sin_eta = value_of(theta[kNsiFlavorPairs + 1]);
  constexpr double half_pi = std::numbers::pi / 2.0;
  return phi > -half_pi && phi < half_pi && sin_eta > -1.0 && sin_eta < 1.0;
}

// Uniform priors: eps on (-5, 5), phi on (-pi/2, pi/2), sin_eta on (-1, 1).
template <class T>
T nsi_log_prior(std::span<const T> theta) {
  if (theta.size() != kNsiDimension)
    throw std::invalid_argument("nsi_log_prior: parameter dimension mismatch");
  if (!nsi_in_support(theta)) return T(math::kNegInf);
  const double log_density = -static_cast<double>(kNsiFlavorPairs) * std::log(2.0 * kNsiEpsBound) -
                             std::log(std::numbers::pi) - std::log(2.0);
  return T(log_density);
}

template <class T, class Plugin>
T nsi_log_likelihood(std::span<const T> theta, const NsiObservation& obs, const Plugin& plugin) {
  if (theta.size() != kNsiDimension)
    throw std::invalid_argument("nsi_log_likelihood: parameter dimension mismatch");
  if (!nsi_in_support(theta)) return T(math::kNegInf);
  const auto couplings = nsi_sphere_to_cartesian(theta.subspan(0, kNsiFlavorPairs),
                                                 theta[kNsiFlavorPairs],
                                                 theta[kNsiFlavorPairs + 1]);
  const T lambda = obs.lambda_bkg + plugin.nr_rate(couplings);
  const T nr_term = math::poisson_log_pmf(obs.n_nr_observed, lambda);
  const T ratio = plugin.er_ratio(couplings);
  const T er_term = math::truncnorm_log_pdf(ratio, obs.er_ratio_mean, obs.er_ratio_sigma, 0.0);
  return nr_term + er_term;
}

template <class T, class Plugin>
T nsi_log_density(std::span<const T> theta, const NsiObservation& obs, const Plugin& plugin) {
  using bayesbench::ad::value_of;
  const T prior = nsi_log_prior(theta);
  if (value_of(prior) == math::kNegInf) return prior;
  return prior + nsi_log_likelihood(theta, obs, plugin);
}

inline double nsi_log_density(const NsiParameters& p, const NsiObservation& obs,
                              const RatePlugin& plugin) {
  std::vector<double> theta(p.eps.begin(), p.eps.end());
  theta.push_back(p.phi);
  theta.push_back(p.sin_eta);
  return nsi_log_density<double, RatePlugin>(theta, obs, plugin);
}

inline std::vector<std::string> nsi_parameter_names() {
  return {"eps_ee", "eps_emu", "eps_etau", "eps_mumu", "eps_mutau", "eps_tautau",
          "phi_angle", "sin_eta"};
}

inline SupportTransform nsi_transform() {
  constexpr double half_pi = std::numbers::pi / 2.0;
  std::vector<CoordinateMap> maps;
  for (std::size_t i = 0; i < kNsiFlavorPairs; ++i)
    maps.push_back(CoordinateMap::interval(-kNsiEpsBound, kNsiEpsBound));
  maps.push_back(CoordinateMap::interval(-half_pi, half_pi));
  maps.push_back(CoordinateMap::interval(-1.0, 1.0));
  return SupportTransform(std::move(maps));
}

namespace detail {

struct NsiPriorFn {
  template <class T>
  T operator()(std::span<const T> theta) const {
    return nsi_log_prior(theta);
  }
};

struct NsiLikelihoodFn {
  NsiObservation obs;
  RatePlugin plugin;
  template <class T>
  T operator()(std::span<const T> theta) const {
    return nsi_log_likelihood(theta, obs, plugin);
  }
};

}  // namespace detail

inline PosteriorModel make_nsi_posterior(NsiObservation obs, RatePlugin plugin = RatePlugin()) {
  PosteriorModel post;
  post.dimension = kNsiDimension;
  post.parameter_names = nsi_parameter_names();
  post.transform = nsi_transform();
  post.log_prior = DensityFn(detail::NsiPriorFn{});
  post.log_likelihood = DensityFn(detail::NsiLikelihoodFn{obs, plugin});
  post.sample_prior = [](std::mt19937_64& rng) {
    constexpr double half_pi = std::numbers::pi / 2.0;
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    std::vector<double> theta(kNsiDimension);
    for (std::size_t i = 0; i < kNsiFlavorPairs; ++i)
      theta[i] = -kNsiEpsBound + 2.0 * kNsiEpsBound * u01(rng);
    theta[kNsiFlavorPairs] = -half_pi + 2.0 * half_pi * u01(rng);
    theta[kNsiFlavorPairs + 1] = -1.0 + 2.0 * u01(rng);
    return theta;
  };
  return post;
}

}  // namespace bayesbench::model
