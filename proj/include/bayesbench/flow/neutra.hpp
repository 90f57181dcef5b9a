#pragma once

// Neural-transport composition: reparameterizes a posterior through a flow so
// samplers operate on the latent space. The latent joint is
//   log p(z) = log joint(theta) + log|d theta / d v| + log|d f / d z|
// with v = f(z) the flow output in the model's unconstrained coordinates and
// theta the support-transform image of v. For nested sampling the latent
// space is further mapped to the unit cube by a calibrated logistic
// (z = 4 logit(u) per coordinate), with that Jacobian added as well, so the
// evidence reported by the sampler is unchanged.

#include <cmath>
#include <span>
#include <vector>

#include "bayesbench/flow/bnaf.hpp"
#include "bayesbench/model/posterior.hpp"
#include "bayesbench/ns/nested_sampler.hpp"
#include "bayesbench/nuts/nuts.hpp"

namespace bayesbench::flow {

// Latent-space log-density with explicit flow parameters (used for training,
// where the parameters are the differentiated inputs).
template <class TP, class TZ, class TR = ad::promote_t<TP, TZ>>
TR neutra_log_density_params(const BnafFlow& flow, std::span<const TP> params,
                             const model::PosteriorModel& posterior, std::span<const TZ> z) {
  using bayesbench::ad::value_of;
  std::vector<TR> v(flow.dimension());
  const TR log_det = flow.forward_with(params, z, std::span<TR>(v));
  std::vector<TR> theta(posterior.dimension);
  const TR log_jac =
      posterior.transform.unconstrained_to_model(std::span<const TR>(v), std::span<TR>(theta));
  const TR joint = posterior.log_joint(std::span<const TR>(theta));
  if (value_of(joint) == math::kNegInf) return joint;
  return joint + log_jac + log_det;
}

// log p(z): model log-density at transform(f(z)) plus both log-Jacobians.
template <class T>
T neutra_log_density(const BnafFlow& flow, const model::PosteriorModel& posterior,
                     std::span<const T> z) {
  return neutra_log_density_params<double, T>(flow, flow.parameters(), posterior, z);
}

namespace detail {

struct LatentJoint {
  BnafFlow flow;
  model::PosteriorModel posterior;
  template <class T>
  T operator()(std::span<const T> z) const {
    return neutra_log_density(flow, posterior, z);
  }
};

}  // namespace detail

// Calibration of the latent-to-cube logistic map. The trained latent
// posterior is near standard normal; scale 4 keeps its mass away from the
// cube edges.
inline constexpr double kLatentCubeScale = 4.0;

struct NeutraReparameterization {
  nuts::NutsTarget nuts_target;  // samples z, outputs model-space points
  ns::CubeDensity cube_density;  // samples the cube, outputs model-space points
};

inline std::vector<double> push_latent_to_model(const BnafFlow& flow,
                                                const model::PosteriorModel& posterior,
                                                std::span<const double> z) {
  std::vector<double> v(flow.dimension());
  flow.forward_with<double, double>(flow.parameters(), z, std::span<double>(v));
  std::vector<double> theta(posterior.dimension);
  posterior.transform.unconstrained_to_model(std::span<const double>(v), std::span<double>(theta));
  return theta;
}

inline NeutraReparameterization compose_for_sampling(const BnafFlow& flow,
                                                     const model::PosteriorModel& posterior) {
  if (flow.dimension() != posterior.dimension)
    throw std::invalid_argument("compose_for_sampling: flow/model dimension mismatch");
  NeutraReparameterization out;

  out.nuts_target.parameter_names = posterior.parameter_names;
  out.nuts_target.log_density = model::DiffDensity(
      posterior.dimension, model::DensityFn(detail::LatentJoint{flow, posterior}));
  const BnafFlow flow_copy = flow;
  const model::PosteriorModel post_copy = posterior;
  out.nuts_target.to_model = [flow_copy, post_copy](std::span<const double> z) {
    return push_latent_to_model(flow_copy, post_copy, z);
  };
  const std::size_t dim = posterior.dimension;
  out.nuts_target.initial_point = [dim](std::mt19937_64& rng) {
    std::normal_distribution<double> normal(0.0, 1.5);
    std::vector<double> z(dim);
    for (double& zi : z) zi = normal(rng);
    return z;
  };

  out.cube_density.dim = dim;
  out.cube_density.log_density = [flow_copy, post_copy, dim](std::span<const double> u) {
    std::vector<double> z(dim);
    double log_jac_cube = 0.0;
    for (std::size_t i = 0; i < dim; ++i) {
      if (!(u[i] > 0.0 && u[i] < 1.0)) return math::kNegInf;
      z[i] = kLatentCubeScale * math::logit(u[i]);
      log_jac_cube += std::log(kLatentCubeScale) - std::log(u[i]) - std::log1p(-u[i]);
    }
    const double latent = neutra_log_density(flow_copy, post_copy, std::span<const double>(z));
    if (latent == math::kNegInf) return math::kNegInf;
    return latent + log_jac_cube;
  };
  out.cube_density.to_model = [flow_copy, post_copy, dim](std::span<const double> u) {
    std::vector<double> z(dim);
    for (std::size_t i = 0; i < dim; ++i) z[i] = kLatentCubeScale * math::logit(u[i]);
    return push_latent_to_model(flow_copy, post_copy, z);
  };
  return out;
}

// Plain (no flow) cube-side density for nested sampling: model joint plus the
// support-transform Jacobian.
inline ns::CubeDensity make_cube_density(const model::PosteriorModel& posterior) {
  ns::CubeDensity density;
  density.dim = posterior.dimension;
  const model::PosteriorModel post = posterior;
  density.log_density = [post](std::span<const double> u) {
    for (double ui : u)
      if (!(ui > 0.0 && ui < 1.0)) return math::kNegInf;
    std::vector<double> theta(post.dimension);
    const double log_jac = post.transform.cube_to_model(u, std::span<double>(theta));
    const double joint = post.log_joint(std::span<const double>(theta));
    if (joint == math::kNegInf) return math::kNegInf;
    return joint + log_jac;
  };
  density.to_model = [post](std::span<const double> u) {
    std::vector<double> theta(post.dimension);
    post.transform.cube_to_model(u, std::span<double>(theta));
    return theta;
  };
  return density;
}

}  // namespace bayesbench::flow
