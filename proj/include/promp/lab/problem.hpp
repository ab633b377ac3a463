#pragma once

// Builds the task distribution, policy and initial parameters a
// configuration describes.

#include <cstdint>
#include <string>
#include <utility>

#include "promp/env_suite.hpp"
#include "promp/lab/config.hpp"
#include "promp/policies.hpp"
#include "promp/rng.hpp"

namespace promp::lab {

inline TabularDistribution make_tabular_distribution(const EnvConfig& e) {
  switch (e.family) {
    case EnvFamily::tabular:
      return TabularDistribution::random(e.n_states, e.n_actions, e.resolved_horizon(), e.n_tasks, e.seed);
    case EnvFamily::chain: return TabularDistribution::chain(e.n_states, e.resolved_horizon(), e.slip);
    case EnvFamily::bandit: return TabularDistribution::bandit(e.arm_rewards);
    default: throw ConfigError("env.family '" + to_string(e.family) + "' is not a tabular family");
  }
}

inline Point1DDistribution make_point1d_distribution(const EnvConfig& e) {
  Point1DDistribution d;
  d.horizon = e.resolved_horizon();
  d.start_low = e.start_low;
  d.start_high = e.start_high;
  return d;
}

inline Point2DDistribution make_point2d_distribution(const EnvConfig& e) {
  Point2DDistribution d;
  d.horizon = e.resolved_horizon();
  d.corner = e.corner;
  d.reward_radius = e.reward_radius;
  d.reward_mode = e.radius_reward;
  return d;
}

inline GaussianLinearPolicy make_gaussian_policy(int dim, const PolicyConfig& p) {
  return p.learn_std ? GaussianLinearPolicy(dim, dim) : GaussianLinearPolicy::fixed_std(dim, dim, p.init_std);
}

/// Explicit init_theta if configured, otherwise a seeded random draw.
template <typename P>
ParamVector initial_theta(const ExperimentConfig& c, const P& policy, std::uint64_t seed) {
  if (!c.policy.init_theta.empty()) {
    if (static_cast<Eigen::Index>(c.policy.init_theta.size()) != policy.dim())
      throw ConfigError("policy.init_theta has " + std::to_string(c.policy.init_theta.size()) +
                        " entries; the policy has " + std::to_string(policy.dim()) + " parameters");
    return Eigen::Map<const ParamVector>(c.policy.init_theta.data(), policy.dim());
  }
  Rng rng = make_stream(seed, {static_cast<std::uint64_t>(promp::detail::kInit)});
  if constexpr (std::is_same_v<P, GaussianLinearPolicy>)
    return policy.initial_params(c.policy.init_scale, c.policy.init_std, rng);
  else
    return policy.initial_params(c.policy.init_scale, rng);
}

/// Calls f(distribution, policy) with the concrete types of the configured family.
template <typename F>
decltype(auto) with_problem(const ExperimentConfig& c, F&& f) {
  switch (c.env.family) {
    case EnvFamily::point1d:
      return f(make_point1d_distribution(c.env), make_gaussian_policy(1, c.policy));
    case EnvFamily::point2d:
      return f(make_point2d_distribution(c.env), make_gaussian_policy(2, c.policy));
    default: {
      const auto dist = make_tabular_distribution(c.env);
      return f(dist, SoftmaxTabularPolicy(dist.model->n_states, dist.model->n_actions));
    }
  }
}

}  // namespace promp::lab
