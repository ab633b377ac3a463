#pragma once

// Trajectory sampling, reward-to-go and advantages, and the exact
// enumeration oracle for tabular tasks.

#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <ostream>
#include <string>
#include <vector>

#include "promp/env_suite.hpp"
#include "promp/policies.hpp"
#include "promp/rng.hpp"
#include "promp/types.hpp"

namespace promp {

/// One rollout: states[0..H], actions/rewards/logps[0..H-1]. `logps` holds
/// log pi(a_t|s_t) under the sampling-time parameters.
template <typename S, typename A>
struct Trajectory {
  std::vector<S> states;
  std::vector<A> actions;
  std::vector<double> rewards;
  std::vector<double> logps;

  int horizon() const { return static_cast<int>(actions.size()); }

  /// Undiscounted sum of rewards.
  double total_return() const { return std::accumulate(rewards.begin(), rewards.end(), 0.0); }
};

/// A set of trajectories from one task, sampled under `theta_sampled`.
///
/// Monte-Carlo batches leave `weights` empty (uniform 1/N). Enumerated
/// distributions carry exact trajectory probabilities there; every estimator
/// treats the two cases identically, so the enumeration is an exact
/// expectation of the same formula.
template <typename S, typename A>
struct TrajectoryBatch {
  std::vector<Trajectory<S, A>> trajectories;
  ParamVector theta_sampled;
  TaskSpec task;
  double gamma = 1.0;
  std::vector<double> weights;
  /// advantages[n][t], filled by compute_advantages
  std::vector<std::vector<double>> advantages;

  std::size_t size() const { return trajectories.size(); }
  bool empty() const { return trajectories.empty(); }
  bool has_advantages() const { return advantages.size() == trajectories.size() && !empty(); }

  double weight(std::size_t n) const {
    return weights.empty() ? 1.0 / static_cast<double>(trajectories.size()) : weights[n];
  }

  /// Weighted mean of the undiscounted return.
  double mean_return() const {
    double m = 0.0;
    for (std::size_t n = 0; n < size(); ++n) m += weight(n) * trajectories[n].total_return();
    return m;
  }
};

/// Exhaustive list of trajectories of a tabular task with their probabilities.
using EnumeratedDistribution = TrajectoryBatch<int, int>;

// ---------------------------------------------------------------------------

/// Samples one trajectory of exactly env.horizon() steps.
template <Environment E, Policy P>
  requires std::same_as<typename E::state_type, typename P::state_type> &&
           std::same_as<typename E::action_type, typename P::action_type>
Trajectory<typename E::state_type, typename E::action_type> rollout(const E& env, const P& policy,
                                                                    const ParamVector& theta,
                                                                    Rng& rng) {
  Trajectory<typename E::state_type, typename E::action_type> traj;
  const int horizon = env.horizon();
  traj.states.reserve(static_cast<std::size_t>(horizon + 1));
  traj.actions.reserve(static_cast<std::size_t>(horizon));
  traj.states.push_back(env.reset(rng));
  for (int t = 0; t < horizon; ++t) {
    const auto& s = traj.states.back();
    auto a = policy.sample_action(theta, s, rng);
    const double logp = policy.log_prob(theta, s, a);
    auto step = env.step(s, a, rng);
    if (!std::isfinite(step.reward))
      throw Error("rollout: non-finite reward at t=" + std::to_string(t));
    if constexpr (std::is_same_v<typename E::state_type, Vector>) {
      if (!step.next_state.allFinite())
        throw Error("rollout: non-finite state at t=" + std::to_string(t));
    }
    traj.actions.push_back(std::move(a));
    traj.rewards.push_back(step.reward);
    traj.logps.push_back(logp);
    traj.states.push_back(std::move(step.next_state));
  }
  return traj;
}

/// Samples n trajectories on one task, drawing sequentially from `rng`.
template <Environment E, Policy P>
TrajectoryBatch<typename E::state_type, typename E::action_type> sample_batch(
    const E& env, const P& policy, const ParamVector& theta, const TaskSpec& task, int n,
    double gamma, Rng& rng) {
  require(n >= 1, "sample_batch: need at least one trajectory");
  TrajectoryBatch<typename E::state_type, typename E::action_type> batch;
  batch.theta_sampled = theta;
  batch.task = task;
  batch.gamma = gamma;
  batch.trajectories.reserve(static_cast<std::size_t>(n));
  for (int k = 0; k < n; ++k) batch.trajectories.push_back(rollout(env, policy, theta, rng));
  return batch;
}

/// gamma^t r_t for every step.
template <typename S, typename A>
std::vector<double> discounted_rewards(const Trajectory<S, A>& traj, double gamma) {
  std::vector<double> out(traj.rewards.size());
  double g = 1.0;
  for (std::size_t t = 0; t < out.size(); ++t, g *= gamma) out[t] = g * traj.rewards[t];
  return out;
}

/// output[t] = sum_{t' >= t} gamma^{t'} r_{t'}: rewards are pre-weighted by
/// gamma^t and then tail-summed.
template <typename S, typename A>
std::vector<double> reward_to_go(const Trajectory<S, A>& traj, double gamma) {
  require(gamma > 0.0 && gamma <= 1.0, "reward_to_go: gamma must be in (0, 1]");
  std::vector<double> out = discounted_rewards(traj, gamma);
  for (std::size_t t = out.size(); t-- > 1;) out[t - 1] += out[t];
  return out;
}

/// Advantage = reward-to-go minus the per-timestep (weighted) batch mean of
/// reward-to-go.
template <typename S, typename A>
void compute_advantages(TrajectoryBatch<S, A>& batch, double gamma) {
  require(!batch.empty(), "compute_advantages: empty batch");
  batch.gamma = gamma;
  const std::size_t n = batch.size();
  std::vector<std::vector<double>> rtg(n);
  std::size_t h = 0;
  for (std::size_t k = 0; k < n; ++k) {
    rtg[k] = reward_to_go(batch.trajectories[k], gamma);
    h = std::max(h, rtg[k].size());
  }
  std::vector<double> baseline(h, 0.0);
  std::vector<double> mass(h, 0.0);
  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t t = 0; t < rtg[k].size(); ++t) {
      baseline[t] += batch.weight(k) * rtg[k][t];
      mass[t] += batch.weight(k);
    }
  for (std::size_t t = 0; t < h; ++t) baseline[t] /= mass[t];
  batch.advantages.assign(n, {});
  for (std::size_t k = 0; k < n; ++k) {
    batch.advantages[k].resize(rtg[k].size());
    for (std::size_t t = 0; t < rtg[k].size(); ++t) batch.advantages[k][t] = rtg[k][t] - baseline[t];
  }
}

// ---------------------------------------------------------------------------
// Enumeration oracle

inline constexpr std::size_t kDefaultEnumerationCap = 100000;

/// Every trajectory of a tabular task under pi_theta with its exact
/// probability. Branches with zero transition probability are skipped.
inline EnumeratedDistribution enumerate(const TabularTaskEnv& env,
                                        const SoftmaxTabularPolicy& policy,
                                        const ParamVector& theta, double gamma = 1.0,
                                        std::size_t cap = kDefaultEnumerationCap) {
  const TabularModel& m = *env.model;
  require(policy.n_states() == m.n_states && policy.n_actions() == m.n_actions,
          "enumerate: policy does not match the MDP");
  EnumeratedDistribution out;
  out.theta_sampled = theta;
  out.gamma = gamma;

  std::vector<Vector> pi(static_cast<std::size_t>(m.n_states));
  for (int s = 0; s < m.n_states; ++s) pi[static_cast<std::size_t>(s)] = policy.probs(theta, s);

  Trajectory<int, int> cur;
  std::function<void(int, double)> expand = [&](int t, double prob) {
    if (t == m.horizon) {
      if (out.trajectories.size() >= cap)
        throw EnumerationSizeError("enumerate: more than " + std::to_string(cap) +
                                   " trajectories; use a smaller instance");
      out.trajectories.push_back(cur);
      out.weights.push_back(prob);
      return;
    }
    const int s = cur.states.back();
    for (int a = 0; a < m.n_actions; ++a) {
      const double pa = pi[static_cast<std::size_t>(s)][a];
      if (pa <= 0.0) continue;
      const Vector& next = m.next_distribution(s, a);
      for (int s2 = 0; s2 < m.n_states; ++s2) {
        if (next[s2] <= 0.0) continue;
        cur.actions.push_back(a);
        cur.rewards.push_back(env.reward(s, a));
        cur.logps.push_back(std::log(pa));
        cur.states.push_back(s2);
        expand(t + 1, prob * pa * next[s2]);
        cur.states.pop_back();
        cur.logps.pop_back();
        cur.rewards.pop_back();
        cur.actions.pop_back();
      }
    }
  };
  for (int s0 = 0; s0 < m.n_states; ++s0) {
    if (m.initial[s0] <= 0.0) continue;
    cur = {};
    cur.states.push_back(s0);
    expand(0, m.initial[s0]);
  }
  return out;
}

/// Probability-weighted discounted return.
inline double exact_expected_return(const EnumeratedDistribution& dist, double gamma) {
  double total = 0.0;
  for (std::size_t n = 0; n < dist.size(); ++n) {
    const auto rtg = reward_to_go(dist.trajectories[n], gamma);
    total += dist.weight(n) * (rtg.empty() ? 0.0 : rtg.front());
  }
  return total;
}

/// Exact policy gradient: E[sum_t grad log pi(a_t|s_t) * reward_to_go_t].
inline Vector exact_policy_gradient(const EnumeratedDistribution& dist,
                                    const SoftmaxTabularPolicy& policy, const ParamVector& theta,
                                    double gamma) {
  Vector g = Vector::Zero(policy.dim());
  for (std::size_t n = 0; n < dist.size(); ++n) {
    const auto& tr = dist.trajectories[n];
    const auto rtg = reward_to_go(tr, gamma);
    for (int t = 0; t < tr.horizon(); ++t)
      g += dist.weight(n) * rtg[static_cast<std::size_t>(t)] *
           policy.grad_log_prob(theta, tr.states[static_cast<std::size_t>(t)],
                                tr.actions[static_cast<std::size_t>(t)]);
  }
  return g;
}

/// Central differences of the expected return, rebuilding the distribution
/// at every probe point through `builder(theta)`.
template <typename Builder>
Vector exact_gradient_fd(const Builder& builder, const ParamVector& theta, double gamma,
                         double h = 1e-5) {
  require(h >= 1e-7 && h <= 1e-3, "exact_gradient_fd: step must be in [1e-7, 1e-3]");
  Vector g(theta.size());
  for (Eigen::Index i = 0; i < theta.size(); ++i) {
    ParamVector p = theta, m = theta;
    p[i] += h;
    m[i] -= h;
    g[i] = (exact_expected_return(builder(p), gamma) - exact_expected_return(builder(m), gamma)) / (2.0 * h);
  }
  return g;
}

/// Central second differences of the expected return, rebuilding the
/// distribution at every probe point through `builder(theta)`.
template <typename Builder>
Matrix exact_hessian_fd(const Builder& builder, const ParamVector& theta, double gamma,
                        double h = 1e-4) {
  require(h >= 1e-6 && h <= 1e-3, "exact_hessian_fd: step must be in [1e-6, 1e-3]");
  const Eigen::Index d = theta.size();
  auto f = [&](const ParamVector& x) { return exact_expected_return(builder(x), gamma); };
  Matrix hess(d, d);
  for (Eigen::Index i = 0; i < d; ++i) {
    for (Eigen::Index j = i; j < d; ++j) {
      ParamVector pp = theta, pm = theta, mp = theta, mm = theta;
      pp[i] += h; pp[j] += h;
      pm[i] += h; pm[j] -= h;
      mp[i] -= h; mp[j] += h;
      mm[i] -= h; mm[j] -= h;
      hess(i, j) = (f(pp) - f(pm) - f(mp) + f(mm)) / (4.0 * h * h);
      hess(j, i) = hess(i, j);
    }
  }
  return hess;
}

/// Writes one trajectory per line as `key=value` records (debug dump).
template <typename S, typename A>
void dump_trajectory(std::ostream& os, const Trajectory<S, A>& traj) {
  auto put = [&os](const auto& v) {
    if constexpr (std::is_arithmetic_v<std::decay_t<decltype(v)>>) {
      os << v;
    } else {
      for (Eigen::Index i = 0; i < v.size(); ++i) os << (i ? ":" : "") << v[i];
    }
  };
  os << "horizon=" << traj.horizon();
  for (int t = 0; t < traj.horizon(); ++t) {
    const auto k = static_cast<std::size_t>(t);
    os << " t" << t << "={s=";
    put(traj.states[k]);
    os << ",a=";
    put(traj.actions[k]);
    os << ",r=" << traj.rewards[k] << ",logp=" << traj.logps[k] << "}";
  }
  os << '\n';
}

}  // namespace promp
