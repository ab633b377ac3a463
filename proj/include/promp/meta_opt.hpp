#pragma once

// Outer-loop optimizers: plain meta-gradient ascent (VPG) over any
// meta-gradient estimator, and ProMP (clipped post-update surrogate, KL
// penalty towards the sampling policy, several gradient steps per sampled
// dataset).

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "promp/env_suite.hpp"
#include "promp/estimators.hpp"
#include "promp/policies.hpp"
#include "promp/rng.hpp"
#include "promp/rollout.hpp"
#include "promp/types.hpp"

namespace promp {

struct PrompHyper {
  double alpha = 0.01;     ///< inner step size
  double beta = 0.001;     ///< outer learning rate
  double epsilon = 0.3;    ///< clip range; +infinity disables clipping
  double eta = 0.0005;     ///< KL penalty coefficient
  int n_steps = 5;         ///< gradient steps per sampled dataset
  int tasks_per_iter = 10;
  int traj_per_task = 20;
  int adapt_steps = 1;     ///< inner adaptation steps

  void validate() const {
    require(alpha >= 0.0, "promp: alpha must be >= 0");
    require(beta > 0.0, "promp: beta must be > 0");
    require(epsilon > 0.0 && (epsilon < 1.0 || std::isinf(epsilon)),
            "promp: epsilon must be in (0, 1) (or +inf to disable clipping)");
    require(eta >= 0.0, "promp: eta must be >= 0");
    require(n_steps >= 1, "promp: n_steps must be >= 1");
    require(tasks_per_iter >= 1, "promp: tasks_per_iter must be >= 1");
    require(traj_per_task >= 1, "promp: traj_per_task must be >= 1");
    require(adapt_steps >= 1, "promp: adapt_steps must be >= 1");
  }

  /// The 40-task configuration used for the large-scale benchmarks.
  static PrompHyper large_batch() {
    PrompHyper h;
    h.tasks_per_iter = 40;
    return h;
  }
};

enum class VpgEstimator { i_dice, i_lvc, maml, emaml };

inline std::string to_string(VpgEstimator e) {
  switch (e) {
    case VpgEstimator::i_dice: return "I+DICE";
    case VpgEstimator::i_lvc: return "I+LVC";
    case VpgEstimator::maml: return "MAML";
    case VpgEstimator::emaml: return "EMAML";
  }
  return "?";
}

struct VpgHyper {
  double alpha = 0.01;
  double beta = 0.01;
  int tasks_per_iter = 10;
  int traj_per_task = 20;
  PreTerm pre_term = PreTerm::batch;
  Weighting hessian_weighting = Weighting::returns;
  Weighting outer_weighting = Weighting::advantages;

  void validate() const {
    require(alpha >= 0.0, "vpg: alpha must be >= 0");
    require(beta >= 0.0, "vpg: beta must be >= 0");
    require(tasks_per_iter >= 1, "vpg: tasks_per_iter must be >= 1");
    require(traj_per_task >= 1, "vpg: traj_per_task must be >= 1");
  }
};

struct RunOptions {
  int iterations = 100;
  std::uint64_t seed = 0;
  double gamma = 1.0;
  /// When set, every record carries |theta - reference|.
  std::optional<ParamVector> reference;
};

struct StepDiagnostics {
  int step = 0;
  double grad_norm = 0.0;
  double mean_kl = 0.0;  ///< before this step's update
  std::size_t clipped_steps = 0;
  std::size_t off_support_steps = 0;
};

struct IterationRecord {
  int iteration = 0;
  double pre_return = 0.0;   ///< mean undiscounted return of the pre-update batches
  double post_return = 0.0;  ///< mean undiscounted return of the final post-update batches
  double grad_norm = 0.0;    ///< meta-gradient norm at the sampling parameters
  double mean_kl = 0.0;      ///< mean KL(pi_theta_o, pi_theta) after the final step
  double distance_to_optimum = std::numeric_limits<double>::quiet_NaN();
  ParamVector theta;         ///< parameters at the start of the iteration
  std::vector<StepDiagnostics> steps;
};

struct TrainResult {
  std::vector<IterationRecord> records;
  ParamVector final_theta;
};

// ---------------------------------------------------------------------------
// clipped surrogate and KL

inline double clip_ratio(double ratio, double epsilon) {
  require(ratio > 0.0, "clip_ratio: ratio must be > 0");
  return std::min(std::max(ratio, 1.0 - epsilon), 1.0 + epsilon);
}

struct ClipDiagnostics {
  std::size_t clipped_steps = 0;
  std::size_t off_support_steps = 0;
};

/// Gradient at theta' of the per-step min(ratio A, clip(ratio) A), ratio =
/// pi_theta'(a|s) / pi_theta'_o(a|s) against the log-probs recorded when the
/// batch was sampled. Ties go to the unclipped branch; steps whose ratio
/// underflows to 0 are dropped and counted.
template <Policy P, typename S, typename A>
Vector clip_objective_gradient(const TrajectoryBatch<S, A>& post_batch, const P& policy,
                               const ParamVector& theta_prime, double epsilon,
                               ClipDiagnostics* diag = nullptr) {
  require(!post_batch.empty(), "clip_objective_gradient: empty batch");
  require(post_batch.has_advantages(), "clip_objective_gradient: advantages are not filled");
  require(epsilon >= 0.0, "clip_objective_gradient: epsilon must be >= 0");
  ClipDiagnostics local;
  Vector g = Vector::Zero(policy.dim());
  for (std::size_t n = 0; n < post_batch.size(); ++n) {
    const auto& tr = post_batch.trajectories[n];
    Vector gn = Vector::Zero(policy.dim());
    for (std::size_t t = 0; t < tr.actions.size(); ++t) {
      const double adv = post_batch.advantages[n][t];
      const double ratio = std::exp(policy.log_prob(theta_prime, tr.states[t], tr.actions[t]) - tr.logps[t]);
      if (!(ratio > 0.0)) {
        ++local.off_support_steps;
        continue;
      }
      const double clipped = clip_ratio(ratio, epsilon);
      if (ratio * adv <= clipped * adv) {
        if (adv != 0.0) gn += ratio * adv * policy.grad_log_prob(theta_prime, tr.states[t], tr.actions[t]);
      } else {
        ++local.clipped_steps;
      }
    }
    g += post_batch.weight(n) * gn;
  }
  if (diag) *diag = local;
  return g;
}

namespace detail {

template <typename S, typename A>
double visited_state_mass(const TrajectoryBatch<S, A>& batch) {
  double mass = 0.0;
  for (std::size_t n = 0; n < batch.size(); ++n)
    mass += batch.weight(n) * static_cast<double>(batch.trajectories[n].actions.size());
  return mass;
}

}  // namespace detail

/// Average of KL(pi_theta_o(.|s) || pi_theta(.|s)) over every state at which
/// an action was taken in the batch; theta_o is the batch's sampling point.
template <Policy P, typename S, typename A>
double mean_kl(const TrajectoryBatch<S, A>& pre_batch, const P& policy, const ParamVector& theta) {
  require(!pre_batch.empty(), "mean_kl: empty batch");
  const double mass = detail::visited_state_mass(pre_batch);
  if (mass == 0.0) return 0.0;
  double kl = 0.0;
  for (std::size_t n = 0; n < pre_batch.size(); ++n) {
    const auto& tr = pre_batch.trajectories[n];
    double kn = 0.0;
    for (std::size_t t = 0; t < tr.actions.size(); ++t)
      kn += policy.kl_divergence(pre_batch.theta_sampled, theta, tr.states[t]);
    kl += pre_batch.weight(n) * kn;
  }
  return kl / mass;
}

/// Gradient of mean_kl with respect to theta.
template <Policy P, typename S, typename A>
Vector mean_kl_gradient(const TrajectoryBatch<S, A>& pre_batch, const P& policy,
                        const ParamVector& theta) {
  require(!pre_batch.empty(), "mean_kl_gradient: empty batch");
  Vector g = Vector::Zero(policy.dim());
  const double mass = detail::visited_state_mass(pre_batch);
  if (mass == 0.0) return g;
  for (std::size_t n = 0; n < pre_batch.size(); ++n) {
    const auto& tr = pre_batch.trajectories[n];
    Vector gn = Vector::Zero(policy.dim());
    for (std::size_t t = 0; t < tr.actions.size(); ++t)
      gn += policy.kl_gradient(pre_batch.theta_sampled, theta, tr.states[t]);
    g += pre_batch.weight(n) * gn;
  }
  return g / mass;
}

// ---------------------------------------------------------------------------
// ProMP meta-gradient

struct PrompGradient {
  Vector gradient;
  ParamVector theta_post;  ///< theta after the recomputed inner steps
  double mean_kl = 0.0;    ///< KL term of the first adaptation level
  ClipDiagnostics clip;
};

/// Gradient of J^CLIP(theta^(K)) - eta * sum_k KL_k(theta^(k)) where
/// theta^(0) = theta and theta^(k+1) = theta^(k) + alpha grad J^LR_k(theta^(k)),
/// J^LR_k built from pre_batches[k] (sampled under theta_o^(k)). Back-propagated
/// through the Jacobians I + alpha H^LR_k(theta^(k)).
template <Policy P, typename S, typename A>
PrompGradient promp_meta_gradient(const std::vector<TrajectoryBatch<S, A>>& pre_batches,
                                  const TrajectoryBatch<S, A>& post_batch, const P& policy,
                                  const ParamVector& theta, const PrompHyper& hyper) {
  require(!pre_batches.empty(), "promp_meta_gradient: need at least one pre-update batch");
  for (const auto& b : pre_batches) {
    require(b.theta_sampled.size() == theta.size(),
            "promp_meta_gradient: pre-update batch dimension mismatch");
    require(b.has_advantages(), "promp_meta_gradient: pre-update advantages are not filled");
  }
  require(post_batch.has_advantages(), "promp_meta_gradient: post-update advantages are not filled");
  require(post_batch.theta_sampled.size() == theta.size(),
          "promp_meta_gradient: post-update batch dimension mismatch");

  const InnerUpdateOptions lr{InnerObjective::lr};
  std::vector<ParamVector> thetas{theta};
  std::vector<Matrix> jacobians;
  for (const auto& b : pre_batches) {
    const auto res = inner_update(b, policy, thetas.back(), hyper.alpha, lr);
    jacobians.push_back(res.jacobian);
    thetas.push_back(res.theta_prime);
  }

  PrompGradient out;
  out.theta_post = thetas.back();
  const double eps = std::isinf(hyper.epsilon) ? std::numeric_limits<double>::max() : hyper.epsilon;
  Vector v = clip_objective_gradient(post_batch, policy, out.theta_post, eps, &out.clip);
  for (std::size_t k = pre_batches.size(); k-- > 0;) {
    v = jacobians[k].transpose() * v;
    if (hyper.eta != 0.0) v -= hyper.eta * mean_kl_gradient(pre_batches[k], policy, thetas[k]);
  }
  out.gradient = v;
  out.mean_kl = mean_kl(pre_batches.front(), policy, theta);
  return out;
}

/// Single adaptation step form.
template <Policy P, typename S, typename A>
Vector promp_meta_gradient(const TrajectoryBatch<S, A>& pre_batch,
                           const TrajectoryBatch<S, A>& post_batch, const P& policy,
                           const ParamVector& theta, const PrompHyper& hyper) {
  return promp_meta_gradient(std::vector<TrajectoryBatch<S, A>>{pre_batch}, post_batch, policy,
                             theta, hyper)
      .gradient;
}

// ---------------------------------------------------------------------------
// training loops

namespace detail {

/// Stream layout shared by the training loops so runs with matching seeds
/// see identical tasks and identical pre-update samples.
enum StreamPhase : std::uint64_t { kTasks = 0, kPre = 1, kPost = 2, kInit = 3 };

template <typename D>
std::vector<TaskSpec> sample_tasks(const D& dist, std::uint64_t seed, int iteration, int n) {
  Rng rng = make_stream(seed, {static_cast<std::uint64_t>(iteration), kTasks});
  std::vector<TaskSpec> tasks;
  tasks.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) tasks.push_back(dist.sample_task(rng));
  return tasks;
}

inline void guard_divergence(const ParamVector& theta, double pre_return, double post_return,
                             const std::vector<IterationRecord>& trace, int iteration) {
  const bool blown = !theta.allFinite() || theta.cwiseAbs().maxCoeff() > 1e6;
  if (!blown && std::isfinite(pre_return) && std::isfinite(post_return)) return;
  std::ostringstream os;
  os << "training diverged at iteration " << iteration
     << (blown ? " (parameter magnitude > 1e6 or non-finite)" : " (non-finite return)")
     << "; trace (iteration, pre_return, post_return, grad_norm):";
  for (const auto& r : trace)
    os << "\n  " << r.iteration << ", " << r.pre_return << ", " << r.post_return << ", " << r.grad_norm;
  throw DivergenceError(os.str());
}

inline double distance(const std::optional<ParamVector>& ref, const ParamVector& theta) {
  return ref ? (theta - *ref).norm() : std::numeric_limits<double>::quiet_NaN();
}

}  // namespace detail

/// ProMP: per iteration, sample tasks; for every task sample pre-update
/// batches under theta_o (adapting with the J^LR gradient at the sampling
/// point between levels) and a post-update batch under theta'_o; then take
/// n_steps updates theta += beta * sum_tasks grad J^ProMP on the frozen data.
template <TaskDistribution D, Policy P>
TrainResult promp_train(const D& dist, const P& policy, const ParamVector& theta0,
                        const PrompHyper& hyper, const RunOptions& run) {
  hyper.validate();
  require(run.iterations >= 0, "promp_train: iterations must be >= 0");
  using Env = typename D::env_type;
  using Batch = TrajectoryBatch<typename Env::state_type, typename Env::action_type>;

  TrainResult result;
  ParamVector theta = theta0;
  for (int it = 0; it < run.iterations; ++it) {
    const auto tasks = detail::sample_tasks(dist, run.seed, it, hyper.tasks_per_iter);
    std::vector<std::vector<Batch>> pre(tasks.size());
    std::vector<Batch> post;
    IterationRecord rec;
    rec.iteration = it;
    rec.theta = theta;
    rec.distance_to_optimum = detail::distance(run.reference, theta);

    // sampling phase (theta_o = theta)
    for (std::size_t j = 0; j < tasks.size(); ++j) {
      const Env env = dist.make_env(tasks[j]);
      ParamVector theta_o = theta;
      for (int k = 0; k < hyper.adapt_steps; ++k) {
        Rng rng = make_stream(run.seed, {static_cast<std::uint64_t>(it), detail::kPre, j,
                                         static_cast<std::uint64_t>(k)});
        Batch b = sample_batch(env, policy, theta_o, tasks[j], hyper.traj_per_task, run.gamma, rng);
        compute_advantages(b, run.gamma);
        // the J^LR gradient at its sampling point is the advantage-weighted PGT gradient
        theta_o = theta_o + hyper.alpha * pgt_gradient(b, policy, theta_o, Weighting::advantages);
        pre[j].push_back(std::move(b));
      }
      Rng rng = make_stream(run.seed, {static_cast<std::uint64_t>(it), detail::kPost, j});
      Batch b = sample_batch(env, policy, theta_o, tasks[j], hyper.traj_per_task, run.gamma, rng);
      compute_advantages(b, run.gamma);
      post.push_back(std::move(b));
    }
    for (std::size_t j = 0; j < tasks.size(); ++j) {
      rec.pre_return += pre[j].front().mean_return();
      rec.post_return += post[j].mean_return();
    }
    rec.pre_return /= static_cast<double>(tasks.size());
    rec.post_return /= static_cast<double>(tasks.size());

    // optimization phase on the frozen datasets
    for (int n = 0; n < hyper.n_steps; ++n) {
      Vector step = Vector::Zero(policy.dim());
      StepDiagnostics sd;
      sd.step = n;
      for (std::size_t j = 0; j < tasks.size(); ++j) {
        const auto g = promp_meta_gradient(pre[j], post[j], policy, theta, hyper);
        step += g.gradient;
        sd.mean_kl += g.mean_kl / static_cast<double>(tasks.size());
        sd.clipped_steps += g.clip.clipped_steps;
        sd.off_support_steps += g.clip.off_support_steps;
      }
      sd.grad_norm = step.norm();
      if (n == 0) rec.grad_norm = sd.grad_norm;
      theta += hyper.beta * step;
      rec.steps.push_back(sd);
      detail::guard_divergence(theta, rec.pre_return, rec.post_return, result.records, it);
    }
    for (std::size_t j = 0; j < tasks.size(); ++j)
      rec.mean_kl += mean_kl(pre[j].front(), policy, theta) / static_cast<double>(tasks.size());
    result.records.push_back(std::move(rec));
  }
  result.final_theta = theta;
  return result;
}

/// Meta-gradient ascent with a single PGT inner step and the tagged
/// meta-gradient estimator; theta += beta * mean over tasks.
template <TaskDistribution D, Policy P>
TrainResult vpg_train(const D& dist, const P& policy, const ParamVector& theta0,
                      VpgEstimator estimator, const VpgHyper& hyper, const RunOptions& run) {
  hyper.validate();
  require(run.iterations >= 0, "vpg_train: iterations must be >= 0");
  using Env = typename D::env_type;
  using Batch = TrajectoryBatch<typename Env::state_type, typename Env::action_type>;

  InnerUpdateOptions inner;
  inner.objective = InnerObjective::pgt;
  inner.gradient_weighting = Weighting::advantages;
  inner.hessian_weighting = hyper.hessian_weighting;
  switch (estimator) {
    case VpgEstimator::i_dice:
      inner.hessian = HessianTag::dice;
      inner.hessian_weighting = Weighting::returns;
      break;
    case VpgEstimator::i_lvc: inner.hessian = HessianTag::lvc; break;
    case VpgEstimator::maml:
    case VpgEstimator::emaml: inner.hessian = HessianTag::maml; break;
  }
  const MetaGradientOptions mopt{hyper.pre_term, hyper.outer_weighting};

  TrainResult result;
  ParamVector theta = theta0;
  for (int it = 0; it < run.iterations; ++it) {
    const auto tasks = detail::sample_tasks(dist, run.seed, it, hyper.tasks_per_iter);
    IterationRecord rec;
    rec.iteration = it;
    rec.theta = theta;
    rec.distance_to_optimum = detail::distance(run.reference, theta);
    Vector step = Vector::Zero(policy.dim());
    for (std::size_t j = 0; j < tasks.size(); ++j) {
      const Env env = dist.make_env(tasks[j]);
      Rng pre_rng = make_stream(run.seed, {static_cast<std::uint64_t>(it), detail::kPre, j, 0});
      Batch pre = sample_batch(env, policy, theta, tasks[j], hyper.traj_per_task, run.gamma, pre_rng);
      compute_advantages(pre, run.gamma);
      const auto adaptation = inner_update(pre, policy, theta, hyper.alpha, inner);
      Rng post_rng = make_stream(run.seed, {static_cast<std::uint64_t>(it), detail::kPost, j});
      Batch post = sample_batch(env, policy, adaptation.theta_prime, tasks[j], hyper.traj_per_task,
                                run.gamma, post_rng);
      compute_advantages(post, run.gamma);
      MetaGradient mg;
      switch (estimator) {
        case VpgEstimator::i_dice:
        case VpgEstimator::i_lvc:
          mg = meta_gradient_I(pre, post, policy, theta, adaptation, mopt);
          break;
        case VpgEstimator::maml:
          mg = meta_gradient_maml(pre, post, policy, theta, adaptation, hyper.outer_weighting);
          break;
        case VpgEstimator::emaml:
          mg = meta_gradient_II(pre, post, policy, theta, adaptation, hyper.outer_weighting);
          break;
      }
      step += mg.total;
      rec.pre_return += pre.mean_return();
      rec.post_return += post.mean_return();
    }
    const double n_tasks = static_cast<double>(tasks.size());
    step /= n_tasks;
    rec.pre_return /= n_tasks;
    rec.post_return /= n_tasks;
    rec.grad_norm = step.norm();
    theta += hyper.beta * step;
    rec.steps.push_back({0, rec.grad_norm, 0.0, 0, 0});
    detail::guard_divergence(theta, rec.pre_return, rec.post_return, result.records, it);
    result.records.push_back(std::move(rec));
  }
  result.final_theta = theta;
  return result;
}

struct AdaptEval {
  double pre_return = 0.0;
  double post_return = 0.0;
};

/// k_steps inner PGT updates (advantage-weighted) on fresh samples of one
/// task; returns the mean return before adaptation and of a fresh batch after.
template <Environment E, Policy P>
AdaptEval adapt_eval(const E& env, const P& policy, const ParamVector& theta_meta,
                     const TaskSpec& task, int k_steps, double alpha, int traj_per_task,
                     double gamma, std::uint64_t seed) {
  require(k_steps >= 0, "adapt_eval: k_steps must be >= 0");
  require(alpha >= 0.0, "adapt_eval: alpha must be >= 0");
  using Batch = TrajectoryBatch<typename E::state_type, typename E::action_type>;
  AdaptEval out;
  ParamVector theta = theta_meta;
  for (int k = 0; k <= k_steps; ++k) {
    Rng rng = make_stream(seed, {static_cast<std::uint64_t>(k)});
    Batch b = sample_batch(env, policy, theta, task, traj_per_task, gamma, rng);
    if (k == 0) out.pre_return = b.mean_return();
    if (k == k_steps) {
      if (k_steps > 0) out.post_return = b.mean_return();
      break;
    }
    compute_advantages(b, gamma);
    theta = theta + alpha * pgt_gradient(b, policy, theta, Weighting::advantages);
  }
  if (k_steps == 0) {
    Rng rng = make_stream(seed, {1});
    out.post_return = sample_batch(env, policy, theta, task, traj_per_task, gamma, rng).mean_return();
  }
  return out;
}

}  // namespace promp
