#pragma once

// Surrogate-objective gradients and Hessians (PGT, DiCE, LVC, MAML-biased),
// the exact four-term Hessian decomposition, the inner adaptation step with
// its Jacobian, and the meta-gradients of both meta-RL formulations.
//
// Every estimator is an explicit formula over the policy derivative
// primitives. Each accepts a TrajectoryBatch; passing an enumerated
// distribution (probability weights) gives the exact expectation of the
// same formula.

#include <cmath>
#include <string>
#include <vector>

#include "promp/env_suite.hpp"
#include "promp/policies.hpp"
#include "promp/rollout.hpp"
#include "promp/types.hpp"

namespace promp {

/// Per-step credit used by PGT-style estimators.
enum class Weighting {
  returns,     ///< raw (discount-weighted) reward-to-go
  advantages,  ///< reward-to-go minus the per-timestep batch baseline
};

enum class HessianTag { dice, lvc, maml, exact, lr };

enum class InnerObjective { pgt, lr };

/// How formulation I's pre-update term pairs trajectories.
enum class PreTerm {
  batch,     ///< per-trajectory score x (batch inner gradient . outer gradient)
  per_pair,  ///< per-trajectory score x (own inner gradient . outer gradient)
  none,      ///< no separate pre-update term
};

enum class Formulation { I, II, MAML, LVC };

inline std::string to_string(HessianTag t) {
  switch (t) {
    case HessianTag::dice: return "dice";
    case HessianTag::lvc: return "lvc";
    case HessianTag::maml: return "maml";
    case HessianTag::exact: return "exact";
    case HessianTag::lr: return "lr";
  }
  return "?";
}

inline std::string to_string(Formulation f) {
  switch (f) {
    case Formulation::I: return "I";
    case Formulation::II: return "II";
    case Formulation::MAML: return "MAML";
    case Formulation::LVC: return "LVC";
  }
  return "?";
}

/// The four matrices of the finite-horizon Hessian decomposition.
struct HessianTerms {
  Matrix h1;
  Matrix h2;
  Matrix h12;

  Matrix total() const { return h1 + h2 + h12 + h12.transpose(); }
};

struct MetaGradient {
  Vector total;
  Vector j_post;
  Vector j_pre;
  Formulation formulation = Formulation::I;

  /// Gradient-alignment diagnostics: inner . outer = |inner| |outer| cos(delta).
  double inner_outer_dot = 0.0;
  double inner_norm = 0.0;
  double outer_norm = 0.0;
  double cos_delta = 0.0;
};

struct AdaptationResult {
  ParamVector theta_prime;
  Vector inner_gradient;
  Matrix jacobian;  ///< I + alpha * H_hat (H_hat symmetrized)
  HessianTag hessian_tag = HessianTag::lvc;
  double alpha = 0.0;
};

// ---------------------------------------------------------------------------
// helpers

namespace detail {

template <typename S, typename A>
void require_on_policy(const TrajectoryBatch<S, A>& batch, const ParamVector& theta,
                       const char* who) {
  require(!batch.empty(), std::string(who) + ": empty batch");
  require(batch.theta_sampled.size() == theta.size() && batch.theta_sampled == theta,
          std::string(who) + ": batch was not sampled under theta (off-policy batch)");
}

template <typename S, typename A>
std::vector<double> step_credit(const TrajectoryBatch<S, A>& batch, std::size_t n, Weighting w) {
  if (w == Weighting::returns) return reward_to_go(batch.trajectories[n], batch.gamma);
  require(batch.has_advantages(), "advantage weighting requested but advantages are not filled");
  return batch.advantages[n];
}

template <Policy P, typename S, typename A>
std::vector<LogProbDerivatives> step_derivatives(const P& policy, const ParamVector& theta,
                                                 const Trajectory<S, A>& tr) {
  std::vector<LogProbDerivatives> out;
  out.reserve(tr.actions.size());
  for (std::size_t t = 0; t < tr.actions.size(); ++t)
    out.push_back(policy.derivatives(theta, tr.states[t], tr.actions[t]));
  return out;
}

template <Policy P, typename S, typename A>
Vector trajectory_score(const P& policy, const ParamVector& theta, const Trajectory<S, A>& tr) {
  Vector s = Vector::Zero(policy.dim());
  for (std::size_t t = 0; t < tr.actions.size(); ++t)
    s += policy.grad_log_prob(theta, tr.states[t], tr.actions[t]);
  return s;
}

template <typename S, typename A>
double discounted_return(const Trajectory<S, A>& tr, double gamma) {
  const auto rtg = reward_to_go(tr, gamma);
  return rtg.empty() ? 0.0 : rtg.front();
}

}  // namespace detail

// ---------------------------------------------------------------------------
// gradients

/// Policy-gradient-theorem estimate: mean over trajectories of
/// sum_t grad log pi(a_t|s_t) * credit_t (forward credit assignment).
template <Policy P, typename S, typename A>
Vector pgt_gradient(const TrajectoryBatch<S, A>& batch, const P& policy, const ParamVector& theta,
                    Weighting weighting = Weighting::returns) {
  detail::require_on_policy(batch, theta, "pgt_gradient");
  Vector g = Vector::Zero(policy.dim());
  for (std::size_t n = 0; n < batch.size(); ++n) {
    const auto& tr = batch.trajectories[n];
    const auto credit = detail::step_credit(batch, n, weighting);
    Vector gn = Vector::Zero(policy.dim());
    for (std::size_t t = 0; t < tr.actions.size(); ++t)
      gn += credit[t] * policy.grad_log_prob(theta, tr.states[t], tr.actions[t]);
    g += batch.weight(n) * gn;
  }
  return g;
}

/// DiCE objective with every stop-gradient ratio evaluated: the discounted return.
template <typename S, typename A>
double dice_objective(const Trajectory<S, A>& traj, double gamma = 1.0) {
  return detail::discounted_return(traj, gamma);
}

/// First derivative of the DiCE objective (backward credit assignment):
/// sum_t (sum_{t'<=t} grad log pi_{t'}) * gamma^t r_t.
template <Policy P, typename S, typename A>
Vector dice_gradient(const TrajectoryBatch<S, A>& batch, const P& policy, const ParamVector& theta) {
  detail::require_on_policy(batch, theta, "dice_gradient");
  Vector g = Vector::Zero(policy.dim());
  for (std::size_t n = 0; n < batch.size(); ++n) {
    const auto& tr = batch.trajectories[n];
    const auto r = discounted_rewards(tr, batch.gamma);
    Vector cum = Vector::Zero(policy.dim());
    Vector gn = Vector::Zero(policy.dim());
    for (std::size_t t = 0; t < tr.actions.size(); ++t) {
      cum += policy.grad_log_prob(theta, tr.states[t], tr.actions[t]);
      gn += r[t] * cum;
    }
    g += batch.weight(n) * gn;
  }
  return g;
}

/// First derivative of the LVC objective: sum_t ratio_t grad log pi_t * rtg_t,
/// with ratio_t = pi_theta / pi_sampled recomputed from the recorded log-probs
/// (identically 1 on-policy).
template <Policy P, typename S, typename A>
Vector lvc_gradient(const TrajectoryBatch<S, A>& batch, const P& policy, const ParamVector& theta) {
  detail::require_on_policy(batch, theta, "lvc_gradient");
  Vector g = Vector::Zero(policy.dim());
  for (std::size_t n = 0; n < batch.size(); ++n) {
    const auto& tr = batch.trajectories[n];
    const auto rtg = reward_to_go(tr, batch.gamma);
    Vector gn = Vector::Zero(policy.dim());
    for (std::size_t t = 0; t < tr.actions.size(); ++t) {
      const double lp = policy.log_prob(theta, tr.states[t], tr.actions[t]);
      const double ratio = std::exp(lp - tr.logps[t]);
      gn += ratio * rtg[t] * policy.grad_log_prob(theta, tr.states[t], tr.actions[t]);
    }
    g += batch.weight(n) * gn;
  }
  return g;
}

// ---------------------------------------------------------------------------
// Hessian estimators

/// Second derivative of the DiCE objective:
/// sum_t [G_t G_t^T + sum_{t'<=t} hess log pi_{t'}] gamma^t r_t,
/// G_t = sum_{t'<=t} grad log pi_{t'}. Unbiased for H1 + H2 + H12 + H12^T.
template <Policy P, typename S, typename A>
Matrix dice_hessian(const TrajectoryBatch<S, A>& batch, const P& policy, const ParamVector& theta) {
  detail::require_on_policy(batch, theta, "dice_hessian");
  const auto d = policy.dim();
  Matrix h = Matrix::Zero(d, d);
  for (std::size_t n = 0; n < batch.size(); ++n) {
    const auto& tr = batch.trajectories[n];
    const auto r = discounted_rewards(tr, batch.gamma);
    const auto der = detail::step_derivatives(policy, theta, tr);
    Vector cum_g = Vector::Zero(d);
    Matrix cum_h = Matrix::Zero(d, d);
    Matrix hn = Matrix::Zero(d, d);
    for (std::size_t t = 0; t < der.size(); ++t) {
      cum_g += der[t].grad;
      cum_h += der[t].hess;
      if (r[t] != 0.0) hn += r[t] * (cum_g * cum_g.transpose() + cum_h);
    }
    h += batch.weight(n) * hn;
  }
  return h;
}

/// Second derivative of the LVC objective:
/// sum_t [g_t g_t^T + hess log pi_t] * credit_t. Its expectation is H1 + H2.
template <Policy P, typename S, typename A>
Matrix lvc_hessian(const TrajectoryBatch<S, A>& batch, const P& policy, const ParamVector& theta,
                   Weighting weighting = Weighting::returns) {
  detail::require_on_policy(batch, theta, "lvc_hessian");
  const auto d = policy.dim();
  Matrix h = Matrix::Zero(d, d);
  for (std::size_t n = 0; n < batch.size(); ++n) {
    const auto& tr = batch.trajectories[n];
    const auto credit = detail::step_credit(batch, n, weighting);
    Matrix hn = Matrix::Zero(d, d);
    for (std::size_t t = 0; t < tr.actions.size(); ++t) {
      if (credit[t] == 0.0) continue;
      const auto der = policy.derivatives(theta, tr.states[t], tr.actions[t]);
      hn += credit[t] * (der.grad * der.grad.transpose() + der.hess);
    }
    h += batch.weight(n) * hn;
  }
  return h;
}

/// Hessian obtained by differentiating the PGT surrogate twice:
/// sum_t hess log pi_t * credit_t. Its expectation is H2 alone.
template <Policy P, typename S, typename A>
Matrix maml_hessian(const TrajectoryBatch<S, A>& batch, const P& policy, const ParamVector& theta,
                    Weighting weighting = Weighting::returns) {
  detail::require_on_policy(batch, theta, "maml_hessian");
  const auto d = policy.dim();
  Matrix h = Matrix::Zero(d, d);
  for (std::size_t n = 0; n < batch.size(); ++n) {
    const auto& tr = batch.trajectories[n];
    const auto credit = detail::step_credit(batch, n, weighting);
    Matrix hn = Matrix::Zero(d, d);
    for (std::size_t t = 0; t < tr.actions.size(); ++t)
      if (credit[t] != 0.0) hn += credit[t] * policy.hess_log_prob(theta, tr.states[t], tr.actions[t]);
    h += batch.weight(n) * hn;
  }
  return h;
}

// ---------------------------------------------------------------------------
// likelihood-ratio inner objective J^LR

/// Gradient of J^LR at any theta for a batch sampled under theta_o:
/// mean of sum_t (pi_theta / pi_theta_o) grad log pi_theta(a_t|s_t) A_t.
template <Policy P, typename S, typename A>
Vector lr_gradient(const TrajectoryBatch<S, A>& batch, const P& policy, const ParamVector& theta) {
  require(!batch.empty(), "lr_gradient: empty batch");
  require(batch.has_advantages(), "lr_gradient: advantages are not filled");
  Vector g = Vector::Zero(policy.dim());
  for (std::size_t n = 0; n < batch.size(); ++n) {
    const auto& tr = batch.trajectories[n];
    Vector gn = Vector::Zero(policy.dim());
    for (std::size_t t = 0; t < tr.actions.size(); ++t) {
      const double adv = batch.advantages[n][t];
      if (adv == 0.0) continue;
      const double ratio = std::exp(policy.log_prob(theta, tr.states[t], tr.actions[t]) - tr.logps[t]);
      gn += ratio * adv * policy.grad_log_prob(theta, tr.states[t], tr.actions[t]);
    }
    g += batch.weight(n) * gn;
  }
  return g;
}

/// Hessian of J^LR: mean of sum_t ratio_t [g_t g_t^T + hess_t] A_t. At
/// theta = theta_o this is the advantage-weighted LVC Hessian.
template <Policy P, typename S, typename A>
Matrix lr_hessian(const TrajectoryBatch<S, A>& batch, const P& policy, const ParamVector& theta) {
  require(!batch.empty(), "lr_hessian: empty batch");
  require(batch.has_advantages(), "lr_hessian: advantages are not filled");
  const auto d = policy.dim();
  Matrix h = Matrix::Zero(d, d);
  for (std::size_t n = 0; n < batch.size(); ++n) {
    const auto& tr = batch.trajectories[n];
    Matrix hn = Matrix::Zero(d, d);
    for (std::size_t t = 0; t < tr.actions.size(); ++t) {
      const double adv = batch.advantages[n][t];
      if (adv == 0.0) continue;
      const auto der = policy.derivatives(theta, tr.states[t], tr.actions[t]);
      const double ratio = std::exp(der.log_prob - tr.logps[t]);
      hn += ratio * adv * (der.grad * der.grad.transpose() + der.hess);
    }
    h += batch.weight(n) * hn;
  }
  return h;
}

// ---------------------------------------------------------------------------
// exact decomposition (tabular)

/// grad_theta Q_t(s, a) for every (t, s, a), by the backward recursion
/// grad Q_t(s,a) = sum_s' p(s'|s,a) sum_a' pi(a'|s') [g(s',a') Q_{t+1}(s',a') + grad Q_{t+1}(s',a')].
/// Rewards are pre-weighted by gamma^t. Index: [t][s * n_actions + a].
struct QGradientTable {
  std::vector<std::vector<double>> q;
  std::vector<std::vector<Vector>> grad_q;
};

inline QGradientTable q_gradients(const TabularTaskEnv& env, const SoftmaxTabularPolicy& policy,
                                  const ParamVector& theta, double gamma) {
  const TabularModel& m = *env.model;
  const int S = m.n_states, A = m.n_actions, H = m.horizon;
  const auto d = policy.dim();
  QGradientTable tab;
  tab.q.assign(static_cast<std::size_t>(H), std::vector<double>(static_cast<std::size_t>(S * A), 0.0));
  tab.grad_q.assign(static_cast<std::size_t>(H),
                    std::vector<Vector>(static_cast<std::size_t>(S * A), Vector::Zero(d)));
  std::vector<double> v_next(static_cast<std::size_t>(S), 0.0);
  std::vector<Vector> grad_v_next(static_cast<std::size_t>(S), Vector::Zero(d));
  for (int t = H - 1; t >= 0; --t) {
    const double disc = std::pow(gamma, t);
    auto& q = tab.q[static_cast<std::size_t>(t)];
    auto& gq = tab.grad_q[static_cast<std::size_t>(t)];
    for (int s = 0; s < S; ++s)
      for (int a = 0; a < A; ++a) {
        const Vector& p = m.next_distribution(s, a);
        const auto k = static_cast<std::size_t>(s * A + a);
        q[k] = disc * env.reward(s, a);
        for (int s2 = 0; s2 < S; ++s2) {
          q[k] += p[s2] * v_next[static_cast<std::size_t>(s2)];
          gq[k] += p[s2] * grad_v_next[static_cast<std::size_t>(s2)];
        }
      }
    for (int s = 0; s < S; ++s) {
      const Vector pi = policy.probs(theta, s);
      double v = 0.0;
      Vector gv = Vector::Zero(d);
      for (int a = 0; a < A; ++a) {
        const auto k = static_cast<std::size_t>(s * A + a);
        v += pi[a] * q[k];
        gv += pi[a] * (policy.grad_log_prob(theta, s, a) * q[k] + gq[k]);
      }
      v_next[static_cast<std::size_t>(s)] = v;
      grad_v_next[static_cast<std::size_t>(s)] = gv;
    }
  }
  return tab;
}

/// H1 and H2 as probability-weighted sums over the enumeration; H12 as
/// E[sum_t g_t grad Q_t(s_t, a_t)^T] with grad Q_t from the exact recursion.
inline HessianTerms exact_hessian_terms(const TabularTaskEnv& env, const SoftmaxTabularPolicy& policy,
                                        const ParamVector& theta, const EnumeratedDistribution& dist) {
  detail::require_on_policy(dist, theta, "exact_hessian_terms");
  const auto d = policy.dim();
  const double gamma = dist.gamma;
  const auto qtab = q_gradients(env, policy, theta, gamma);
  HessianTerms terms{Matrix::Zero(d, d), Matrix::Zero(d, d), Matrix::Zero(d, d)};
  const int A = env.model->n_actions;
  for (std::size_t n = 0; n < dist.size(); ++n) {
    const auto& tr = dist.trajectories[n];
    const double p = dist.weight(n);
    const auto rtg = reward_to_go(tr, gamma);
    for (std::size_t t = 0; t < tr.actions.size(); ++t) {
      const auto der = policy.derivatives(theta, tr.states[t], tr.actions[t]);
      terms.h1 += p * rtg[t] * der.grad * der.grad.transpose();
      terms.h2 += p * rtg[t] * der.hess;
      const auto k = static_cast<std::size_t>(tr.states[t] * A + tr.actions[t]);
      terms.h12 += p * der.grad * qtab.grad_q[t][k].transpose();
    }
  }
  return terms;
}

// ---------------------------------------------------------------------------
// inner update U and its Jacobian

/// Hessian estimate selected by tag. `exact` needs an enumeration, see
/// exact_adaptation / update_jacobian_exact.
template <Policy P, typename S, typename A>
Matrix hessian_estimate(const TrajectoryBatch<S, A>& batch, const P& policy,
                        const ParamVector& theta, HessianTag tag,
                        Weighting weighting = Weighting::returns) {
  switch (tag) {
    case HessianTag::dice:
      require(weighting == Weighting::returns, "dice_hessian is defined on raw rewards only");
      return dice_hessian(batch, policy, theta);
    case HessianTag::lvc: return lvc_hessian(batch, policy, theta, weighting);
    case HessianTag::maml: return maml_hessian(batch, policy, theta, weighting);
    case HessianTag::lr: return lr_hessian(batch, policy, theta);
    case HessianTag::exact:
      throw PreconditionError("exact Hessian requires an enumerated task (update_jacobian_exact)");
  }
  throw PreconditionError("unknown Hessian tag");
}

/// I + alpha * sym(H_hat).
template <Policy P, typename S, typename A>
Matrix update_jacobian(const TrajectoryBatch<S, A>& batch, const P& policy, const ParamVector& theta,
                       double alpha, HessianTag tag, Weighting weighting = Weighting::returns) {
  require(alpha >= 0.0, "update_jacobian: alpha must be >= 0");
  const auto d = policy.dim();
  return Matrix::Identity(d, d) + alpha * symmetrized(hessian_estimate(batch, policy, theta, tag, weighting));
}

inline Matrix update_jacobian_exact(const TabularTaskEnv& env, const SoftmaxTabularPolicy& policy,
                                    const ParamVector& theta, double alpha, double gamma) {
  require(alpha >= 0.0, "update_jacobian: alpha must be >= 0");
  const auto dist = enumerate(env, policy, theta, gamma);
  const auto d = policy.dim();
  return Matrix::Identity(d, d) +
         alpha * symmetrized(exact_hessian_terms(env, policy, theta, dist).total());
}

struct InnerUpdateOptions {
  InnerObjective objective = InnerObjective::pgt;
  Weighting gradient_weighting = Weighting::returns;  ///< PGT objective only; LR always uses advantages
  HessianTag hessian = HessianTag::lvc;                ///< ignored for the LR objective
  Weighting hessian_weighting = Weighting::returns;
};

/// theta' = theta + alpha * g_hat, plus the Jacobian I + alpha * H_hat.
///
/// PGT: on-policy batch, g_hat = pgt_gradient. LR: batch sampled under any
/// theta_o with advantages filled, g_hat = lr_gradient(theta) and the Jacobian
/// uses lr_hessian(theta).
template <Policy P, typename S, typename A>
AdaptationResult inner_update(const TrajectoryBatch<S, A>& batch, const P& policy,
                              const ParamVector& theta, double alpha,
                              const InnerUpdateOptions& opt = {}) {
  require(alpha >= 0.0, "inner_update: alpha must be >= 0");
  require(!batch.empty(), "inner_update: empty batch (N = 0)");
  AdaptationResult res;
  res.alpha = alpha;
  const auto d = policy.dim();
  if (opt.objective == InnerObjective::pgt) {
    res.inner_gradient = pgt_gradient(batch, policy, theta, opt.gradient_weighting);
    res.hessian_tag = opt.hessian;
    res.jacobian = update_jacobian(batch, policy, theta, alpha, opt.hessian, opt.hessian_weighting);
  } else {
    // lr_gradient and lr_hessian in one pass over the batch
    require(batch.has_advantages(), "inner_update: advantages are not filled");
    Vector g = Vector::Zero(d);
    Matrix h = Matrix::Zero(d, d);
    for (std::size_t n = 0; n < batch.size(); ++n) {
      const auto& tr = batch.trajectories[n];
      Vector gn = Vector::Zero(d);
      Matrix hn = Matrix::Zero(d, d);
      for (std::size_t t = 0; t < tr.actions.size(); ++t) {
        const double adv = batch.advantages[n][t];
        if (adv == 0.0) continue;
        const auto der = policy.derivatives(theta, tr.states[t], tr.actions[t]);
        const double ratio = std::exp(der.log_prob - tr.logps[t]);
        gn += ratio * adv * der.grad;
        hn += ratio * adv * (der.grad * der.grad.transpose() + der.hess);
      }
      g += batch.weight(n) * gn;
      h += batch.weight(n) * hn;
    }
    res.inner_gradient = g;
    res.hessian_tag = HessianTag::lr;
    res.jacobian = Matrix::Identity(d, d) + alpha * symmetrized(h);
  }
  res.theta_prime = theta + alpha * res.inner_gradient;
  return res;
}

/// Inner update with the exact gradient and exact Hessian of a tabular task.
inline AdaptationResult exact_adaptation(const TabularTaskEnv& env, const SoftmaxTabularPolicy& policy,
                                         const ParamVector& theta, double alpha, double gamma) {
  require(alpha >= 0.0, "exact_adaptation: alpha must be >= 0");
  const auto dist = enumerate(env, policy, theta, gamma);
  AdaptationResult res;
  res.alpha = alpha;
  res.inner_gradient = exact_policy_gradient(dist, policy, theta, gamma);
  res.hessian_tag = HessianTag::exact;
  const auto d = policy.dim();
  res.jacobian = Matrix::Identity(d, d) +
                 alpha * symmetrized(exact_hessian_terms(env, policy, theta, dist).total());
  res.theta_prime = theta + alpha * res.inner_gradient;
  return res;
}

// ---------------------------------------------------------------------------
// meta-gradients

struct MetaGradientOptions {
  PreTerm pre_term = PreTerm::batch;
  Weighting outer_weighting = Weighting::returns;
};

namespace detail {

template <Policy P, typename S, typename A>
MetaGradient post_term(const TrajectoryBatch<S, A>& pre_batch, const TrajectoryBatch<S, A>& post_batch,
                       const P& policy, const ParamVector& theta, const AdaptationResult& adaptation,
                       Weighting outer_weighting, Vector& outer) {
  require_on_policy(pre_batch, theta, "meta_gradient (pre-update batch)");
  require(adaptation.theta_prime.size() == theta.size(), "meta_gradient: adaptation dimension mismatch");
  require_on_policy(post_batch, adaptation.theta_prime, "meta_gradient (post-update batch)");
  outer = pgt_gradient(post_batch, policy, adaptation.theta_prime, outer_weighting);
  MetaGradient mg;
  // row-vector convention: outer^T (I + alpha H); the Jacobian is symmetric
  mg.j_post = adaptation.jacobian.transpose() * outer;
  mg.inner_outer_dot = adaptation.inner_gradient.dot(outer);
  mg.inner_norm = adaptation.inner_gradient.norm();
  mg.outer_norm = outer.norm();
  const double denom = mg.inner_norm * mg.outer_norm;
  mg.cos_delta = denom > 0.0 ? mg.inner_outer_dot / denom : 0.0;
  return mg;
}

}  // namespace detail

/// Formulation I: j_post = (I + alpha H)^T grad J_outer(theta') and the
/// pre-update term alpha * score(tau) * (inner . outer) with the configured
/// pairing.
template <Policy P, typename S, typename A>
MetaGradient meta_gradient_I(const TrajectoryBatch<S, A>& pre_batch,
                             const TrajectoryBatch<S, A>& post_batch, const P& policy,
                             const ParamVector& theta, const AdaptationResult& adaptation,
                             const MetaGradientOptions& opt = {}) {
  Vector outer;
  MetaGradient mg = detail::post_term(pre_batch, post_batch, policy, theta, adaptation,
                                      opt.outer_weighting, outer);
  mg.formulation = adaptation.hessian_tag == HessianTag::lvc || adaptation.hessian_tag == HessianTag::lr
                       ? Formulation::LVC
                       : Formulation::I;
  mg.j_pre = Vector::Zero(policy.dim());
  if (opt.pre_term == PreTerm::batch) {
    for (std::size_t n = 0; n < pre_batch.size(); ++n)
      mg.j_pre += pre_batch.weight(n) *
                  detail::trajectory_score(policy, theta, pre_batch.trajectories[n]);
    mg.j_pre *= adaptation.alpha * mg.inner_outer_dot;
  } else if (opt.pre_term == PreTerm::per_pair) {
    for (std::size_t n = 0; n < pre_batch.size(); ++n) {
      const auto& tr = pre_batch.trajectories[n];
      const Vector score = detail::trajectory_score(policy, theta, tr);
      const double own_inner_dot = detail::discounted_return(tr, pre_batch.gamma) * score.dot(outer);
      mg.j_pre += pre_batch.weight(n) * score * own_inner_dot;
    }
    mg.j_pre *= adaptation.alpha;
  }
  mg.total = mg.j_post + mg.j_pre;
  return mg;
}

/// Formulation II (E-MAML): same j_post; j_pre = alpha * mean(score(tau)) * mean(R(tau')).
template <Policy P, typename S, typename A>
MetaGradient meta_gradient_II(const TrajectoryBatch<S, A>& pre_batch,
                              const TrajectoryBatch<S, A>& post_batch, const P& policy,
                              const ParamVector& theta, const AdaptationResult& adaptation,
                              Weighting outer_weighting = Weighting::returns) {
  Vector outer;
  MetaGradient mg = detail::post_term(pre_batch, post_batch, policy, theta, adaptation,
                                      outer_weighting, outer);
  mg.formulation = Formulation::II;
  double post_return = 0.0;
  for (std::size_t m = 0; m < post_batch.size(); ++m)
    post_return += post_batch.weight(m) *
                   detail::discounted_return(post_batch.trajectories[m], post_batch.gamma);
  Vector mean_score = Vector::Zero(policy.dim());
  for (std::size_t n = 0; n < pre_batch.size(); ++n)
    mean_score += pre_batch.weight(n) * detail::trajectory_score(policy, theta, pre_batch.trajectories[n]);
  mg.j_pre = adaptation.alpha * post_return * mean_score;
  mg.total = mg.j_post + mg.j_pre;
  return mg;
}

/// MAML as implemented without pre-update credit: j_pre = 0.
template <Policy P, typename S, typename A>
MetaGradient meta_gradient_maml(const TrajectoryBatch<S, A>& pre_batch,
                                const TrajectoryBatch<S, A>& post_batch, const P& policy,
                                const ParamVector& theta, const AdaptationResult& adaptation,
                                Weighting outer_weighting = Weighting::returns) {
  Vector outer;
  MetaGradient mg = detail::post_term(pre_batch, post_batch, policy, theta, adaptation,
                                      outer_weighting, outer);
  mg.formulation = Formulation::MAML;
  mg.j_pre = Vector::Zero(policy.dim());
  mg.total = mg.j_post;
  return mg;
}

}  // namespace promp
