#pragma once

// Stochastic policies with closed-form first and second derivatives of the
// per-step log-likelihood. Every estimator is written against these
// primitives; there is no automatic differentiation anywhere.

#include <algorithm>
#include <cmath>
#include <concepts>
#include <numbers>
#include <vector>

#include "promp/rng.hpp"
#include "promp/types.hpp"

namespace promp {

/// log pi(a|s) together with its gradient and Hessian w.r.t. theta.
struct LogProbDerivatives {
  double log_prob = 0.0;
  Vector grad;
  Matrix hess;
};

template <typename P>
concept Policy = requires(const P& p, const ParamVector& theta, const typename P::state_type& s,
                          const typename P::action_type& a, Rng& rng) {
  typename P::state_type;
  typename P::action_type;
  { p.dim() } -> std::convertible_to<Eigen::Index>;
  { p.log_prob(theta, s, a) } -> std::convertible_to<double>;
  { p.grad_log_prob(theta, s, a) } -> std::convertible_to<Vector>;
  { p.hess_log_prob(theta, s, a) } -> std::convertible_to<Matrix>;
  { p.derivatives(theta, s, a) } -> std::same_as<LogProbDerivatives>;
  { p.sample_action(theta, s, rng) } -> std::same_as<typename P::action_type>;
  { p.kl_divergence(theta, theta, s) } -> std::convertible_to<double>;
  { p.kl_gradient(theta, theta, s) } -> std::convertible_to<Vector>;
};

// ---------------------------------------------------------------------------

/// Softmax over per-(state, action) logits; theta[s * n_actions + a].
class SoftmaxTabularPolicy {
 public:
  using state_type = int;
  using action_type = int;

  SoftmaxTabularPolicy(int n_states, int n_actions) : n_states_(n_states), n_actions_(n_actions) {
    require(n_states >= 1 && n_actions >= 1, "SoftmaxTabularPolicy: empty state or action space");
  }

  Eigen::Index dim() const { return Eigen::Index{n_states_} * n_actions_; }
  int n_states() const { return n_states_; }
  int n_actions() const { return n_actions_; }

  Vector probs(const ParamVector& theta, int s) const {
    auto logits = theta.segment(offset(s), n_actions_);
    const double mx = logits.maxCoeff();
    Vector p = (logits.array() - mx).exp();
    return p / p.sum();
  }

  double log_prob(const ParamVector& theta, int s, int a) const {
    auto logits = theta.segment(offset(s), n_actions_);
    const double mx = logits.maxCoeff();
    return logits[a] - mx - std::log((logits.array() - mx).exp().sum());
  }

  Vector grad_log_prob(const ParamVector& theta, int s, int a) const {
    Vector g = Vector::Zero(dim());
    g.segment(offset(s), n_actions_) = -probs(theta, s);
    g[offset(s) + a] += 1.0;
    return g;
  }

  Matrix hess_log_prob(const ParamVector& theta, int s, int) const {
    const Vector p = probs(theta, s);
    Matrix h = Matrix::Zero(dim(), dim());
    h.block(offset(s), offset(s), n_actions_, n_actions_) =
        p * p.transpose() - Matrix(p.asDiagonal());
    return h;
  }

  LogProbDerivatives derivatives(const ParamVector& theta, int s, int a) const {
    return {log_prob(theta, s, a), grad_log_prob(theta, s, a), hess_log_prob(theta, s, a)};
  }

  int sample_action(const ParamVector& theta, int s, Rng& rng) const {
    return static_cast<int>(sample_categorical(probs(theta, s), rng));
  }

  /// KL(pi_p(.|s) || pi_q(.|s)).
  double kl_divergence(const ParamVector& theta_p, const ParamVector& theta_q, int s) const {
    const Vector p = probs(theta_p, s);
    double kl = 0.0;
    for (int a = 0; a < n_actions_; ++a)
      if (p[a] > 0.0) kl += p[a] * (log_prob(theta_p, s, a) - log_prob(theta_q, s, a));
    return std::max(kl, 0.0);
  }

  /// Gradient of KL(pi_p || pi_q) w.r.t. theta_q.
  Vector kl_gradient(const ParamVector& theta_p, const ParamVector& theta_q, int s) const {
    Vector g = Vector::Zero(dim());
    g.segment(offset(s), n_actions_) = probs(theta_q, s) - probs(theta_p, s);
    return g;
  }

  ParamVector initial_params(double scale, Rng& rng) const {
    ParamVector theta(dim());
    for (Eigen::Index i = 0; i < dim(); ++i) theta[i] = scale * standard_normal(rng);
    return theta;
  }

 private:
  Eigen::Index offset(int s) const { return Eigen::Index{s} * n_actions_; }

  int n_states_;
  int n_actions_;
};

// ---------------------------------------------------------------------------

/// Diagonal Gaussian with linear mean mu(s) = W s + b and sigma = exp(lambda),
/// clamped below at sigma_min.
///
/// Parameter layout: [b (act), W row-major (act x obs), lambda (act)]. With a
/// fixed standard deviation the lambda block is absent, so the one-dimensional
/// two-parameter policy is theta = (b, w) with mean theta_0 + theta_1 * x.
class GaussianLinearPolicy {
 public:
  using state_type = Vector;
  using action_type = Vector;

  static constexpr double kSigmaMin = 1e-3;

  /// Learnable log-std.
  GaussianLinearPolicy(int obs_dim, int act_dim)
      : obs_dim_(obs_dim), act_dim_(act_dim), learn_std_(true), fixed_sigma_(1.0) {
    require(obs_dim >= 1 && act_dim >= 1, "GaussianLinearPolicy: empty dimension");
  }

  /// Fixed, non-learnable standard deviation.
  static GaussianLinearPolicy fixed_std(int obs_dim, int act_dim, double sigma) {
    require(sigma >= kSigmaMin, "GaussianLinearPolicy: sigma below sigma_min");
    GaussianLinearPolicy p(obs_dim, act_dim);
    p.learn_std_ = false;
    p.fixed_sigma_ = sigma;
    return p;
  }

  Eigen::Index dim() const {
    return Eigen::Index{act_dim_} * (1 + obs_dim_) + (learn_std_ ? act_dim_ : 0);
  }
  int obs_dim() const { return obs_dim_; }
  int act_dim() const { return act_dim_; }
  bool learns_std() const { return learn_std_; }

  Eigen::Index bias_index(int i) const { return i; }
  Eigen::Index weight_index(int i, int j) const {
    return act_dim_ + Eigen::Index{i} * obs_dim_ + j;
  }
  Eigen::Index log_std_index(int i) const { return Eigen::Index{act_dim_} * (1 + obs_dim_) + i; }

  Vector mean(const ParamVector& theta, const Vector& s) const {
    Vector mu(act_dim_);
    for (int i = 0; i < act_dim_; ++i) mu[i] = mean_at(theta, s, i);
    return mu;
  }

  Vector sigma(const ParamVector& theta) const {
    Vector sg(act_dim_);
    for (int i = 0; i < act_dim_; ++i) sg[i] = sigma_at(theta, i);
    return sg;
  }

  double log_prob(const ParamVector& theta, const Vector& s, const Vector& a) const {
    double lp = 0.0;
    for (int i = 0; i < act_dim_; ++i) {
      const double sg = sigma_at(theta, i);
      const double z = (a[i] - mean_at(theta, s, i)) / sg;
      lp += -0.5 * z * z - std::log(sg) - 0.5 * std::log(2.0 * std::numbers::pi);
    }
    return lp;
  }

  /// Same gradient as derivatives().grad without building the Hessian.
  Vector grad_log_prob(const ParamVector& theta, const Vector& s, const Vector& a) const {
    check(theta, s);
    require(a.size() == act_dim_, "GaussianLinearPolicy: action dimension mismatch");
    Vector g = Vector::Zero(dim());
    for (int i = 0; i < act_dim_; ++i) {
      const double sg = sigma_at(theta, i);
      const double z = (a[i] - mean_at(theta, s, i)) / sg;
      g[bias_index(i)] += z / sg;
      for (int j = 0; j < obs_dim_; ++j) g[weight_index(i, j)] += z / sg * s[j];
      if (std_active(theta, i)) g[log_std_index(i)] += z * z - 1.0;
    }
    return g;
  }

  Matrix hess_log_prob(const ParamVector& theta, const Vector& s, const Vector& a) const {
    return derivatives(theta, s, a).hess;
  }

  LogProbDerivatives derivatives(const ParamVector& theta, const Vector& s, const Vector& a) const {
    check(theta, s);
    require(a.size() == act_dim_, "GaussianLinearPolicy: action dimension mismatch");
    const Vector mu = mean(theta, s);
    const Vector sg = sigma(theta);
    LogProbDerivatives d;
    d.grad = Vector::Zero(dim());
    d.hess = Matrix::Zero(dim(), dim());
    const Vector phi = features(s);
    std::vector<Eigen::Index> idx;
    for (int i = 0; i < act_dim_; ++i) {
      const double z = (a[i] - mu[i]) / sg[i];
      const double inv_var = 1.0 / (sg[i] * sg[i]);
      d.log_prob += -0.5 * z * z - std::log(sg[i]) - 0.5 * std::log(2.0 * std::numbers::pi);
      mean_indices(i, idx);
      for (int u = 0; u <= obs_dim_; ++u) {
        d.grad[idx[u]] += z / sg[i] * phi[u];
        for (int v = 0; v <= obs_dim_; ++v) d.hess(idx[u], idx[v]) -= inv_var * phi[u] * phi[v];
      }
      if (std_active(theta, i)) {
        const auto l = log_std_index(i);
        d.grad[l] += z * z - 1.0;
        d.hess(l, l) += -2.0 * z * z;
        for (int u = 0; u <= obs_dim_; ++u) {
          const double c = -2.0 * z / sg[i] * phi[u];
          d.hess(idx[u], l) += c;
          d.hess(l, idx[u]) += c;
        }
      }
    }
    return d;
  }

  /// Unclipped draw; clipping is the environment's job.
  Vector sample_action(const ParamVector& theta, const Vector& s, Rng& rng) const {
    check(theta, s);
    const Vector mu = mean(theta, s);
    const Vector sg = sigma(theta);
    Vector a(act_dim_);
    for (int i = 0; i < act_dim_; ++i) a[i] = mu[i] + sg[i] * standard_normal(rng);
    return a;
  }

  /// KL(pi_p(.|s) || pi_q(.|s)) for diagonal Gaussians.
  double kl_divergence(const ParamVector& theta_p, const ParamVector& theta_q,
                       const Vector& s) const {
    double kl = 0.0;
    for (int i = 0; i < act_dim_; ++i) {
      const double sp = sigma_at(theta_p, i), sq = sigma_at(theta_q, i);
      const double dm = mean_at(theta_p, s, i) - mean_at(theta_q, s, i);
      kl += std::log(sq / sp) + (sp * sp + dm * dm) / (2.0 * sq * sq) - 0.5;
    }
    return std::max(kl, 0.0);
  }

  /// Gradient of KL(pi_p || pi_q) w.r.t. theta_q.
  Vector kl_gradient(const ParamVector& theta_p, const ParamVector& theta_q,
                     const Vector& s) const {
    Vector g = Vector::Zero(dim());
    for (int i = 0; i < act_dim_; ++i) {
      const double sp = sigma_at(theta_p, i), sq = sigma_at(theta_q, i);
      const double var_q = sq * sq;
      const double dm = mean_at(theta_q, s, i) - mean_at(theta_p, s, i);
      g[bias_index(i)] += dm / var_q;
      for (int j = 0; j < obs_dim_; ++j) g[weight_index(i, j)] += dm / var_q * s[j];
      if (std_active(theta_q, i)) g[log_std_index(i)] += 1.0 - (sp * sp + dm * dm) / var_q;
    }
    return g;
  }

  /// Mean parameters ~ N(0, scale^2); log-std set to log(init_std).
  ParamVector initial_params(double scale, double init_std, Rng& rng) const {
    ParamVector theta = ParamVector::Zero(dim());
    for (Eigen::Index k = 0; k < Eigen::Index{act_dim_} * (1 + obs_dim_); ++k)
      theta[k] = scale * standard_normal(rng);
    if (learn_std_)
      for (int i = 0; i < act_dim_; ++i) theta[log_std_index(i)] = std::log(init_std);
    return theta;
  }

 private:
  static constexpr double kLogSigmaMin = -6.907755278982137;  // log(1e-3)

  double mean_at(const ParamVector& theta, const Vector& s, int i) const {
    double m = theta[bias_index(i)];
    for (int j = 0; j < obs_dim_; ++j) m += theta[weight_index(i, j)] * s[j];
    return m;
  }

  double sigma_at(const ParamVector& theta, int i) const {
    return learn_std_ ? std::exp(std::max(theta[log_std_index(i)], kLogSigmaMin)) : fixed_sigma_;
  }

  bool std_active(const ParamVector& theta, int i) const {
    return learn_std_ && theta[log_std_index(i)] >= kLogSigmaMin;
  }

  Vector features(const Vector& s) const {
    Vector phi(obs_dim_ + 1);
    phi[0] = 1.0;
    phi.tail(obs_dim_) = s;
    return phi;
  }

  /// Parameter indices of action i's bias and weights, in feature order.
  void mean_indices(int i, std::vector<Eigen::Index>& idx) const {
    idx.resize(static_cast<std::size_t>(obs_dim_ + 1));
    idx[0] = bias_index(i);
    for (int j = 0; j < obs_dim_; ++j) idx[static_cast<std::size_t>(j + 1)] = weight_index(i, j);
  }

  void check(const ParamVector& theta, const Vector& s) const {
    require(theta.size() == dim(), "GaussianLinearPolicy: parameter dimension mismatch");
    require(s.size() == obs_dim_, "GaussianLinearPolicy: state dimension mismatch");
  }

  int obs_dim_;
  int act_dim_;
  bool learn_std_;
  double fixed_sigma_;
};

static_assert(Policy<SoftmaxTabularPolicy>);
static_assert(Policy<GaussianLinearPolicy>);

}  // namespace promp
