#pragma once

// Meta-gradient variance study: K independent (pre, post) batch pairs at a
// fixed parameter vector, one meta-gradient per estimator per repetition.

#include <nlohmann/json.hpp>

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "promp/estimators.hpp"
#include "promp/lab/config.hpp"
#include "promp/lab/problem.hpp"
#include "promp/rollout.hpp"

namespace promp::lab {

inline constexpr double kRelStdGuard = 1e-8;

struct VarianceReport {
  std::string estimator;
  int k = 0;
  Vector mean;
  Vector stddev;  ///< sample standard deviation (K - 1 denominator)
  Vector relstd;  ///< stddev / (|mean| + 1e-8)
  double aggregate_relstd = 0.0;  ///< mean of relstd over coordinates (headline number)
  double norm_relstd = 0.0;       ///< sqrt(mean |g_k - mean|^2) / (|mean| + 1e-8)
  Matrix samples;                 ///< K x d, one estimate per row
};

/// Fills the statistics of `r` from r.samples with a single-pass
/// (Welford) accumulation.
inline void summarize(VarianceReport& r) {
  const auto K = r.samples.rows();
  const auto d = r.samples.cols();
  require(K >= 2, "variance report needs K >= 2");
  Vector mean = Vector::Zero(d);
  Vector m2 = Vector::Zero(d);
  for (Eigen::Index k = 0; k < K; ++k) {
    const Vector x = r.samples.row(k).transpose();
    const Vector delta = x - mean;
    mean += delta / static_cast<double>(k + 1);
    m2 += delta.cwiseProduct(x - mean);
  }
  r.k = static_cast<int>(K);
  r.mean = mean;
  r.stddev = (m2 / static_cast<double>(K - 1)).cwiseSqrt();
  r.relstd = r.stddev.array() / (r.mean.array().abs() + kRelStdGuard);
  r.aggregate_relstd = d > 0 ? r.relstd.mean() : 0.0;
  r.norm_relstd = std::sqrt(m2.sum() / static_cast<double>(K - 1)) / (r.mean.norm() + kRelStdGuard);
}

/// Meta-gradient samples for each configured estimator at theta on task 0.
/// All estimators see the same pre-update batches (same streams); their
/// inner updates share the PGT gradient, so post-update batches coincide too.
inline std::vector<VarianceReport> run_variance(const ExperimentConfig& c, int K, std::uint64_t seed) {
  require(K >= 2, "run_variance: K must be >= 2");
  if (!c.env.tabular_family())
    throw ConfigError("variance study runs on tabular families (env.family = tabular|chain|bandit)");
  for (auto tag : c.variance.estimators)
    if (tag == EstimatorTag::promp || tag == EstimatorTag::exact)
      throw ConfigError("variance.estimators: '" + to_string(tag) + "' is not a sampled meta-gradient estimator");

  const auto dist = make_tabular_distribution(c.env);
  const SoftmaxTabularPolicy policy(dist.model->n_states, dist.model->n_actions);
  const ParamVector theta = initial_theta(c, policy, seed);
  const TaskSpec task = dist.task(0);
  const auto env = dist.make_env(task);
  const double gamma = c.env.resolved_gamma();
  const double alpha = c.optimizer.alpha;
  const int n = c.variance.batch_size;

  std::vector<VarianceReport> reports(c.variance.estimators.size());
  for (std::size_t e = 0; e < reports.size(); ++e) {
    reports[e].estimator = to_string(c.variance.estimators[e]);
    reports[e].samples.resize(K, policy.dim());
  }
  const MetaGradientOptions mopt{c.estimator.pre_term, Weighting::advantages};
  for (int k = 0; k < K; ++k) {
    Rng pre_rng = make_stream(seed, {static_cast<std::uint64_t>(k), 1});
    auto pre = sample_batch(env, policy, theta, task, n, gamma, pre_rng);
    compute_advantages(pre, gamma);
    for (std::size_t e = 0; e < reports.size(); ++e) {
      const auto tag = c.variance.estimators[e];
      InnerUpdateOptions inner;
      inner.gradient_weighting = Weighting::advantages;
      inner.hessian_weighting = c.estimator.hessian_weighting;
      inner.hessian = tag == EstimatorTag::dice ? HessianTag::dice
                      : tag == EstimatorTag::lvc ? HessianTag::lvc
                                                 : HessianTag::maml;
      if (tag == EstimatorTag::dice) inner.hessian_weighting = Weighting::returns;
      const auto adaptation = inner_update(pre, policy, theta, alpha, inner);
      Rng post_rng = make_stream(seed, {static_cast<std::uint64_t>(k), 2});
      auto post = sample_batch(env, policy, adaptation.theta_prime, task, n, gamma, post_rng);
      compute_advantages(post, gamma);
      MetaGradient mg;
      switch (tag) {
        case EstimatorTag::dice:
        case EstimatorTag::lvc: mg = meta_gradient_I(pre, post, policy, theta, adaptation, mopt); break;
        case EstimatorTag::maml:
          mg = meta_gradient_maml(pre, post, policy, theta, adaptation, Weighting::advantages);
          break;
        default: mg = meta_gradient_II(pre, post, policy, theta, adaptation, Weighting::advantages); break;
      }
      reports[e].samples.row(k) = mg.total.transpose();
    }
  }
  for (auto& r : reports) summarize(r);
  return reports;
}

inline nlohmann::json to_json(const VarianceReport& r) {
  auto vec = [](const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); };
  return {{"estimator", r.estimator},
          {"k", r.k},
          {"mean", vec(r.mean)},
          {"stddev", vec(r.stddev)},
          {"relstd", vec(r.relstd)},
          {"aggregate_relstd", r.aggregate_relstd},
          {"norm_relstd", r.norm_relstd}};
}

}  // namespace promp::lab
