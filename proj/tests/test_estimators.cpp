#include <gtest/gtest.h>

#include <cmath>

#include "promp/estimators.hpp"
#include "test_util.hpp"

using namespace promp;
using promp::testing::constant_reward_env;
using promp::testing::two_state_env;

namespace {

double max_abs(const Matrix& m) { return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff(); }

Matrix mat2(double a, double b, double c, double d) {
  Matrix m(2, 2);
  m << a, b, c, d;
  return m;
}

struct Bandit {
  TabularDistribution dist = TabularDistribution::bandit({1.0, 0.0});
  TabularTaskEnv env = dist.make_env(dist.task(0));
  SoftmaxTabularPolicy policy{1, 2};
  ParamVector theta = ParamVector::Zero(2);
  EnumeratedDistribution enumerated() const { return enumerate(env, policy, theta); }
};

struct RandomInstance {
  TabularTaskEnv env;
  SoftmaxTabularPolicy policy{3, 2};
  ParamVector theta;
};

RandomInstance random_instance(std::uint64_t seed, int horizon = 3) {
  const auto d = TabularDistribution::random(3, 2, horizon, 1, seed);
  RandomInstance r{d.make_env(d.task(0)), SoftmaxTabularPolicy(3, 2), {}};
  Rng rng = make_stream(seed, {5});
  r.theta = r.policy.initial_params(1.0, rng);
  return r;
}

TrajectoryBatch<int, int> zero_reward_batch(const ParamVector& theta, int n = 5) {
  const auto env = constant_reward_env(0.0, 2, 2);
  Rng rng = make_stream(1);
  return sample_batch(env, SoftmaxTabularPolicy(1, 2), theta, TaskSpec{}, n, 1.0, rng);
}

}  // namespace

// ---------------------------------------------------------------------------
// gradients

TEST(PgtGradient, ZeroRewards) {
  const ParamVector theta = (ParamVector(2) << 0.3, -0.2).finished();
  EXPECT_EQ(pgt_gradient(zero_reward_batch(theta), SoftmaxTabularPolicy(1, 2), theta), Vector::Zero(2));
}

TEST(PgtGradient, BanditMonteCarloWithinFourStandardErrors) {
  Bandit b;
  Rng rng = make_stream(2);
  constexpr int kN = 100000;
  const auto batch = sample_batch(b.env, b.policy, b.theta, TaskSpec{}, kN, 1.0, rng);
  const Vector g = pgt_gradient(batch, b.policy, b.theta);
  // per-trajectory contributions are (+-0.5, -+0.5) or 0, so the SE is known in closed form
  Vector sq = Vector::Zero(2);
  for (const auto& tr : batch.trajectories) {
    const Vector gi = tr.rewards[0] * b.policy.grad_log_prob(b.theta, 0, tr.actions[0]);
    sq += (gi - g).cwiseProduct(gi - g);
  }
  const Vector se = (sq / (kN - 1.0) / kN).cwiseSqrt();
  EXPECT_LE(std::abs(g[0] - 0.25), 4 * se[0]);
  EXPECT_LE(std::abs(g[1] + 0.25), 4 * se[1]);
}

TEST(PgtGradient, SingleTrajectoryHandCheck) {
  const auto env = two_state_env(2);
  SoftmaxTabularPolicy p(2, 2);
  const ParamVector theta = (ParamVector(4) << 0.1, -0.4, 0.7, 0.2).finished();
  Rng rng = make_stream(3);
  const auto batch = sample_batch(env, p, theta, TaskSpec{}, 1, 1.0, rng);
  const auto& tr = batch.trajectories[0];
  const Vector expected = p.grad_log_prob(theta, tr.states[0], tr.actions[0]) * (tr.rewards[0] + tr.rewards[1]) +
                          p.grad_log_prob(theta, tr.states[1], tr.actions[1]) * tr.rewards[1];
  EXPECT_LT(max_abs(pgt_gradient(batch, p, theta) - expected), 1e-15);
}

TEST(Estimators, OffPolicyBatchRejected) {
  Bandit b;
  const auto dist = b.enumerated();
  const ParamVector other = (ParamVector(2) << 0.1, 0.0).finished();
  EXPECT_THROW(pgt_gradient(dist, b.policy, other), PreconditionError);
  EXPECT_THROW(dice_gradient(dist, b.policy, other), PreconditionError);
  EXPECT_THROW(lvc_gradient(dist, b.policy, other), PreconditionError);
  EXPECT_THROW(dice_hessian(dist, b.policy, other), PreconditionError);
  EXPECT_THROW(lvc_hessian(dist, b.policy, other), PreconditionError);
  EXPECT_THROW(maml_hessian(dist, b.policy, other), PreconditionError);
}

TEST(DiceObjective, EvaluatesToReturn) {
  Trajectory<int, int> tr;
  tr.states = {0, 0, 0, 0};
  tr.actions = {0, 0, 0};
  tr.logps = {-0.3, -1.0, -0.1};
  tr.rewards = {1, 2, 3};
  EXPECT_DOUBLE_EQ(dice_objective(tr), 6.0);
  EXPECT_DOUBLE_EQ(dice_objective(tr, 0.5), 2.75);
  EXPECT_EQ(dice_objective(Trajectory<int, int>{}), 0.0);
}

TEST(GradientAgreement, EnumerationWeightedFormsAreExact) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto in = random_instance(seed);
    for (double gamma : {1.0, 0.8}) {
      const auto d = enumerate(in.env, in.policy, in.theta, gamma);
      const Vector exact = exact_policy_gradient(d, in.policy, in.theta, gamma);
      EXPECT_LT(max_abs(pgt_gradient(d, in.policy, in.theta) - exact), 1e-10);
      EXPECT_LT(max_abs(dice_gradient(d, in.policy, in.theta) - exact), 1e-10);
      EXPECT_LT(max_abs(lvc_gradient(d, in.policy, in.theta) - exact), 1e-10);
    }
  }
}

// ---------------------------------------------------------------------------
// Hessians

TEST(ExactHessianTerms, BanditValues) {
  Bandit b;
  const auto t = exact_hessian_terms(b.env, b.policy, b.theta, b.enumerated());
  EXPECT_LT(max_abs(t.h1 - mat2(0.125, -0.125, -0.125, 0.125)), 1e-15);
  EXPECT_LT(max_abs(t.h2 - mat2(-0.125, 0.125, 0.125, -0.125)), 1e-15);
  EXPECT_EQ(max_abs(t.h12), 0.0);
}

TEST(ExactHessianTerms, MatchFiniteDifferenceHessian) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto in = random_instance(seed);
    const auto d = enumerate(in.env, in.policy, in.theta);
    const auto t = exact_hessian_terms(in.env, in.policy, in.theta, d);
    auto builder = [&](const ParamVector& x) { return enumerate(in.env, in.policy, x); };
    EXPECT_LT(max_abs(t.total() - exact_hessian_fd(builder, in.theta, 1.0, 1e-4)), 1e-6);
    EXPECT_LT(max_abs(t.h1 - t.h1.transpose()), 1e-10);
    EXPECT_LT(max_abs(t.h2 - t.h2.transpose()), 1e-10);
    EXPECT_LT(max_abs(t.total() - t.total().transpose()), 1e-10);
  }
}

TEST(ExactHessianTerms, DiscountedFiniteDifference) {
  const auto in = random_instance(42);
  const auto d = enumerate(in.env, in.policy, in.theta, 0.7);
  auto builder = [&](const ParamVector& x) { return enumerate(in.env, in.policy, x, 0.7); };
  EXPECT_LT(max_abs(exact_hessian_terms(in.env, in.policy, in.theta, d).total() -
                    exact_hessian_fd(builder, in.theta, 0.7, 1e-4)),
            1e-6);
}

TEST(DiceHessian, BanditAndZeroRewards) {
  Bandit b;
  EXPECT_LT(max_abs(dice_hessian(b.enumerated(), b.policy, b.theta)), 1e-15);
  const ParamVector theta = (ParamVector(2) << 0.3, -0.2).finished();
  EXPECT_EQ(max_abs(dice_hessian(zero_reward_batch(theta), SoftmaxTabularPolicy(1, 2), theta)), 0.0);
}

TEST(DiceHessian, EnumerationMatchesExactAndFiniteDifferences) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto in = random_instance(seed);
    const auto d = enumerate(in.env, in.policy, in.theta);
    const Matrix dice = dice_hessian(d, in.policy, in.theta);
    EXPECT_LT(max_abs(dice - exact_hessian_terms(in.env, in.policy, in.theta, d).total()), 1e-10);
    auto builder = [&](const ParamVector& x) { return enumerate(in.env, in.policy, x); };
    EXPECT_LT(max_abs(dice - exact_hessian_fd(builder, in.theta, 1.0, 1e-4)), 1e-6);
  }
}

TEST(LvcHessian, BanditAndZeroRewards) {
  Bandit b;
  EXPECT_LT(max_abs(lvc_hessian(b.enumerated(), b.policy, b.theta)), 1e-15);
  const ParamVector theta = (ParamVector(2) << 0.3, -0.2).finished();
  EXPECT_EQ(max_abs(lvc_hessian(zero_reward_batch(theta), SoftmaxTabularPolicy(1, 2), theta)), 0.0);
}

TEST(LvcHessian, BiasIsMinusH12Terms) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto in = random_instance(seed);
    const auto d = enumerate(in.env, in.policy, in.theta);
    const auto t = exact_hessian_terms(in.env, in.policy, in.theta, d);
    const Matrix lvc = lvc_hessian(d, in.policy, in.theta);
    EXPECT_LT(max_abs(lvc - (t.h1 + t.h2)), 1e-10);
    EXPECT_LT(max_abs((lvc - t.total()) + t.h12 + t.h12.transpose()), 1e-9);
  }
}

TEST(LvcHessian, LowerVarianceThanDiceOnChain) {
  const auto dist = TabularDistribution::chain(5, 5, 0.1);
  const auto env = dist.make_env(dist.task(0));
  SoftmaxTabularPolicy p(5, 2);
  Rng init = make_stream(1);
  const ParamVector theta = p.initial_params(0.5, init);
  constexpr int kBatches = 1000;
  const auto d = p.dim();
  Matrix dice_sum = Matrix::Zero(d, d), dice_sq = Matrix::Zero(d, d);
  Matrix lvc_sum = Matrix::Zero(d, d), lvc_sq = Matrix::Zero(d, d);
  Rng rng = make_stream(2);
  for (int k = 0; k < kBatches; ++k) {
    const auto batch = sample_batch(env, p, theta, TaskSpec{}, 20, 1.0, rng);
    const Matrix hd = dice_hessian(batch, p, theta);
    const Matrix hl = lvc_hessian(batch, p, theta);
    dice_sum += hd;
    dice_sq += hd.cwiseProduct(hd);
    lvc_sum += hl;
    lvc_sq += hl.cwiseProduct(hl);
  }
  auto mean_var = [&](const Matrix& s, const Matrix& sq) {
    return ((sq - s.cwiseProduct(s) / kBatches) / (kBatches - 1.0)).mean();
  };
  EXPECT_GT(mean_var(dice_sum, dice_sq), mean_var(lvc_sum, lvc_sq));
}

TEST(MamlHessian, BanditIsH2) {
  Bandit b;
  EXPECT_LT(max_abs(maml_hessian(b.enumerated(), b.policy, b.theta) - mat2(-0.125, 0.125, 0.125, -0.125)), 1e-15);
  const ParamVector theta = (ParamVector(2) << 0.3, -0.2).finished();
  EXPECT_EQ(max_abs(maml_hessian(zero_reward_batch(theta), SoftmaxTabularPolicy(1, 2), theta)), 0.0);
}

TEST(MamlHessian, MissingTermsAccounting) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto in = random_instance(seed);
    const auto d = enumerate(in.env, in.policy, in.theta);
    const auto t = exact_hessian_terms(in.env, in.policy, in.theta, d);
    const Matrix maml = maml_hessian(d, in.policy, in.theta);
    EXPECT_LT(max_abs(maml - t.h2), 1e-10);
    EXPECT_LT(max_abs((dice_hessian(d, in.policy, in.theta) - maml) - (t.h1 + t.h12 + t.h12.transpose())), 1e-8);
  }
}

TEST(HessianEstimate, DiceNeedsRawReturns) {
  Bandit b;
  auto d = b.enumerated();
  compute_advantages(d, 1.0);
  EXPECT_THROW(hessian_estimate(d, b.policy, b.theta, HessianTag::dice, Weighting::advantages), PreconditionError);
  EXPECT_THROW(hessian_estimate(d, b.policy, b.theta, HessianTag::exact), PreconditionError);
}

// ---------------------------------------------------------------------------
// inner update and Jacobian

TEST(InnerUpdate, ZeroStepIsIdentity) {
  const auto in = random_instance(3);
  Rng rng = make_stream(4);
  const auto batch = sample_batch(in.env, in.policy, in.theta, TaskSpec{}, 10, 1.0, rng);
  const auto res = inner_update(batch, in.policy, in.theta, 0.0);
  EXPECT_EQ(res.theta_prime, in.theta);
  EXPECT_EQ(res.jacobian, Matrix::Identity(6, 6));
}

TEST(InnerUpdate, ThetaPrimeIsExactStep) {
  const auto in = random_instance(5);
  Rng rng = make_stream(6);
  const auto batch = sample_batch(in.env, in.policy, in.theta, TaskSpec{}, 10, 1.0, rng);
  const auto res = inner_update(batch, in.policy, in.theta, 0.3);
  EXPECT_EQ(res.theta_prime, in.theta + 0.3 * res.inner_gradient);
}

TEST(InnerUpdate, LrAtSamplingPointEqualsAdvantageWeightedScore) {
  const auto in = random_instance(7);
  Rng rng = make_stream(8);
  auto batch = sample_batch(in.env, in.policy, in.theta, TaskSpec{}, 15, 1.0, rng);
  compute_advantages(batch, 1.0);
  InnerUpdateOptions lr;
  lr.objective = InnerObjective::lr;
  const auto a = inner_update(batch, in.policy, in.theta, 0.1, lr);
  EXPECT_EQ(a.hessian_tag, HessianTag::lr);
  const Vector adv = pgt_gradient(batch, in.policy, in.theta, Weighting::advantages);
  EXPECT_LT(max_abs(a.inner_gradient - adv), 1e-14);
  InnerUpdateOptions pgt;
  pgt.gradient_weighting = Weighting::advantages;
  EXPECT_LT(max_abs(inner_update(batch, in.policy, in.theta, 0.1, pgt).theta_prime - a.theta_prime), 1e-14);
}

TEST(InnerUpdate, LrGradientMatchesFiniteDifferencesOffPolicy) {
  const auto in = random_instance(9);
  Rng rng = make_stream(10);
  auto batch = sample_batch(in.env, in.policy, in.theta, TaskSpec{}, 15, 1.0, rng);
  compute_advantages(batch, 1.0);
  // J^LR(theta) = mean_n sum_t ratio_t A_t, differentiated numerically
  auto objective = [&](const ParamVector& x) {
    double j = 0.0;
    for (std::size_t n = 0; n < batch.size(); ++n) {
      const auto& tr = batch.trajectories[n];
      for (int t = 0; t < tr.horizon(); ++t)
        j += batch.weight(n) * std::exp(in.policy.log_prob(x, tr.states[t], tr.actions[t]) - tr.logps[t]) *
             batch.advantages[n][t];
    }
    return j;
  };
  const ParamVector theta = in.theta + 0.2 * Vector::Ones(6);
  const Vector g = lr_gradient(batch, in.policy, theta);
  const Matrix h = lr_hessian(batch, in.policy, theta);
  constexpr double eps = 1e-5;
  for (Eigen::Index i = 0; i < 6; ++i) {
    ParamVector p = theta, m = theta;
    p[i] += eps;
    m[i] -= eps;
    EXPECT_NEAR(g[i], (objective(p) - objective(m)) / (2 * eps), 1e-8);
    const Vector row = (lr_gradient(batch, in.policy, p) - lr_gradient(batch, in.policy, m)) / (2 * eps);
    EXPECT_LT(max_abs(h.row(i).transpose() - row), 1e-7);
  }
}

TEST(InnerUpdate, BanditExactStep) {
  Bandit b;
  const auto res = exact_adaptation(b.env, b.policy, b.theta, 0.01, 1.0);
  EXPECT_NEAR(res.theta_prime[0], 0.0025, 1e-15);
  EXPECT_NEAR(res.theta_prime[1], -0.0025, 1e-15);
}

TEST(InnerUpdate, RejectsNegativeStepAndEmptyBatch) {
  Bandit b;
  const auto d = b.enumerated();
  EXPECT_THROW(inner_update(d, b.policy, b.theta, -0.1), PreconditionError);
  EXPECT_THROW(inner_update(TrajectoryBatch<int, int>{}, b.policy, b.theta, 0.1), PreconditionError);
  EXPECT_THROW(update_jacobian(d, b.policy, b.theta, -1.0, HessianTag::lvc), PreconditionError);
}

TEST(UpdateJacobian, Examples) {
  const auto in = random_instance(11);
  const auto d = enumerate(in.env, in.policy, in.theta);
  EXPECT_EQ(update_jacobian(d, in.policy, in.theta, 0.0, HessianTag::dice), Matrix::Identity(6, 6));
  const ParamVector theta = (ParamVector(2) << 0.3, -0.2).finished();
  EXPECT_EQ(update_jacobian(zero_reward_batch(theta), SoftmaxTabularPolicy(1, 2), theta, 0.5, HessianTag::maml),
            Matrix::Identity(2, 2));
  Bandit b;
  EXPECT_LT(max_abs(update_jacobian_exact(b.env, b.policy, b.theta, 0.5, 1.0) - Matrix::Identity(2, 2)), 1e-15);
}

TEST(UpdateJacobian, IsSymmetrized) {
  const auto in = random_instance(12);
  Rng rng = make_stream(13);
  const auto batch = sample_batch(in.env, in.policy, in.theta, TaskSpec{}, 7, 1.0, rng);
  for (auto tag : {HessianTag::dice, HessianTag::lvc, HessianTag::maml}) {
    const Matrix j = update_jacobian(batch, in.policy, in.theta, 0.4, tag);
    EXPECT_EQ(j, j.transpose());
  }
}

// ---------------------------------------------------------------------------
// meta-gradients

namespace {

struct MetaCase {
  RandomInstance in;
  TrajectoryBatch<int, int> pre, post;
  AdaptationResult adaptation;
};

MetaCase sampled_case(std::uint64_t seed, double alpha, HessianTag tag = HessianTag::dice) {
  MetaCase c{random_instance(seed), {}, {}, {}};
  Rng rng = make_stream(seed, {21});
  c.pre = sample_batch(c.in.env, c.in.policy, c.in.theta, TaskSpec{}, 12, 1.0, rng);
  InnerUpdateOptions opt;
  opt.hessian = tag;
  c.adaptation = inner_update(c.pre, c.in.policy, c.in.theta, alpha, opt);
  c.post = sample_batch(c.in.env, c.in.policy, c.adaptation.theta_prime, TaskSpec{}, 12, 1.0, rng);
  return c;
}

}  // namespace

TEST(MetaGradientI, ZeroAlphaIsPlainGradient) {
  auto c = sampled_case(1, 0.0);
  const auto mg = meta_gradient_I(c.pre, c.post, c.in.policy, c.in.theta, c.adaptation);
  EXPECT_EQ(mg.j_pre, Vector::Zero(6));
  EXPECT_LT(max_abs(mg.total - pgt_gradient(c.post, c.in.policy, c.in.theta)), 1e-15);
}

TEST(MetaGradientI, ZeroPostRewardsGiveZero) {
  const auto in = random_instance(2);
  Rng rng = make_stream(3);
  const auto pre = sample_batch(in.env, in.policy, in.theta, TaskSpec{}, 10, 1.0, rng);
  const auto adaptation = inner_update(pre, in.policy, in.theta, 0.2);
  // same dynamics, zero reward task for the post-update batch
  TabularTaskEnv zero = in.env;
  zero.reward.setZero();
  const auto post = sample_batch(zero, in.policy, adaptation.theta_prime, TaskSpec{}, 10, 1.0, rng);
  for (auto pt : {PreTerm::batch, PreTerm::per_pair, PreTerm::none}) {
    const auto mg = meta_gradient_I(pre, post, in.policy, in.theta, adaptation, {pt, Weighting::returns});
    EXPECT_EQ(max_abs(mg.total), 0.0);
  }
}

TEST(MetaGradientI, TotalIsSumOfParts) {
  for (auto tag : {HessianTag::dice, HessianTag::lvc, HessianTag::maml}) {
    auto c = sampled_case(4, 0.3, tag);
    for (auto pt : {PreTerm::batch, PreTerm::per_pair, PreTerm::none}) {
      const auto mg = meta_gradient_I(c.pre, c.post, c.in.policy, c.in.theta, c.adaptation, {pt, Weighting::returns});
      EXPECT_LT(max_abs(mg.total - (mg.j_post + mg.j_pre)), 1e-12);
      EXPECT_EQ(mg.formulation, tag == HessianTag::lvc ? Formulation::LVC : Formulation::I);
      EXPECT_NEAR(mg.inner_outer_dot, mg.inner_norm * mg.outer_norm * mg.cos_delta, 1e-12);
    }
  }
}

TEST(MetaGradientI, PreTermPairings) {
  auto c = sampled_case(5, 0.3);
  const Vector outer = pgt_gradient(c.post, c.in.policy, c.adaptation.theta_prime);
  Vector mean_score = Vector::Zero(6), per_pair = Vector::Zero(6);
  for (const auto& tr : c.pre.trajectories) {
    Vector s = Vector::Zero(6);
    for (int t = 0; t < tr.horizon(); ++t) s += c.in.policy.grad_log_prob(c.in.theta, tr.states[t], tr.actions[t]);
    mean_score += s / 12.0;
    per_pair += s * (tr.total_return() * s.dot(outer)) / 12.0;
  }
  const auto batch = meta_gradient_I(c.pre, c.post, c.in.policy, c.in.theta, c.adaptation, {PreTerm::batch});
  EXPECT_LT(max_abs(batch.j_pre - 0.3 * mean_score * c.adaptation.inner_gradient.dot(outer)), 1e-12);
  const auto pair = meta_gradient_I(c.pre, c.post, c.in.policy, c.in.theta, c.adaptation, {PreTerm::per_pair});
  EXPECT_LT(max_abs(pair.j_pre - 0.3 * per_pair), 1e-12);
}

TEST(MetaGradientI, MatchesFiniteDifferencesOfExactMetaObjective) {
  const auto env = two_state_env(2);
  SoftmaxTabularPolicy p(2, 2);
  const double alpha = 0.1;
  auto meta_objective = [&](const ParamVector& x) {
    const ParamVector xp = x + alpha * exact_policy_gradient(enumerate(env, p, x), p, x, 1.0);
    return exact_expected_return(enumerate(env, p, xp), 1.0);
  };
  Rng rng = make_stream(14);
  for (int trial = 0; trial < 5; ++trial) {
    const ParamVector theta = p.initial_params(1.0, rng);
    const auto res = exact_adaptation(env, p, theta, alpha, 1.0);
    const auto mg = meta_gradient_I(enumerate(env, p, theta), enumerate(env, p, res.theta_prime), p, theta, res);
    EXPECT_LT(max_abs(mg.j_pre), 1e-12);  // the enumerated score has zero mean
    constexpr double h = 1e-5;
    for (Eigen::Index i = 0; i < 4; ++i) {
      ParamVector a = theta, b = theta;
      a[i] += h;
      b[i] -= h;
      EXPECT_NEAR(mg.total[i], (meta_objective(a) - meta_objective(b)) / (2 * h), 1e-5);
    }
  }
}

TEST(MetaGradientI, RejectsMismatchedBatches) {
  auto c = sampled_case(6, 0.3);
  EXPECT_THROW(meta_gradient_I(c.post, c.post, c.in.policy, c.in.theta, c.adaptation), PreconditionError);
  EXPECT_THROW(meta_gradient_I(c.pre, c.pre, c.in.policy, c.in.theta, c.adaptation), PreconditionError);
}

TEST(MetaGradientII, ZeroPostReturnsAndDegenerateCase) {
  const auto in = random_instance(7);
  Rng rng = make_stream(8);
  const auto pre = sample_batch(in.env, in.policy, in.theta, TaskSpec{}, 1, 1.0, rng);
  const auto adaptation = inner_update(pre, in.policy, in.theta, 0.25);
  TabularTaskEnv zero = in.env;
  zero.reward.setZero();
  const auto zpost = sample_batch(zero, in.policy, adaptation.theta_prime, TaskSpec{}, 1, 1.0, rng);
  EXPECT_EQ(max_abs(meta_gradient_II(pre, zpost, in.policy, in.theta, adaptation).j_pre), 0.0);

  const auto post = sample_batch(in.env, in.policy, adaptation.theta_prime, TaskSpec{}, 1, 1.0, rng);
  const auto mg = meta_gradient_II(pre, post, in.policy, in.theta, adaptation);
  const auto& tr = pre.trajectories[0];
  Vector score = Vector::Zero(6);
  for (int t = 0; t < tr.horizon(); ++t) score += in.policy.grad_log_prob(in.theta, tr.states[t], tr.actions[t]);
  EXPECT_LT(max_abs(mg.j_pre - 0.25 * score * post.trajectories[0].total_return()), 1e-14);
  EXPECT_EQ(mg.formulation, Formulation::II);
  EXPECT_LT(max_abs(mg.total - (mg.j_post + mg.j_pre)), 1e-12);
  EXPECT_EQ(mg.j_post, meta_gradient_I(pre, post, in.policy, in.theta, adaptation).j_post);
}

TEST(MetaGradientMaml, SharesPostTermAndDropsPreTerm) {
  auto c = sampled_case(9, 0.3, HessianTag::maml);
  const auto maml = meta_gradient_maml(c.pre, c.post, c.in.policy, c.in.theta, c.adaptation);
  const auto one = meta_gradient_I(c.pre, c.post, c.in.policy, c.in.theta, c.adaptation);
  EXPECT_EQ(maml.j_post, one.j_post);
  EXPECT_EQ(maml.j_pre, Vector::Zero(6));
  EXPECT_EQ(maml.total, maml.j_post);
  EXPECT_EQ(maml.formulation, Formulation::MAML);
}

TEST(MetaGradientMaml, ZeroAlphaAndZeroPreRewards) {
  auto c = sampled_case(10, 0.0, HessianTag::maml);
  EXPECT_LT(max_abs(meta_gradient_maml(c.pre, c.post, c.in.policy, c.in.theta, c.adaptation).total -
                    pgt_gradient(c.post, c.in.policy, c.in.theta)),
            1e-15);

  const auto in = random_instance(11);
  TabularTaskEnv zero = in.env;
  zero.reward.setZero();
  Rng rng = make_stream(12);
  const auto pre = sample_batch(zero, in.policy, in.theta, TaskSpec{}, 10, 1.0, rng);
  InnerUpdateOptions opt;
  opt.hessian = HessianTag::maml;
  const auto adaptation = inner_update(pre, in.policy, in.theta, 0.5, opt);
  EXPECT_EQ(adaptation.jacobian, Matrix::Identity(6, 6));
  const auto post = sample_batch(in.env, in.policy, adaptation.theta_prime, TaskSpec{}, 10, 1.0, rng);
  EXPECT_EQ(meta_gradient_maml(pre, post, in.policy, in.theta, adaptation).total,
            pgt_gradient(post, in.policy, adaptation.theta_prime));
}
