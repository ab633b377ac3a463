#pragma once

// The enumeration-backed oracle suite: every identity between the
// estimators and the exact quantities of small tabular tasks, each reported
// with its maximum error and tolerance.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

#include "promp/estimators.hpp"
#include "promp/lab/config.hpp"
#include "promp/lab/problem.hpp"
#include "promp/meta_opt.hpp"
#include "promp/rollout.hpp"

namespace promp::lab {

struct CheckResult {
  std::string name;
  double max_error = 0.0;
  double tolerance = 0.0;
  bool passed = true;
  std::string detail;  ///< failure message, if the check could not run
};

struct VerifyReport {
  std::vector<CheckResult> checks;

  bool passed() const {
    return std::all_of(checks.begin(), checks.end(), [](const CheckResult& c) { return c.passed; });
  }
};

inline double max_abs_diff(const Matrix& a, const Matrix& b) {
  return a.size() == 0 ? 0.0 : (a - b).cwiseAbs().maxCoeff();
}

/// The meta-objective with exact inner adaptation:
/// J^I(theta) = J(theta + alpha grad J(theta)), both terms fully enumerated.
inline double exact_meta_objective(const TabularTaskEnv& env, const SoftmaxTabularPolicy& policy,
                                   const ParamVector& theta, double alpha, double gamma) {
  const auto pre = enumerate(env, policy, theta, gamma);
  const ParamVector theta_prime = theta + alpha * exact_policy_gradient(pre, policy, theta, gamma);
  return exact_expected_return(enumerate(env, policy, theta_prime, gamma), gamma);
}

namespace detail {

struct VerifyInstance {
  TabularTaskEnv env;
  SoftmaxTabularPolicy policy;
  ParamVector theta;
};

inline std::vector<VerifyInstance> verify_instances(const ExperimentConfig& c) {
  std::vector<VerifyInstance> out;
  if (c.env.family == EnvFamily::tabular) {
    for (int i = 0; i < c.verify.instances; ++i) {
      EnvConfig e = c.env;
      e.seed = c.env.seed + static_cast<std::uint64_t>(i);
      const auto dist = make_tabular_distribution(e);
      const SoftmaxTabularPolicy policy(dist.model->n_states, dist.model->n_actions);
      out.push_back({dist.make_env(dist.task(0)), policy, initial_theta(c, policy, e.seed)});
    }
  } else {
    const auto dist = make_tabular_distribution(c.env);
    const SoftmaxTabularPolicy policy(dist.model->n_states, dist.model->n_actions);
    for (int t = 0; t < dist.num_tasks(); ++t)
      out.push_back({dist.make_env(dist.task(t)), policy,
                     initial_theta(c, policy, c.env.seed + static_cast<std::uint64_t>(t))});
  }
  return out;
}

/// Runs `body` for every instance, folding the returned error into one
/// check. Precondition failures mark the check failed with their message.
template <typename Body>
CheckResult run_check(const std::string& name, double tolerance,
                      const std::vector<VerifyInstance>& instances, Body&& body) {
  CheckResult r{name, 0.0, tolerance, true, ""};
  try {
    for (const auto& inst : instances) r.max_error = std::max(r.max_error, body(inst));
    r.passed = std::isfinite(r.max_error) && r.max_error <= tolerance;
  } catch (const EnumerationSizeError&) {
    throw;
  } catch (const Error& e) {
    r.passed = false;
    r.max_error = std::numeric_limits<double>::infinity();
    r.detail = e.what();
  }
  return r;
}

}  // namespace detail

inline VerifyReport run_verify(const ExperimentConfig& c) {
  if (!c.env.tabular_family())
    throw ConfigError("verify requires a tabular family (env.family = tabular|chain|bandit)");
  const double gamma = c.env.resolved_gamma();
  const double alpha = c.optimizer.alpha;
  const double h = c.verify.fd_step;
  VerifyReport report;
  try {
    const auto instances = detail::verify_instances(c);
    auto add = [&](const std::string& name, double tol, auto&& body) {
      report.checks.push_back(detail::run_check(name, tol, instances, body));
    };
    using Inst = detail::VerifyInstance;

    add("enumeration_mass", 1e-10, [&](const Inst& in) {
      const auto d = enumerate(in.env, in.policy, in.theta, gamma);
      double mass = 0.0;
      for (double w : d.weights) mass += w;
      return std::abs(mass - 1.0);
    });
    add("gradient_fd", 1e-6, [&](const Inst& in) {
      const auto d = enumerate(in.env, in.policy, in.theta, gamma);
      auto builder = [&](const ParamVector& x) { return enumerate(in.env, in.policy, x, gamma); };
      return max_abs_diff(exact_policy_gradient(d, in.policy, in.theta, gamma),
                          exact_gradient_fd(builder, in.theta, gamma, std::min(h, 1e-5)));
    });
    add("gradient_agreement", 1e-10, [&](const Inst& in) {
      const auto d = enumerate(in.env, in.policy, in.theta, gamma);
      const Vector exact = exact_policy_gradient(d, in.policy, in.theta, gamma);
      return std::max({max_abs_diff(pgt_gradient(d, in.policy, in.theta), exact),
                       max_abs_diff(dice_gradient(d, in.policy, in.theta), exact),
                       max_abs_diff(lvc_gradient(d, in.policy, in.theta), exact)});
    });
    add("hessian_decomposition", 1e-6, [&](const Inst& in) {
      const auto d = enumerate(in.env, in.policy, in.theta, gamma);
      auto builder = [&](const ParamVector& x) { return enumerate(in.env, in.policy, x, gamma); };
      return max_abs_diff(exact_hessian_terms(in.env, in.policy, in.theta, d).total(),
                          exact_hessian_fd(builder, in.theta, gamma, h));
    });
    add("h1_h2_symmetry", 1e-10, [&](const Inst& in) {
      const auto d = enumerate(in.env, in.policy, in.theta, gamma);
      const auto t = exact_hessian_terms(in.env, in.policy, in.theta, d);
      return std::max(max_abs_diff(t.h1, t.h1.transpose()), max_abs_diff(t.h2, t.h2.transpose()));
    });
    add("dice_unbiased", 1e-10, [&](const Inst& in) {
      const auto d = enumerate(in.env, in.policy, in.theta, gamma);
      return max_abs_diff(dice_hessian(d, in.policy, in.theta),
                          exact_hessian_terms(in.env, in.policy, in.theta, d).total());
    });
    add("lvc_bias_structure", 1e-9, [&](const Inst& in) {
      const auto d = enumerate(in.env, in.policy, in.theta, gamma);
      const auto t = exact_hessian_terms(in.env, in.policy, in.theta, d);
      const Matrix lvc = lvc_hessian(d, in.policy, in.theta);
      return std::max(max_abs_diff(lvc, t.h1 + t.h2),
                      max_abs_diff(lvc - t.total(), -(t.h12 + t.h12.transpose())));
    });
    add("maml_bias_structure", 1e-10, [&](const Inst& in) {
      const auto d = enumerate(in.env, in.policy, in.theta, gamma);
      return max_abs_diff(maml_hessian(d, in.policy, in.theta),
                          exact_hessian_terms(in.env, in.policy, in.theta, d).h2);
    });
    add("inner_update", 0.0, [&](const Inst& in) {
      const auto res = exact_adaptation(in.env, in.policy, in.theta, alpha, gamma);
      return max_abs_diff(res.theta_prime, in.theta + alpha * res.inner_gradient);
    });
    add("meta_gradient_fd", 1e-5, [&](const Inst& in) {
      const auto res = exact_adaptation(in.env, in.policy, in.theta, alpha, gamma);
      const auto pre = enumerate(in.env, in.policy, in.theta, gamma);
      const auto post = enumerate(in.env, in.policy, res.theta_prime, gamma);
      const auto mg = meta_gradient_I(pre, post, in.policy, in.theta, res);
      const double fh = std::min(h, 1e-5);
      Vector fd(in.theta.size());
      for (Eigen::Index i = 0; i < in.theta.size(); ++i) {
        ParamVector p = in.theta, m = in.theta;
        p[i] += fh;
        m[i] -= fh;
        fd[i] = (exact_meta_objective(in.env, in.policy, p, alpha, gamma) -
                 exact_meta_objective(in.env, in.policy, m, alpha, gamma)) /
                (2.0 * fh);
      }
      return max_abs_diff(mg.total, fd);
    });
    add("promp_lvc_identity", 1e-10, [&](const Inst& in) {
      Rng rng = make_stream(c.env.seed, {7});
      auto pre = sample_batch(in.env, in.policy, in.theta, TaskSpec{}, 20, gamma, rng);
      compute_advantages(pre, gamma);
      InnerUpdateOptions inner;
      inner.gradient_weighting = Weighting::advantages;
      inner.hessian = HessianTag::lvc;
      inner.hessian_weighting = Weighting::advantages;
      const auto adaptation = inner_update(pre, in.policy, in.theta, alpha, inner);
      auto post = sample_batch(in.env, in.policy, adaptation.theta_prime, TaskSpec{}, 20, gamma, rng);
      compute_advantages(post, gamma);
      const auto lvc = meta_gradient_I(pre, post, in.policy, in.theta, adaptation,
                                       {PreTerm::none, Weighting::advantages});
      PrompHyper hyper;
      hyper.alpha = alpha;
      hyper.eta = 0.0;
      hyper.epsilon = std::numeric_limits<double>::infinity();
      const Vector promp = promp_meta_gradient(pre, post, in.policy, in.theta, hyper);
      return max_abs_diff(promp, lvc.total);
    });
  } catch (const EnumerationSizeError& e) {
    throw ConfigError(std::string(e.what()) +
                      " (configuration too large to enumerate: reduce env.horizon, env.n_states or "
                      "env.n_actions, e.g. 3 states, 2 actions, horizon 3)");
  }
  return report;
}

inline void print_verify_report(std::ostream& os, const VerifyReport& r) {
  for (const auto& c : r.checks) {
    os << (c.passed ? "PASS " : "FAIL ") << c.name << "  max_error=" << c.max_error
       << "  tolerance=" << c.tolerance;
    if (!c.detail.empty()) os << "  (" << c.detail << ")";
    os << '\n';
  }
  os << (r.passed() ? "verify: all checks passed" : "verify: FAILED") << '\n';
}

}  // namespace promp::lab
