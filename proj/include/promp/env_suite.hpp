#pragma once

// Finite-horizon task distributions: the 1D and 2D point environments and a
// tabular meta-MDP family small enough for exact trajectory enumeration.

#include <algorithm>
#include <array>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <memory>
#include <string>
#include <variant>
#include <vector>

#include "promp/rng.hpp"
#include "promp/types.hpp"

namespace promp {

/// Identifies one task of a distribution. The payload is fully determined by
/// (distribution seed, task_id).
struct TaskSpec {
  int task_id = 0;
  /// goal position (1D), goal corner (2D) or reward table (tabular, S x A)
  std::variant<double, Eigen::Vector2d, Matrix> payload;
};

template <typename S>
struct Step {
  S next_state;
  double reward;
};

template <typename E>
concept Environment = requires(const E& e, const typename E::state_type& s,
                               const typename E::action_type& a, Rng& rng) {
  typename E::state_type;
  typename E::action_type;
  { e.reset(rng) } -> std::same_as<typename E::state_type>;
  { e.step(s, a, rng) } -> std::same_as<Step<typename E::state_type>>;
  { e.horizon() } -> std::convertible_to<int>;
};

template <typename D>
concept TaskDistribution = requires(const D& d, const TaskSpec& t, Rng& rng) {
  typename D::env_type;
  { d.sample_task(rng) } -> std::same_as<TaskSpec>;
  { d.make_env(t) } -> std::same_as<typename D::env_type>;
  { d.num_tasks() } -> std::convertible_to<int>;
};

namespace detail {

inline void require_finite_action(const Vector& a) {
  if (!a.allFinite()) throw PreconditionError("env_step: non-finite action component");
}

inline double clip(double v, double bound) { return std::clamp(v, -bound, bound); }

}  // namespace detail

// ---------------------------------------------------------------------------
// 1D point environment

/// A point on the real line that must reach a goal at +1 or -1.
/// x' = x + clip(a), r = -|x' - goal|.
struct Point1DEnv {
  using state_type = Vector;
  using action_type = Vector;

  double goal = 1.0;
  int horizon_steps = 100;
  double start_low = -0.5;
  double start_high = 0.5;
  double action_bound = 0.1;

  int horizon() const { return horizon_steps; }

  state_type reset(Rng& rng) const {
    Vector s(1);
    s[0] = start_low == start_high ? start_low
                                   : start_low + (start_high - start_low) * uniform01(rng);
    return s;
  }

  Step<state_type> step(const state_type& s, const action_type& a, Rng&) const {
    detail::require_finite_action(a);
    require(s.size() == 1 && a.size() == 1, "Point1DEnv: state and action must be 1-dimensional");
    Vector next(1);
    next[0] = s[0] + detail::clip(a[0], action_bound);
    return {next, -std::abs(next[0] - goal)};
  }
};

struct Point1DDistribution {
  using env_type = Point1DEnv;

  int horizon = 100;
  double start_low = -0.5;
  double start_high = 0.5;

  int num_tasks() const { return 2; }

  TaskSpec sample_task(Rng& rng) const { return task(static_cast<int>(rng() % 2)); }

  static TaskSpec task(int task_id) {
    require(task_id == 0 || task_id == 1, "Point1DDistribution: task_id must be 0 or 1");
    return {task_id, task_id == 0 ? -1.0 : 1.0};
  }

  env_type make_env(const TaskSpec& t) const {
    Point1DEnv env;
    env.goal = std::get<double>(t.payload);
    env.horizon_steps = horizon;
    env.start_low = start_low;
    env.start_high = start_high;
    return env;
  }
};

// ---------------------------------------------------------------------------
// 2D point environment

/// How rewards are paid inside the goal radius. Outside the radius the reward
/// is always 0.
enum class RadiusReward {
  negative_distance,  ///< -distance inside the radius
  radius_minus_distance,  ///< reward_radius - distance inside the radius
};

/// Point mass in the plane; one task per corner (+-c, +-c). Starts at the
/// origin and never terminates early.
struct Point2DEnv {
  using state_type = Vector;
  using action_type = Vector;

  Eigen::Vector2d goal{2.0, 2.0};
  double reward_radius = 1.0;
  int horizon_steps = 100;
  double action_bound = 0.1;
  RadiusReward reward_mode = RadiusReward::negative_distance;

  int horizon() const { return horizon_steps; }

  state_type reset(Rng&) const { return Vector::Zero(2); }

  double reward_at(const Vector& pos) const {
    const double d = (pos - goal).norm();
    if (d > reward_radius) return 0.0;
    return reward_mode == RadiusReward::negative_distance ? -d : reward_radius - d;
  }

  Step<state_type> step(const state_type& s, const action_type& a, Rng&) const {
    detail::require_finite_action(a);
    require(s.size() == 2 && a.size() == 2, "Point2DEnv: state and action must be 2-dimensional");
    Vector next(2);
    next[0] = s[0] + detail::clip(a[0], action_bound);
    next[1] = s[1] + detail::clip(a[1], action_bound);
    return {next, reward_at(next)};
  }
};

struct Point2DDistribution {
  using env_type = Point2DEnv;

  double corner = 2.0;
  double reward_radius = 1.0;
  int horizon = 100;
  RadiusReward reward_mode = RadiusReward::negative_distance;

  int num_tasks() const { return 4; }

  TaskSpec sample_task(Rng& rng) const { return task(static_cast<int>(rng() % 4)); }

  TaskSpec task(int task_id) const {
    require(task_id >= 0 && task_id < 4, "Point2DDistribution: task_id must be in [0, 4)");
    static constexpr std::array<std::array<double, 2>, 4> signs{
        {{1.0, 1.0}, {-1.0, 1.0}, {-1.0, -1.0}, {1.0, -1.0}}};
    const auto& sg = signs[static_cast<std::size_t>(task_id)];
    return {task_id, Eigen::Vector2d(sg[0] * corner, sg[1] * corner)};
  }

  env_type make_env(const TaskSpec& t) const {
    Point2DEnv env;
    env.goal = std::get<Eigen::Vector2d>(t.payload);
    env.reward_radius = reward_radius;
    env.horizon_steps = horizon;
    env.reward_mode = reward_mode;
    return env;
  }
};

// ---------------------------------------------------------------------------
// Tabular meta-MDP

inline constexpr int kMaxTabularStates = 5;
inline constexpr int kMaxTabularActions = 3;
inline constexpr int kMaxTabularHorizon = 5;

/// Dynamics shared by every task of a tabular family: p(s'|s,a) and p0.
struct TabularModel {
  int n_states = 1;
  int n_actions = 1;
  int horizon = 1;
  /// transitions[s * n_actions + a] is the distribution over s'
  std::vector<Vector> transitions;
  Vector initial;

  const Vector& next_distribution(int s, int a) const {
    return transitions[static_cast<std::size_t>(s * n_actions + a)];
  }

  void validate() const {
    require(n_states >= 1 && n_states <= kMaxTabularStates, "TabularModel: n_states out of range");
    require(n_actions >= 1 && n_actions <= kMaxTabularActions,
            "TabularModel: n_actions out of range");
    require(horizon >= 1 && horizon <= kMaxTabularHorizon, "TabularModel: horizon out of range");
    require(transitions.size() == static_cast<std::size_t>(n_states * n_actions),
            "TabularModel: wrong number of transition rows");
    auto check_row = [this](const Vector& row, const char* what) {
      require(row.size() == n_states, std::string(what) + " has wrong length");
      require((row.array() >= 0.0).all(), std::string(what) + " has negative entries");
      require(std::abs(row.sum() - 1.0) <= 1e-12, std::string(what) + " does not sum to 1");
    };
    for (const auto& row : transitions) check_row(row, "transition row");
    check_row(initial, "initial distribution");
  }
};

/// One task of a tabular family: shared dynamics plus a task reward table.
struct TabularTaskEnv {
  using state_type = int;
  using action_type = int;

  std::shared_ptr<const TabularModel> model;
  Matrix reward;  // n_states x n_actions

  int horizon() const { return model->horizon; }

  state_type reset(Rng& rng) const {
    return static_cast<int>(sample_categorical(model->initial, rng));
  }

  Step<state_type> step(const state_type& s, const action_type& a, Rng& rng) const {
    require(s >= 0 && s < model->n_states, "TabularTaskEnv: state out of range");
    require(a >= 0 && a < model->n_actions, "TabularTaskEnv: action out of range");
    const int next = static_cast<int>(sample_categorical(model->next_distribution(s, a), rng));
    return {next, reward(s, a)};
  }
};

namespace detail {

inline Vector dirichlet_ones(int n, Rng& rng) {
  Vector v(n);
  for (int i = 0; i < n; ++i) {
    double u = uniform01(rng);
    while (u <= 0.0) u = uniform01(rng);
    v[i] = -std::log(u);
  }
  return v / v.sum();
}

inline Vector normalized_exactly(Vector v) {
  v /= v.sum();
  // push the rounding residue into the largest entry so the row sums to 1
  Eigen::Index k;
  v.maxCoeff(&k);
  v[k] += 1.0 - v.sum();
  return v;
}

}  // namespace detail

/// A family of tabular tasks sharing (p, p0) and differing in reward tables.
/// Reward tables are either supplied explicitly or drawn uniformly in [0, 1]
/// from (seed, task_id).
struct TabularDistribution {
  using env_type = TabularTaskEnv;

  std::shared_ptr<const TabularModel> model;
  int n_tasks = 1;
  std::uint64_t seed = 0;
  std::vector<Matrix> fixed_rewards;  // optional, one per task

  int num_tasks() const { return n_tasks; }

  TaskSpec sample_task(Rng& rng) const {
    const int id = n_tasks == 1 ? 0 : static_cast<int>(rng() % static_cast<std::uint64_t>(n_tasks));
    return task(id);
  }

  TaskSpec task(int task_id) const {
    require(task_id >= 0 && task_id < n_tasks, "TabularDistribution: task_id out of range");
    if (!fixed_rewards.empty()) return {task_id, fixed_rewards[static_cast<std::size_t>(task_id)]};
    Rng rng = make_stream(seed, {1, static_cast<std::uint64_t>(task_id)});
    Matrix r(model->n_states, model->n_actions);
    for (int s = 0; s < model->n_states; ++s)
      for (int a = 0; a < model->n_actions; ++a) r(s, a) = uniform01(rng);
    return {task_id, r};
  }

  env_type make_env(const TaskSpec& t) const { return {model, std::get<Matrix>(t.payload)}; }

  /// Dirichlet(1,...,1) transition rows and initial distribution drawn from seed.
  static TabularDistribution random(int n_states, int n_actions, int horizon, int n_tasks,
                                    std::uint64_t seed) {
    auto m = std::make_shared<TabularModel>();
    m->n_states = n_states;
    m->n_actions = n_actions;
    m->horizon = horizon;
    Rng rng = make_stream(seed, {0});
    for (int i = 0; i < n_states * n_actions; ++i)
      m->transitions.push_back(detail::normalized_exactly(detail::dirichlet_ones(n_states, rng)));
    m->initial = detail::normalized_exactly(detail::dirichlet_ones(n_states, rng));
    m->validate();
    TabularDistribution d;
    d.model = std::move(m);
    d.n_tasks = n_tasks;
    d.seed = seed;
    return d;
  }

  /// Chain of n_states cells starting in the middle. Action 0 moves left,
  /// action 1 moves right; with probability `slip` the agent stays put.
  /// Task 0 pays 1 at the right end, task 1 pays 1 at the left end.
  static TabularDistribution chain(int n_states, int horizon, double slip = 0.1) {
    require(slip >= 0.0 && slip < 1.0, "chain: slip must be in [0, 1)");
    auto m = std::make_shared<TabularModel>();
    m->n_states = n_states;
    m->n_actions = 2;
    m->horizon = horizon;
    for (int s = 0; s < n_states; ++s) {
      for (int a = 0; a < 2; ++a) {
        Vector row = Vector::Zero(n_states);
        const int target = std::clamp(a == 0 ? s - 1 : s + 1, 0, n_states - 1);
        row[target] += 1.0 - slip;
        row[s] += slip;
        m->transitions.push_back(row);
      }
    }
    m->initial = Vector::Zero(n_states);
    m->initial[n_states / 2] = 1.0;
    m->validate();
    TabularDistribution d;
    d.model = std::move(m);
    d.n_tasks = 2;
    Matrix right = Matrix::Zero(n_states, 2);
    right.row(n_states - 1).setOnes();
    Matrix left = Matrix::Zero(n_states, 2);
    left.row(0).setOnes();
    d.fixed_rewards = {right, left};
    return d;
  }

  /// Single-state, single-step bandit with the given per-arm rewards.
  static TabularDistribution bandit(const std::vector<double>& rewards) {
    const Vector arm_rewards = Eigen::Map<const Vector>(rewards.data(), static_cast<Eigen::Index>(rewards.size()));
    auto m = std::make_shared<TabularModel>();
    m->n_states = 1;
    m->n_actions = static_cast<int>(arm_rewards.size());
    m->horizon = 1;
    for (int a = 0; a < m->n_actions; ++a) m->transitions.push_back(Vector::Ones(1));
    m->initial = Vector::Ones(1);
    m->validate();
    TabularDistribution d;
    d.model = std::move(m);
    d.n_tasks = 1;
    d.fixed_rewards = {Matrix(arm_rewards.transpose())};
    return d;
  }
};

static_assert(Environment<Point1DEnv>);
static_assert(Environment<Point2DEnv>);
static_assert(Environment<TabularTaskEnv>);
static_assert(TaskDistribution<Point1DDistribution>);
static_assert(TaskDistribution<Point2DDistribution>);
static_assert(TaskDistribution<TabularDistribution>);

}  // namespace promp
