#pragma once

// Experiment configuration: an INI document with a fixed key schema.
// Every key has a default; unknown sections or keys are rejected.

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdint>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <system_error>
#include <vector>

#include "promp/estimators.hpp"
#include "promp/meta_opt.hpp"
#include "promp/types.hpp"

namespace promp::lab {

class ConfigError : public Error {
 public:
  using Error::Error;
};

enum class EnvFamily { tabular, chain, bandit, point1d, point2d };
enum class EstimatorTag { promp, dice, lvc, maml, emaml, exact };
enum class PolicyFamily { automatic, softmax, gaussian };

struct EnvConfig {
  EnvFamily family = EnvFamily::chain;
  std::optional<int> horizon;   ///< unset: 3 (tabular), 5 (chain), 1 (bandit), 100 (point envs)
  std::optional<double> gamma;  ///< unset: 1.0 for tabular families, 0.99 for point envs
  std::uint64_t seed = 0;
  int n_states = 3;
  int n_actions = 2;
  int n_tasks = 4;
  double slip = 0.1;
  std::vector<double> arm_rewards{1.0, 0.0};
  RadiusReward radius_reward = RadiusReward::negative_distance;
  double corner = 2.0;
  double reward_radius = 1.0;
  double start_low = -0.5;
  double start_high = 0.5;

  bool tabular_family() const { return family != EnvFamily::point1d && family != EnvFamily::point2d; }

  int resolved_horizon() const {
    if (horizon) return *horizon;
    switch (family) {
      case EnvFamily::tabular: return 3;
      case EnvFamily::chain: return 5;
      case EnvFamily::bandit: return 1;
      default: return 100;
    }
  }

  double resolved_gamma() const { return gamma ? *gamma : (tabular_family() ? 1.0 : 0.99); }

  bool operator==(const EnvConfig&) const = default;
};

struct PolicyConfig {
  PolicyFamily family = PolicyFamily::automatic;  ///< must match the environment when explicit
  int hidden = 0;           ///< reserved for network policies; must be 0
  double init_scale = 0.0;  ///< std of the random initial parameters
  double init_std = 1.0;    ///< Gaussian policies: initial action std
  bool learn_std = true;    ///< Gaussian policies: log-std is a parameter
  std::vector<double> init_theta;  ///< explicit initial parameters (overrides init_scale)

  bool operator==(const PolicyConfig&) const = default;
};

struct EstimatorConfig {
  EstimatorTag tag = EstimatorTag::promp;
  PreTerm pre_term = PreTerm::batch;
  Weighting hessian_weighting = Weighting::returns;

  bool operator==(const EstimatorConfig&) const = default;
};

struct OptimizerConfig {
  double alpha = 0.01;
  double beta = 0.001;
  double epsilon = 0.3;
  double eta = 0.0005;
  int n_steps = 5;
  int tasks_per_iter = 10;
  int traj_per_task = 20;
  int adapt_steps = 1;

  bool operator==(const OptimizerConfig&) const = default;
};

struct RunConfig {
  int iterations = 100;
  std::vector<std::uint64_t> seeds{0};
  std::string output_dir = "runs/default";
  std::vector<double> reference;  ///< meta-optimum; enables the distance_to_optimum column

  bool operator==(const RunConfig&) const = default;
};

struct VarianceConfig {
  int k = 1000;
  int batch_size = 20;
  std::vector<EstimatorTag> estimators{EstimatorTag::dice, EstimatorTag::lvc};

  bool operator==(const VarianceConfig&) const = default;
};

struct VerifyConfig {
  int instances = 20;
  double fd_step = 1e-4;

  bool operator==(const VerifyConfig&) const = default;
};

struct ExperimentConfig {
  EnvConfig env;
  PolicyConfig policy;
  EstimatorConfig estimator;
  OptimizerConfig optimizer;
  RunConfig run;
  VarianceConfig variance;
  VerifyConfig verify;

  PrompHyper promp_hyper() const {
    PrompHyper h;
    h.alpha = optimizer.alpha;
    h.beta = optimizer.beta;
    h.epsilon = optimizer.epsilon;
    h.eta = optimizer.eta;
    h.n_steps = optimizer.n_steps;
    h.tasks_per_iter = optimizer.tasks_per_iter;
    h.traj_per_task = optimizer.traj_per_task;
    h.adapt_steps = optimizer.adapt_steps;
    return h;
  }

  VpgHyper vpg_hyper() const {
    VpgHyper h;
    h.alpha = optimizer.alpha;
    h.beta = optimizer.beta;
    h.tasks_per_iter = optimizer.tasks_per_iter;
    h.traj_per_task = optimizer.traj_per_task;
    h.pre_term = estimator.pre_term;
    h.hessian_weighting = estimator.hessian_weighting;
    return h;
  }

  bool operator==(const ExperimentConfig&) const = default;
};

// ---------------------------------------------------------------------------
// enum <-> text

namespace detail {

template <typename E>
struct EnumName {
  E value;
  const char* name;
};

inline constexpr EnumName<EnvFamily> kEnvFamilies[] = {{EnvFamily::tabular, "tabular"},
                                                       {EnvFamily::chain, "chain"},
                                                       {EnvFamily::bandit, "bandit"},
                                                       {EnvFamily::point1d, "point1d"},
                                                       {EnvFamily::point2d, "point2d"}};
inline constexpr EnumName<EstimatorTag> kEstimatorTags[] = {
    {EstimatorTag::promp, "promp"}, {EstimatorTag::dice, "dice"},   {EstimatorTag::lvc, "lvc"},
    {EstimatorTag::maml, "maml"},   {EstimatorTag::emaml, "emaml"}, {EstimatorTag::exact, "exact"}};
inline constexpr EnumName<PolicyFamily> kPolicyFamilies[] = {
    {PolicyFamily::automatic, "auto"}, {PolicyFamily::softmax, "softmax"}, {PolicyFamily::gaussian, "gaussian"}};
inline constexpr EnumName<PreTerm> kPreTerms[] = {
    {PreTerm::batch, "batch"}, {PreTerm::per_pair, "per_pair"}, {PreTerm::none, "none"}};
inline constexpr EnumName<Weighting> kWeightings[] = {{Weighting::returns, "returns"},
                                                      {Weighting::advantages, "advantages"}};
inline constexpr EnumName<RadiusReward> kRadiusRewards[] = {
    {RadiusReward::negative_distance, "negative_distance"},
    {RadiusReward::radius_minus_distance, "radius_minus_distance"}};

template <typename E, std::size_t N>
std::string enum_name(const EnumName<E> (&table)[N], E v) {
  for (const auto& e : table)
    if (e.value == v) return e.name;
  throw ConfigError("internal: unnamed enum value");
}

template <typename E, std::size_t N>
E enum_parse(const EnumName<E> (&table)[N], const std::string& text, const std::string& key) {
  std::string allowed;
  for (const auto& e : table) {
    if (text == e.name) return e.value;
    allowed += (allowed.empty() ? "" : "|") + std::string(e.name);
  }
  throw ConfigError("config key '" + key + "': invalid value '" + text + "' (expected " + allowed + ")");
}

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

/// Shortest decimal text that parses back to exactly the same double.
inline std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

template <typename T>
T parse_number(const std::string& text, const std::string& key) {
  const std::string t = trim(text);
  T v{};
  const auto res = std::from_chars(t.data(), t.data() + t.size(), v);
  if (res.ec != std::errc{} || res.ptr != t.data() + t.size() || t.empty())
    throw ConfigError("config key '" + key + "': cannot parse '" + text + "' as a number");
  return v;
}

inline bool parse_bool(const std::string& text, const std::string& key) {
  const std::string t = trim(text);
  if (t == "true" || t == "1" || t == "yes") return true;
  if (t == "false" || t == "0" || t == "no") return false;
  throw ConfigError("config key '" + key + "': expected true|false, got '" + text + "'");
}

inline std::string join_doubles(const std::vector<double>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? ", " : "") + format_double(v[i]);
  return out;
}

inline std::vector<double> parse_doubles(const std::string& text, const std::string& key) {
  std::vector<double> out;
  for (const auto& item : split_list(text)) out.push_back(parse_number<double>(item, key));
  return out;
}

}  // namespace detail

inline std::string to_string(EnvFamily f) { return detail::enum_name(detail::kEnvFamilies, f); }
inline std::string to_string(EstimatorTag t) { return detail::enum_name(detail::kEstimatorTags, t); }
inline EstimatorTag parse_estimator_tag(const std::string& s) {
  return detail::enum_parse(detail::kEstimatorTags, detail::trim(s), "estimator");
}

// ---------------------------------------------------------------------------
// validation

inline void validate(const ExperimentConfig& c) {
  auto check = [](bool ok, const std::string& what) {
    if (!ok) throw ConfigError("invalid configuration: " + what);
  };
  const auto& e = c.env;
  check(e.resolved_horizon() >= 1, "env.horizon must be >= 1");
  check(e.resolved_gamma() > 0.0 && e.resolved_gamma() <= 1.0, "env.gamma must be in (0, 1]");
  if (e.family == EnvFamily::tabular) {
    check(e.n_states >= 1 && e.n_states <= kMaxTabularStates, "env.n_states out of range");
    check(e.n_actions >= 1 && e.n_actions <= kMaxTabularActions, "env.n_actions out of range");
    check(e.resolved_horizon() <= kMaxTabularHorizon, "env.horizon exceeds the tabular limit");
    check(e.n_tasks >= 1, "env.n_tasks must be >= 1");
  }
  if (e.family == EnvFamily::chain) {
    check(e.n_states >= 2 && e.n_states <= kMaxTabularStates, "env.n_states out of range for chain");
    check(e.resolved_horizon() <= kMaxTabularHorizon, "env.horizon exceeds the tabular limit");
    check(e.slip >= 0.0 && e.slip < 1.0, "env.slip must be in [0, 1)");
  }
  if (e.family == EnvFamily::bandit) {
    check(e.arm_rewards.size() >= 1 && e.arm_rewards.size() <= static_cast<std::size_t>(kMaxTabularActions),
          "env.arm_rewards must list 1..3 arms");
    check(e.resolved_horizon() == 1, "env.horizon must be 1 for bandit");
  }
  if (e.family == EnvFamily::point1d) check(e.start_low <= e.start_high, "env.start_low > env.start_high");
  if (e.family == EnvFamily::point2d) {
    check(e.corner > 0.0, "env.corner must be > 0");
    check(e.reward_radius > 0.0, "env.reward_radius must be > 0");
  }
  if (c.policy.family == PolicyFamily::softmax)
    check(e.tabular_family(), "policy.family = softmax requires a tabular environment family");
  if (c.policy.family == PolicyFamily::gaussian)
    check(!e.tabular_family(), "policy.family = gaussian requires a point environment family");
  check(c.policy.hidden == 0, "policy.hidden is reserved and must be 0 (linear policies only)");
  check(c.policy.init_scale >= 0.0, "policy.init_scale must be >= 0");
  check(c.policy.init_std > 0.0, "policy.init_std must be > 0");
  const auto& o = c.optimizer;
  check(o.alpha >= 0.0, "optimizer.alpha must be >= 0");
  check(o.beta >= 0.0, "optimizer.beta must be >= 0");
  check(o.epsilon > 0.0 && (o.epsilon < 1.0 || std::isinf(o.epsilon)),
        "optimizer.epsilon must be in (0, 1), or inf to disable clipping");
  check(o.eta >= 0.0, "optimizer.eta must be >= 0");
  check(o.n_steps >= 1, "optimizer.n_steps must be >= 1");
  check(o.tasks_per_iter >= 1, "optimizer.tasks_per_iter must be >= 1");
  check(o.traj_per_task >= 1, "optimizer.traj_per_task must be >= 1");
  check(o.adapt_steps >= 1, "optimizer.adapt_steps must be >= 1");
  check(c.run.iterations >= 0, "run.iterations must be >= 0");
  check(!c.run.seeds.empty(), "run.seeds must list at least one seed");
  check(c.variance.k >= 2, "variance.k must be >= 2");
  check(c.variance.batch_size >= 1, "variance.batch_size must be >= 1");
  check(c.verify.instances >= 1, "verify.instances must be >= 1");
  check(c.verify.fd_step >= 1e-6 && c.verify.fd_step <= 1e-3, "verify.fd_step must be in [1e-6, 1e-3]");
}

// ---------------------------------------------------------------------------
// parse / serialize

namespace detail {

/// The schema: section -> permitted keys.
inline const std::vector<std::pair<std::string, std::set<std::string>>>& schema() {
  static const std::vector<std::pair<std::string, std::set<std::string>>> s{
      {"env",
       {"family", "horizon", "gamma", "seed", "n_states", "n_actions", "n_tasks", "slip", "arm_rewards",
        "radius_reward", "corner", "reward_radius", "start_low", "start_high"}},
      {"policy", {"family", "hidden", "init_scale", "init_std", "learn_std", "init_theta"}},
      {"estimator", {"tag", "pre_term", "hessian_weighting"}},
      {"optimizer",
       {"alpha", "beta", "epsilon", "eta", "n_steps", "tasks_per_iter", "traj_per_task", "adapt_steps"}},
      {"run", {"iterations", "seeds", "output_dir", "reference"}},
      {"variance", {"k", "batch_size", "estimators"}},
      {"verify", {"instances", "fd_step"}},
  };
  return s;
}

}  // namespace detail

/// Parses INI text. Unknown sections, unknown keys and top-level keys are errors.
inline ExperimentConfig parse_config(const std::string& text) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  std::istringstream in(text);
  try {
    pt::ini_parser::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(std::string("config syntax error: ") + e.what());
  }
  const auto& sch = detail::schema();
  for (const auto& [section, body] : tree) {
    auto it = std::find_if(sch.begin(), sch.end(), [&](const auto& s) { return s.first == section; });
    if (it == sch.end()) throw ConfigError("unknown config section or top-level key '" + section + "'");
    for (const auto& kv : body)
      if (!it->second.count(kv.first))
        throw ConfigError("unknown config key '" + section + "." + kv.first + "'");
  }

  ExperimentConfig c;
  auto get = [&](const std::string& path) -> std::optional<std::string> {
    if (auto v = tree.get_optional<std::string>(path)) return detail::trim(*v);
    return std::nullopt;
  };
  using detail::parse_number;
  if (auto v = get("env.family")) c.env.family = detail::enum_parse(detail::kEnvFamilies, *v, "env.family");
  if (auto v = get("env.horizon")) c.env.horizon = parse_number<int>(*v, "env.horizon");
  if (auto v = get("env.gamma")) c.env.gamma = parse_number<double>(*v, "env.gamma");
  if (auto v = get("env.seed")) c.env.seed = parse_number<std::uint64_t>(*v, "env.seed");
  if (auto v = get("env.n_states")) c.env.n_states = parse_number<int>(*v, "env.n_states");
  if (auto v = get("env.n_actions")) c.env.n_actions = parse_number<int>(*v, "env.n_actions");
  if (auto v = get("env.n_tasks")) c.env.n_tasks = parse_number<int>(*v, "env.n_tasks");
  if (auto v = get("env.slip")) c.env.slip = parse_number<double>(*v, "env.slip");
  if (auto v = get("env.arm_rewards")) c.env.arm_rewards = detail::parse_doubles(*v, "env.arm_rewards");
  if (auto v = get("env.radius_reward"))
    c.env.radius_reward = detail::enum_parse(detail::kRadiusRewards, *v, "env.radius_reward");
  if (auto v = get("env.corner")) c.env.corner = parse_number<double>(*v, "env.corner");
  if (auto v = get("env.reward_radius")) c.env.reward_radius = parse_number<double>(*v, "env.reward_radius");
  if (auto v = get("env.start_low")) c.env.start_low = parse_number<double>(*v, "env.start_low");
  if (auto v = get("env.start_high")) c.env.start_high = parse_number<double>(*v, "env.start_high");

  if (auto v = get("policy.family"))
    c.policy.family = detail::enum_parse(detail::kPolicyFamilies, *v, "policy.family");
  if (auto v = get("policy.hidden")) c.policy.hidden = parse_number<int>(*v, "policy.hidden");
  if (auto v = get("policy.init_scale")) c.policy.init_scale = parse_number<double>(*v, "policy.init_scale");
  if (auto v = get("policy.init_std")) c.policy.init_std = parse_number<double>(*v, "policy.init_std");
  if (auto v = get("policy.learn_std")) c.policy.learn_std = detail::parse_bool(*v, "policy.learn_std");
  if (auto v = get("policy.init_theta")) c.policy.init_theta = detail::parse_doubles(*v, "policy.init_theta");

  if (auto v = get("estimator.tag")) c.estimator.tag = detail::enum_parse(detail::kEstimatorTags, *v, "estimator.tag");
  if (auto v = get("estimator.pre_term"))
    c.estimator.pre_term = detail::enum_parse(detail::kPreTerms, *v, "estimator.pre_term");
  if (auto v = get("estimator.hessian_weighting"))
    c.estimator.hessian_weighting = detail::enum_parse(detail::kWeightings, *v, "estimator.hessian_weighting");

  if (auto v = get("optimizer.alpha")) c.optimizer.alpha = parse_number<double>(*v, "optimizer.alpha");
  if (auto v = get("optimizer.beta")) c.optimizer.beta = parse_number<double>(*v, "optimizer.beta");
  if (auto v = get("optimizer.epsilon")) c.optimizer.epsilon = parse_number<double>(*v, "optimizer.epsilon");
  if (auto v = get("optimizer.eta")) c.optimizer.eta = parse_number<double>(*v, "optimizer.eta");
  if (auto v = get("optimizer.n_steps")) c.optimizer.n_steps = parse_number<int>(*v, "optimizer.n_steps");
  if (auto v = get("optimizer.tasks_per_iter"))
    c.optimizer.tasks_per_iter = parse_number<int>(*v, "optimizer.tasks_per_iter");
  if (auto v = get("optimizer.traj_per_task"))
    c.optimizer.traj_per_task = parse_number<int>(*v, "optimizer.traj_per_task");
  if (auto v = get("optimizer.adapt_steps")) c.optimizer.adapt_steps = parse_number<int>(*v, "optimizer.adapt_steps");

  if (auto v = get("run.iterations")) c.run.iterations = parse_number<int>(*v, "run.iterations");
  if (auto v = get("run.seeds")) {
    c.run.seeds.clear();
    for (const auto& s : detail::split_list(*v)) c.run.seeds.push_back(parse_number<std::uint64_t>(s, "run.seeds"));
  }
  if (auto v = get("run.output_dir")) c.run.output_dir = *v;
  if (auto v = get("run.reference")) c.run.reference = detail::parse_doubles(*v, "run.reference");

  if (auto v = get("variance.k")) c.variance.k = parse_number<int>(*v, "variance.k");
  if (auto v = get("variance.batch_size")) c.variance.batch_size = parse_number<int>(*v, "variance.batch_size");
  if (auto v = get("variance.estimators")) {
    c.variance.estimators.clear();
    for (const auto& s : detail::split_list(*v))
      c.variance.estimators.push_back(detail::enum_parse(detail::kEstimatorTags, s, "variance.estimators"));
  }
  if (auto v = get("verify.instances")) c.verify.instances = parse_number<int>(*v, "verify.instances");
  if (auto v = get("verify.fd_step")) c.verify.fd_step = parse_number<double>(*v, "verify.fd_step");

  validate(c);
  return c;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    return parse_config(ss.str());
  } catch (const ConfigError& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

/// Canonical INI text: every key written explicitly, in schema order. Optional
/// keys that are unset are omitted. parse_config(serialize_config(c)) == c.
inline std::string serialize_config(const ExperimentConfig& c) {
  using detail::format_double;
  std::ostringstream os;
  os << "[env]\n"
     << "family = " << to_string(c.env.family) << "\n";
  if (c.env.horizon) os << "horizon = " << *c.env.horizon << "\n";
  if (c.env.gamma) os << "gamma = " << format_double(*c.env.gamma) << "\n";
  os << "seed = " << c.env.seed << "\n"
     << "n_states = " << c.env.n_states << "\n"
     << "n_actions = " << c.env.n_actions << "\n"
     << "n_tasks = " << c.env.n_tasks << "\n"
     << "slip = " << format_double(c.env.slip) << "\n"
     << "arm_rewards = " << detail::join_doubles(c.env.arm_rewards) << "\n"
     << "radius_reward = " << detail::enum_name(detail::kRadiusRewards, c.env.radius_reward) << "\n"
     << "corner = " << format_double(c.env.corner) << "\n"
     << "reward_radius = " << format_double(c.env.reward_radius) << "\n"
     << "start_low = " << format_double(c.env.start_low) << "\n"
     << "start_high = " << format_double(c.env.start_high) << "\n\n";
  os << "[policy]\n"
     << "family = " << detail::enum_name(detail::kPolicyFamilies, c.policy.family) << "\n"
     << "hidden = " << c.policy.hidden << "\n"
     << "init_scale = " << format_double(c.policy.init_scale) << "\n"
     << "init_std = " << format_double(c.policy.init_std) << "\n"
     << "learn_std = " << (c.policy.learn_std ? "true" : "false") << "\n";
  if (!c.policy.init_theta.empty()) os << "init_theta = " << detail::join_doubles(c.policy.init_theta) << "\n";
  os << "\n[estimator]\n"
     << "tag = " << to_string(c.estimator.tag) << "\n"
     << "pre_term = " << detail::enum_name(detail::kPreTerms, c.estimator.pre_term) << "\n"
     << "hessian_weighting = " << detail::enum_name(detail::kWeightings, c.estimator.hessian_weighting) << "\n\n";
  os << "[optimizer]\n"
     << "alpha = " << format_double(c.optimizer.alpha) << "\n"
     << "beta = " << format_double(c.optimizer.beta) << "\n"
     << "epsilon = " << format_double(c.optimizer.epsilon) << "\n"
     << "eta = " << format_double(c.optimizer.eta) << "\n"
     << "n_steps = " << c.optimizer.n_steps << "\n"
     << "tasks_per_iter = " << c.optimizer.tasks_per_iter << "\n"
     << "traj_per_task = " << c.optimizer.traj_per_task << "\n"
     << "adapt_steps = " << c.optimizer.adapt_steps << "\n\n";
  os << "[run]\n"
     << "iterations = " << c.run.iterations << "\n"
     << "seeds = ";
  for (std::size_t i = 0; i < c.run.seeds.size(); ++i) os << (i ? ", " : "") << c.run.seeds[i];
  os << "\n"
     << "output_dir = " << c.run.output_dir << "\n";
  if (!c.run.reference.empty()) os << "reference = " << detail::join_doubles(c.run.reference) << "\n";
  os << "\n[variance]\n"
     << "k = " << c.variance.k << "\n"
     << "batch_size = " << c.variance.batch_size << "\n"
     << "estimators = ";
  for (std::size_t i = 0; i < c.variance.estimators.size(); ++i)
    os << (i ? ", " : "") << to_string(c.variance.estimators[i]);
  os << "\n\n[verify]\n"
     << "instances = " << c.verify.instances << "\n"
     << "fd_step = " << format_double(c.verify.fd_step) << "\n";
  return os.str();
}

/// 64-bit FNV-1a of the canonical serialization, as 16 hex digits.
inline std::string config_hash(const ExperimentConfig& c) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char ch : serialize_config(c)) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace promp::lab
