#pragma once

// The `train` command: one training run per configured seed, one curve file
// per seed, and a manifest written once all seeds have finished.

#include <nlohmann/json.hpp>

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "promp/lab/config.hpp"
#include "promp/lab/curves.hpp"
#include "promp/lab/problem.hpp"
#include "promp/meta_opt.hpp"

namespace promp::lab {

struct SeedRun {
  std::uint64_t seed = 0;
  std::vector<IterationRecord> records;
  ParamVector final_theta;
};

/// Runs the configured optimizer for one seed.
inline SeedRun train_seed(const ExperimentConfig& c, std::uint64_t seed) {
  return with_problem(c, [&](const auto& dist, const auto& policy) {
    RunOptions run;
    run.iterations = c.run.iterations;
    run.seed = seed;
    run.gamma = c.env.resolved_gamma();
    if (!c.run.reference.empty()) {
      if (static_cast<Eigen::Index>(c.run.reference.size()) != policy.dim())
        throw ConfigError("run.reference has " + std::to_string(c.run.reference.size()) +
                          " entries; the policy has " + std::to_string(policy.dim()) + " parameters");
      run.reference = Eigen::Map<const ParamVector>(c.run.reference.data(), policy.dim());
    }
    const ParamVector theta0 = initial_theta(c, policy, seed);
    TrainResult result;
    switch (c.estimator.tag) {
      case EstimatorTag::promp: result = promp_train(dist, policy, theta0, c.promp_hyper(), run); break;
      case EstimatorTag::dice:
        result = vpg_train(dist, policy, theta0, VpgEstimator::i_dice, c.vpg_hyper(), run);
        break;
      case EstimatorTag::lvc:
        result = vpg_train(dist, policy, theta0, VpgEstimator::i_lvc, c.vpg_hyper(), run);
        break;
      case EstimatorTag::maml:
        result = vpg_train(dist, policy, theta0, VpgEstimator::maml, c.vpg_hyper(), run);
        break;
      case EstimatorTag::emaml:
        result = vpg_train(dist, policy, theta0, VpgEstimator::emaml, c.vpg_hyper(), run);
        break;
      case EstimatorTag::exact:
        throw ConfigError("estimator.tag = exact is only available to `verify`");
    }
    return SeedRun{seed, std::move(result.records), std::move(result.final_theta)};
  });
}

inline std::string curve_file_name(std::uint64_t seed) { return "curve_seed" + std::to_string(seed) + ".csv"; }

struct TrainOutput {
  std::vector<std::string> files;  ///< curve files, in seed order
  std::string manifest;
  std::vector<SeedRun> runs;
};

/// Trains every seed and writes <out>/curve_seed<k>.csv plus <out>/manifest.json.
/// An existing output directory is refused unless `force` is set.
inline TrainOutput run_train(const ExperimentConfig& c, const std::string& out_dir, bool force) {
  namespace fs = std::filesystem;
  const fs::path out(out_dir);
  std::error_code ec;
  if (fs::exists(out, ec) && !force)
    throw Error("output directory '" + out.string() + "' already exists (resume is not supported; pass --force to overwrite)");
  fs::create_directories(out, ec);
  if (ec) throw Error("cannot create output directory '" + out.string() + "': " + ec.message());

  const auto start = std::chrono::steady_clock::now();
  TrainOutput output;
  for (auto seed : c.run.seeds) {
    SeedRun run = train_seed(c, seed);
    const fs::path file = out / curve_file_name(seed);
    export_curves(run.records, file.string(), !c.run.reference.empty());
    output.files.push_back(file.string());
    output.runs.push_back(std::move(run));
  }
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  nlohmann::json m;
  m["config_hash"] = config_hash(c);
  m["config"] = serialize_config(c);
  m["estimator"] = to_string(c.estimator.tag);
  m["env_family"] = to_string(c.env.family);
  m["seeds"] = c.run.seeds;
  std::vector<std::string> names;
  for (auto seed : c.run.seeds) names.push_back(curve_file_name(seed));
  m["files"] = names;
  nlohmann::json finals = nlohmann::json::array();
  for (const auto& r : output.runs)
    finals.push_back(std::vector<double>(r.final_theta.data(), r.final_theta.data() + r.final_theta.size()));
  m["final_theta"] = finals;
  m["wall_time_seconds"] = wall;
  const std::time_t now = std::time(nullptr);
  char stamp[32];
  std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
  m["timestamp_utc"] = stamp;

  const fs::path manifest = out / "manifest.json";
  std::ofstream mf(manifest, std::ios::binary | std::ios::trunc);
  if (!mf) throw Error("cannot open manifest for writing: " + manifest.string());
  mf << m.dump(2) << '\n';
  if (!mf) throw Error("failed writing manifest: " + manifest.string());
  output.manifest = manifest.string();
  return output;
}

}  // namespace promp::lab
