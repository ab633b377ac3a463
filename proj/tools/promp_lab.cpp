// promp-lab: command-line front end of the meta-policy-gradient lab.
//
//   promp-lab verify   --config cfg.ini [--seed N] [--out DIR] [--force]
//   promp-lab variance --config cfg.ini [--seed N] [--out DIR] [--force] [--k K]
//   promp-lab train    --config cfg.ini [--seed N] [--out DIR] [--force]
//
// Exit status: 0 success, 1 failed checks, 2 configuration or usage error,
// 3 runtime failure (divergence, I/O).

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <string>

#include "promp/promp.hpp"

namespace {

namespace fs = std::filesystem;
using namespace promp;
using namespace promp::lab;

struct CommonOptions {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  bool force = false;
};

void add_common(CLI::App* cmd, CommonOptions& o) {
  cmd->add_option("--config", o.config, "experiment configuration (INI)")->required()->check(CLI::ExistingFile);
  cmd->add_option("--seed", o.seed, "seed (overrides run.seeds)");
  cmd->add_option("--out", o.out, "output directory (overrides run.output_dir)");
  cmd->add_flag("--force", o.force, "overwrite an existing output directory");
}

/// Creates `dir` for a single-file report, refusing an existing directory
/// without --force.
fs::path prepare_report_dir(const std::string& dir, bool force) {
  const fs::path p(dir);
  if (fs::exists(p) && !force)
    throw Error("output directory '" + p.string() + "' already exists (pass --force to overwrite)");
  fs::create_directories(p);
  return p;
}

void write_json(const fs::path& file, const nlohmann::json& j) {
  std::ofstream out(file, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open '" + file.string() + "' for writing");
  out << j.dump(2) << '\n';
  if (!out) throw Error("failed writing '" + file.string() + "'");
}

int cmd_verify(const CommonOptions& o) {
  ExperimentConfig c = load_config(o.config);
  if (o.seed) c.env.seed = *o.seed;
  const VerifyReport r = run_verify(c);
  print_verify_report(std::cout, r);
  if (o.out) {
    nlohmann::json j = nlohmann::json::array();
    for (const auto& ch : r.checks)
      j.push_back({{"name", ch.name}, {"max_error", std::isfinite(ch.max_error) ? nlohmann::json(ch.max_error) : nlohmann::json("inf")},
                   {"tolerance", ch.tolerance}, {"passed", ch.passed}, {"detail", ch.detail}});
    write_json(prepare_report_dir(*o.out, o.force) / "verify.json", {{"passed", r.passed()}, {"checks", j}});
  }
  return r.passed() ? 0 : 1;
}

int cmd_variance(const CommonOptions& o, std::optional<int> k) {
  ExperimentConfig c = load_config(o.config);
  if (k) c.variance.k = *k;
  validate(c);
  const std::uint64_t seed = o.seed ? *o.seed : c.run.seeds.front();
  const auto reports = run_variance(c, c.variance.k, seed);
  std::cout << std::left << std::setw(10) << "estimator" << std::setw(20) << "aggregate_relstd"
            << "norm_relstd\n";
  for (const auto& r : reports)
    std::cout << std::setw(10) << r.estimator << std::setw(20) << r.aggregate_relstd << r.norm_relstd << '\n';
  nlohmann::json j;
  j["k"] = c.variance.k;
  j["seed"] = seed;
  j["reports"] = nlohmann::json::array();
  for (const auto& r : reports) j["reports"].push_back(to_json(r));
  const VarianceReport* dice = nullptr;
  const VarianceReport* lvc = nullptr;
  for (const auto& r : reports) {
    if (r.estimator == "dice") dice = &r;
    if (r.estimator == "lvc") lvc = &r;
  }
  if (dice && lvc) {
    const double ratio = dice->aggregate_relstd / lvc->aggregate_relstd;
    std::cout << "relstd ratio dice/lvc = " << ratio << '\n';
    j["dice_over_lvc"] = ratio;
  }
  if (o.out) write_json(prepare_report_dir(*o.out, o.force) / "variance.json", j);
  return 0;
}

int cmd_train(const CommonOptions& o) {
  ExperimentConfig c = load_config(o.config);
  if (o.seed) c.run.seeds = {*o.seed};
  const std::string out = o.out ? *o.out : c.run.output_dir;
  const auto result = run_train(c, out, o.force);
  for (std::size_t i = 0; i < result.runs.size(); ++i) {
    const auto& recs = result.runs[i].records;
    std::cout << "seed " << result.runs[i].seed << ": " << recs.size() << " iterations";
    if (!recs.empty())
      std::cout << ", final pre_return " << recs.back().pre_return << ", post_return " << recs.back().post_return;
    std::cout << " -> " << result.files[i] << '\n';
  }
  std::cout << "manifest -> " << result.manifest << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Meta-policy-gradient estimator lab"};
  app.require_subcommand(1);
  CommonOptions verify_opts, variance_opts, train_opts;
  std::optional<int> k;
  auto* verify = app.add_subcommand("verify", "run the enumeration oracle suite");
  add_common(verify, verify_opts);
  auto* variance = app.add_subcommand("variance", "meta-gradient variance study");
  add_common(variance, variance_opts);
  variance->add_option("--k", k, "number of repetitions (overrides variance.k)");
  auto* train = app.add_subcommand("train", "train and write learning curves");
  add_common(train, train_opts);
  CLI11_PARSE(app, argc, argv);

  try {
    if (verify->parsed()) return cmd_verify(verify_opts);
    if (variance->parsed()) return cmd_variance(variance_opts, k);
    return cmd_train(train_opts);
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return 2;
  } catch (const PreconditionError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  }
}
