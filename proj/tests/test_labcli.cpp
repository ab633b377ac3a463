#include <gtest/gtest.h>
#include <nlohmann/json.hpp>
#include <unistd.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include "promp/promp.hpp"

using namespace promp;
using namespace promp::lab;
namespace fs = std::filesystem;

namespace {

/// A fresh scratch directory per test, removed afterwards.
class ScratchDir {
 public:
  ScratchDir() {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    path_ = fs::temp_directory_path() /
            ("promp_lab_" + std::to_string(::getpid()) + "_" + info->test_suite_name() + "_" + info->name());
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~ScratchDir() { fs::remove_all(path_); }
  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& s) const { return path_ / s; }

 private:
  fs::path path_;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

IterationRecord record(int it, double pre, double post, double g, double kl, double dist) {
  IterationRecord r;
  r.iteration = it;
  r.pre_return = pre;
  r.post_return = post;
  r.grad_norm = g;
  r.mean_kl = kl;
  r.distance_to_optimum = dist;
  return r;
}

ExperimentConfig small_train_config() {
  ExperimentConfig c;
  c.env.family = EnvFamily::chain;
  c.env.n_states = 3;
  c.env.horizon = 3;
  c.optimizer.tasks_per_iter = 2;
  c.optimizer.traj_per_task = 5;
  c.optimizer.beta = 0.01;
  c.run.iterations = 3;
  return c;
}

}  // namespace

// ---------------------------------------------------------------------------
// configuration

TEST(Config, DefaultsRoundTrip) {
  const ExperimentConfig c;
  EXPECT_EQ(parse_config(serialize_config(c)), c);
  EXPECT_EQ(parse_config(""), c);
}

TEST(Config, NonDefaultRoundTrip) {
  ExperimentConfig c;
  c.env.family = EnvFamily::point2d;
  c.env.horizon = 57;
  c.env.gamma = 0.97;
  c.env.seed = 123456789012345ull;
  c.env.radius_reward = RadiusReward::radius_minus_distance;
  c.env.corner = 1.0 / 3.0;
  c.env.start_low = -0.1;
  c.policy.family = PolicyFamily::gaussian;
  c.policy.init_scale = 0.1;
  c.policy.init_std = 0.7;
  c.policy.learn_std = false;
  c.policy.init_theta = {0.1, -2.5e-7, 3.0, 0.2, 1e-300, -0.0};
  c.estimator.tag = EstimatorTag::emaml;
  c.estimator.pre_term = PreTerm::per_pair;
  c.estimator.hessian_weighting = Weighting::advantages;
  c.optimizer.alpha = 0.0123;
  c.optimizer.beta = 2e-5;
  c.optimizer.epsilon = std::numeric_limits<double>::infinity();
  c.optimizer.eta = 0.0;
  c.optimizer.adapt_steps = 3;
  c.run.seeds = {0, 7, 42};
  c.run.output_dir = "runs/some dir";
  c.run.reference = {0.0, -0.7};
  c.variance.estimators = {EstimatorTag::maml, EstimatorTag::emaml, EstimatorTag::lvc};
  c.verify.fd_step = 3e-5;
  const std::string text = serialize_config(c);
  const ExperimentConfig back = parse_config(text);
  EXPECT_EQ(back, c);
  EXPECT_EQ(serialize_config(back), text);
  EXPECT_EQ(config_hash(back), config_hash(c));
}

TEST(Config, RandomRoundTrips) {
  Rng rng = make_stream(17);
  for (int i = 0; i < 200; ++i) {
    ExperimentConfig c;
    c.env.family = static_cast<EnvFamily>(rng() % 3);
    c.env.slip = uniform01(rng) * 0.9;
    c.env.arm_rewards = {standard_normal(rng), standard_normal(rng)};
    c.optimizer.alpha = std::abs(standard_normal(rng)) * 1e-2;
    c.optimizer.beta = std::abs(standard_normal(rng));
    c.optimizer.eta = std::abs(standard_normal(rng)) * 1e-3;
    c.policy.init_scale = std::abs(standard_normal(rng));
    if (i % 2) c.env.gamma = 0.5 + 0.5 * uniform01(rng);
    EXPECT_EQ(parse_config(serialize_config(c)), c) << serialize_config(c);
  }
}

TEST(Config, UnknownKeysAndSectionsRejected) {
  EXPECT_THROW(parse_config("[env]\nfamliy = chain\n"), ConfigError);
  EXPECT_THROW(parse_config("[enviroment]\nfamily = chain\n"), ConfigError);
  EXPECT_THROW(parse_config("top_level = 1\n"), ConfigError);
}

TEST(Config, BadValuesRejected) {
  EXPECT_THROW(parse_config("[env]\nfamily = mujoco\n"), ConfigError);
  EXPECT_THROW(parse_config("[optimizer]\nalpha = fast\n"), ConfigError);
  EXPECT_THROW(parse_config("[optimizer]\nalpha = -0.1\n"), ConfigError);
  EXPECT_THROW(parse_config("[optimizer]\nepsilon = 1.5\n"), ConfigError);
  EXPECT_THROW(parse_config("[optimizer]\nn_steps = 2.5\n"), ConfigError);
  EXPECT_THROW(parse_config("[env]\nfamily = tabular\nhorizon = 9\n"), ConfigError);
  EXPECT_THROW(parse_config("[env]\nfamily = point1d\n[policy]\nfamily = softmax\n"), ConfigError);
  EXPECT_THROW(parse_config("[policy]\nhidden = 64\n"), ConfigError);
  EXPECT_THROW(parse_config("[run]\nseeds =\n"), ConfigError);
  EXPECT_THROW(parse_config("[verify]\nfd_step = 0.1\n"), ConfigError);
}

TEST(Config, FamilyDefaults) {
  EXPECT_EQ(parse_config("[env]\nfamily = point1d\n").env.resolved_horizon(), 100);
  EXPECT_DOUBLE_EQ(parse_config("[env]\nfamily = point2d\n").env.resolved_gamma(), 0.99);
  EXPECT_EQ(parse_config("[env]\nfamily = bandit\n").env.resolved_horizon(), 1);
  EXPECT_DOUBLE_EQ(parse_config("[env]\nfamily = tabular\n").env.resolved_gamma(), 1.0);
}

TEST(Config, LoadMissingFile) {
  EXPECT_THROW(load_config("/nonexistent/dir/cfg.ini"), ConfigError);
}

TEST(Config, HashChangesWithContent) {
  ExperimentConfig a, b;
  b.optimizer.alpha = 0.02;
  EXPECT_NE(config_hash(a), config_hash(b));
  EXPECT_EQ(config_hash(a).size(), 16u);
}

// ---------------------------------------------------------------------------
// curves

TEST(Curves, EmptyIsHeaderOnly) {
  std::ostringstream os;
  write_curves(os, {});
  EXPECT_EQ(os.str(), "iteration,pre_return,post_return,grad_norm,mean_kl\n");
}

TEST(Curves, ThreeIterationsFourLines) {
  std::ostringstream os;
  write_curves(os, {record(0, 1, 2, 3, 4, 0), record(1, 1, 2, 3, 4, 0), record(2, 1, 2, 3, 4, 0)});
  const std::string s = os.str();
  EXPECT_EQ(std::count(s.begin(), s.end(), '\n'), 4);
}

TEST(Curves, RoundTripIsExact) {
  ScratchDir dir;
  const std::vector<IterationRecord> recs{record(0, 0.1, 1.0 / 3.0, 12345.678901234567, 1e-300, 2.0 / 7.0),
                                          record(1, -0.0, -5e-324, 1.7976931348623157e308, 0.0, 0.7),
                                          record(2, std::nextafter(1.0, 2.0), -2.5, 3.0, 4.9e-5, 1.0)};
  const auto path = (dir / "c.csv").string();
  export_curves(recs, path, true);
  const auto t = read_curves(path);
  ASSERT_EQ(t.rows.size(), 3u);
  ASSERT_EQ(t.columns.size(), 6u);
  EXPECT_EQ(t.columns.back(), "distance_to_optimum");
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(t.rows[i][t.column("iteration")], recs[i].iteration);
    EXPECT_EQ(t.rows[i][t.column("pre_return")], recs[i].pre_return);
    EXPECT_EQ(t.rows[i][t.column("post_return")], recs[i].post_return);
    EXPECT_EQ(t.rows[i][t.column("grad_norm")], recs[i].grad_norm);
    EXPECT_EQ(t.rows[i][t.column("mean_kl")], recs[i].mean_kl);
    EXPECT_EQ(t.rows[i][t.column("distance_to_optimum")], recs[i].distance_to_optimum);
  }
}

TEST(Curves, SeventeenSignificantDigits) {
  EXPECT_EQ(format_sig17(0.1), "0.10000000000000001");
  EXPECT_EQ(format_sig17(2.0), "2");
}

TEST(Curves, ExportToMissingDirectoryFails) {
  EXPECT_THROW(export_curves({}, "/nonexistent/dir/c.csv"), Error);
}

// ---------------------------------------------------------------------------
// variance

TEST(Variance, WelfordMatchesTwoPass) {
  Rng rng = make_stream(3);
  VarianceReport r;
  r.samples = Matrix(500, 4);
  for (Eigen::Index i = 0; i < r.samples.size(); ++i) r.samples(i) = 1e3 + standard_normal(rng) * (1 + i % 4);
  summarize(r);
  const Vector mean = r.samples.colwise().mean().transpose();
  for (int j = 0; j < 4; ++j) {
    const double var = (r.samples.col(j).array() - mean[j]).square().sum() / 499.0;
    EXPECT_NEAR(r.mean[j], mean[j], 1e-12 * std::abs(mean[j]));
    EXPECT_NEAR(r.stddev[j], std::sqrt(var), 1e-12 * std::sqrt(var) + 1e-12);
    EXPECT_NEAR(r.relstd[j], std::sqrt(var) / (std::abs(mean[j]) + kRelStdGuard), 1e-12);
  }
  EXPECT_NEAR(r.aggregate_relstd, r.relstd.mean(), 1e-15);
}

TEST(Variance, MinimalKAndStoredSamples) {
  ExperimentConfig c;
  c.variance.estimators = {EstimatorTag::dice, EstimatorTag::lvc, EstimatorTag::maml, EstimatorTag::emaml};
  c.variance.batch_size = 5;
  const auto reports = run_variance(c, 2, 1);
  ASSERT_EQ(reports.size(), 4u);
  for (const auto& r : reports) {
    EXPECT_EQ(r.k, 2);
    EXPECT_EQ(r.samples.rows(), 2);
    EXPECT_TRUE(r.mean.allFinite() && r.stddev.allFinite() && r.relstd.allFinite());
    EXPECT_TRUE(std::isfinite(r.aggregate_relstd) && std::isfinite(r.norm_relstd));
  }
  EXPECT_EQ(reports[0].estimator, "dice");
  EXPECT_EQ(reports[3].estimator, "emaml");
}

TEST(Variance, ZeroRewardGivesZeroRelativeStd) {
  ExperimentConfig c;
  c.env.family = EnvFamily::bandit;
  c.env.arm_rewards = {0.0, 0.0};
  const auto reports = run_variance(c, 10, 2);
  for (const auto& r : reports) {
    EXPECT_EQ(r.mean, Vector::Zero(2));
    EXPECT_EQ(r.relstd, Vector::Zero(2));
    EXPECT_EQ(r.aggregate_relstd, 0.0);
  }
}

TEST(Variance, RejectsNonSampledEstimatorsAndPointEnvs) {
  ExperimentConfig c;
  c.variance.estimators = {EstimatorTag::promp};
  EXPECT_THROW(run_variance(c, 5, 0), ConfigError);
  ExperimentConfig p;
  p.env.family = EnvFamily::point1d;
  EXPECT_THROW(run_variance(p, 5, 0), ConfigError);
}

TEST(Variance, Deterministic) {
  ExperimentConfig c;
  c.variance.batch_size = 5;
  const auto a = run_variance(c, 20, 4);
  const auto b = run_variance(c, 20, 4);
  EXPECT_EQ(a[0].samples, b[0].samples);
  EXPECT_EQ(a[1].samples, b[1].samples);
  EXPECT_EQ(to_json(a[0]).dump(), to_json(b[0]).dump());
}

// ---------------------------------------------------------------------------
// verify

TEST(Verify, TabularSuitePasses) {
  ExperimentConfig c;
  c.env.family = EnvFamily::tabular;
  c.verify.instances = 4;
  for (double gamma : {1.0, 0.9}) {
    c.env.gamma = gamma;
    const auto r = run_verify(c);
    EXPECT_TRUE(r.passed());
    EXPECT_EQ(r.checks.size(), 11u);
    for (const auto& ch : r.checks) EXPECT_TRUE(ch.passed) << ch.name << " " << ch.max_error << " " << ch.detail;
  }
}

TEST(Verify, ChainAndBanditPass) {
  ExperimentConfig c;
  c.env.horizon = 3;
  EXPECT_TRUE(run_verify(c).passed());
  c.env.family = EnvFamily::bandit;
  c.env.horizon.reset();
  EXPECT_TRUE(run_verify(c).passed());
}

TEST(Verify, NegativeStepSurfacesAsNamedFailure) {
  ExperimentConfig c;
  c.env.family = EnvFamily::tabular;
  c.verify.instances = 2;
  c.optimizer.alpha = -0.01;
  const auto r = run_verify(c);
  EXPECT_FALSE(r.passed());
  bool found = false;
  for (const auto& ch : r.checks)
    if (ch.name == "inner_update") {
      found = true;
      EXPECT_FALSE(ch.passed);
      EXPECT_NE(ch.detail.find("alpha"), std::string::npos);
    }
  EXPECT_TRUE(found);
  std::ostringstream os;
  print_verify_report(os, r);
  EXPECT_NE(os.str().find("FAIL inner_update"), std::string::npos);
}

TEST(Verify, OversizedInstanceIsConfigError) {
  ExperimentConfig c;
  c.env.family = EnvFamily::tabular;
  c.env.n_states = 5;
  c.env.n_actions = 3;
  c.env.horizon = 5;
  EXPECT_THROW(run_verify(c), ConfigError);
  ExperimentConfig p;
  p.env.family = EnvFamily::point2d;
  EXPECT_THROW(run_verify(p), ConfigError);
}

// ---------------------------------------------------------------------------
// train

TEST(Train, TwoSeedsTwoFilesAndManifest) {
  ScratchDir dir;
  auto c = small_train_config();
  c.run.seeds = {0, 1};
  const auto out = run_train(c, (dir / "run").string(), false);
  ASSERT_EQ(out.files.size(), 2u);
  EXPECT_TRUE(fs::exists(dir / "run" / "curve_seed0.csv"));
  EXPECT_TRUE(fs::exists(dir / "run" / "curve_seed1.csv"));
  const auto m = nlohmann::json::parse(slurp(dir / "run" / "manifest.json"));
  EXPECT_EQ(m["config_hash"], config_hash(c));
  EXPECT_EQ(m["seeds"], nlohmann::json({0, 1}));
  EXPECT_EQ(m["files"], nlohmann::json({"curve_seed0.csv", "curve_seed1.csv"}));
  EXPECT_TRUE(m.contains("wall_time_seconds"));
  std::size_t entries = 0;
  for ([[maybe_unused]] const auto& e : fs::directory_iterator(dir / "run")) ++entries;
  EXPECT_EQ(entries, 3u);
  const auto t = read_curves(out.files[0]);
  EXPECT_EQ(t.rows.size(), 3u);
}

TEST(Train, RefusesExistingDirectoryWithoutForce) {
  ScratchDir dir;
  const auto c = small_train_config();
  fs::create_directories(dir / "run");
  EXPECT_THROW(run_train(c, (dir / "run").string(), false), Error);
  EXPECT_NO_THROW(run_train(c, (dir / "run").string(), true));
}

TEST(Train, ByteIdenticalCurvesForEveryEstimator) {
  ScratchDir dir;
  for (auto tag : {EstimatorTag::promp, EstimatorTag::dice, EstimatorTag::lvc, EstimatorTag::maml, EstimatorTag::emaml}) {
    auto c = small_train_config();
    c.estimator.tag = tag;
    const std::string name = to_string(tag);
    run_train(c, (dir / (name + "_a")).string(), false);
    run_train(c, (dir / (name + "_b")).string(), false);
    EXPECT_EQ(slurp(dir / (name + "_a") / "curve_seed0.csv"), slurp(dir / (name + "_b") / "curve_seed0.csv")) << name;
  }
}

TEST(Train, Point1DWithReferenceHasDistanceColumn) {
  ScratchDir dir;
  ExperimentConfig c;
  c.env.family = EnvFamily::point1d;
  c.env.horizon = 10;
  c.policy.learn_std = false;
  c.estimator.tag = EstimatorTag::dice;
  c.optimizer.tasks_per_iter = 2;
  c.optimizer.traj_per_task = 3;
  c.run.iterations = 2;
  c.run.reference = {0.0, -0.7};
  c.policy.init_theta = {-1.0, 0.5};
  const auto out = run_train(c, (dir / "run").string(), false);
  const auto t = read_curves(out.files[0]);
  const auto col = t.column("distance_to_optimum");
  EXPECT_NEAR(t.rows[0][col], std::hypot(1.0, 1.2), 1e-15);
  EXPECT_NO_THROW(t.column("post_return"));
}

TEST(Train, ExactTagAndBadReferenceRejected) {
  ScratchDir dir;
  auto c = small_train_config();
  c.estimator.tag = EstimatorTag::exact;
  EXPECT_THROW(run_train(c, (dir / "a").string(), false), ConfigError);
  c = small_train_config();
  c.run.reference = {1.0};
  EXPECT_THROW(run_train(c, (dir / "b").string(), false), ConfigError);
  c = small_train_config();
  c.policy.init_theta = {1.0, 2.0};
  EXPECT_THROW(run_train(c, (dir / "c").string(), false), ConfigError);
}

// ---------------------------------------------------------------------------
// command line

namespace {

int run_cli(const std::string& args) {
  const std::string cmd = std::string(PROMP_LAB_EXE) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST(Cli, ExitCodesAndOutputs) {
  ScratchDir dir;
  write_file(dir / "verify.ini", "[env]\nfamily = tabular\n[verify]\ninstances = 2\n");
  write_file(dir / "bad_alpha.ini", "[env]\nfamily = tabular\n[optimizer]\nalpha = -1\n");
  write_file(dir / "typo.ini", "[env]\nfamly = tabular\n");
  write_file(dir / "big.ini", "[env]\nfamily = tabular\nn_states = 5\nn_actions = 3\nhorizon = 5\n");
  write_file(dir / "train.ini",
             "[env]\nfamily = chain\nhorizon = 3\n[optimizer]\ntasks_per_iter = 2\ntraj_per_task = 4\n"
             "[run]\niterations = 2\nseeds = 0, 1\n");
  write_file(dir / "variance.ini", "[env]\nfamily = chain\n[variance]\nbatch_size = 4\n");
  const std::string d = dir.path().string();

  EXPECT_EQ(run_cli("verify --config " + d + "/verify.ini --out " + d + "/v"), 0);
  EXPECT_TRUE(fs::exists(dir / "v" / "verify.json"));
  EXPECT_EQ(run_cli("verify --config " + d + "/verify.ini --out " + d + "/v"), 3);
  EXPECT_EQ(run_cli("verify --config " + d + "/bad_alpha.ini"), 2);
  EXPECT_EQ(run_cli("verify --config " + d + "/typo.ini"), 2);
  EXPECT_EQ(run_cli("verify --config " + d + "/big.ini"), 2);
  EXPECT_NE(run_cli("verify --config " + d + "/missing.ini"), 0);

  EXPECT_EQ(run_cli("train --config " + d + "/train.ini --out " + d + "/t"), 0);
  EXPECT_TRUE(fs::exists(dir / "t" / "curve_seed0.csv"));
  EXPECT_TRUE(fs::exists(dir / "t" / "curve_seed1.csv"));
  EXPECT_TRUE(fs::exists(dir / "t" / "manifest.json"));
  EXPECT_EQ(run_cli("train --config " + d + "/train.ini --out " + d + "/t"), 3);
  EXPECT_EQ(run_cli("train --config " + d + "/train.ini --out " + d + "/t --force --seed 5"), 0);
  EXPECT_TRUE(fs::exists(dir / "t" / "curve_seed5.csv"));

  EXPECT_EQ(run_cli("variance --config " + d + "/variance.ini --k 10 --out " + d + "/var"), 0);
  const auto j = nlohmann::json::parse(slurp(dir / "var" / "variance.json"));
  EXPECT_EQ(j["k"], 10);
  EXPECT_EQ(j["reports"].size(), 2u);
  EXPECT_TRUE(j.contains("dice_over_lvc"));
}
