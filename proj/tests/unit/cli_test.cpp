#include <gtest/gtest.h>

#include <memory>
#include <sstream>

#include "malfuse/fusion.hpp"
#include "malfuse/tabular.hpp"
#include "malfuse/text_io.hpp"
#include "malfuse_app/cli.hpp"
#include "malfuse_app/config.hpp"
#include "support.hpp"

namespace malfuse::app {
namespace {

namespace fs = std::filesystem;

constexpr const char* kSmallConfig = R"(# small three-domain benchmark
bench.static.n_samples = 400
bench.static.n_features = 20
bench.static.n_informative = 5
bench.behavioral.n_samples = 300
bench.behavioral.n_features = 10
bench.memory.n_samples = 300
bench.memory.n_features = 8
gbdt.n_estimators = 30
gbdt.early_stopping_rounds = 10
topk.static = 10
topk.behavioral = 6
topk.memory = 5
)";

struct CliRun {
  int status = 0;
  std::string out;
  std::string err;
};

CliRun run(std::vector<std::string> args, const char* env_out = nullptr) {
  args.insert(args.begin(), "malfuse");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  CliRun r;
  r.status = run_cli(static_cast<int>(argv.size()), argv.data(), out, err, env_out);
  r.out = out.str();
  r.err = err.str();
  return r;
}

bool contains(const std::string& haystack, const std::string& needle) {
  return haystack.find(needle) != std::string::npos;
}

TEST(Config, ParsesKeysAndPerDomainOverrides) {
  RunConfig c;
  apply_config_text(c, "seed = 7\nstep = 0.05\ndomains = a, b\ngbdt.num_leaves = 15\n"
                       "gbdt.b.learning_rate = 0.2\ntopk.a = 3\nfusion.cap = 10\n"
                       "ablation.deltas = -0.1, 0.1\nablation.k.a = 1, 2\n");
  EXPECT_EQ(c.seed, 7u);
  EXPECT_EQ(c.step, 0.05);
  EXPECT_EQ(c.domains, (std::vector<std::string>{"a", "b"}));
  EXPECT_EQ(c.gbdt_for("a").num_leaves, 15);
  EXPECT_EQ(c.gbdt_for("a").learning_rate, 0.05);
  EXPECT_EQ(c.gbdt_for("b").learning_rate, 0.2);
  EXPECT_EQ(c.topk_for("a"), 3u);
  EXPECT_EQ(c.topk_for("memory"), 20u);
  EXPECT_EQ(c.fusion_cap, 10u);
  EXPECT_EQ(c.ablation_deltas, (std::vector<double>{-0.1, 0.1}));
  EXPECT_EQ(c.ablation_k.at("a"), (std::vector<std::size_t>{1, 2}));
  EXPECT_EQ(c.data_path("a"), fs::path(".") / "data.a.csv");
}

TEST(Config, UnknownKeysReportTheLine) {
  RunConfig c;
  for (const char* text : {"seed = 1\n\nbogus = 2\n", "seed = 1\n# c\ngbdt.depth = 2\n",
                           "# x\n\nbench.static.color = red\n"}) {
    try {
      apply_config_text(c, text, "run.cfg");
      FAIL() << text;
    } catch (const std::exception& e) {
      EXPECT_TRUE(contains(e.what(), "run.cfg:3")) << e.what();
    }
  }
}

TEST(Config, FlagBeatsEnvironmentBeatsFile) {
  test::TempDir dir;
  write_file_atomic(dir / "c.cfg", "out = from_file\nseed = 3\n");
  Overrides flags;
  flags.config_file = dir / "c.cfg";
  EXPECT_EQ(resolve_config(flags, nullptr).out, fs::path("from_file"));
  EXPECT_EQ(resolve_config(flags, "from_env").out, fs::path("from_env"));
  flags.out = "from_flag";
  flags.seed = 9;
  const auto c = resolve_config(flags, "from_env");
  EXPECT_EQ(c.out, fs::path("from_flag"));
  EXPECT_EQ(c.seed, 9u);
}

TEST(Config, BenchmarkOverridesApply) {
  RunConfig c;
  apply_config_text(c, kSmallConfig);
  const auto spec = c.benchmark();
  ASSERT_EQ(spec.domains.size(), 3u);
  EXPECT_EQ(spec.domains[0].n_samples, 400u);
  EXPECT_EQ(spec.domains[0].n_features, 20u);
  EXPECT_EQ(spec.domains[0].evasive_fraction, synthgen::kDefaultEvasiveFraction);
  c.data["memory"] = "elsewhere.csv";
  EXPECT_EQ(c.benchmark().domains.size(), 2u);
}

// One full pipeline in a shared directory.
class Pipeline : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = std::make_unique<test::TempDir>();
    write_file_atomic(*dir_ / "small.cfg", kSmallConfig);
    const std::vector<std::vector<std::string>> steps{
        {"gen-data"},
        {"train", "--domain", "static"},
        {"train", "--domain", "behavioral"},
        {"train", "--domain", "memory"},
        {"fuse-optimize"},
        {"evaluate", "--target", "fused"},
        {"evaluate", "--target", "static"},
        {"ablate", "--study", "domain-removal"},
        {"ablate", "--study", "weight-perturbation"},
        {"ablate", "--study", "feature-count", "--domain", "memory"},
    };
    for (const auto& s : steps) {
      auto r = global(s);
      ASSERT_EQ(r.status, 0) << s.front() << ": " << r.err;
    }
  }
  static void TearDownTestSuite() { dir_.reset(); }

  static std::vector<std::string> with_globals(std::vector<std::string> args) {
    args.insert(args.begin(), {"--config", (*dir_ / "small.cfg").string(), "--out",
                               dir_->path().string()});
    return args;
  }
  static CliRun global(const std::vector<std::string>& args) { return run(with_globals(args)); }
  static fs::path at(const std::string& name) { return *dir_ / name; }

  static std::unique_ptr<test::TempDir> dir_;
};

std::unique_ptr<test::TempDir> Pipeline::dir_;

TEST_F(Pipeline, TrainWritesEveryArtifact) {
  for (const std::string d : {"static", "behavioral", "memory"}) {
    for (const auto& name : {"stats." + d + ".txt", "importance." + d + ".csv", "model." + d + ".txt",
                             "trainlog." + d + ".csv", "valid." + d + ".csv", "scores." + d + ".csv"}) {
      EXPECT_TRUE(fs::exists(at(name))) << name;
    }
  }
  const auto model = gbdt::load_model(at("model.memory.txt"));
  EXPECT_EQ(model.feature_names.size(), 5u);
}

TEST_F(Pipeline, FuseOptimizeWritesGridAndWeights) {
  const auto grid = read_file(at("grid.csv"));
  EXPECT_EQ(std::count(grid.begin(), grid.end(), '\n'), 67);
  const auto bundle = fusion::bundle_from_text(read_file(at("weights.txt")));
  double total = 0.0;
  for (double w : bundle.weights.values) total += w;
  EXPECT_NEAR(total, 1.0, 1e-9);
  EXPECT_EQ(bundle.weights.domains, (std::vector<std::string>{"static", "behavioral", "memory"}));
  EXPECT_TRUE(fs::exists(at("corners.csv")));
}

TEST_F(Pipeline, EvaluateWritesReports) {
  for (const std::string t : {"fused", "static"}) {
    for (const auto& name : {"report." + t + ".csv", "report." + t + ".txt", "confusion." + t + ".csv",
                             "histogram." + t + ".benign.csv", "histogram." + t + ".malware.csv"}) {
      EXPECT_TRUE(fs::exists(at(name))) << name;
    }
  }
  EXPECT_TRUE(contains(read_file(at("report.fused.csv")), "weight_static"));
}

TEST_F(Pipeline, AblationReportsExist) {
  EXPECT_EQ(read_file(at("ablation.domain-removal.csv")).find("study,variant"), 0u);
  const auto fc = read_file(at("ablation.feature-count.csv"));
  EXPECT_TRUE(contains(fc, "memory_k"));
  EXPECT_FALSE(contains(fc, "static_k"));
  EXPECT_TRUE(fs::exists(at("ablation.weight-perturbation.txt")));
}

TEST_F(Pipeline, PredictReplaysValidationScores) {
  const auto out = at("replay.csv");
  const auto r = global({"predict", "--input", at("valid.static.csv").string(), "--target", "static",
                         "--output", out.string()});
  ASSERT_EQ(r.status, 0) << r.err;
  EXPECT_EQ(read_file(out), read_file(at("scores.static.csv")));
}

TEST_F(Pipeline, PredictFusedOnOneDomainsRows) {
  const auto r = global({"predict", "--input", at("valid.memory.csv").string()});
  ASSERT_EQ(r.status, 0) << r.err;
  const auto text = read_file(at("predictions.fused.csv"));
  EXPECT_EQ(text.substr(0, text.find('\n')), "row,probability,class");
  const auto rows = tabular::load_csv(at("valid.memory.csv"), "label").n_rows();
  EXPECT_EQ(static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n')), rows + 1);
}

TEST_F(Pipeline, PredictEmptyInputWritesHeaderOnly) {
  const auto valid = read_file(at("valid.static.csv"));
  write_file_atomic(at("empty.csv"), valid.substr(0, valid.find('\n') + 1));
  const auto r = global({"predict", "--input", at("empty.csv").string(), "--target", "static",
                         "--output", at("empty.out.csv").string()});
  ASSERT_EQ(r.status, 0) << r.err;
  EXPECT_EQ(read_file(at("empty.out.csv")), "row,probability,class\n");
}

TEST_F(Pipeline, PredictRejectsUnknownColumns) {
  write_file_atomic(at("alien.csv"), "zz_a,zz_b\n1,2\n");
  const auto r = global({"predict", "--input", at("alien.csv").string()});
  EXPECT_EQ(r.status, 1);
  EXPECT_TRUE(contains(r.err, "unknown column set")) << r.err;
}

TEST_F(Pipeline, UnknownTargetAndDomainFail) {
  EXPECT_EQ(global({"evaluate", "--target", "network"}).status, 1);
  EXPECT_EQ(global({"train", "--domain", "network"}).status, 1);
  EXPECT_NE(global({"ablate", "--study", "bogus"}).status, 0);
  EXPECT_EQ(global({"ablate", "--study", "domain-removal", "--domain", "static"}).status, 1);
}

TEST(Cli, GenDataIsDeterministic) {
  test::TempDir a, b;
  for (auto* d : {&a, &b}) {
    write_file_atomic(*d / "c.cfg", kSmallConfig);
    const auto r = run({"--config", (*d / "c.cfg").string(), "--out", d->path().string(), "gen-data"});
    ASSERT_EQ(r.status, 0) << r.err;
  }
  for (const std::string dom : {"static", "behavioral", "memory"}) {
    EXPECT_EQ(read_file(a / ("data." + dom + ".csv")), read_file(b / ("data." + dom + ".csv")));
  }
  write_file_atomic(b / "c.cfg", kSmallConfig);
  ASSERT_EQ(run({"--config", (b / "c.cfg").string(), "--out", b.path().string(), "--seed", "43",
                 "gen-data"}).status, 0);
  EXPECT_NE(read_file(a / "data.static.csv"), read_file(b / "data.static.csv"));
}

TEST(Cli, OutputDirectoryFromEnvironment) {
  test::TempDir dir;
  write_file_atomic(dir / "c.cfg", kSmallConfig + std::string("domains = memory\n"));
  const auto env = dir.path().string();
  const auto r = run({"--config", (dir / "c.cfg").string(), "gen-data"}, env.c_str());
  ASSERT_EQ(r.status, 0) << r.err;
  EXPECT_TRUE(fs::exists(dir / "data.memory.csv"));
}

TEST(Cli, MissingOutputDirectoryIsNamed) {
  test::TempDir dir;
  const auto missing = (dir / "nope").string();
  const auto r = run({"--out", missing, "gen-data"});
  EXPECT_EQ(r.status, 1);
  EXPECT_TRUE(contains(r.err, missing)) << r.err;
}

TEST(Cli, CorruptCsvReportsFileAndLine) {
  test::TempDir dir;
  write_file_atomic(dir / "data.memory.csv", "memory_f000,memory_f001,label\n0.5,1,benign\n0.1,malware\n");
  const auto r = run({"--out", dir.path().string(), "train", "--domain", "memory"});
  EXPECT_EQ(r.status, 1);
  EXPECT_TRUE(contains(r.err, "data.memory.csv:3")) << r.err;
}

TEST(Cli, MissingArtifactSuggestsTraining) {
  test::TempDir dir;
  const auto r = run({"--out", dir.path().string(), "fuse-optimize"});
  EXPECT_EQ(r.status, 1);
  EXPECT_TRUE(contains(r.err, "missing artifact")) << r.err;
  EXPECT_TRUE(contains(r.err, "train --domain")) << r.err;
}

TEST(Cli, RequiresASubcommand) {
  EXPECT_NE(run({}).status, 0);
  EXPECT_EQ(run({"--help"}).status, 0);
}

}  // namespace
}  // namespace malfuse::app
