#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "nbsmooth/cli.hpp"
#include "nbsmooth/tables.hpp"

namespace {

namespace fs = std::filesystem;

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run(std::vector<std::string> args) {
  args.insert(args.begin(), "nbsmooth");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = nbs::run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

fs::path fresh_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("nbsmooth_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

// A corpus and models small enough for a unit test.
fs::path tiny_config() {
  const fs::path p = fs::temp_directory_path() / "nbsmooth_cli_tiny.json";
  std::ofstream(p) << R"({
  "corpus": {"n_train_source": 2, "n_train_target": 1, "n_test": 2, "duration_seconds": 4.0},
  "ae": {"epochs": 1, "hidden": [16, 4, 16], "frames_per_segment": 4},
  "disc": {"epochs": 2, "embed_dim": 8, "hidden": [16]},
  "evaluation": {"k_grid": [1, 2, 4]}
})";
  return p;
}

TEST(Cli, UnknownSubcommandIsUsageError) {
  const auto r = run({"frobnicate"});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("error kind=usage"), std::string::npos);
  EXPECT_EQ(run({}).code, 2);
  EXPECT_EQ(run({"smooth", "--k", "3"}).code, 2);
}

TEST(Cli, VersionAndHelp) {
  EXPECT_EQ(run({"--version"}).code, 0);
  const auto h = run({"--help"});
  EXPECT_EQ(h.code, 0);
  EXPECT_NE(h.out.find("demo"), std::string::npos);
}

TEST(Cli, EvalWithoutLabelColumnNamesIt) {
  const auto dir = fresh_dir("nolabel");
  std::ofstream(dir / "s.csv") << "clip_id,machine,section,domain,score_gen\na,m,3,source,0.5\n";
  const auto r = run({"eval", "--scores", (dir / "s.csv").string()});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("label"), std::string::npos) << r.err;
  EXPECT_NE(r.err.find("error kind="), std::string::npos);
}

TEST(Cli, BadConfigValueNamesKey) {
  const auto dir = fresh_dir("badcfg");
  std::ofstream(dir / "c.json") << R"({"smoothing": {"k": -1}})";
  const auto r = run({"demo", "--config", (dir / "c.json").string(), "--out", (dir / "o").string()});
  EXPECT_NE(r.code, 0);
  EXPECT_NE(r.err.find("smoothing.k"), std::string::npos) << r.err;
}

TEST(Cli, StepwisePipelineAndKOneSmoothing) {
  const auto dir = fresh_dir("steps");
  const auto cfg = tiny_config().string();
  ASSERT_EQ(run({"synth", "--config", cfg, "--out", (dir / "corpus").string()}).code, 0);
  const auto manifest = (dir / "corpus" / "manifest.csv").string();
  ASSERT_TRUE(fs::exists(manifest));
  const std::vector<std::string> src{"--config", cfg, "--manifest", manifest};
  auto with = [&](std::vector<std::string> a) {
    a.insert(a.end(), src.begin(), src.end());
    return run(a);
  };
  ASSERT_EQ(with({"train-ae", "--out", (dir / "models").string()}).code, 0);
  ASSERT_EQ(with({"train-disc", "--out", (dir / "models").string()}).code, 0);
  ASSERT_EQ(with({"score", "--models", (dir / "models").string(), "--out", dir.string()}).code, 0);
  ASSERT_EQ(with({"embed", "--models", (dir / "models").string(), "--out", dir.string()}).code, 0);
  ASSERT_EQ(with({"baseline-gmm", "--models", (dir / "models").string(), "--out",
                  (dir / "gmm").string()})
                .code,
            0);
  EXPECT_TRUE(fs::exists(dir / "gmm" / "scores_gmm.csv"));

  const auto scores = (dir / "scores.csv").string();
  const auto emb = (dir / "embeddings.csv").string();
  ASSERT_EQ(run({"smooth", "--scores", scores, "--embeddings", emb, "--k", "1", "--out",
                 (dir / "k1").string()})
                .code,
            0);
  const auto t = nbs::read_score_table(dir / "k1" / "smoothed.csv");
  EXPECT_EQ(t.column("score_smooth"), t.column("score_gen"));

  ASSERT_EQ(run({"sweep", "--scores", scores, "--embeddings", emb, "--k-grid", "1,2",
                 "--out", (dir / "sw").string()})
                .code,
            0);
  ASSERT_EQ(run({"smooth", "--scores", scores, "--embeddings", emb, "--choice",
                 (dir / "sw" / "choice.csv").string(), "--out", (dir / "ch").string()})
                .code,
            0);
  const auto e = run({"eval", "--scores", (dir / "ch" / "smoothed.csv").string(), "--column",
                      "score_smooth", "--out", (dir / "ev").string()});
  ASSERT_EQ(e.code, 0) << e.err;
  EXPECT_NE(e.out.find("All-hmean"), std::string::npos);
  EXPECT_TRUE(fs::exists(dir / "ev" / "report.csv"));
  ASSERT_EQ(run({"subsample", "--scores", scores, "--embeddings", emb, "--k", "2",
                 "--fractions", "0.5,1", "--trials", "2", "--out", (dir / "sub").string()})
                .code,
            0);
  EXPECT_TRUE(fs::exists(dir / "sub" / "subsample.csv"));
}

TEST(Cli, OutputDirectoryFromEnvironment) {
  const auto dir = fresh_dir("env");
  std::ofstream(dir / "s.csv") << "clip_id,machine,section,domain,label,score_gen\n"
                                  "a,m,3,source,normal,0.1\nb,m,3,source,anomaly,0.9\n";
  ::setenv("NBSMOOTH_OUTPUT_DIR", (dir / "viaenv").string().c_str(), 1);
  const auto r = run({"eval", "--scores", (dir / "s.csv").string()});
  ::unsetenv("NBSMOOTH_OUTPUT_DIR");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(fs::exists(dir / "viaenv" / "run.json"));
}

TEST(Cli, DemoIsByteIdenticalAcrossRuns) {
  const auto dir = fresh_dir("demo");
  const auto cfg = tiny_config().string();
  const auto a = run({"demo", "--config", cfg, "--out", (dir / "a").string()});
  const auto b = run({"demo", "--config", cfg, "--out", (dir / "b").string()});
  ASSERT_EQ(a.code, 0) << a.err;
  ASSERT_EQ(b.code, 0) << b.err;
  EXPECT_EQ(a.out, b.out);
  std::size_t files = 0;
  for (const auto& entry : fs::recursive_directory_iterator(dir / "a")) {
    if (!entry.is_regular_file()) continue;
    const auto rel = fs::relative(entry.path(), dir / "a");
    EXPECT_EQ(slurp(entry.path()), slurp(dir / "b" / rel)) << rel;
    ++files;
  }
  EXPECT_GE(files, 10u);
}

}  // namespace
