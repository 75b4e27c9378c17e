#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "test_util.hpp"

namespace fs = std::filesystem;

namespace {

int run(const std::string& args, const std::string& env = "") {
  const std::string cmd = env + " " + std::string(CONDGEN_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

/// Shared small dataset and one trained run, built once.
class CliPipeline : public ::testing::Test {
 protected:
  static fs::path dir;
  static void SetUpTestSuite() {
    dir = scratch_dir("cli");
    ASSERT_EQ(run("gen-data --n 1500 --val 100 --test 100 --seed 7 --out " + (dir / "d").string()), 0);
    std::ofstream(dir / "small.cfg") << "max_epochs = 1\nembed_dim = 8\nhidden_dim = 16\nnum_layers = 1\n"
                                        "batch_size = 32\nvalidation_subset = 50\n";
    ASSERT_EQ(run("index --data " + (dir / "d").string() + " --out " + (dir / "i").string()), 0);
    ASSERT_EQ(run("train --data " + (dir / "d").string() + " --index " + (dir / "i").string() + " --config " +
                  (dir / "small.cfg").string() + " --objective surrogate --seed 1 --out " + (dir / "r").string()),
              0);
  }
  static std::string p(const std::string& name) { return (dir / name).string(); }
};
fs::path CliPipeline::dir;

}  // namespace

TEST_F(CliPipeline, GenDataIsReproducible) {
  ASSERT_EQ(run("gen-data --n 100 --val 5 --test 5 --seed 3 --out " + p("g1")), 0);
  ASSERT_EQ(run("gen-data --n 100 --val 5 --test 5 --seed 3 --out " + p("g2")), 0);
  for (const char* f : {"train.tsv", "valid.tsv", "test.tsv", "vocab.txt"})
    EXPECT_EQ(slurp(dir / "g1" / f), slurp(dir / "g2" / f)) << f;
  const auto m = nlohmann::json::parse(slurp(dir / "g1" / "manifest.json"));
  EXPECT_GT(m["stats"]["unique"].get<int>(), 0);
  EXPECT_EQ(m["seed"].get<int>(), 3);
  EXPECT_TRUE(m.contains("wall_clock_seconds"));
  EXPECT_EQ(m["outputs"]["train.tsv"]["hash"], nlohmann::json::parse(slurp(dir / "g2" / "manifest.json"))["outputs"]["train.tsv"]["hash"]);
}

TEST_F(CliPipeline, UsageErrorsExitTwo) {
  EXPECT_EQ(run("gen-data --grammar " + p("missing.pcfg") + " --n 10 --seed 1 --out " + p("x")), 2);
  EXPECT_EQ(run("gen-data --n 10 --out " + p("x")), 2);
  EXPECT_EQ(run("train --data " + p("d") + " --out " + p("x")), 2);
  EXPECT_EQ(run("train --data " + p("d") + " --seed 1 --set nosuchkey=1 --out " + p("x")), 2);
  EXPECT_EQ(run("train --data " + p("d") + " --seed 1 --objective surrogate --out " + p("x")), 2);
  EXPECT_EQ(run("frobnicate"), 2);
  EXPECT_EQ(run("train --seed 1 --out " + p("x"), "env -u CONDGEN_DATA_DIR"), 2);
}

TEST_F(CliPipeline, TrainThenEvalProducesReport) {
  ASSERT_EQ(run("eval --data " + p("d") + " --run " + p("r") + " --seed 2 --S 3 --repeats 2 --limit 20 --out " +
                p("e")),
            0);
  const auto rep = nlohmann::json::parse(slurp(dir / "e" / "report.json"));
  EXPECT_EQ(rep["metadata"]["repeats"].get<int>(), 2);
  EXPECT_TRUE(fs::exists(dir / "e" / "manifest.json"));
  for (const char* f : {"model.ckpt", "history.csv", "config.txt", "train_summary.json", "manifest.json"})
    EXPECT_TRUE(fs::exists(dir / "r" / f)) << f;
}

TEST_F(CliPipeline, DataDirFromEnvironment) {
  EXPECT_EQ(run("edit-study --seed 1 --m-max 2 --strings 20 --perturbations 5 --out " + p("es"),
                "CONDGEN_DATA_DIR=" + p("d")),
            0);
  const std::string csv = slurp(dir / "es" / "sensitivity.csv");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 4);
}

TEST_F(CliPipeline, LineageMismatchesExitOne) {
  ASSERT_EQ(run("augment --data " + p("d") + " --mode classic --per-instance 1 --max-attempts 20 --seed 4 --out " +
                p("a")),
            0);
  EXPECT_TRUE(fs::exists(dir / "a" / "augmented.tsv"));
  EXPECT_EQ(run("eval --data " + p("a") + " --run " + p("r") + " --seed 2 --out " + p("e2")), 1);
  EXPECT_EQ(run("train --data " + p("a") + " --index " + p("i") + " --objective surrogate --seed 1 --out " + p("r2")),
            1);
}

TEST_F(CliPipeline, AugmentDoesNotOverwriteInputs) {
  const std::string before = slurp(dir / "d" / "train.tsv");
  EXPECT_EQ(run("augment --data " + p("d") + " --seed 1 --out " + p("d")), 2);
  EXPECT_EQ(slurp(dir / "d" / "train.tsv"), before);
}

TEST_F(CliPipeline, EntropyBenchCsv) {
  ASSERT_EQ(run("entropy-bench --run " + p("r") + " --targets 0,12 --S 1,10 --trials 15 --seed 5 --out " + p("eb")),
            0);
  const std::string csv = slurp(dir / "eb" / "bench.csv");
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "estimator,S,trial,target,value");
  // 4 estimators x 2 sample sizes x 15 trials x 2 targets
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 1 + 4 * 2 * 15 * 2);
}
