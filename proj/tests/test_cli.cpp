#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>

#include "optbench/text.hpp"

namespace fs = std::filesystem;

namespace {

const std::string kCli = OPTBENCH_CLI_PATH;
const std::string kFixtures = OPTBENCH_FIXTURE_DIR;
const std::string kSamples = OPTBENCH_SAMPLES_DIR;

fs::path scratch() {
  static const fs::path dir = [] {
    auto d = fs::temp_directory_path() / "optbench_cli_test";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

// Runs the CLI with stdout/stderr captured to a file; returns the exit code.
int run(const std::string& args, std::string* out = nullptr) {
  const auto log = scratch() / "last.log";
  const int status = std::system((kCli + " " + args + " > " + log.string() + " 2>&1").c_str());
  if (out) *out = optbench::text::read_file(log.string());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST(Cli, HelpAndUsageErrors) {
  EXPECT_EQ(run("--help"), 0);
  EXPECT_EQ(run(""), 2);
  EXPECT_EQ(run("frobnicate"), 2);
  EXPECT_EQ(run("run input"), 2);  // --out missing
  EXPECT_EQ(run("run bogus --out " + (scratch() / "x").string()), 2);
}

TEST(Cli, ScoreReproducesPublishedValues) {
  std::string out;
  ASSERT_EQ(run("score " + kFixtures + "/input_rmse.csv --config " + kFixtures + "/input_score.cfg", &out), 0) << out;
  EXPECT_NE(out.find("XGBoost,36.2008,44.3921"), std::string::npos) << out;
  ASSERT_EQ(run("score " + kFixtures + "/moneyness_rmse.csv --bs-row BS --exclude BS,BSM", &out), 0) << out;
  EXPECT_NE(out.find("LGBM,67.0907,69.7089"), std::string::npos) << out;
  ASSERT_EQ(run("score " + kFixtures + "/input_rmse.csv --weights 1,1,2,2,1,1", &out), 0) << out;
  EXPECT_NE(out.find("CatBoost,-3.2677,10.9929"), std::string::npos) << out;
}

TEST(Cli, ScoreErrorCodes) {
  EXPECT_EQ(run("score " + kFixtures + "/input_rmse.csv --weights 1,2"), 2);
  EXPECT_EQ(run("score " + kFixtures + "/input_rmse.csv --bs-row Oracle"), 3);
  EXPECT_EQ(run("score " + (scratch() / "missing.csv").string()), 3);
  const auto bad = scratch() / "bad.csv";
  optbench::text::write_file(bad.string(), "model,sub,error\nBS,a,zero\n");
  EXPECT_EQ(run("score " + bad.string()), 3);
}

TEST(Cli, GenDataIsDeterministic) {
  const auto a = scratch() / "a.csv", b = scratch() / "b.csv";
  ASSERT_EQ(run("gen-data " + kSamples + "/quick.cfg " + a.string()), 0);
  ASSERT_EQ(run("gen-data " + kSamples + "/quick.cfg " + b.string()), 0);
  EXPECT_EQ(optbench::text::read_file(a.string()), optbench::text::read_file(b.string()));
  ASSERT_EQ(run("gen-data " + kSamples + "/quick.cfg " + b.string() + " --seed 99"), 0);
  EXPECT_NE(optbench::text::read_file(a.string()), optbench::text::read_file(b.string()));
  const auto bad = scratch() / "bad.cfg";
  optbench::text::write_file(bad.string(), "scale = galactic\n");
  EXPECT_EQ(run("gen-data " + bad.string() + " " + b.string()), 2);
}

TEST(Cli, FitVol) {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> z(0.0, 0.01);
  std::string csv = "date,close\n";
  double p = 100.0;
  for (int i = 0; i < 300; ++i) {
    csv += "d" + std::to_string(i) + "," + optbench::text::format_exact(p) + "\n";
    p *= std::exp(z(rng));
  }
  const auto path = scratch() / "px.csv";
  optbench::text::write_file(path.string(), csv);
  std::string out;
  ASSERT_EQ(run("fit-vol " + path.string(), &out), 0) << out;
  EXPECT_NE(out.find("persistence = "), std::string::npos);
  EXPECT_NE(out.find("returns = 299"), std::string::npos);
  optbench::text::write_file(path.string(), "close\n1\n2\n3\n");
  EXPECT_EQ(run("fit-vol " + path.string()), 3);
}

TEST(Cli, RunAllAndReport) {
  const auto dir = scratch() / "all";
  std::string out;
  ASSERT_EQ(run("run all --config " + kSamples + "/quick.cfg --out " + dir.string(), &out), 0) << out;
  for (const char* e : {"input", "moneyness", "window", "noise"}) {
    EXPECT_TRUE(fs::exists(dir / e / "report.md")) << e;
    EXPECT_TRUE(fs::exists(dir / e / "config.txt")) << e;
    EXPECT_TRUE(fs::exists(dir / e / "hyperparameters.txt")) << e;
  }
  ASSERT_EQ(run("report " + (dir / "window").string() + " --format csv", &out), 0) << out;
  EXPECT_EQ(out.rfind("model,source,ITM-ON,ITM-OFF", 0), 0u) << out;
  EXPECT_NE(out.find("inherited from input/In1"), std::string::npos);
  ASSERT_EQ(run("report " + (dir / "noise").string() + " --format md", &out), 0) << out;
  EXPECT_NE(out.find("inherited from moneyness/ALL"), std::string::npos);
  EXPECT_EQ(run("report " + (dir / "noise").string() + " --format pdf"), 2);
  EXPECT_EQ(run("report " + (scratch() / "nowhere").string()), 3);
}

TEST(Cli, SameSeedSameReports) {
  const auto a = scratch() / "s1", b = scratch() / "s2";
  ASSERT_EQ(run("run moneyness --config " + kSamples + "/quick.cfg --seed 5 --out " + a.string()), 0);
  ASSERT_EQ(run("run moneyness --config " + kSamples + "/quick.cfg --seed 5 --out " + b.string()), 0);
  EXPECT_EQ(optbench::text::read_file((a / "report.md").string()), optbench::text::read_file((b / "report.md").string()));
}

TEST(Cli, FixtureMode) {
  const auto dir = scratch() / "fixture";
  std::string out;
  ASSERT_EQ(run("run input --config " + kSamples + "/fixture.cfg --out " + dir.string(), &out), 0) << out;
  const auto md = optbench::text::read_file((dir / "report.md").string());
  EXPECT_NE(md.find("| XGBoost | 36.2008 | 44.3921 |"), std::string::npos);
  EXPECT_NE(md.find("- mode: fixture"), std::string::npos);
}
