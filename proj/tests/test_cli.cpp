#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <sys/wait.h>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

namespace fs = std::filesystem;

namespace {

const fs::path work = fs::temp_directory_path() / "snlab-cli-test";

int run(const std::string& args) {
  const std::string cmd = std::string(SNLAB_CLI) + " " + args + " > " + (work / "stdout.txt").string() + " 2> " +
                          (work / "stderr.txt").string();
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  return {std::istreambuf_iterator<char>(in), {}};
}

class Cli : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    fs::remove_all(work);
    fs::create_directories(work);
  }
};

const std::string small = "--n 1024 --L 40 --t_max 1 ";

}  // namespace

TEST_F(Cli, ValidationErrorsExitWithOne) {
  EXPECT_EQ(run("evolve --kappa -1"), 1);
  EXPECT_NE(slurp(work / "stderr.txt").find("'kappa'"), std::string::npos);
  EXPECT_EQ(run("evolve --no-such-flag 1"), 1);
  EXPECT_EQ(run("evolve --n 1000"), 1);
  std::ofstream(work / "bad.json") << R"({"scenario": "gaussian", "colour": "red"})";
  EXPECT_EQ(run("evolve --config " + (work / "bad.json").string()), 1);
  EXPECT_NE(slurp(work / "stderr.txt").find("'colour'"), std::string::npos);
  EXPECT_EQ(run(""), 1);
  EXPECT_EQ(run("kappa-from-mass"), 1);
}

TEST_F(Cli, RuntimeErrorsExitWithTwo) {
  std::ofstream(work / "plainfile") << "x";
  EXPECT_EQ(run("evolve " + small + "--output_dir " + (work / "plainfile" / "out").string()), 2);
  EXPECT_EQ(run("groundstate " + small + "--gs_max_iterations 3 --output_dir " + (work / "gs").string()), 2);
}

TEST_F(Cli, EvolveWritesOutputsAndSidecar) {
  const fs::path out = work / "evolve";
  ASSERT_EQ(run("evolve " + small + "--kappa 0.5 --R [1,2] --output_dir " + out.string()), 0);
  EXPECT_TRUE(fs::exists(out / "diagnostics.csv"));
  EXPECT_TRUE(fs::exists(out / "diagnostics_R2.csv"));
  EXPECT_TRUE(fs::exists(out / "density.csv"));
  const auto meta = nlohmann::json::parse(slurp(out / "meta.json"));
  EXPECT_EQ(meta["config"]["kappa"], 0.5);
  EXPECT_EQ(meta["config"]["n"], 1024);
  EXPECT_TRUE(meta.contains("version"));
}

TEST_F(Cli, CausalityReadsBinaryDensity) {
  const fs::path out = work / "bin";
  ASSERT_EQ(run("evolve " + small + "--density_format binary --snapshot_stride 40 --output_dir " + out.string()), 0);
  ASSERT_TRUE(fs::exists(out / "density.bin"));
  ASSERT_EQ(run("causality --density " + (out / "density.bin").string() + " --snapshot-interval 0.2 --output_dir " +
                (work / "causal").string()),
            0);
  const auto result = nlohmann::json::parse(slurp(work / "stdout.txt"));
  EXPECT_TRUE(result.contains("causal"));
  EXPECT_TRUE(fs::exists(work / "causal" / "causality.csv"));
}

TEST_F(Cli, SweepIsResumable) {
  const std::string args = "sweep " + small +
                           "--sweep-scenario gaussian --sweep-R_values [1,2] --sweep-kappa_values [0,1] "
                           "--sweep-t_max 1 --output_dir " +
                           (work / "sweep").string();
  ASSERT_EQ(run(args), 0);
  const std::string first = slurp(work / "sweep" / "sweep.csv");
  EXPECT_EQ(std::count(first.begin(), first.end(), '\n'), 5);
  ASSERT_EQ(run(args), 0);
  EXPECT_NE(slurp(work / "stderr.txt").find("4 already done"), std::string::npos);
  EXPECT_EQ(slurp(work / "sweep" / "sweep.csv"), first);
}

TEST_F(Cli, KappaFromMass) {
  ASSERT_EQ(run("kappa-from-mass --mass-kg 1 --length-scale 1"), 0);
  const auto out = nlohmann::json::parse(slurp(work / "stdout.txt"));
  EXPECT_NEAR(out["kappa"].get<double>() / 6.0e57, 1.0, 0.01);
  EXPECT_EQ(run("kappa-from-mass --mass-kg -1"), 1);
}
