#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "test_support.hpp"

namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  fs::path d = fs::temp_directory_path() / ("subcart_cli_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

int run(const std::string& args, const fs::path& out) {
  const std::string cmd = std::string(SUBCART_CLI) + " " + args + " --out-dir " + out.string() + " 2>/dev/null";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace

TEST(Cli, EmbedCircle) {
  const auto out = scratch("embed");
  ASSERT_EQ(run("embed " + test::fixture("circle.json") + " --seed 7", out), 0);
  const auto report = subcart::json::parse(slurp(out / "embed.json"));
  EXPECT_EQ(report["stages"]["embed"]["m"], 3);
  EXPECT_EQ(report["verdict"], "pass");
  EXPECT_FALSE(report["records"].empty());
  EXPECT_TRUE(fs::exists(out / "embed.csv"));
}

TEST(Cli, ReportsAreByteIdentical) {
  const auto a = scratch("det_a");
  const auto b = scratch("det_b");
  ASSERT_EQ(run("embed " + test::fixture("cross.json") + " --seed 11", a), 0);
  ASSERT_EQ(run("embed " + test::fixture("cross.json") + " --seed 11", b), 0);
  EXPECT_EQ(slurp(a / "embed.json"), slurp(b / "embed.json"));
  EXPECT_EQ(slurp(a / "embed.csv"), slurp(b / "embed.csv"));
}

TEST(Cli, MalformedSpecIsParseError) {
  const auto out = scratch("bad");
  std::ofstream(out / "bad.json") << "{\"ambient_dim\": ";
  EXPECT_EQ(run("validate " + (out / "bad.json").string(), out), 3);
  EXPECT_EQ(run("validate " + (out / "missing.json").string(), out), 3);
}

TEST(Cli, SussmannGenerators) {
  const auto out = scratch("sussmann");
  ASSERT_EQ(run("generators " + test::fixture("sussmann.dist.json") + " --seed 1", out), 0);
  const auto report = subcart::json::parse(slurp(out / "generators.json"));
  EXPECT_EQ(report["stages"]["generators"]["count"], 1);
}

TEST(Cli, CorruptCocycleFailsValidation) {
  const auto out = scratch("corrupt");
  EXPECT_EQ(run("validate " + test::fixture("mobius_corrupt.bundle.json"), out), 1);
  EXPECT_EQ(run("validate " + test::fixture("mobius.bundle.json"), out), 0);
}

TEST(Cli, BundleGenerators) {
  const auto out = scratch("bundle");
  ASSERT_EQ(run("bundle-generators " + test::fixture("mobius.bundle.json"), out), 0);
  const auto report = subcart::json::parse(slurp(out / "bundle-generators.json"));
  EXPECT_EQ(report["stages"]["bundle_generators"]["count"], 2);
}

TEST(Cli, EmbedNeedsSeed) {
  const auto out = scratch("noseed");
  EXPECT_EQ(run("embed " + test::fixture("circle.json"), out), 3);
}

TEST(Cli, WrongDocumentKind) {
  const auto out = scratch("kind");
  EXPECT_EQ(run("generators " + test::fixture("circle.json"), out), 1);
}

TEST(Cli, UndersizedTargetIsValidationFailure) {
  const auto out = scratch("small_m");
  EXPECT_EQ(run("embed " + test::fixture("circle.json") + " --seed 1 --m 2", out), 1);
}

TEST(Cli, ExhaustedRetriesIsNumericalFailure) {
  // A 1e-9 budget cannot lift the tangent floor above 1e-6.
  const auto out = scratch("retries");
  EXPECT_EQ(run("embed " + test::fixture("circle.json") + " --seed 1 --delta 1e-9", out), 2);
  const auto report = subcart::json::parse(slurp(out / "embed.json"));
  EXPECT_EQ(report["error"]["kind"], "MaxRetriesExceeded");
}
