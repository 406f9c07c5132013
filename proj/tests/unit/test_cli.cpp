#include <gtest/gtest.h>

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "cli.hpp"
#include "test_paths.hpp"

using testing_support::TempDir;

namespace {

struct Result {
  int status = 0;
  std::string out;
  std::string err;
};

Result invoke(std::vector<std::string> args) {
  args.insert(args.begin(), "deepsom");
  std::ostringstream out, err;
  const int status = deepsom::cli::run(args, out, err);
  return {status, out.str(), err.str()};
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST(Cli, UnknownFlagIsUsageError) {
  const auto r = invoke({"train", "--no-such-flag"});
  EXPECT_EQ(r.status, 2);
  EXPECT_NE(r.err.find("Usage"), std::string::npos) << r.err;
}

TEST(Cli, MissingSubcommandIsUsageError) {
  EXPECT_EQ(invoke({}).status, 2);
}

TEST(Cli, HelpExitsZero) {
  const auto r = invoke({"--help"});
  EXPECT_EQ(r.status, 0);
  EXPECT_NE(r.out.find("pretrain"), std::string::npos);
}

TEST(Cli, MissingConfigFileIsUsageError) {
  EXPECT_EQ(invoke({"eval", "--config", "/nonexistent/run.cfg"}).status, 2);
}

TEST(Cli, MissingCheckpointIsRuntimeError) {
  TempDir dir;
  const auto r = invoke({"eval", "--checkpoint-in", (dir / "none.ckpt").string(), "--out-dir", dir.path().string()});
  EXPECT_EQ(r.status, 1);
  EXPECT_NE(r.err.find("error:"), std::string::npos);
}

TEST(Cli, FlagsOverrideConfigFile) {
  TempDir dir;
  std::ofstream(dir / "run.cfg") << "seed=5\nr=0.5\n";
  invoke({"eval", "--config", (dir / "run.cfg").string(), "--seed", "9", "--out-dir", dir.path().string()});
  const auto manifest = slurp(dir / "manifest.txt");
  EXPECT_NE(manifest.find("\nseed=9\n"), std::string::npos) << manifest;
  EXPECT_NE(manifest.find("\nr=0.5\n"), std::string::npos) << manifest;
  EXPECT_EQ(manifest.rfind("# command: deepsom eval --config", 0), 0u) << manifest;
}

TEST(Cli, ExportCurvesCombinesColumns) {
  TempDir dir;
  std::ofstream(dir / "a.csv") << "block,error_rate,ap_invocations,seconds\n0,0.500000,0,0.000\n1,0.250000,3,1.000\n";
  std::ofstream(dir / "b.csv") << "block,error_rate,ap_invocations,seconds\n0,0.600000,0,0.000\n";
  const auto r = invoke({"export", "curves", "--curve", (dir / "a.csv").string(), "--label", "r07", "--curve",
                         (dir / "b.csv").string(), "--label", "r00", "--out-dir", dir.path().string()});
  ASSERT_EQ(r.status, 0) << r.err;
  EXPECT_EQ(slurp(dir / "curves_combined.csv"), "block,r07,r00\n0,0.500000,0.600000\n1,0.250000,\n");
}

TEST(Cli, PretrainAssignEvalIsRepeatable) {
  if (!testing_support::have_mnist()) GTEST_SKIP() << "MNIST not found in " << testing_support::mnist_dir();
  TempDir dir;
  const std::string data = testing_support::mnist_dir().string();
  const std::string out = dir.path().string();
  std::ofstream(dir / "small.cfg") << "train_subset=500\nblock_size=100\nvalidation_size=200\nexport_atlas=false\n";
  const std::vector<std::string> common{"--config", (dir / "small.cfg").string(), "--data-dir", data,
                                        "--out-dir", out};
  auto with = [&](std::vector<std::string> head) {
    head.insert(head.end(), common.begin(), common.end());
    return head;
  };

  auto r = invoke(with({"pretrain", "--pretrain-iterations", "100"}));
  ASSERT_EQ(r.status, 0) << r.err;
  r = invoke(with({"assign-labels", "--checkpoint-in", (dir / "pretrained.ckpt").string()}));
  ASSERT_EQ(r.status, 0) << r.err;
  EXPECT_NE(r.out.find("label map:"), std::string::npos);

  const auto eval = with({"eval", "--checkpoint-in", (dir / "calibrated.ckpt").string()});
  const auto first = invoke(eval);
  ASSERT_EQ(first.status, 0) << first.err;
  const auto second = invoke(eval);
  EXPECT_EQ(first.out, second.out);
  EXPECT_NE(first.out.find("total=200"), std::string::npos) << first.out;
}
