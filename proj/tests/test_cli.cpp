// Copyright 2026 The xlstm-cpp Authors.
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "cli.hpp"
#include "xlstm/checkpoint.hpp"
#include "xlstm/config.hpp"
#include "xlstm/trainer.hpp"

namespace xlstm {
namespace {

namespace fs = std::filesystem;

struct Result {
  int code;
  std::string out, err;
};

Result run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "xlstm");
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("xlstm_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string write(const std::string& name, const std::string& text) {
    const fs::path p = dir_ / name;
    std::ofstream(p) << text;
    return p.string();
  }

  std::string parity_config(const std::string& extra_train = "") {
    return write("parity.yaml", R"(seed: 5
out: unused
model:
  num_blocks: 2
  ratio: "0:1"
  embedding_dim: 8
  slstm:
    num_heads: 2
task:
  kind: parity
  min_length: 2
  max_length: 6
eval:
  samples: 8
  interval: 2
train:
  steps: 5
  batch_size: 2
  lr: 1.0e-2
)" + extra_train);
  }

  fs::path dir_;
};

TEST_F(CliTest, UsageErrors) {
  EXPECT_EQ(run_cli({}).code, cli::kExitUsage);
  EXPECT_EQ(run_cli({"fly"}).code, cli::kExitUsage);
  EXPECT_EQ(run_cli({"train"}).code, cli::kExitUsage);
  EXPECT_EQ(run_cli({"equivcheck", "--trials", "0"}).code, cli::kExitUsage);
  EXPECT_EQ(run_cli({"equivcheck", "--trial-seed", "3"}).code, cli::kExitUsage);
  EXPECT_EQ(run_cli({"--help"}).code, cli::kExitOk);
}

TEST_F(CliTest, BadConfigKeyExitsWithUsage) {
  const std::string cfg = parity_config("  learningrate: 1.0e-3\n");
  const Result r = run_cli({"train", "--config", cfg, "--out", (dir_ / "run").string()});
  EXPECT_EQ(r.code, cli::kExitUsage);
  EXPECT_NE(r.err.find("train.learningrate"), std::string::npos) << r.err;
  EXPECT_EQ(run_cli({"train", "--config", (dir_ / "missing.yaml").string()}).code, cli::kExitUsage);
}

TEST_F(CliTest, TrainWritesMonotoneMetricsAndEvalReadsCheckpoint) {
  const std::string cfg = parity_config();
  const fs::path run = dir_ / "run";
  const Result r = run_cli({"train", "--config", cfg, "--out", run.string(), "--quiet"});
  ASSERT_EQ(r.code, cli::kExitOk) << r.err;
  ASSERT_TRUE(fs::exists(run / "metrics.csv"));
  ASSERT_TRUE(fs::exists(run / "model.ckpt"));
  ASSERT_TRUE(fs::exists(run / "run.yaml"));

  std::istringstream lines(slurp(run / "metrics.csv"));
  std::vector<long> steps;
  bool header = false;
  for (std::string line; std::getline(lines, line);) {
    if (line.rfind("#", 0) == 0) continue;
    if (!header) {
      EXPECT_EQ(line.rfind("step,", 0), 0u);
      header = true;
      continue;
    }
    steps.push_back(std::stol(line.substr(0, line.find(','))));
  }
  EXPECT_EQ(steps, (std::vector<long>{0, 2, 4, 5}));

  const Result e = run_cli({"eval", "--checkpoint", (run / "model.ckpt").string(), "--config", cfg});
  ASSERT_EQ(e.code, cli::kExitOk) << e.err;
  EXPECT_NE(e.out.find("samples,positions,loss,accuracy,scaled_accuracy,mse\n8,8,"), std::string::npos) << e.out;

  // A second eval of the same checkpoint gives the same output.
  const Result e2 = run_cli({"eval", "--checkpoint", (run / "model.ckpt").string(), "--config", cfg});
  EXPECT_EQ(e.out, e2.out);
}

TEST_F(CliTest, SameSeedGivesBitIdenticalMetrics) {
  const std::string cfg = parity_config();
  ASSERT_EQ(run_cli({"train", "--config", cfg, "--out", (dir_ / "a").string(), "--quiet"}).code, 0);
  ASSERT_EQ(run_cli({"train", "--config", cfg, "--out", (dir_ / "b").string(), "--quiet"}).code, 0);
  ASSERT_EQ(run_cli({"train", "--config", cfg, "--out", (dir_ / "c").string(), "--quiet", "--seed", "6"}).code, 0);
  const std::string a = slurp(dir_ / "a" / "metrics.csv");
  EXPECT_FALSE(a.empty());
  EXPECT_EQ(a, slurp(dir_ / "b" / "metrics.csv"));
  EXPECT_NE(a, slurp(dir_ / "c" / "metrics.csv"));
  EXPECT_EQ(slurp(dir_ / "a" / "model.ckpt"), slurp(dir_ / "b" / "model.ckpt"));
}

TEST_F(CliTest, EvalFailures) {
  const std::string cfg = parity_config();
  EXPECT_NE(run_cli({"eval", "--checkpoint", (dir_ / "none.ckpt").string(), "--config", cfg}).code, cli::kExitOk);
  const fs::path run = dir_ / "run";
  ASSERT_EQ(run_cli({"train", "--config", cfg, "--out", run.string(), "--quiet"}).code, 0);
  const std::string mqar = write("mqar.yaml", R"(model:
  num_blocks: 1
  ratio: "1:0"
  embedding_dim: 8
task:
  kind: mqar
  vocab_size: 16
  kv_pairs: 2
  context: 12
)");
  EXPECT_EQ(run_cli({"eval", "--checkpoint", (run / "model.ckpt").string(), "--config", mqar}).code,
            cli::kExitUsage);
}

TEST_F(CliTest, UntrainedParityEvaluatesNearChance) {
  const std::string cfg = write("untrained.yaml", R"(seed: 2
model:
  num_blocks: 2
  ratio: "0:1"
  embedding_dim: 64
task:
  kind: parity
  min_length: 2
  max_length: 32
)");
  const fs::path ckpt = dir_ / "init.ckpt";
  save_checkpoint(ckpt.string(), init_model(load_run_config(cfg)));
  const Result r = run_cli({"eval", "--checkpoint", ckpt.string(), "--config", cfg, "--samples", "1000"});
  ASSERT_EQ(r.code, cli::kExitOk) << r.err;
  const std::string row = r.out.substr(r.out.rfind("\n", r.out.size() - 2) + 1);
  std::vector<std::string> cols;
  std::stringstream ss(row);
  for (std::string c; std::getline(ss, c, ',');) cols.push_back(c);
  ASSERT_GE(cols.size(), 5u) << row;
  EXPECT_NEAR(std::stod(cols[4]), 0.0, 0.1) << row;
}

TEST_F(CliTest, GradcheckTinyCellModelsBelowOneInHundredThousand) {
  const std::string cfg = write("cells.yaml", R"(models:
  - {label: slstm, ratio: "0:1", num_blocks: 2, dim: 16, vocab: 11, steps: 8}
  - {label: mlstm, ratio: "1:0", num_blocks: 2, dim: 16, vocab: 11, steps: 8}
)");
  const Result r = run_cli({"gradcheck", "--config", cfg, "--threshold", "1e-5"});
  EXPECT_EQ(r.code, cli::kExitOk) << r.out;
  EXPECT_EQ(r.out.find("FAIL"), std::string::npos) << r.out;
}

TEST_F(CliTest, GradcheckExitCodes) {
  const std::string cfg = write("grad.yaml", R"(models:
  - label: tiny
    ratio: "1:1"
    num_blocks: 2
    dim: 4
    vocab: 5
    steps: 3
)");
  const Result ok = run_cli({"gradcheck", "--config", cfg});
  EXPECT_EQ(ok.code, cli::kExitOk) << ok.out;
  EXPECT_NE(ok.out.find("# tiny: worst"), std::string::npos);
  EXPECT_NE(ok.out.find("PASS"), std::string::npos);
  const Result strict = run_cli({"gradcheck", "--config", cfg, "--threshold", "1e-12"});
  EXPECT_EQ(strict.code, cli::kExitCheckFailed);
  EXPECT_NE(strict.out.find("FAIL"), std::string::npos);
}

TEST_F(CliTest, EquivcheckWorstTrialReruns) {
  const Result r = run_cli({"equivcheck", "--trials", "5", "--max-steps", "12", "--max-dim", "8"});
  ASSERT_EQ(r.code, cli::kExitOk) << r.out << r.err;
  EXPECT_NE(r.out.find("# PASS"), std::string::npos);
  // First data row: kind,seed,...,rel_error. Rerunning that seed alone reproduces the line.
  std::istringstream lines(r.out);
  std::string line;
  while (std::getline(lines, line) && line.rfind("kind,", 0) != 0) {
  }
  ASSERT_TRUE(std::getline(lines, line));
  const std::string kind = line.substr(0, line.find(','));
  const std::string rest = line.substr(line.find(',') + 1);
  const std::string seed = rest.substr(0, rest.find(','));
  const Result one = run_cli({"equivcheck", "--kind", kind, "--trial-seed", seed, "--max-steps", "12", "--max-dim", "8"});
  ASSERT_EQ(one.code, cli::kExitOk) << one.err;
  EXPECT_NE(one.out.find(line + "\n"), std::string::npos) << one.out << "\nvs\n" << line;
  EXPECT_EQ(run_cli({"equivcheck", "--trials", "2", "--max-steps", "4", "--max-dim", "4", "--threshold", "1e-300"}).code,
            cli::kExitCheckFailed);
}

}  // namespace
}  // namespace xlstm
