// Copyright (c) 2026, The conceptlm Authors
// SPDX-License-Identifier: Apache-2.0

#include <catch_amalgamated.hpp>

#include <cstdlib>
#include <sys/wait.h>

#include "conceptlm/sweep.hpp"
#include "conceptlm/util.hpp"
#include "support.hpp"

using conceptlm::read_file;
using conceptlm::write_file_atomic;
using conceptlm::testing::TempDir;
namespace fs = std::filesystem;

namespace {

const std::string kTiny = std::string(CONCEPTLM_SOURCE_DIR) + "/configs/tiny.json";

// Exit code of a shell command run with the CLI binary prepended.
int cli(const std::string& args, const std::string& env = "") {
  const std::string cmd = env + " '" + std::string(CONCEPTLM_CLI) + "' " + args + " >/dev/null 2>&1";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

}  // namespace

TEST_CASE("missing or bad config is a config error", "[cli]") {
  TempDir d("cli-bad");
  REQUIRE(cli("gen-corpus --run-root " + d.path().string()) == 2);
  REQUIRE(cli("--config /nonexistent.json gen-corpus --run-root " + d.path().string()) != 0);
  write_file_atomic(d / "bad.json", R"({"format": "conceptlm-config", "version": 1, "bogus": 1})");
  REQUIRE(cli("--config " + (d / "bad.json").string() + " gen-corpus") == 2);
  REQUIRE(cli("no-such-command") != 0);
  REQUIRE(cli("") != 0);
}

TEST_CASE("gen-corpus is deterministic and honours the seed flag", "[cli]") {
  TempDir a("cli-a"), b("cli-b"), c("cli-c");
  REQUIRE(cli("--config " + kTiny + " --run-root " + a.path().string() + " gen-corpus") == 0);
  REQUIRE(cli("--config " + kTiny + " --run-root " + b.path().string() + " gen-corpus") == 0);
  REQUIRE(cli("--config " + kTiny + " --seed 99 --run-root " + c.path().string() + " gen-corpus") == 0);
  for (const char* f : {"data/vocab.json", "data/corpus-A.jsonl", "data/heldout-B.jsonl", "data/similarity.tsv"}) {
    REQUIRE(fs::exists(a / f));
    REQUIRE(read_file(a / f) == read_file(b / f));
  }
  REQUIRE(read_file(a / "data/corpus-A.jsonl") != read_file(c / "data/corpus-A.jsonl"));
}

TEST_CASE("run root comes from the flag, then the environment", "[cli]") {
  TempDir env_root("cli-env"), flag_root("cli-flag");
  const std::string env = std::string(conceptlm::kRunRootEnv) + "='" + env_root.path().string() + "'";
  REQUIRE(cli("--config " + kTiny + " gen-corpus", env) == 0);
  REQUIRE(fs::exists(env_root / "data/vocab.json"));
  REQUIRE(cli("--config " + kTiny + " --run-root " + flag_root.path().string() + " gen-corpus", env) == 0);
  REQUIRE(fs::exists(flag_root / "data/vocab.json"));
}

TEST_CASE("sweep, eval and report through the CLI", "[cli]") {
  TempDir d("cli-sweep");
  const std::string root = " --run-root " + d.path().string();
  REQUIRE(cli("--config " + kTiny + root + " --jobs 2 sweep") == 0);
  REQUIRE(cli(root + " eval all") == 0);
  REQUIRE(cli(root + " report") == 0);
  REQUIRE(fs::exists(d / "report/eval_report.csv"));
  REQUIRE(fs::exists(d / "report/summary.txt"));
  REQUIRE(cli(root + " eval no-such-run") == 2);
}

TEST_CASE("build-concepts and train on exported files", "[cli]") {
  TempDir d("cli-train");
  const std::string root = " --run-root " + d.path().string();
  REQUIRE(cli("--config " + kTiny + root + " sweep") == 0);
  const std::string base = (d / "base/base-A-tiny/model.ckpt").string();
  const std::string out = (d / "manual.concepts.jsonl").string();
  REQUIRE(cli("--config " + kTiny + root + " build-concepts --model " + base + " --corpus " +
              (d / "data/corpus-A.jsonl").string() + " --out " + out) == 0);
  REQUIRE(read_file(out) == read_file(d / "base/base-A-tiny/concepts.jsonl"));
  REQUIRE(cli("--config " + kTiny + root + " train --dataset " + out + " --init " + base + " --lambda 0.5 --model-size tiny --out " +
              (d / "manual").string()) == 0);
  REQUIRE(fs::exists(d / "manual/model.ckpt"));
  REQUIRE(fs::exists(d / "manual/epochs.csv"));
  REQUIRE(cli("--config " + kTiny + root + " train --dataset " + out + " --lambda 2 --out " + (d / "x").string()) != 0);
}
