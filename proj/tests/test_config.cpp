// Copyright (c) 2026, The conceptlm Authors
// SPDX-License-Identifier: Apache-2.0

#include <catch_amalgamated.hpp>

#include <sys/wait.h>
#include <thread>
#include <unistd.h>

#include "conceptlm/config.hpp"
#include "conceptlm/error.hpp"
#include "conceptlm/manifest.hpp"
#include "conceptlm/util.hpp"
#include "support.hpp"

using namespace conceptlm;
using conceptlm::testing::TempDir;

namespace {

const std::string kHeader = R"("format": "conceptlm-config", "version": 1)";

RunEntry entry(const std::string& id) {
  RunEntry e;
  e.id = id;
  e.point.model_size = "desk";
  return e;
}

}  // namespace

TEST_CASE("absent keys take defaults", "[config]") {
  const ToolkitConfig c = parse_config("{" + kHeader + "}");
  const ToolkitConfig d;
  REQUIRE(c.seed == d.seed);
  REQUIRE(c.corpus.n_sequences == 2250);
  REQUIRE(c.train.learning_rate == 7e-5);
  REQUIRE(c.train.batch_size == 2);
  REQUIRE(c.train.objective.mass_threshold == 0.6);
  REQUIRE(c.concepts.k == 200);
  REQUIRE(c.concepts.cap == 10);
  REQUIRE(c.sweep.lambdas == std::vector<double>{0.0, 0.25, 0.5, 0.75, 1.0});
  REQUIRE(c.model_sizes.size() == 1);
}

TEST_CASE("shipped configs parse and round-trip canonically", "[config]") {
  for (const char* name : {"desk.json", "tiny.json"}) {
    const ToolkitConfig c = load_config(std::filesystem::path(CONCEPTLM_SOURCE_DIR) / "configs" / name);
    const std::string dumped = dump_config(c);
    REQUIRE(dump_config(parse_config(dumped)) == dumped);
  }
}

TEST_CASE("config errors", "[config]") {
  REQUIRE_THROWS_AS(parse_config("{}"), ConfigError);
  REQUIRE_THROWS_AS(parse_config("not json"), ConfigError);
  REQUIRE_THROWS_AS(parse_config(R"({"format": "conceptlm-config", "version": 2})"), ConfigError);
  REQUIRE_THROWS_AS(parse_config("{" + kHeader + R"(, "sed": 3})"), ConfigError);
  REQUIRE_THROWS_AS(parse_config("{" + kHeader + R"(, "train": {"lr": 0.1}})"), ConfigError);
  REQUIRE_THROWS_AS(parse_config("{" + kHeader + R"(, "seed": "seven"})"), ConfigError);
  REQUIRE_THROWS_AS(parse_config("{" + kHeader + R"(, "sweep": {"lambdas": [1.5]}})"), ConfigError);
  REQUIRE_THROWS_AS(parse_config("{" + kHeader + R"(, "sweep": {"modes": ["shuffled"]}})"), ConfigError);
  REQUIRE_THROWS_AS(parse_config("{" + kHeader + R"(, "concepts": {"provider": "magic"}})"), ConfigError);
  REQUIRE_THROWS_AS(load_config("/nonexistent/config.json"), Error);
}

TEST_CASE("derived seeds separate corpora and profiles", "[config]") {
  ToolkitConfig c;
  c.seed = 5;
  const auto a = training_corpus_config(c, TemplateProfile::kA);
  const auto b = training_corpus_config(c, TemplateProfile::kB);
  const auto h = held_out_corpus_config(c, TemplateProfile::kA);
  REQUIRE(a.seed != b.seed);
  REQUIRE(a.seed != h.seed);
  REQUIRE(h.n_sequences == c.corpus.held_out_sequences);
  REQUIRE(vocabulary_spec(c).seed != c.seed);
  c.seed = 6;
  REQUIRE(training_corpus_config(c, TemplateProfile::kA).seed != a.seed);
}

TEST_CASE("run ids", "[manifest]") {
  REQUIRE(base_run_id(TemplateProfile::kA, "desk") == "base-A-desk");
  GridPoint p{TemplateProfile::kB, "desk", 0.5, ConceptMode::kNoise, SupervisionMode::kLastOnly};
  REQUIRE(post_run_id(p) == "B-desk-noise-last_only-l0.5");
}

TEST_CASE("status transitions are monotone", "[manifest]") {
  using S = RunStatus;
  REQUIRE(status_transition_allowed(S::kPending, S::kRunning));
  REQUIRE(status_transition_allowed(S::kRunning, S::kDone));
  REQUIRE(status_transition_allowed(S::kRunning, S::kFailed));
  REQUIRE_FALSE(status_transition_allowed(S::kDone, S::kRunning));
  REQUIRE_FALSE(status_transition_allowed(S::kFailed, S::kPending));
  REQUIRE_FALSE(status_transition_allowed(S::kPending, S::kDone));

  RunManifest m;
  REQUIRE(m.add(entry("a")));
  REQUIRE_FALSE(m.add(entry("a")));
  m.set_status("a", S::kRunning);
  REQUIRE_THROWS_AS(m.set_status("a", S::kPending), ConfigError);
  m.set_status("a", S::kDone, "ok");
  m.set_artifact("a", "model", "runs/a/model.ckpt");
  REQUIRE_THROWS_AS(m.set_status("b", S::kRunning), ConfigError);

  const RunManifest back = RunManifest::from_json(m.to_json());
  REQUIRE(back.to_json() == m.to_json());
  REQUIRE(back.find("a")->status == S::kDone);
  REQUIRE(back.find("a")->artifacts.at("model") == "runs/a/model.ckpt");
}

TEST_CASE("manifest updates from threads are serialized", "[manifest]") {
  TempDir dir("manifest-threads");
  const auto path = dir / "manifest.json";
  std::vector<std::thread> ts;
  for (int t = 0; t < 4; ++t)
    ts.emplace_back([&, t] {
      for (int i = 0; i < 10; ++i)
        update_manifest(path, [&](RunManifest& m) { m.add(entry("t" + std::to_string(t) + "-" + std::to_string(i))); });
    });
  for (auto& t : ts) t.join();
  REQUIRE(read_manifest(path).runs().size() == 40);
}

TEST_CASE("manifest updates from processes are serialized", "[manifest]") {
  TempDir dir("manifest-procs");
  const auto path = dir / "manifest.json";
  std::vector<pid_t> kids;
  for (int p = 0; p < 3; ++p) {
    const pid_t pid = fork();
    if (pid == 0) {
      int rc = 0;
      try {
        for (int i = 0; i < 15; ++i)
          update_manifest(path, [&](RunManifest& m) { m.add(entry("p" + std::to_string(p) + "-" + std::to_string(i))); });
      } catch (...) {
        rc = 1;
      }
      _exit(rc);
    }
    kids.push_back(pid);
  }
  for (pid_t k : kids) {
    int status = 0;
    waitpid(k, &status, 0);
    REQUIRE(WIFEXITED(status));
    REQUIRE(WEXITSTATUS(status) == 0);
  }
  REQUIRE(read_manifest(path).runs().size() == 45);
}

TEST_CASE("manifest rejects removal and regression", "[manifest]") {
  TempDir dir("manifest-guard");
  const auto path = dir / "manifest.json";
  update_manifest(path, [](RunManifest& m) {
    m.add(entry("a"));
    m.set_status("a", RunStatus::kRunning);
  });
  REQUIRE_THROWS(update_manifest(path, [](RunManifest& m) { m = RunManifest{}; }));
  REQUIRE_THROWS_AS(update_manifest(path, [](RunManifest& m) { m.set_status("a", RunStatus::kPending); }), ConfigError);
  REQUIRE(read_manifest(path).find("a")->status == RunStatus::kRunning);
}

TEST_CASE("atomic writes and format_double", "[util]") {
  TempDir dir("util");
  write_file_atomic(dir / "sub" / "x.txt", "hello");
  REQUIRE(read_file(dir / "sub" / "x.txt") == "hello");
  write_file_atomic(dir / "sub" / "x.txt", "again");
  REQUIRE(read_file(dir / "sub" / "x.txt") == "again");
  REQUIRE(format_double(0.5) == "0.5");
  REQUIRE(std::stod(format_double(0.1 + 0.2)) == 0.1 + 0.2);
}
