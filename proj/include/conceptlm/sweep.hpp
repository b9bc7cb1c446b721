// Copyright (c) 2026, The conceptlm Authors
// SPDX-License-Identifier: Apache-2.0
//
// Run-root layout and the sweep driver. A run root holds one sweep:
//
//   config.json                 snapshot of the config that created it
//   manifest.json               run entries and their status
//   data/                       vocabulary, similarity benchmark, corpora
//   base/<id>/                  pretrained base model and its concept sets
//   runs/<id>/                  one post-training run per grid point
//
// Every file referenced from the manifest is relative to the run root.

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "conceptlm/config.hpp"
#include "conceptlm/eval.hpp"
#include "conceptlm/manifest.hpp"

namespace conceptlm {

inline constexpr const char* kRunRootEnv = "CONCEPTLM_RUN_ROOT";

namespace layout {
std::filesystem::path config(const std::filesystem::path& root);
std::filesystem::path manifest(const std::filesystem::path& root);
std::filesystem::path vocabulary(const std::filesystem::path& root);
std::filesystem::path similarity(const std::filesystem::path& root);
std::filesystem::path corpus(const std::filesystem::path& root, TemplateProfile p);
std::filesystem::path held_out(const std::filesystem::path& root, TemplateProfile p);
// Relative to the root.
std::filesystem::path base_dir(const std::string& base_id);
std::filesystem::path run_dir(const std::string& run_id);
}  // namespace layout

// Per-run seed: derive_seed(derive_seed(master, tag), fnv1a64(run id)).
std::uint64_t fnv1a64(std::string_view s);
std::uint64_t run_seed(std::uint64_t master, std::uint64_t tag, std::string_view run_id);

std::unique_ptr<FilterProvider> make_provider(const ConceptSettings& cfg);

// Corpora and benchmark of a run root. Generated on first use and read back
// afterwards, so every process sees the same files.
struct SweepData {
  Vocabulary vocab;
  GroundTruthSimilarity similarity;
  std::map<TemplateProfile, std::vector<Sequence>> training;
  std::map<TemplateProfile, std::vector<Sequence>> held_out;  // both profiles, always
};

SweepData prepare_data(const ToolkitConfig& cfg, const std::filesystem::path& root,
                       const std::vector<TemplateProfile>& training_profiles);

struct DomainMetrics {
  double content_ppl = 0.0;
  double global_ppl = 0.0;
  double content_acc = 0.0;
  double global_acc = 0.0;
  double clustering_score = 0.0;
  double centroid_similarity = 0.0;
  double spearman = 0.0;
  std::size_t truncated = 0;
};

inline constexpr const char* kInDomain = "in_domain";
inline constexpr const char* kOutOfDomain = "ood";

// Writes eval/<domain>.records.csv and eval/metrics.json under `run_rel`
// and returns the metrics keyed by domain.
std::map<std::string, DomainMetrics> evaluate_model(const ToolkitConfig& cfg, const std::filesystem::path& root,
                                                    const SweepData& data, const ModelParams& params,
                                                    TemplateProfile trained_on, const std::string& base_id,
                                                    const std::filesystem::path& run_rel, std::uint64_t seed);

std::map<std::string, DomainMetrics> read_metrics(const std::filesystem::path& path);
void write_records_csv(const std::vector<PerTokenRecord>& records, const std::filesystem::path& path);
std::vector<PerTokenRecord> read_records_csv(const std::filesystem::path& path);

struct SweepOptions {
  int jobs = 1;
  bool quiet = false;
};

struct SweepSummary {
  std::size_t total = 0;
  std::size_t done = 0;
  std::size_t failed = 0;
  std::size_t skipped = 0;  // already done before this invocation, or owned by a live process
};

// The grid points of a config, in manifest order.
std::vector<RunEntry> plan_runs(const ToolkitConfig& cfg);

// Creates or resumes the sweep in `root`. Throws ConfigError when `root`
// already holds a sweep created from a different config.
SweepSummary run_sweep(const ToolkitConfig& cfg, const std::filesystem::path& root, const SweepOptions& opts = {});

// Re-evaluates finished runs; `run_id` is an id or "all". Unfinished runs are
// skipped with a note in the returned list.
struct EvalOutcome {
  std::string run_id;
  bool evaluated = false;
  std::string note;
};
std::vector<EvalOutcome> evaluate_runs(const std::filesystem::path& root, const std::string& run_id);

}  // namespace conceptlm
