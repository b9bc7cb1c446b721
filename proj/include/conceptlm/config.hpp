// Copyright (c) 2026, The conceptlm Authors
// SPDX-License-Identifier: Apache-2.0
//
// The single configuration file shared by every command. JSON with a
// format tag and schema version; absent keys take defaults, unknown keys
// are rejected.

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "conceptlm/conceptset.hpp"
#include "conceptlm/corpus.hpp"
#include "conceptlm/model.hpp"
#include "conceptlm/stats.hpp"
#include "conceptlm/trainer.hpp"

namespace conceptlm {

inline constexpr std::string_view kConfigFormat = "conceptlm-config";
inline constexpr int kConfigVersion = 1;

struct CorpusSettings {
  int n_sequences = 2250;
  int held_out_sequences = 300;
  double target_content_fraction = 0.28;
  int min_len = 8;
  int max_len = 64;
  double successor_prob = 0.75;
  double member_zipf = 1.0;
};

struct ModelSize {
  std::string name = "desk";
  // vocab_size is taken from the vocabulary.
  ModelConfig model;
  bool operator==(const ModelSize&) const = default;
};

// NTP training of the base model before post-training. Zero epochs makes the
// base model the random initialization.
struct PretrainSettings {
  int epochs = 0;
  double learning_rate = 7e-5;
  int batch_size = 2;
};

struct ConceptSettings {
  int k = kDefaultCandidateCount;
  int cap = kDefaultSynonymCap;
  std::string provider = "oracle";  // oracle | external
  ExternalProviderConfig external;
};

enum class ConceptMode : std::uint8_t { kConcepts, kNoise };
std::string_view to_string(ConceptMode m);
ConceptMode concept_mode_from_string(std::string_view s);

struct SweepGrid {
  std::vector<double> lambdas{0.0, 0.25, 0.5, 0.75, 1.0};
  std::vector<ConceptMode> modes{ConceptMode::kConcepts};
  std::vector<SupervisionMode> proportions{SupervisionMode::kAll};
  std::vector<TemplateProfile> profiles{TemplateProfile::kA};
};

struct EvalSettings {
  std::size_t clustering_sample = 200;
  std::size_t bootstrap_resamples = kDefaultBootstrapResamples;
  double bootstrap_level = kDefaultBootstrapLevel;
};

struct ToolkitConfig {
  std::uint64_t seed = 0;
  VocabularySpec vocabulary;  // seed is derived from the master seed
  CorpusSettings corpus;
  std::vector<ModelSize> model_sizes{ModelSize{}};
  PretrainSettings pretrain;
  ConceptSettings concepts;
  TrainConfig train;  // seed and concept_weight are set per run
  SweepGrid sweep;
  EvalSettings eval;

  // Throws ConfigError.
  void validate() const;
};

// Throws ConfigError for malformed JSON and schema violations.
ToolkitConfig parse_config(std::string_view text);
ToolkitConfig load_config(const std::filesystem::path& path);
// Canonical form: every field, fixed key order.
std::string dump_config(const ToolkitConfig& cfg);

// Derived settings shared by the commands.
VocabularySpec vocabulary_spec(const ToolkitConfig& cfg);
GeneratorConfig training_corpus_config(const ToolkitConfig& cfg, TemplateProfile profile);
GeneratorConfig held_out_corpus_config(const ToolkitConfig& cfg, TemplateProfile profile);
ModelConfig model_config(const ToolkitConfig& cfg, const ModelSize& size, const Vocabulary& vocab);
const ModelSize& find_model_size(const ToolkitConfig& cfg, std::string_view name);

}  // namespace conceptlm
