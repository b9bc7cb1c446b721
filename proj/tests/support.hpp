// Copyright (c) 2026, The conceptlm Authors
// SPDX-License-Identifier: Apache-2.0
//
// Shared fixtures for the unit tests.

#pragma once

#include <atomic>
#include <filesystem>
#include <string>
#include <unistd.h>

#include "conceptlm/annotation.hpp"
#include "conceptlm/corpus.hpp"
#include "conceptlm/model.hpp"

namespace conceptlm::testing {

// Directory removed on scope exit.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("conceptlm-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& rel) const { return path_ / rel; }

 private:
  std::filesystem::path path_;
};

inline Vocabulary small_vocab(std::uint64_t seed = 11) { return build_vocabulary(2, 3, 3, 12, seed); }

inline ModelConfig small_model(int vocab_size, int d_model = 8, int n_heads = 2, int n_layers = 1,
                               int max_context = 12) {
  ModelConfig c;
  c.vocab_size = vocab_size;
  c.d_model = d_model;
  c.n_heads = n_heads;
  c.n_layers = n_layers;
  c.max_context = max_context;
  return c;
}

// Scales every parameter so logits are far from uniform.
inline ModelParams sharp_params(const ModelConfig& cfg, std::uint64_t seed, double scale = 25.0) {
  ModelParams p = init_params(cfg, seed);
  for (const auto& t : p.tensors())
    if (t.name.find("ln") == std::string::npos)
      for (std::size_t i = 0; i < t.size(); ++i) p.data()[t.offset + i] *= scale;
  return p;
}

// Annotates every content position with the other members of its concept.
inline Dataset oracle_annotate(const std::vector<Sequence>& seqs, const Vocabulary& vocab) {
  Dataset out;
  for (const auto& s : seqs) {
    AnnotatedSequence a{s, {}};
    for (int p : s.content_positions) {
      ConceptAnnotation c{p, s.token_ids[p], {}};
      for (TokenId m : vocab.members(vocab.concept_of(s.token_ids[p])))
        if (m != c.original) c.synonyms.push_back(m);
      a.concepts.push_back(std::move(c));
    }
    out.push_back(std::move(a));
  }
  return out;
}

}  // namespace conceptlm::testing
