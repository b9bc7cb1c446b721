// Copyright (c) 2026, The conceptlm Authors
// SPDX-License-Identifier: Apache-2.0
//
// Concept-set construction: rank next-token candidates with a model, keep the
// ones a filter provider judges interchangeable with the original token, and
// the two ablation transforms applied to finished datasets (synonym noise and
// supervision proportion).

#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <semaphore>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "conceptlm/annotation.hpp"
#include "conceptlm/model.hpp"

namespace conceptlm {

inline constexpr int kDefaultCandidateCount = 200;

// Top-k token ids from one logit row by descending softmax probability,
// ascending id on ties. Returns min(k, V) ids.
std::vector<TokenId> rank_candidates(std::span<const double> logit_row, int k);

// Candidates for the content token at `position`, scored on the prefix that
// ends just before it. Throws ConfigError if `position` is not a content
// position or k < 1.
std::vector<TokenId> extract_candidates(const ModelParams& params, const Sequence& seq, int position, int k);

// ---------------------------------------------------------------------------
// Filter providers

struct FilterRequest {
  const Vocabulary& vocab;
  const Sequence& sequence;
  int position;
  std::span<const TokenId> candidates;
};

class FilterProvider {
 public:
  enum class Kind { kOracle, kExternal };

  virtual ~FilterProvider() = default;
  virtual Kind kind() const = 0;
  // Token ids judged interchangeable with the original. May contain
  // duplicates, the original, or non-candidates; filter_synonyms cleans up.
  virtual std::vector<TokenId> select(const FilterRequest& request) const = 0;
};

// Ground truth: candidates sharing the original token's concept id.
class OracleProvider final : public FilterProvider {
 public:
  Kind kind() const override { return Kind::kOracle; }
  std::vector<TokenId> select(const FilterRequest& request) const override;
};

struct ExternalProviderConfig {
  std::string base_url = "http://127.0.0.1:8080";
  std::string path = "/v1/completions";
  std::string model = "llama-3.1-8b-instruct";
  double timeout_seconds = 60.0;
  int max_retries = 3;
  int concurrency = 4;
  double repetition_penalty = 1.1;
  int max_tokens = 256;
  std::chrono::milliseconds retry_backoff{200};
};

struct HttpReply {
  int status = -1;  // -1: no response (connection failure or timeout)
  std::string body;
};

// Sends one JSON request body, returns the raw reply.
using HttpTransport = std::function<HttpReply(const std::string& request_body)>;

HttpTransport make_http_transport(const ExternalProviderConfig& cfg);

// Prompts an instruction-tuned model with the synonym-selection template and
// parses its bracketed reply. Requests use greedy decoding.
class ExternalProvider final : public FilterProvider {
 public:
  explicit ExternalProvider(ExternalProviderConfig cfg);
  ExternalProvider(ExternalProviderConfig cfg, HttpTransport transport);

  Kind kind() const override { return Kind::kExternal; }
  // Throws TransportError once 1 + max_retries attempts have failed, ParseError on a
  // reply outside the bracket grammar.
  std::vector<TokenId> select(const FilterRequest& request) const override;

  std::string request_body(const FilterRequest& request) const;

 private:
  ExternalProviderConfig cfg_;
  HttpTransport transport_;
  std::unique_ptr<std::counting_semaphore<>> slots_;
};

std::string_view synonym_prompt_template();
std::string format_synonym_prompt(std::string_view target, std::string_view input_sequence,
                                  std::string_view decoded_tokens);

// Parses "[w1, w2, ...]" (surrounding whitespace allowed). Throws ParseError
// for anything else. Returns the words in reply order, duplicates kept.
std::vector<std::string> parse_synonym_reply(std::string_view reply);

// Extracts the generated text from an OpenAI-style completion response.
std::string completion_text(const std::string& response_body);

struct FilterStats {
  std::size_t duplicates_removed = 0;
  std::size_t non_candidates_removed = 0;
  std::size_t truncated = 0;
  FilterStats& operator+=(const FilterStats& o);
};

// Provider selection restricted to the candidate list, deduplicated, original
// removed, in candidate rank order, truncated to `cap`.
std::vector<TokenId> filter_synonyms(std::span<const TokenId> candidates, const Vocabulary& vocab, const Sequence& seq,
                                     int position, const FilterProvider& provider, int cap,
                                     FilterStats* stats = nullptr);

struct BuildOptions {
  int k = kDefaultCandidateCount;
  int cap = kDefaultSynonymCap;
  int jobs = 1;
};

struct BuildResult {
  Dataset data;
  FilterStats stats;
};

// One annotation per content position; empty synonym sets are kept.
BuildResult build_dataset(const ModelParams& params, const Vocabulary& vocab, const std::vector<Sequence>& corpus,
                          const FilterProvider& provider, const BuildOptions& opts = {});

// ---------------------------------------------------------------------------
// Ablations

// Replaces every synonym set with a same-size uniform draw (without
// replacement) from the distinct synonym tokens of the whole dataset,
// excluding the annotation's own original. Throws SamplingError when the pool
// is too small.
Dataset randomize_synonyms(const Dataset& data, std::uint64_t seed);

enum class SupervisionMode : std::uint8_t { kAll, kHalf, kQuarter, kLastOnly };

std::string_view to_string(SupervisionMode m);
SupervisionMode supervision_mode_from_string(std::string_view s);

struct SubsampleResult {
  Dataset data;
  // Sequences dropped by last_only because they do not end in an annotated
  // content word.
  std::size_t filtered_sequences = 0;
};

// half/quarter keep max(1, floor(n * fraction)) annotations of each
// sequence that has any, drawn uniformly without replacement.
SubsampleResult subsample_supervision(const Dataset& data, SupervisionMode mode, std::uint64_t seed);

}  // namespace conceptlm
