// Copyright (c) 2026, The conceptlm Authors
// SPDX-License-Identifier: Apache-2.0
//
// Synthetic concept-structured corpus: a word-level vocabulary partitioned
// into domains > concepts > member tokens, a template grammar that emits
// sequences with known content positions, and the ground-truth similarity
// benchmark derived from the concept hierarchy.

#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace conceptlm {

using TokenId = std::int32_t;

enum class TokenClass : std::uint8_t { kContent, kFunction, kSpecial };

std::string_view to_string(TokenClass c);
TokenClass token_class_from_string(std::string_view s);

struct VocabularySpec {
  int n_domains = 4;
  int concepts_per_domain = 10;
  int tokens_per_concept = 6;
  int n_function = 59;
  std::uint64_t seed = 0;
};

// Bijective token <-> id table with per-token class and concept hierarchy.
// Ids are dense: specials first, then content tokens grouped by concept, then
// function words.
class Vocabulary {
 public:
  static constexpr int kNoConcept = -1;
  static constexpr int kNumFunctionGroups = 4;

  Vocabulary() = default;
  // Validates every invariant; throws VocabularyError on violation.
  Vocabulary(std::vector<std::string> tokens, std::vector<TokenClass> token_class,
             std::vector<int> concept_of, std::vector<int> domain_of,
             std::uint64_t seed);

  int size() const { return static_cast<int>(tokens_.size()); }
  int num_concepts() const { return static_cast<int>(domain_of_.size()); }
  int num_domains() const { return num_domains_; }
  std::uint64_t seed() const { return seed_; }

  const std::string& token(TokenId id) const { return tokens_.at(id); }
  TokenClass token_class(TokenId id) const { return token_class_.at(id); }
  bool is_content(TokenId id) const { return token_class(id) == TokenClass::kContent; }
  // Concept id of a content token, kNoConcept otherwise.
  int concept_of(TokenId id) const { return concept_of_.at(id); }
  int domain_of_concept(int concept_id) const { return domain_of_.at(concept_id); }
  // Function-word slot group in [0, kNumFunctionGroups), -1 for other classes.
  int function_group(TokenId id) const;

  std::optional<TokenId> find(std::string_view token) const;
  // Throws VocabularyError for unknown strings.
  TokenId id_of(std::string_view token) const;
  TokenId bos() const { return bos_; }

  const std::vector<TokenId>& members(int concept_id) const { return members_.at(concept_id); }
  const std::vector<TokenId>& content_tokens() const { return content_; }
  const std::vector<TokenId>& function_words(int group) const { return function_groups_.at(group); }
  int num_function_groups() const { return static_cast<int>(function_groups_.size()); }

  const std::vector<std::string>& tokens() const { return tokens_; }
  const std::vector<TokenClass>& token_classes() const { return token_class_; }
  const std::vector<int>& concept_table() const { return concept_of_; }
  const std::vector<int>& domain_table() const { return domain_of_; }

  bool operator==(const Vocabulary& other) const;

 private:
  std::vector<std::string> tokens_;
  std::vector<TokenClass> token_class_;
  std::vector<int> concept_of_;
  std::vector<int> domain_of_;
  std::uint64_t seed_ = 0;

  int num_domains_ = 0;
  TokenId bos_ = 0;
  std::unordered_map<std::string, TokenId> index_;
  std::vector<std::vector<TokenId>> members_;
  std::vector<TokenId> content_;
  std::vector<int> function_group_;
  std::vector<std::vector<TokenId>> function_groups_;
};

inline constexpr std::string_view kBosToken = "<bos>";
inline constexpr int kNumSpecialTokens = 1;

Vocabulary build_vocabulary(const VocabularySpec& spec);
inline Vocabulary build_vocabulary(int n_domains, int concepts_per_domain, int tokens_per_concept,
                                   int n_function, std::uint64_t seed) {
  return build_vocabulary(VocabularySpec{n_domains, concepts_per_domain, tokens_per_concept,
                                         n_function, seed});
}

void write_vocabulary(const Vocabulary& vocab, std::ostream& out);
Vocabulary read_vocabulary(std::istream& in);

// A token sequence beginning with <bos>; content_positions index tokens that
// are eligible for concept supervision.
struct Sequence {
  std::vector<TokenId> token_ids;
  std::vector<int> content_positions;

  int length() const { return static_cast<int>(token_ids.size()); }
  bool operator==(const Sequence&) const = default;
};

// Throws VocabularyError when a content position is out of range, not
// strictly increasing, or not a content-class token.
void validate_sequence(const Sequence& seq, const Vocabulary& vocab);

// Realized content fraction of one sequence, excluding the <bos> slot.
double content_fraction(const Sequence& seq);

enum class TemplateProfile : std::uint8_t { kA, kB };

std::string_view to_string(TemplateProfile p);
TemplateProfile template_profile_from_string(std::string_view s);

struct GeneratorConfig {
  int n_sequences = 0;
  TemplateProfile profile = TemplateProfile::kA;
  double target_content_fraction = 0.28;
  int min_len = 8;
  int max_len = 64;
  // Probability that a content word continues the previous concept's
  // successor chain instead of drawing from the domain prior.
  double successor_prob = 0.75;
  // Zipf exponent of the member distribution inside each concept.
  double member_zipf = 1.0;
  std::uint64_t seed = 0;
};

// One sentence frame. Slot 'C' is a content word, digits '0'..'3' name the
// function-word group drawn for that slot.
struct Frame {
  std::string slots;
  int num_content() const;
  double content_fraction() const;
};

const std::vector<Frame>& sentence_frames();
// Base frame weights for a profile before tilting to the target fraction.
std::vector<double> profile_frame_weights(TemplateProfile profile);
// Frame mixture actually sampled for the given vocabulary and target.
// Throws ConfigError when the target fraction is unreachable.
std::vector<double> frame_mixture(const Vocabulary& vocab, TemplateProfile profile,
                                  double target_content_fraction);

struct GeneratedCorpus {
  std::vector<Sequence> sequences;
  // Frame ids emitted for each sequence, in order.
  std::vector<std::vector<int>> frames_used;
};

GeneratedCorpus generate_corpus_traced(const Vocabulary& vocab, const GeneratorConfig& cfg);
std::vector<Sequence> generate_corpus(const Vocabulary& vocab, const GeneratorConfig& cfg);

// Similarity grades on the concept hierarchy.
inline constexpr double kSameConceptScore = 1.0;
inline constexpr double kSameDomainScore = 0.5;
inline constexpr double kCrossDomainScore = 0.0;

struct SimilarityPair {
  TokenId a;
  TokenId b;
  double score;
  bool operator==(const SimilarityPair&) const = default;
};

class GroundTruthSimilarity {
 public:
  GroundTruthSimilarity() = default;
  explicit GroundTruthSimilarity(std::vector<SimilarityPair> pairs);

  const std::vector<SimilarityPair>& pairs() const { return pairs_; }
  // Symmetric lookup; nullopt for pairs outside the benchmark.
  std::optional<double> score(TokenId a, TokenId b) const;

 private:
  static std::uint64_t key(TokenId a, TokenId b);
  std::vector<SimilarityPair> pairs_;
  std::unordered_map<std::uint64_t, double> lookup_;
};

// All C(V_content, 2) content-token pairs, ordered by (a, b) with a < b.
GroundTruthSimilarity ground_truth_similarity(const Vocabulary& vocab);

// Tab-separated "token_a token_b score" lines.
void write_similarity(const GroundTruthSimilarity& sim, const Vocabulary& vocab, std::ostream& out);
GroundTruthSimilarity read_similarity(std::istream& in, const Vocabulary& vocab);

// Space-joined surface text.
std::string render(const Sequence& seq, const Vocabulary& vocab, bool include_bos = false);

}  // namespace conceptlm
