// Copyright (c) 2026, The conceptlm Authors
// SPDX-License-Identifier: Apache-2.0
//
// Evaluation battery: per-token scoring, content-word and global perplexity
// and accuracy, hidden-state clustering geometry, single-word semantic
// alignment against graded similarity, and paired bootstrap intervals.

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "conceptlm/annotation.hpp"
#include "conceptlm/model.hpp"
#include "conceptlm/stats.hpp"

namespace conceptlm {

struct PerTokenRecord {
  std::size_t sequence_id = 0;
  int position = 0;  // index of the predicted token
  bool is_content = false;
  double nll = 0.0;  // nats
  bool correct = false;  // argmax (lowest id on ties) equals the target
};

struct ScoreResult {
  std::vector<PerTokenRecord> records;
  std::size_t truncated = 0;  // sequences cut to the model context
};

// One record per next-token position of every sequence. Sequences longer than
// max_context + 1 are truncated and counted.
ScoreResult score_corpus(const ModelParams& params, const std::vector<Sequence>& corpus);

std::vector<PerTokenRecord> content_records(std::span<const PerTokenRecord> records);

double mean_nll(std::span<const PerTokenRecord> records);
double accuracy(std::span<const PerTokenRecord> records);
// exp(mean nll) over all records.
double perplexity(std::span<const PerTokenRecord> records);

// Both throw EmptySetError when no content record exists.
double content_word_ppl(std::span<const PerTokenRecord> records);
double content_accuracy(std::span<const PerTokenRecord> records);
double global_ppl(std::span<const PerTokenRecord> records);
double global_accuracy(std::span<const PerTokenRecord> records);

struct ClusteringResult {
  double clustering_score = 0.0;  // intra - inter
  double centroid_similarity = 0.0;
  double intra = 0.0;
  double inter = 0.0;
  std::size_t groups = 0;
  std::size_t vectors = 0;
  std::size_t single_vector_groups = 0;
};

// Geometry of pre-grouped vectors. Intra is the mean cosine over all pairs
// inside a group, inter the mean over all pairs from different groups,
// centroid similarity the mean pairwise cosine of group means.
ClusteringResult clustering_from_groups(const std::vector<std::vector<Eigen::VectorXd>>& groups);

// Draws up to `sample` sequences carrying a non-empty synonym set, picks one
// such annotation per sequence, substitutes the original and each synonym,
// and collects the final-layer hidden states at that position. Vectors are
// grouped by the concept of the original token, pooled across sequences.
ClusteringResult clustering_metrics(const ModelParams& params, const Vocabulary& vocab, const Dataset& annotated,
                                    std::size_t sample, std::uint64_t seed);

// L2-normalized mean of final hidden states over the probe `<bos> word`,
// excluding the marker. Throws NumericalError on a zero vector.
Eigen::VectorXd word_embedding(const ModelParams& params, const Vocabulary& vocab, TokenId word);

double cosine(const Eigen::VectorXd& a, const Eigen::VectorXd& b);

struct AlignmentResult {
  double spearman = 0.0;
  std::size_t pairs = 0;
};

AlignmentResult semantic_alignment(const ModelParams& params, const Vocabulary& vocab,
                                   const GroundTruthSimilarity& benchmark);

enum class PairedMetric : std::uint8_t { kAccuracy, kNll };

// CI of mean(b - a) over records aligned on (sequence id, position).
// Throws PairingError when the two lists are not aligned one-to-one.
BootstrapCI paired_bootstrap(std::span<const PerTokenRecord> a, std::span<const PerTokenRecord> b, PairedMetric metric,
                             std::size_t resamples = kDefaultBootstrapResamples,
                             double level = kDefaultBootstrapLevel, std::uint64_t seed = 0);

}  // namespace conceptlm
