// Copyright (c) 2026, The conceptlm Authors
// SPDX-License-Identifier: Apache-2.0
//
// Next-token loss, gated concept-set loss and their lambda interpolation.
//
// For an annotation with synonym set S at a position whose target is T, the
// concept mass is the softmax probability of S u {T}. If the mass exceeds the
// threshold the annotation is gated (zero loss, zero gradient); otherwise it
// contributes -log(mass). Batch aggregation:
//   ntp     = mean NLL over every next-token position in the batch
//   concept = mean over active annotations (gated and empty ones excluded)
//   total   = (1 - lambda) * ntp + lambda * concept

#pragma once

#include <cstddef>
#include <span>

#include "conceptlm/annotation.hpp"
#include "conceptlm/model.hpp"

namespace conceptlm {

inline constexpr double kDefaultMassThreshold = 0.6;

struct ObjectiveConfig {
  double concept_weight = 0.0;  // lambda
  double mass_threshold = kDefaultMassThreshold;
  bool include_original_in_mass = true;

  void validate() const;
};

struct LossBreakdown {
  double ntp_loss = 0.0;
  double concept_loss = 0.0;
  double combined = 0.0;
  std::size_t gated_count = 0;
  std::size_t active_count = 0;
  std::size_t skipped_empty = 0;
  std::size_t ntp_positions = 0;
  double concept_weight = 0.0;
  double mass_threshold = kDefaultMassThreshold;

  std::size_t total_annotations() const { return gated_count + active_count + skipped_empty; }
};

// Mean of -log softmax(logits[i])[targets[i]]. Throws ShapeError on a
// row/target count mismatch.
double ntp_loss(const RowMatrix& logits, std::span<const TokenId> targets);

struct ConceptTerm {
  double loss = 0.0;
  double mass = 0.0;
  bool gated = false;
};

// Throws NumericalError on a non-finite row, VocabularyError on bad ids.
ConceptTerm concept_loss(std::span<const double> logit_row, std::span<const TokenId> synonyms, TokenId original,
                         double threshold, bool include_original_in_mass = true);

// Summed per-batch terms before interpolation.
struct BatchTerms {
  double ntp_sum = 0.0;
  std::size_t ntp_positions = 0;
  double concept_sum = 0.0;
  std::size_t active = 0;
  std::size_t gated = 0;
  std::size_t skipped_empty = 0;
};

LossBreakdown combined_loss(const BatchTerms& terms, double concept_weight,
                            double mass_threshold = kDefaultMassThreshold);

struct LossAndGrad {
  LossBreakdown loss;
  Gradients grads;
};

// Each sequence contributes inputs tokens[0..n-1) and targets tokens[1..n);
// an annotation at position p is scored on the logit row p - 1.
// Throws NumericalError naming the offending sequence when a loss is not
// finite, ContextError when a sequence does not fit the model context.
LossAndGrad loss_and_grad(const ModelParams& params, std::span<const AnnotatedSequence> batch,
                          const ObjectiveConfig& cfg);

// Same loss without the backward pass.
LossBreakdown evaluate_loss(const ModelParams& params, std::span<const AnnotatedSequence> batch,
                            const ObjectiveConfig& cfg);

}  // namespace conceptlm
