// Copyright (c) 2026, The conceptlm Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <vector>

#include "conceptlm/corpus.hpp"

namespace conceptlm {

inline constexpr int kDefaultSynonymCap = 10;

// Contextual synonym set for the content token at `position`. The original
// token is never stored in `synonyms`; the objective always counts it.
// Synonyms keep candidate rank order.
struct ConceptAnnotation {
  int position = 0;
  TokenId original = 0;
  std::vector<TokenId> synonyms;

  bool operator==(const ConceptAnnotation&) const = default;
};

struct AnnotatedSequence {
  Sequence sequence;
  std::vector<ConceptAnnotation> concepts;

  bool operator==(const AnnotatedSequence&) const = default;
};

using Dataset = std::vector<AnnotatedSequence>;

std::size_t count_annotations(const Dataset& data);

// Wraps raw sequences with no concept supervision.
Dataset unannotated(const std::vector<Sequence>& corpus);
std::vector<Sequence> sequences_of(const Dataset& data);

}  // namespace conceptlm
