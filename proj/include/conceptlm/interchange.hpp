// Copyright (c) 2026, The conceptlm Authors
// SPDX-License-Identifier: Apache-2.0
//
// JSONL interchange: one record per sequence,
//   {"tokens": [...], "content_positions": [...],
//    "concepts": [{"pos": p, "original": w, "synonyms": [...]}, ...]}

#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <string>

#include "conceptlm/annotation.hpp"

namespace conceptlm {

struct IngestOptions {
  int synonym_cap = kDefaultSynonymCap;
  // Records whose rendered text is shorter than this are dropped and counted.
  // Zero keeps everything.
  std::size_t min_chars = 0;
};

struct IngestResult {
  Dataset data;
  std::size_t rejected_short = 0;
};

std::string to_jsonl_record(const AnnotatedSequence& item, const Vocabulary& vocab);
void export_jsonl(const Dataset& data, const Vocabulary& vocab, std::ostream& out);
void export_jsonl(const Dataset& data, const Vocabulary& vocab, const std::filesystem::path& path);

// Throws ParseError (with line number) on malformed records, VocabularyError on
// unknown tokens or bad positions, CapError when a synonym list exceeds the cap.
IngestResult ingest_annotated(std::istream& in, const Vocabulary& vocab, const IngestOptions& opts = {});
IngestResult ingest_annotated(const std::filesystem::path& path, const Vocabulary& vocab,
                              const IngestOptions& opts = {});

}  // namespace conceptlm
