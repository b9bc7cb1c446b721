// Copyright (c) 2026, The conceptlm Authors
// SPDX-License-Identifier: Apache-2.0

#include "conceptlm/interchange.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <istream>
#include <ostream>
#include <unordered_set>

#include <json.hpp>

#include "conceptlm/error.hpp"
#include "conceptlm/util.hpp"

namespace conceptlm {

std::size_t count_annotations(const Dataset& data) {
  std::size_t n = 0;
  for (const auto& item : data) n += item.concepts.size();
  return n;
}

Dataset unannotated(const std::vector<Sequence>& corpus) {
  Dataset out;
  out.reserve(corpus.size());
  for (const auto& s : corpus) out.push_back({s, {}});
  return out;
}

std::vector<Sequence> sequences_of(const Dataset& data) {
  std::vector<Sequence> out;
  out.reserve(data.size());
  for (const auto& item : data) out.push_back(item.sequence);
  return out;
}

std::string to_jsonl_record(const AnnotatedSequence& item, const Vocabulary& vocab) {
  nlohmann::ordered_json rec;
  std::vector<std::string> tokens;
  tokens.reserve(item.sequence.token_ids.size());
  for (TokenId t : item.sequence.token_ids) tokens.push_back(vocab.token(t));
  rec["tokens"] = std::move(tokens);
  rec["content_positions"] = item.sequence.content_positions;
  auto concepts = nlohmann::ordered_json::array();
  for (const auto& a : item.concepts) {
    nlohmann::ordered_json c;
    c["pos"] = a.position;
    c["original"] = vocab.token(a.original);
    std::vector<std::string> syn;
    for (TokenId t : a.synonyms) syn.push_back(vocab.token(t));
    c["synonyms"] = std::move(syn);
    concepts.push_back(std::move(c));
  }
  rec["concepts"] = std::move(concepts);
  return rec.dump();
}

void export_jsonl(const Dataset& data, const Vocabulary& vocab, std::ostream& out) {
  for (const auto& item : data) out << to_jsonl_record(item, vocab) << '\n';
}

void export_jsonl(const Dataset& data, const Vocabulary& vocab, const std::filesystem::path& path) {
  std::ostringstream out;
  export_jsonl(data, vocab, out);
  write_file_atomic(path, out.str());
}

namespace {

AnnotatedSequence parse_record(const nlohmann::json& rec, const Vocabulary& vocab, const IngestOptions& opts,
                               std::size_t lineno) {
  if (!rec.is_object()) throw ParseError("record is not an object", lineno);
  for (const char* key : {"tokens", "content_positions", "concepts"})
    if (!rec.contains(key) || !rec[key].is_array()) throw ParseError(std::string("missing array '") + key + "'", lineno);

  AnnotatedSequence item;
  for (const auto& t : rec["tokens"]) {
    if (!t.is_string()) throw ParseError("token is not a string", lineno);
    item.sequence.token_ids.push_back(vocab.id_of(t.get<std::string>()));
  }
  for (const auto& p : rec["content_positions"]) {
    if (!p.is_number_integer()) throw ParseError("content position is not an integer", lineno);
    item.sequence.content_positions.push_back(p.get<int>());
  }
  try {
    validate_sequence(item.sequence, vocab);
  } catch (const VocabularyError& e) {
    throw VocabularyError("line " + std::to_string(lineno) + ": " + e.what());
  }

  const auto& positions = item.sequence.content_positions;
  int prev = -1;
  for (const auto& c : rec["concepts"]) {
    if (!c.is_object() || !c.contains("pos") || !c.contains("original") || !c.contains("synonyms") ||
        !c["pos"].is_number_integer() || !c["original"].is_string() || !c["synonyms"].is_array())
      throw ParseError("concept entry needs integer 'pos', string 'original', array 'synonyms'", lineno);
    ConceptAnnotation a;
    a.position = c["pos"].get<int>();
    if (a.position <= prev) throw ParseError("concept positions must be strictly increasing", lineno);
    prev = a.position;
    if (!std::binary_search(positions.begin(), positions.end(), a.position))
      throw ParseError("concept at position " + std::to_string(a.position) + " is not a content position", lineno);
    a.original = vocab.id_of(c["original"].get<std::string>());
    if (a.original != item.sequence.token_ids[a.position])
      throw ParseError("concept original does not match the token at position " + std::to_string(a.position), lineno);
    if (static_cast<int>(c["synonyms"].size()) > opts.synonym_cap)
      throw CapError("line " + std::to_string(lineno) + ": synonym list of " + std::to_string(c["synonyms"].size()) +
                     " exceeds cap " + std::to_string(opts.synonym_cap));
    std::unordered_set<TokenId> seen;
    for (const auto& s : c["synonyms"]) {
      if (!s.is_string()) throw ParseError("synonym is not a string", lineno);
      const TokenId id = vocab.id_of(s.get<std::string>());
      if (id == a.original) throw ParseError("synonym list repeats the original token", lineno);
      if (!seen.insert(id).second) throw ParseError("duplicate synonym '" + s.get<std::string>() + "'", lineno);
      a.synonyms.push_back(id);
    }
    item.concepts.push_back(std::move(a));
  }
  return item;
}

}  // namespace

IngestResult ingest_annotated(std::istream& in, const Vocabulary& vocab, const IngestOptions& opts) {
  IngestResult result;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    nlohmann::json rec;
    try {
      rec = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError(e.what(), lineno);
    }
    AnnotatedSequence item = parse_record(rec, vocab, opts, lineno);
    if (opts.min_chars > 0 && render(item.sequence, vocab).size() < opts.min_chars) {
      ++result.rejected_short;
      continue;
    }
    result.data.push_back(std::move(item));
  }
  return result;
}

IngestResult ingest_annotated(const std::filesystem::path& path, const Vocabulary& vocab, const IngestOptions& opts) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  return ingest_annotated(in, vocab, opts);
}

}  // namespace conceptlm
