// Copyright (c) 2026, The conceptlm Authors
// SPDX-License-Identifier: Apache-2.0

#include <catch_amalgamated.hpp>

#include <set>
#include <sstream>

#include "conceptlm/error.hpp"
#include "conceptlm/interchange.hpp"
#include "support.hpp"

using namespace conceptlm;
using conceptlm::testing::small_vocab;

TEST_CASE("vocabulary layout and hierarchy", "[corpus]") {
  const Vocabulary v = build_vocabulary(3, 4, 5, 20, 42);
  REQUIRE(v.size() == kNumSpecialTokens + 3 * 4 * 5 + 20);
  REQUIRE(v.num_concepts() == 12);
  REQUIRE(v.num_domains() == 3);
  REQUIRE(v.token(v.bos()) == kBosToken);
  REQUIRE(v.token_class(v.bos()) == TokenClass::kSpecial);

  std::set<std::string> seen;
  for (TokenId id = 0; id < v.size(); ++id) {
    REQUIRE(seen.insert(v.token(id)).second);
    REQUIRE(v.id_of(v.token(id)) == id);
  }
  for (int c = 0; c < v.num_concepts(); ++c) {
    REQUIRE(v.members(c).size() == 5);
    for (TokenId m : v.members(c)) {
      REQUIRE(v.is_content(m));
      REQUIRE(v.concept_of(m) == c);
    }
  }
  int function_words = 0;
  for (int g = 0; g < v.num_function_groups(); ++g) function_words += static_cast<int>(v.function_words(g).size());
  REQUIRE(function_words == 20);
  REQUIRE_THROWS_AS(v.id_of("no-such-token"), VocabularyError);
}

TEST_CASE("vocabulary is a pure function of its settings and round-trips", "[corpus]") {
  const Vocabulary a = small_vocab(5);
  REQUIRE(a == small_vocab(5));
  REQUIRE_FALSE(a == small_vocab(6));
  std::stringstream s;
  write_vocabulary(a, s);
  REQUIRE(read_vocabulary(s) == a);
}

TEST_CASE("generated corpus hits the content target and is deterministic", "[corpus]") {
  const Vocabulary v = build_vocabulary(4, 10, 6, 59, 3);
  GeneratorConfig cfg;
  cfg.n_sequences = 400;
  cfg.seed = 9;
  const auto a = generate_corpus(v, cfg);
  REQUIRE(a == generate_corpus(v, cfg));
  REQUIRE(a.size() == 400);

  double content = 0.0, total = 0.0;
  for (const auto& s : a) {
    REQUIRE_NOTHROW(validate_sequence(s, v));
    REQUIRE(s.token_ids.front() == v.bos());
    REQUIRE(s.length() >= cfg.min_len);
    REQUIRE(s.length() <= cfg.max_len);
    content += static_cast<double>(s.content_positions.size());
    total += static_cast<double>(s.length() - 1);
    for (std::size_t i = 1; i < s.token_ids.size(); ++i) {
      const bool listed = std::binary_search(s.content_positions.begin(), s.content_positions.end(), int(i));
      REQUIRE(listed == v.is_content(s.token_ids[i]));
    }
  }
  REQUIRE(content / total == Catch::Approx(0.28).margin(0.03));

  cfg.seed = 10;
  REQUIRE_FALSE(a == generate_corpus(v, cfg));
}

TEST_CASE("template profiles differ in frame mixture", "[corpus]") {
  const Vocabulary v = build_vocabulary(4, 10, 6, 59, 3);
  const auto a = frame_mixture(v, TemplateProfile::kA, 0.28);
  const auto b = frame_mixture(v, TemplateProfile::kB, 0.28);
  REQUIRE(a.size() == sentence_frames().size());
  REQUIRE(a != b);
  REQUIRE_THROWS_AS(frame_mixture(v, TemplateProfile::kA, 0.99), ConfigError);
}

TEST_CASE("validate_sequence rejects malformed positions", "[corpus]") {
  const Vocabulary v = small_vocab();
  const TokenId c = v.content_tokens().front();
  const TokenId f = v.function_words(0).front();
  REQUIRE_NOTHROW(validate_sequence({{v.bos(), f, c}, {2}}, v));
  REQUIRE_THROWS_AS(validate_sequence({{v.bos(), f, c}, {1}}, v), VocabularyError);
  REQUIRE_THROWS_AS(validate_sequence({{v.bos(), c, c}, {2, 1}}, v), VocabularyError);
  REQUIRE_THROWS_AS(validate_sequence({{v.bos(), f, c}, {3}}, v), VocabularyError);
}

TEST_CASE("similarity benchmark grades the hierarchy", "[corpus]") {
  const Vocabulary v = small_vocab();
  const auto sim = ground_truth_similarity(v);
  const std::size_t n = v.content_tokens().size();
  REQUIRE(sim.pairs().size() == n * (n - 1) / 2);
  for (const auto& p : sim.pairs()) {
    REQUIRE(p.a < p.b);
    const int ca = v.concept_of(p.a), cb = v.concept_of(p.b);
    const double want = ca == cb ? kSameConceptScore
                        : v.domain_of_concept(ca) == v.domain_of_concept(cb) ? kSameDomainScore
                                                                           : kCrossDomainScore;
    REQUIRE(p.score == want);
    REQUIRE(sim.score(p.b, p.a) == want);
  }
  std::stringstream s;
  write_similarity(sim, v, s);
  REQUIRE(read_similarity(s, v).pairs() == sim.pairs());
}

TEST_CASE("interchange round-trips annotated data", "[interchange]") {
  const Vocabulary v = small_vocab();
  GeneratorConfig cfg;
  cfg.n_sequences = 20;
  cfg.max_len = 16;
  const auto seqs = generate_corpus(v, cfg);
  const Dataset data = conceptlm::testing::oracle_annotate(seqs, v);
  std::stringstream s;
  export_jsonl(data, v, s);
  const IngestResult r = ingest_annotated(s, v);
  REQUIRE(r.data == data);
  REQUIRE(r.rejected_short == 0);
}

TEST_CASE("interchange rejects bad records", "[interchange]") {
  const Vocabulary v = small_vocab();
  const std::string f = v.token(v.function_words(0).front());
  const TokenId c0 = v.members(0)[0];
  const std::string c = v.token(c0), s1 = v.token(v.members(0)[1]), s2 = v.token(v.members(0)[2]);
  auto ingest = [&](const std::string& line, int cap = kDefaultSynonymCap) {
    std::istringstream in(line);
    return ingest_annotated(in, v, {cap, 0});
  };
  const std::string head = R"({"tokens":["<bos>",")" + f + R"(",")" + c + R"("],"content_positions":[2],"concepts":)";

  REQUIRE(ingest(head + R"([{"pos":2,"original":")" + c + R"(","synonyms":[")" + s1 + R"("]}]})").data.size() == 1);
  REQUIRE_THROWS_AS(ingest("{not json"), ParseError);
  REQUIRE_THROWS_AS(ingest(head + R"([{"pos":1,"original":")" + c + R"(","synonyms":[]}]})"), ParseError);
  REQUIRE_THROWS_AS(ingest(head + R"([{"pos":2,"original":")" + c + R"(","synonyms":[")" + c + R"("]}]})"),
                    ParseError);
  REQUIRE_THROWS_AS(
      ingest(head + R"([{"pos":2,"original":")" + c + R"(","synonyms":[")" + s1 + R"(",")" + s1 + R"("]}]})"),
      ParseError);
  REQUIRE_THROWS_AS(
      ingest(head + R"([{"pos":2,"original":")" + c + R"(","synonyms":[")" + s1 + R"(",")" + s2 + R"("]}]})", 1),
      CapError);
  REQUIRE_THROWS_AS(ingest(head + R"([{"pos":2,"original":"zzz","synonyms":[]}]})"), VocabularyError);

  try {
    std::istringstream in("\n" + head + "[]}\n{broken");
    ingest_annotated(in, v);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    REQUIRE(e.line() == 3);
  }
}

TEST_CASE("ingest drops short records when asked", "[interchange]") {
  const Vocabulary v = small_vocab();
  const Dataset data{{{{v.bos(), v.members(0)[0]}, {1}}, {}}};
  std::stringstream s;
  export_jsonl(data, v, s);
  const auto r = ingest_annotated(s, v, {kDefaultSynonymCap, 1000});
  REQUIRE(r.data.empty());
  REQUIRE(r.rejected_short == 1);
}

TEST_CASE("profiles differ in emitted frame counts", "[corpus]") {
  const Vocabulary v = build_vocabulary(4, 10, 6, 59, 3);
  GeneratorConfig cfg;
  cfg.n_sequences = 400;
  cfg.seed = 2;
  const auto a = generate_corpus_traced(v, cfg);
  cfg.profile = TemplateProfile::kB;
  const auto b = generate_corpus_traced(v, cfg);

  const std::size_t f = sentence_frames().size();
  std::vector<double> ca(f, 0.0), cb(f, 0.0);
  for (const auto& s : a.frames_used)
    for (int id : s) ca[static_cast<std::size_t>(id)] += 1.0;
  for (const auto& s : b.frames_used)
    for (int id : s) cb[static_cast<std::size_t>(id)] += 1.0;
  double na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < f; ++i) {
    na += ca[i];
    nb += cb[i];
  }
  // 2 x F contingency table.
  double chi2 = 0.0;
  int df = -1;
  for (std::size_t i = 0; i < f; ++i) {
    const double col = ca[i] + cb[i];
    if (col == 0.0) continue;
    ++df;
    const double ea = col * na / (na + nb), eb = col * nb / (na + nb);
    chi2 += (ca[i] - ea) * (ca[i] - ea) / ea + (cb[i] - eb) * (cb[i] - eb) / eb;
  }
  REQUIRE(df >= 1);
  // Far beyond the 0.001 critical value for these degrees of freedom.
  REQUIRE(chi2 > 3.0 * df + 30.0);
}

TEST_CASE("boundary cases", "[corpus]") {
  const Vocabulary v = build_vocabulary(1, 1, 2, 0, 0);
  REQUIRE(v.num_concepts() == 1);
  REQUIRE(v.members(0).size() == 2);
  REQUIRE(v.size() == kNumSpecialTokens + 2);

  const Vocabulary w = small_vocab();
  GeneratorConfig cfg;
  cfg.n_sequences = 0;
  REQUIRE(generate_corpus(w, cfg).empty());
  std::istringstream empty("");
  REQUIRE(ingest_annotated(empty, w).data.empty());
}
