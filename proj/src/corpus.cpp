// Copyright (c) 2026, The conceptlm Authors
// SPDX-License-Identifier: Apache-2.0

#include "conceptlm/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>
#include <unordered_set>

#include <json.hpp>

#include "conceptlm/error.hpp"
#include "conceptlm/rng.hpp"

namespace conceptlm {

std::string_view to_string(TokenClass c) {
  switch (c) {
    case TokenClass::kContent:
      return "content";
    case TokenClass::kFunction:
      return "function";
    case TokenClass::kSpecial:
      return "special";
  }
  return "?";
}

TokenClass token_class_from_string(std::string_view s) {
  if (s == "content") return TokenClass::kContent;
  if (s == "function") return TokenClass::kFunction;
  if (s == "special") return TokenClass::kSpecial;
  throw ParseError("unknown token class '" + std::string(s) + "'");
}

std::string_view to_string(TemplateProfile p) { return p == TemplateProfile::kA ? "A" : "B"; }

TemplateProfile template_profile_from_string(std::string_view s) {
  if (s == "A" || s == "a") return TemplateProfile::kA;
  if (s == "B" || s == "b") return TemplateProfile::kB;
  throw ConfigError("template profile must be A or B, got '" + std::string(s) + "'");
}

// ---------------------------------------------------------------------------
// Vocabulary

Vocabulary::Vocabulary(std::vector<std::string> tokens, std::vector<TokenClass> token_class,
                       std::vector<int> concept_of, std::vector<int> domain_of, std::uint64_t seed)
    : tokens_(std::move(tokens)),
      token_class_(std::move(token_class)),
      concept_of_(std::move(concept_of)),
      domain_of_(std::move(domain_of)),
      seed_(seed) {
  const std::size_t v = tokens_.size();
  if (token_class_.size() != v || concept_of_.size() != v)
    throw VocabularyError("vocabulary tables have inconsistent lengths");

  bool have_bos = false;
  for (std::size_t i = 0; i < v; ++i) {
    if (!index_.emplace(tokens_[i], static_cast<TokenId>(i)).second)
      throw VocabularyError("duplicate token '" + tokens_[i] + "'");
    if (tokens_[i] == kBosToken) {
      if (token_class_[i] != TokenClass::kSpecial)
        throw VocabularyError("<bos> must be a special token");
      bos_ = static_cast<TokenId>(i);
      have_bos = true;
    }
  }
  if (!have_bos) throw VocabularyError("vocabulary has no <bos> token");

  members_.assign(domain_of_.size(), {});
  for (std::size_t i = 0; i < v; ++i) {
    const int c = concept_of_[i];
    if (token_class_[i] == TokenClass::kContent) {
      if (c < 0 || c >= static_cast<int>(domain_of_.size()))
        throw VocabularyError("content token '" + tokens_[i] + "' has no valid concept");
      members_[c].push_back(static_cast<TokenId>(i));
      content_.push_back(static_cast<TokenId>(i));
    } else if (c != kNoConcept) {
      throw VocabularyError("non-content token '" + tokens_[i] + "' carries a concept");
    }
  }
  for (std::size_t c = 0; c < members_.size(); ++c)
    if (members_[c].size() < 2)
      throw VocabularyError("concept " + std::to_string(c) + " has fewer than 2 member tokens");

  int max_domain = -1;
  for (int d : domain_of_) {
    if (d < 0) throw VocabularyError("negative domain id");
    max_domain = std::max(max_domain, d);
  }
  num_domains_ = max_domain + 1;

  // Function words are dealt round-robin into slot groups by id order.
  function_group_.assign(v, -1);
  int n_function = 0;
  for (std::size_t i = 0; i < v; ++i)
    if (token_class_[i] == TokenClass::kFunction) ++n_function;
  const int groups = std::min(kNumFunctionGroups, n_function);
  function_groups_.assign(groups, {});
  int k = 0;
  for (std::size_t i = 0; i < v; ++i) {
    if (token_class_[i] != TokenClass::kFunction) continue;
    function_group_[i] = k % groups;
    function_groups_[k % groups].push_back(static_cast<TokenId>(i));
    ++k;
  }
}

int Vocabulary::function_group(TokenId id) const { return function_group_.at(id); }

std::optional<TokenId> Vocabulary::find(std::string_view token) const {
  auto it = index_.find(std::string(token));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

TokenId Vocabulary::id_of(std::string_view token) const {
  if (auto id = find(token)) return *id;
  throw VocabularyError("unknown token '" + std::string(token) + "'");
}

bool Vocabulary::operator==(const Vocabulary& other) const {
  return tokens_ == other.tokens_ && token_class_ == other.token_class_ &&
         concept_of_ == other.concept_of_ && domain_of_ == other.domain_of_ &&
         seed_ == other.seed_;
}

namespace {

constexpr std::string_view kOnsets[] = {"b", "d",  "f",  "g",  "k",  "l",  "m",  "n",
                                        "p", "r",  "s",  "t",  "v",  "z",  "br", "dr",
                                        "gl", "kr", "pl", "st", "tr", "sh", "ch", "th"};
constexpr std::string_view kVowels[] = {"a", "e", "i", "o", "u", "ai", "ou", "ea"};
constexpr std::string_view kCodas[] = {"", "", "", "n", "r", "l", "s", "m", "k", "t"};

std::string make_word(Rng& rng, int syllables) {
  std::string w;
  for (int s = 0; s < syllables; ++s) {
    w += kOnsets[uniform_index(rng, std::size(kOnsets))];
    w += kVowels[uniform_index(rng, std::size(kVowels))];
  }
  w += kCodas[uniform_index(rng, std::size(kCodas))];
  return w;
}

}  // namespace

Vocabulary build_vocabulary(const VocabularySpec& spec) {
  if (spec.n_domains < 1 || spec.concepts_per_domain < 1 || spec.tokens_per_concept < 1)
    throw ConfigError("vocabulary counts must be >= 1");
  if (spec.tokens_per_concept < 2)
    throw ConfigError("tokens_per_concept must be >= 2 so every concept has a synonym");
  if (spec.n_function < 0) throw ConfigError("n_function must be >= 0");

  Rng rng = make_rng(spec.seed, stream::kVocabulary);
  std::unordered_set<std::string> used{std::string(kBosToken)};
  auto fresh = [&](int syllables) {
    for (;;) {
      std::string w = make_word(rng, syllables);
      if (used.insert(w).second) return w;
    }
  };

  std::vector<std::string> tokens{std::string(kBosToken)};
  std::vector<TokenClass> classes{TokenClass::kSpecial};
  std::vector<int> concept_of{Vocabulary::kNoConcept};
  std::vector<int> domain_of;

  const int n_concepts = spec.n_domains * spec.concepts_per_domain;
  for (int c = 0; c < n_concepts; ++c) {
    domain_of.push_back(c / spec.concepts_per_domain);
    for (int m = 0; m < spec.tokens_per_concept; ++m) {
      tokens.push_back(fresh(2 + static_cast<int>(uniform_index(rng, 2))));
      classes.push_back(TokenClass::kContent);
      concept_of.push_back(c);
    }
  }
  for (int f = 0; f < spec.n_function; ++f) {
    tokens.push_back(fresh(1));
    classes.push_back(TokenClass::kFunction);
    concept_of.push_back(Vocabulary::kNoConcept);
  }
  return Vocabulary(std::move(tokens), std::move(classes), std::move(concept_of),
                    std::move(domain_of), spec.seed);
}

void write_vocabulary(const Vocabulary& vocab, std::ostream& out) {
  nlohmann::ordered_json j;
  j["format"] = "conceptlm-vocabulary";
  j["version"] = 1;
  j["seed"] = vocab.seed();
  j["tokens"] = vocab.tokens();
  std::vector<std::string> classes;
  for (TokenClass c : vocab.token_classes()) classes.emplace_back(to_string(c));
  j["class"] = classes;
  j["concept_of"] = vocab.concept_table();
  j["domain_of"] = vocab.domain_table();
  out << j.dump() << '\n';
}

Vocabulary read_vocabulary(std::istream& in) {
  nlohmann::json j;
  try {
    in >> j;
    if (j.at("format") != "conceptlm-vocabulary") throw ParseError("not a vocabulary file");
    if (j.at("version") != 1) throw ParseError("unsupported vocabulary version");
    std::vector<TokenClass> classes;
    for (const auto& s : j.at("class")) classes.push_back(token_class_from_string(s.get<std::string>()));
    return Vocabulary(j.at("tokens").get<std::vector<std::string>>(), std::move(classes),
                      j.at("concept_of").get<std::vector<int>>(),
                      j.at("domain_of").get<std::vector<int>>(), j.at("seed").get<std::uint64_t>());
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("vocabulary: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// Sequences

void validate_sequence(const Sequence& seq, const Vocabulary& vocab) {
  for (TokenId t : seq.token_ids)
    if (t < 0 || t >= vocab.size()) throw VocabularyError("token id out of range: " + std::to_string(t));
  int prev = -1;
  for (int p : seq.content_positions) {
    if (p <= prev) throw VocabularyError("content positions must be strictly increasing");
    if (p < 0 || p >= seq.length()) throw VocabularyError("content position out of range");
    if (!vocab.is_content(seq.token_ids[p]))
      throw VocabularyError("content position " + std::to_string(p) + " holds non-content token '" +
                            vocab.token(seq.token_ids[p]) + "'");
    prev = p;
  }
}

double content_fraction(const Sequence& seq) {
  if (seq.length() <= 1) return 0.0;
  return static_cast<double>(seq.content_positions.size()) / (seq.length() - 1);
}

std::string render(const Sequence& seq, const Vocabulary& vocab, bool include_bos) {
  std::string out;
  for (int i = 0; i < seq.length(); ++i) {
    if (!include_bos && seq.token_ids[i] == vocab.bos()) continue;
    if (!out.empty()) out += ' ';
    out += vocab.token(seq.token_ids[i]);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Template grammar

int Frame::num_content() const { return static_cast<int>(std::count(slots.begin(), slots.end(), 'C')); }

double Frame::content_fraction() const { return static_cast<double>(num_content()) / slots.size(); }

const std::vector<Frame>& sentence_frames() {
  static const std::vector<Frame> frames = {
      {"0C1C"}, {"0C2"},  {"01C"},   {"0C12C3"}, {"C20C"},  {"012C"},
      {"0C1230"}, {"102C3"}, {"0C"},  {"C1C2C"},  {"23012"}, {"0C3C10"},
  };
  return frames;
}

std::vector<double> profile_frame_weights(TemplateProfile profile) {
  const std::size_t n = sentence_frames().size();
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i) {
    // A favours early frames, B late ones; both cover every frame.
    const double r = profile == TemplateProfile::kA ? static_cast<double>(i) : static_cast<double>(n - 1 - i);
    w[i] = 1.0 / (1.0 + 0.5 * r);
  }
  return w;
}

namespace {

bool frame_usable(const Frame& f, const Vocabulary& vocab) {
  for (char s : f.slots)
    if (s != 'C' && vocab.num_function_groups() == 0) return false;
  return true;
}

// Token-level expected content fraction of a frame mixture.
double mixture_fraction(const std::vector<double>& w) {
  const auto& frames = sentence_frames();
  double c = 0.0, n = 0.0;
  for (std::size_t i = 0; i < frames.size(); ++i) {
    c += w[i] * frames[i].num_content();
    n += w[i] * frames[i].slots.size();
  }
  return c / n;
}

std::vector<double> tilt(const std::vector<double>& base, const std::vector<bool>& usable, double beta) {
  const auto& frames = sentence_frames();
  std::vector<double> w(base.size(), 0.0);
  for (std::size_t i = 0; i < base.size(); ++i)
    if (usable[i]) w[i] = base[i] * std::exp(beta * frames[i].content_fraction());
  const double total = std::accumulate(w.begin(), w.end(), 0.0);
  for (double& x : w) x /= total;
  return w;
}

std::size_t sample_weighted(Rng& rng, const std::vector<double>& w) {
  const double total = std::accumulate(w.begin(), w.end(), 0.0);
  double u = uniform01(rng) * total;
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (u < w[i]) return i;
    u -= w[i];
  }
  // Rounding fallthrough: last positive weight.
  for (std::size_t i = w.size(); i-- > 0;)
    if (w[i] > 0) return i;
  return 0;
}

// Latent structure shared by every corpus drawn from one vocabulary.
struct ConceptGrammar {
  std::vector<std::vector<int>> successors;     // per concept, same-domain successors
  std::vector<std::vector<double>> member_w;    // per concept, weight per member slot
  std::vector<std::vector<int>> domain_concepts;
};

ConceptGrammar concept_grammar(const Vocabulary& vocab, double member_zipf) {
  ConceptGrammar g;
  Rng rng = make_rng(vocab.seed(), stream::kCorpus);
  g.domain_concepts.assign(vocab.num_domains(), {});
  for (int c = 0; c < vocab.num_concepts(); ++c) g.domain_concepts[vocab.domain_of_concept(c)].push_back(c);

  g.successors.assign(vocab.num_concepts(), {});
  for (int c = 0; c < vocab.num_concepts(); ++c) {
    const auto& peers = g.domain_concepts[vocab.domain_of_concept(c)];
    std::vector<int> others;
    for (int p : peers)
      if (p != c) others.push_back(p);
    // Two distinct successors where the domain allows, else stay put.
    for (int k = 0; k < 2 && !others.empty(); ++k) {
      const std::size_t pick = uniform_index(rng, others.size());
      g.successors[c].push_back(others[pick]);
      others.erase(others.begin() + static_cast<std::ptrdiff_t>(pick));
    }
    if (g.successors[c].empty()) g.successors[c].push_back(c);
  }

  g.member_w.assign(vocab.num_concepts(), {});
  for (int c = 0; c < vocab.num_concepts(); ++c) {
    const std::size_t m = vocab.members(c).size();
    std::vector<std::size_t> rank(m);
    std::iota(rank.begin(), rank.end(), 0);
    for (std::size_t i = m; i > 1; --i) std::swap(rank[i - 1], rank[uniform_index(rng, i)]);
    g.member_w[c].resize(m);
    for (std::size_t i = 0; i < m; ++i) g.member_w[c][i] = 1.0 / std::pow(static_cast<double>(rank[i] + 1), member_zipf);
  }
  return g;
}

}  // namespace

std::vector<double> frame_mixture(const Vocabulary& vocab, TemplateProfile profile, double target) {
  if (!(target > 0.0 && target < 1.0)) throw ConfigError("target_content_fraction must lie in (0, 1)");
  const auto& frames = sentence_frames();
  std::vector<bool> usable(frames.size());
  double lo = 1.0, hi = 0.0;
  bool any = false;
  for (std::size_t i = 0; i < frames.size(); ++i) {
    usable[i] = frame_usable(frames[i], vocab);
    if (!usable[i]) continue;
    any = true;
    lo = std::min(lo, frames[i].content_fraction());
    hi = std::max(hi, frames[i].content_fraction());
  }
  if (!any) throw ConfigError("no sentence frame is usable with this vocabulary");
  // The tilted mixture approaches but never attains the extreme frames.
  constexpr double kMargin = 0.01;
  if (target < lo + kMargin || target > hi - kMargin) {
    std::ostringstream msg;
    msg << "target content fraction " << target << " unreachable; frames span [" << lo << ", " << hi << "]";
    throw ConfigError(msg.str());
  }
  const auto base = profile_frame_weights(profile);
  double b_lo = -200.0, b_hi = 200.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (b_lo + b_hi);
    if (mixture_fraction(tilt(base, usable, mid)) < target)
      b_lo = mid;
    else
      b_hi = mid;
  }
  return tilt(base, usable, 0.5 * (b_lo + b_hi));
}

GeneratedCorpus generate_corpus_traced(const Vocabulary& vocab, const GeneratorConfig& cfg) {
  if (cfg.n_sequences < 0) throw ConfigError("n_sequences must be >= 0");
  if (cfg.min_len < 2 || cfg.max_len < cfg.min_len) throw ConfigError("need 2 <= min_len <= max_len");
  if (cfg.successor_prob < 0.0 || cfg.successor_prob > 1.0) throw ConfigError("successor_prob must lie in [0, 1]");
  const std::vector<double> mixture = frame_mixture(vocab, cfg.profile, cfg.target_content_fraction);
  const ConceptGrammar grammar = concept_grammar(vocab, cfg.member_zipf);
  const auto& frames = sentence_frames();

  // Profile B skews the domain prior and reverses concept priors.
  const int n_domains = vocab.num_domains();
  std::vector<double> domain_w(n_domains, 1.0);
  if (cfg.profile == TemplateProfile::kB)
    for (int d = 0; d < n_domains; ++d) domain_w[d] = 1.0 / (1.0 + d);
  std::vector<std::vector<double>> concept_prior(n_domains);
  for (int d = 0; d < n_domains; ++d) {
    const std::size_t k = grammar.domain_concepts[d].size();
    for (std::size_t i = 0; i < k; ++i) {
      const double r = cfg.profile == TemplateProfile::kA ? static_cast<double>(i) : static_cast<double>(k - 1 - i);
      concept_prior[d].push_back(1.0 / (1.0 + r));
    }
  }

  Rng rng = make_rng(cfg.seed, stream::kCorpus);
  GeneratedCorpus out;
  out.sequences.reserve(cfg.n_sequences);
  out.frames_used.reserve(cfg.n_sequences);
  for (int s = 0; s < cfg.n_sequences; ++s) {
    const int length = cfg.min_len + static_cast<int>(uniform_index(rng, cfg.max_len - cfg.min_len + 1));
    const int domain = static_cast<int>(sample_weighted(rng, domain_w));
    Sequence seq;
    seq.token_ids.push_back(vocab.bos());
    std::vector<int> used;
    int prev_concept = -1;
    while (seq.length() < length) {
      const int f = static_cast<int>(sample_weighted(rng, mixture));
      used.push_back(f);
      for (char slot : frames[f].slots) {
        if (seq.length() >= length) break;
        if (slot == 'C') {
          int concept_id;
          if (prev_concept >= 0 && uniform01(rng) < cfg.successor_prob) {
            const auto& succ = grammar.successors[prev_concept];
            concept_id = succ[uniform_index(rng, succ.size())];
          } else {
            concept_id = grammar.domain_concepts[domain][sample_weighted(rng, concept_prior[domain])];
          }
          const auto& members = vocab.members(concept_id);
          seq.content_positions.push_back(seq.length());
          seq.token_ids.push_back(members[sample_weighted(rng, grammar.member_w[concept_id])]);
          prev_concept = concept_id;
        } else {
          const int group = (slot - '0') % vocab.num_function_groups();
          const auto& words = vocab.function_words(group);
          seq.token_ids.push_back(words[uniform_index(rng, words.size())]);
        }
      }
    }
    out.sequences.push_back(std::move(seq));
    out.frames_used.push_back(std::move(used));
  }
  return out;
}

std::vector<Sequence> generate_corpus(const Vocabulary& vocab, const GeneratorConfig& cfg) {
  return generate_corpus_traced(vocab, cfg).sequences;
}

// ---------------------------------------------------------------------------
// Ground-truth similarity

GroundTruthSimilarity::GroundTruthSimilarity(std::vector<SimilarityPair> pairs) : pairs_(std::move(pairs)) {
  for (const auto& p : pairs_) lookup_[key(p.a, p.b)] = p.score;
}

std::uint64_t GroundTruthSimilarity::key(TokenId a, TokenId b) {
  if (a > b) std::swap(a, b);
  return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(a)) << 32) | static_cast<std::uint32_t>(b);
}

std::optional<double> GroundTruthSimilarity::score(TokenId a, TokenId b) const {
  auto it = lookup_.find(key(a, b));
  if (it == lookup_.end()) return std::nullopt;
  return it->second;
}

GroundTruthSimilarity ground_truth_similarity(const Vocabulary& vocab) {
  const auto& content = vocab.content_tokens();
  std::vector<SimilarityPair> pairs;
  pairs.reserve(content.size() * (content.size() - 1) / 2);
  for (std::size_t i = 0; i < content.size(); ++i) {
    for (std::size_t j = i + 1; j < content.size(); ++j) {
      const int ca = vocab.concept_of(content[i]);
      const int cb = vocab.concept_of(content[j]);
      double s = kCrossDomainScore;
      if (ca == cb)
        s = kSameConceptScore;
      else if (vocab.domain_of_concept(ca) == vocab.domain_of_concept(cb))
        s = kSameDomainScore;
      pairs.push_back({content[i], content[j], s});
    }
  }
  return GroundTruthSimilarity(std::move(pairs));
}

void write_similarity(const GroundTruthSimilarity& sim, const Vocabulary& vocab, std::ostream& out) {
  for (const auto& p : sim.pairs()) out << vocab.token(p.a) << '\t' << vocab.token(p.b) << '\t' << p.score << '\n';
}

GroundTruthSimilarity read_similarity(std::istream& in, const Vocabulary& vocab) {
  std::vector<SimilarityPair> pairs;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream fields(line);
    std::string a, b;
    double s;
    if (!(fields >> a >> b >> s)) throw ParseError("expected 'token token score'", lineno);
    pairs.push_back({vocab.id_of(a), vocab.id_of(b), s});
  }
  return GroundTruthSimilarity(std::move(pairs));
}

}  // namespace conceptlm
