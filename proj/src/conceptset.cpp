// Copyright (c) 2026, The conceptlm Authors
// SPDX-License-Identifier: Apache-2.0

#include "conceptlm/conceptset.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numeric>
#include <set>
#include <thread>
#include <unordered_set>

#include "conceptlm/error.hpp"
#include "conceptlm/rng.hpp"

namespace conceptlm {

std::vector<TokenId> rank_candidates(std::span<const double> logit_row, int k) {
  if (k < 1) throw ConfigError("candidate count k must be >= 1");
  const Eigen::VectorXd p = softmax(logit_row);
  std::vector<TokenId> ids(logit_row.size());
  std::iota(ids.begin(), ids.end(), 0);
  const auto take = std::min<std::size_t>(static_cast<std::size_t>(k), ids.size());
  std::partial_sort(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(take), ids.end(),
                    [&p](TokenId a, TokenId b) { return p[a] != p[b] ? p[a] > p[b] : a < b; });
  ids.resize(take);
  return ids;
}

std::vector<TokenId> extract_candidates(const ModelParams& params, const Sequence& seq, int position, int k) {
  if (!std::binary_search(seq.content_positions.begin(), seq.content_positions.end(), position))
    throw ConfigError("position " + std::to_string(position) + " is not a content position");
  if (position < 1) throw ConfigError("content position 0 has no prefix");
  // Scored on the same input window the trainer sees; causality makes row
  // position-1 a function of the prefix alone.
  const auto& t = seq.token_ids;
  SequenceGraph graph(params, std::span<const TokenId>(t.data(), t.size() - 1));
  return rank_candidates(row_span(graph.logits(), position - 1), k);
}

std::vector<TokenId> OracleProvider::select(const FilterRequest& request) const {
  const TokenId original = request.sequence.token_ids.at(request.position);
  const int concept_id = request.vocab.concept_of(original);
  std::vector<TokenId> out;
  for (TokenId c : request.candidates)
    if (c != original && request.vocab.concept_of(c) == concept_id) out.push_back(c);
  return out;
}

FilterStats& FilterStats::operator+=(const FilterStats& o) {
  duplicates_removed += o.duplicates_removed;
  non_candidates_removed += o.non_candidates_removed;
  truncated += o.truncated;
  return *this;
}

std::vector<TokenId> filter_synonyms(std::span<const TokenId> candidates, const Vocabulary& vocab, const Sequence& seq,
                                     int position, const FilterProvider& provider, int cap, FilterStats* stats) {
  if (cap < 0) throw ConfigError("synonym cap must be >= 0");
  const TokenId original = seq.token_ids.at(position);
  const std::vector<TokenId> picked = provider.select({vocab, seq, position, candidates});

  FilterStats local;
  std::unordered_set<TokenId> chosen;
  for (TokenId t : picked) {
    if (t == original) continue;
    if (std::find(candidates.begin(), candidates.end(), t) == candidates.end()) {
      ++local.non_candidates_removed;
      continue;
    }
    if (!chosen.insert(t).second) ++local.duplicates_removed;
  }
  // Candidate rank order, then the cap.
  std::vector<TokenId> out;
  for (TokenId c : candidates)
    if (chosen.count(c)) out.push_back(c);
  if (static_cast<int>(out.size()) > cap) {
    local.truncated += out.size() - cap;
    out.resize(cap);
  }
  if (stats) *stats += local;
  return out;
}

BuildResult build_dataset(const ModelParams& params, const Vocabulary& vocab, const std::vector<Sequence>& corpus,
                          const FilterProvider& provider, const BuildOptions& opts) {
  if (corpus.empty()) throw ConfigError("build_dataset: corpus is empty");
  if (opts.k < 1) throw ConfigError("candidate count k must be >= 1");
  if (opts.cap < 0) throw ConfigError("synonym cap must be >= 0");
  if (vocab.size() != params.config().vocab_size) throw ConfigError("model and vocabulary sizes differ");

  BuildResult result;
  result.data.resize(corpus.size());
  std::vector<FilterStats> stats(corpus.size());

  auto annotate = [&](std::size_t i) {
    const Sequence& seq = corpus[i];
    validate_sequence(seq, vocab);
    AnnotatedSequence& item = result.data[i];
    item.sequence = seq;
    if (seq.content_positions.empty()) return;
    if (seq.content_positions.front() < 1) throw ConfigError("content position 0 has no prefix");
    const auto& t = seq.token_ids;
    SequenceGraph graph(params, std::span<const TokenId>(t.data(), t.size() - 1));
    for (int p : seq.content_positions) {
      const auto candidates = rank_candidates(row_span(graph.logits(), p - 1), opts.k);
      ConceptAnnotation a;
      a.position = p;
      a.original = t[p];
      a.synonyms = filter_synonyms(candidates, vocab, seq, p, provider, opts.cap, &stats[i]);
      item.concepts.push_back(std::move(a));
    }
  };

  const int jobs = std::max(1, std::min<int>(opts.jobs, static_cast<int>(corpus.size())));
  if (jobs == 1) {
    for (std::size_t i = 0; i < corpus.size(); ++i) annotate(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mu;
    std::vector<std::thread> workers;
    for (int w = 0; w < jobs; ++w) {
      workers.emplace_back([&] {
        for (std::size_t i; (i = next.fetch_add(1)) < corpus.size();) {
          try {
            annotate(i);
          } catch (...) {
            std::lock_guard lock(failure_mu);
            if (!failure) failure = std::current_exception();
            next = corpus.size();
          }
        }
      });
    }
    for (auto& w : workers) w.join();
    if (failure) std::rethrow_exception(failure);
  }
  for (const auto& s : stats) result.stats += s;
  return result;
}

// ---------------------------------------------------------------------------
// Ablations

Dataset randomize_synonyms(const Dataset& data, std::uint64_t seed) {
  std::set<TokenId> distinct;
  for (const auto& item : data)
    for (const auto& a : item.concepts) distinct.insert(a.synonyms.begin(), a.synonyms.end());
  const std::vector<TokenId> pool(distinct.begin(), distinct.end());

  Rng rng = make_rng(seed, stream::kNoise);
  Dataset out = data;
  for (auto& item : out) {
    for (auto& a : item.concepts) {
      const std::size_t need = a.synonyms.size();
      if (need == 0) continue;
      std::vector<TokenId> eligible;
      eligible.reserve(pool.size());
      for (TokenId t : pool)
        if (t != a.original) eligible.push_back(t);
      if (eligible.size() < need)
        throw SamplingError("synonym pool of " + std::to_string(eligible.size()) + " tokens cannot fill a set of " +
                            std::to_string(need));
      // Partial Fisher-Yates.
      for (std::size_t i = 0; i < need; ++i)
        std::swap(eligible[i], eligible[i + uniform_index(rng, eligible.size() - i)]);
      a.synonyms.assign(eligible.begin(), eligible.begin() + static_cast<std::ptrdiff_t>(need));
    }
  }
  return out;
}

std::string_view to_string(SupervisionMode m) {
  switch (m) {
    case SupervisionMode::kAll:
      return "all";
    case SupervisionMode::kHalf:
      return "half";
    case SupervisionMode::kQuarter:
      return "quarter";
    case SupervisionMode::kLastOnly:
      return "last_only";
  }
  return "?";
}

SupervisionMode supervision_mode_from_string(std::string_view s) {
  if (s == "all") return SupervisionMode::kAll;
  if (s == "half") return SupervisionMode::kHalf;
  if (s == "quarter") return SupervisionMode::kQuarter;
  if (s == "last_only") return SupervisionMode::kLastOnly;
  throw ConfigError("supervision proportion must be all, half, quarter or last_only; got '" + std::string(s) + "'");
}

SubsampleResult subsample_supervision(const Dataset& data, SupervisionMode mode, std::uint64_t seed) {
  SubsampleResult result;
  if (mode == SupervisionMode::kAll) {
    result.data = data;
    return result;
  }
  if (mode == SupervisionMode::kLastOnly) {
    for (const auto& item : data) {
      const int last = item.sequence.length() - 1;
      const auto& cp = item.sequence.content_positions;
      const bool ends_in_content = !cp.empty() && cp.back() == last;
      const auto it = std::find_if(item.concepts.begin(), item.concepts.end(),
                                   [last](const ConceptAnnotation& a) { return a.position == last; });
      if (!ends_in_content || it == item.concepts.end()) {
        ++result.filtered_sequences;
        continue;
      }
      result.data.push_back({item.sequence, {*it}});
    }
    return result;
  }

  const double fraction = mode == SupervisionMode::kHalf ? 0.5 : 0.25;
  Rng rng = make_rng(seed, stream::kSubsample);
  result.data.reserve(data.size());
  for (const auto& item : data) {
    AnnotatedSequence kept{item.sequence, {}};
    const std::size_t n = item.concepts.size();
    if (n > 0) {
      const auto keep = std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(static_cast<double>(n) * fraction)));
      std::vector<std::size_t> idx(n);
      std::iota(idx.begin(), idx.end(), 0);
      for (std::size_t i = 0; i < keep; ++i) std::swap(idx[i], idx[i + uniform_index(rng, n - i)]);
      idx.resize(keep);
      std::sort(idx.begin(), idx.end());
      for (std::size_t i : idx) kept.concepts.push_back(item.concepts[i]);
    }
    result.data.push_back(std::move(kept));
  }
  return result;
}

}  // namespace conceptlm
