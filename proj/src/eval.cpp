// Copyright (c) 2026, The conceptlm Authors
// SPDX-License-Identifier: Apache-2.0

#include "conceptlm/eval.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <optional>

#include "conceptlm/error.hpp"
#include "conceptlm/rng.hpp"

namespace conceptlm {

ScoreResult score_corpus(const ModelParams& params, const std::vector<Sequence>& corpus) {
  ScoreResult out;
  const auto max_tokens = static_cast<std::size_t>(params.config().max_context) + 1;
  for (std::size_t s = 0; s < corpus.size(); ++s) {
    const auto& t = corpus[s].token_ids;
    if (t.size() < 2) continue;
    std::size_t n = t.size();
    if (n > max_tokens) {
      n = max_tokens;
      ++out.truncated;
    }
    SequenceGraph graph(params, std::span<const TokenId>(t.data(), n - 1));
    const auto& cp = corpus[s].content_positions;
    for (std::size_t p = 1; p < n; ++p) {
      const auto row = row_span(graph.logits(), static_cast<Eigen::Index>(p - 1));
      PerTokenRecord r;
      r.sequence_id = s;
      r.position = static_cast<int>(p);
      r.is_content = std::binary_search(cp.begin(), cp.end(), static_cast<int>(p));
      r.nll = log_sum_exp(row) - row[static_cast<std::size_t>(t[p])];
      r.correct = argmax_lowest(row) == t[p];
      out.records.push_back(r);
    }
  }
  return out;
}

std::vector<PerTokenRecord> content_records(std::span<const PerTokenRecord> records) {
  std::vector<PerTokenRecord> out;
  for (const auto& r : records)
    if (r.is_content) out.push_back(r);
  return out;
}

double mean_nll(std::span<const PerTokenRecord> records) {
  if (records.empty()) throw EmptySetError("no records to average");
  double s = 0.0;
  for (const auto& r : records) s += r.nll;
  return s / static_cast<double>(records.size());
}

double accuracy(std::span<const PerTokenRecord> records) {
  if (records.empty()) throw EmptySetError("no records to average");
  std::size_t hits = 0;
  for (const auto& r : records) hits += r.correct ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(records.size());
}

double perplexity(std::span<const PerTokenRecord> records) { return std::exp(mean_nll(records)); }

double content_word_ppl(std::span<const PerTokenRecord> records) {
  const auto c = content_records(records);
  if (c.empty()) throw EmptySetError("content-word perplexity needs at least one content record");
  return perplexity(c);
}

double content_accuracy(std::span<const PerTokenRecord> records) {
  const auto c = content_records(records);
  if (c.empty()) throw EmptySetError("content-word accuracy needs at least one content record");
  return accuracy(c);
}

double global_ppl(std::span<const PerTokenRecord> records) { return perplexity(records); }
double global_accuracy(std::span<const PerTokenRecord> records) { return accuracy(records); }

double cosine(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  const double na = a.norm(), nb = b.norm();
  if (na == 0.0 || nb == 0.0) throw NumericalError("cosine of a zero vector");
  return a.dot(b) / (na * nb);
}

ClusteringResult clustering_from_groups(const std::vector<std::vector<Eigen::VectorXd>>& groups) {
  ClusteringResult res;
  res.groups = groups.size();
  if (groups.size() < 2) throw EmptySetError("clustering needs at least two groups");

  // With unit vectors, the cosine sum over pairs of a set is
  // (|sum|^2 - count) / 2.
  Eigen::Index dim = -1;
  Eigen::VectorXd total;
  double intra_sum = 0.0;
  std::size_t intra_pairs = 0;
  std::vector<Eigen::VectorXd> centroids;
  for (const auto& g : groups) {
    if (g.empty()) throw EmptySetError("clustering group is empty");
    if (dim < 0) {
      dim = g.front().size();
      total = Eigen::VectorXd::Zero(dim);
    }
    Eigen::VectorXd unit_sum = Eigen::VectorXd::Zero(dim);
    Eigen::VectorXd raw_sum = Eigen::VectorXd::Zero(dim);
    for (const auto& v : g) {
      if (v.size() != dim) throw ShapeError("clustering vectors differ in dimension");
      const double n = v.norm();
      if (n == 0.0) throw NumericalError("clustering vector has zero norm");
      unit_sum += v / n;
      raw_sum += v;
    }
    const auto k = g.size();
    res.vectors += k;
    if (k < 2) {
      ++res.single_vector_groups;
    } else {
      intra_sum += (unit_sum.squaredNorm() - static_cast<double>(k)) / 2.0;
      intra_pairs += k * (k - 1) / 2;
    }
    total += unit_sum;
    centroids.push_back(raw_sum / static_cast<double>(k));
  }
  if (intra_pairs == 0) throw EmptySetError("every clustering group has a single vector");
  const double n = static_cast<double>(res.vectors);
  const double all_sum = (total.squaredNorm() - n) / 2.0;
  const std::size_t all_pairs = res.vectors * (res.vectors - 1) / 2;
  std::size_t same_group_pairs = 0;
  for (const auto& g : groups) same_group_pairs += g.size() * (g.size() - 1) / 2;
  const std::size_t inter_pairs = all_pairs - same_group_pairs;

  res.intra = intra_sum / static_cast<double>(intra_pairs);
  res.inter = (all_sum - intra_sum) / static_cast<double>(inter_pairs);
  res.clustering_score = res.intra - res.inter;

  double c_sum = 0.0;
  std::size_t c_pairs = 0;
  for (std::size_t i = 0; i < centroids.size(); ++i)
    for (std::size_t j = i + 1; j < centroids.size(); ++j, ++c_pairs) c_sum += cosine(centroids[i], centroids[j]);
  res.centroid_similarity = c_sum / static_cast<double>(c_pairs);
  return res;
}

ClusteringResult clustering_metrics(const ModelParams& params, const Vocabulary& vocab, const Dataset& annotated,
                                    std::size_t sample, std::uint64_t seed) {
  std::vector<std::size_t> eligible;
  for (std::size_t i = 0; i < annotated.size(); ++i)
    for (const auto& a : annotated[i].concepts)
      if (!a.synonyms.empty()) {
        eligible.push_back(i);
        break;
      }
  if (eligible.size() < 2) throw EmptySetError("clustering needs two sequences with non-empty synonym sets");

  Rng rng = make_rng(seed, stream::kClustering);
  const std::size_t take = std::min(sample, eligible.size());
  for (std::size_t i = 0; i < take; ++i) std::swap(eligible[i], eligible[i + uniform_index(rng, eligible.size() - i)]);
  eligible.resize(take);

  std::map<int, std::vector<Eigen::VectorXd>> by_concept;
  const auto max_ctx = static_cast<std::size_t>(params.config().max_context);
  for (std::size_t idx : eligible) {
    const auto& item = annotated[idx];
    std::vector<const ConceptAnnotation*> usable;
    for (const auto& a : item.concepts)
      if (!a.synonyms.empty() && static_cast<std::size_t>(a.position) < max_ctx) usable.push_back(&a);
    if (usable.empty()) continue;
    const ConceptAnnotation& a = *usable[uniform_index(rng, usable.size())];

    std::vector<TokenId> prefix(item.sequence.token_ids.begin(), item.sequence.token_ids.begin() + a.position + 1);
    auto& group = by_concept[vocab.concept_of(a.original)];
    auto collect = [&](TokenId w) {
      prefix.back() = w;
      SequenceGraph g(params, prefix);
      group.emplace_back(g.final_hidden().row(a.position).transpose());
    };
    collect(a.original);
    for (TokenId s : a.synonyms) collect(s);
  }
  std::vector<std::vector<Eigen::VectorXd>> groups;
  for (auto& [concept_id, vectors] : by_concept) groups.push_back(std::move(vectors));
  return clustering_from_groups(groups);
}

Eigen::VectorXd word_embedding(const ModelParams& params, const Vocabulary& vocab, TokenId word) {
  const std::vector<TokenId> probe{vocab.bos(), word};
  SequenceGraph g(params, probe);
  // Only the word row; the marker is excluded from the pool.
  Eigen::VectorXd v = g.final_hidden().bottomRows(probe.size() - 1).colwise().mean().transpose();
  const double n = v.norm();
  if (n == 0.0 || !std::isfinite(n))
    throw NumericalError("pooled representation of '" + vocab.token(word) + "' cannot be normalized");
  return v / n;
}

AlignmentResult semantic_alignment(const ModelParams& params, const Vocabulary& vocab,
                                   const GroundTruthSimilarity& benchmark) {
  std::vector<std::optional<Eigen::VectorXd>> cache(static_cast<std::size_t>(vocab.size()));
  auto emb = [&](TokenId w) -> const Eigen::VectorXd& {
    auto& slot = cache.at(static_cast<std::size_t>(w));
    if (!slot) slot = word_embedding(params, vocab, w);
    return *slot;
  };
  std::vector<double> model, truth;
  for (const auto& p : benchmark.pairs()) {
    model.push_back(emb(p.a).dot(emb(p.b)));
    truth.push_back(p.score);
  }
  return {spearman(model, truth), model.size()};
}

BootstrapCI paired_bootstrap(std::span<const PerTokenRecord> a, std::span<const PerTokenRecord> b, PairedMetric metric,
                             std::size_t resamples, double level, std::uint64_t seed) {
  if (a.size() != b.size())
    throw PairingError("paired records differ in count: " + std::to_string(a.size()) + " vs " +
                       std::to_string(b.size()));
  if (a.empty()) throw EmptySetError("paired bootstrap needs at least one pair");
  std::vector<double> diffs(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].sequence_id != b[i].sequence_id || a[i].position != b[i].position)
      throw PairingError("records " + std::to_string(i) + " are not aligned: (" + std::to_string(a[i].sequence_id) +
                         ", " + std::to_string(a[i].position) + ") vs (" + std::to_string(b[i].sequence_id) + ", " +
                         std::to_string(b[i].position) + ")");
    diffs[i] = metric == PairedMetric::kNll ? b[i].nll - a[i].nll
                                            : static_cast<double>(b[i].correct) - static_cast<double>(a[i].correct);
  }
  return bootstrap_mean_ci(diffs, resamples, level, seed);
}

}  // namespace conceptlm
