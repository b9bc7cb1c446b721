// Copyright (c) 2026, The conceptlm Authors
// SPDX-License-Identifier: Apache-2.0

#include "conceptlm/objective.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "conceptlm/error.hpp"

namespace conceptlm {

void ObjectiveConfig::validate() const {
  if (!(concept_weight >= 0.0 && concept_weight <= 1.0)) throw ConfigError("concept weight must lie in [0, 1]");
  if (!(mass_threshold >= 0.0 && mass_threshold <= 1.0)) throw ConfigError("mass threshold must lie in [0, 1]");
}

double ntp_loss(const RowMatrix& logits, std::span<const TokenId> targets) {
  if (static_cast<std::size_t>(logits.rows()) != targets.size())
    throw ShapeError("ntp_loss: " + std::to_string(logits.rows()) + " logit rows for " +
                     std::to_string(targets.size()) + " targets");
  if (targets.empty()) throw ShapeError("ntp_loss: no positions");
  double sum = 0.0;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    const auto row = row_span(logits, static_cast<Eigen::Index>(i));
    if (targets[i] < 0 || targets[i] >= logits.cols()) throw VocabularyError("ntp_loss: target outside vocabulary");
    sum += log_sum_exp(row) - row[targets[i]];
  }
  return sum / static_cast<double>(targets.size());
}

namespace {

// Distinct ids of S u {T} (or S alone), in first-seen order.
std::vector<TokenId> mass_members(std::span<const TokenId> synonyms, TokenId original, bool include_original) {
  std::vector<TokenId> members;
  members.reserve(synonyms.size() + 1);
  if (include_original) members.push_back(original);
  for (TokenId t : synonyms)
    if (std::find(members.begin(), members.end(), t) == members.end()) members.push_back(t);
  return members;
}

double log_sum_exp_subset(std::span<const double> row, std::span<const TokenId> ids) {
  double m = -std::numeric_limits<double>::infinity();
  for (TokenId t : ids) m = std::max(m, row[t]);
  double z = 0.0;
  for (TokenId t : ids) z += std::exp(row[t] - m);
  return m + std::log(z);
}

}  // namespace

ConceptTerm concept_loss(std::span<const double> logit_row, std::span<const TokenId> synonyms, TokenId original,
                         double threshold, bool include_original_in_mass) {
  const auto v = static_cast<TokenId>(logit_row.size());
  for (double z : logit_row)
    if (!std::isfinite(z)) throw NumericalError("concept_loss: non-finite logit");
  if (original < 0 || original >= v) throw VocabularyError("concept_loss: original token outside vocabulary");
  for (TokenId t : synonyms)
    if (t < 0 || t >= v) throw VocabularyError("concept_loss: synonym outside vocabulary");
  const auto members = mass_members(synonyms, original, include_original_in_mass);
  if (members.empty()) throw EmptySetError("concept_loss: empty concept set");

  ConceptTerm term;
  const double nll = log_sum_exp(logit_row) - log_sum_exp_subset(logit_row, members);
  term.mass = std::exp(-nll);
  if (term.mass > threshold) {
    term.gated = true;
    term.loss = 0.0;
  } else {
    term.loss = nll;
  }
  return term;
}

LossBreakdown combined_loss(const BatchTerms& terms, double concept_weight, double mass_threshold) {
  if (!(concept_weight >= 0.0 && concept_weight <= 1.0)) throw ConfigError("concept weight must lie in [0, 1]");
  LossBreakdown out;
  out.concept_weight = concept_weight;
  out.mass_threshold = mass_threshold;
  out.ntp_positions = terms.ntp_positions;
  out.gated_count = terms.gated;
  out.active_count = terms.active;
  out.skipped_empty = terms.skipped_empty;
  out.ntp_loss = terms.ntp_positions ? terms.ntp_sum / static_cast<double>(terms.ntp_positions) : 0.0;
  out.concept_loss = terms.active ? terms.concept_sum / static_cast<double>(terms.active) : 0.0;
  out.combined = (1.0 - concept_weight) * out.ntp_loss + concept_weight * out.concept_loss;
  return out;
}

namespace {

struct ScoredAnnotation {
  int row = 0;
  std::vector<TokenId> members;
  double log_mass = 0.0;  // log-sum-exp over members
  bool active = false;
};

struct ScoredSequence {
  SequenceGraph graph;
  std::vector<ScoredAnnotation> annotations;
};

std::string describe(const AnnotatedSequence& item, std::size_t index) {
  std::ostringstream s;
  s << "sequence " << index << " (length " << item.sequence.length() << ", ids";
  for (std::size_t i = 0; i < item.sequence.token_ids.size() && i < 16; ++i) s << ' ' << item.sequence.token_ids[i];
  if (item.sequence.token_ids.size() > 16) s << " ...";
  s << ')';
  return s.str();
}

LossBreakdown run_objective(const ModelParams& params, std::span<const AnnotatedSequence> batch,
                            const ObjectiveConfig& cfg, Gradients* grads) {
  cfg.validate();
  BatchTerms terms;
  std::vector<ScoredSequence> scored;
  if (grads) scored.reserve(batch.size());

  for (std::size_t s = 0; s < batch.size(); ++s) {
    const AnnotatedSequence& item = batch[s];
    const auto& tokens = item.sequence.token_ids;
    const int n = item.sequence.length();
    if (n < 2) throw ContextError(describe(item, s) + ": need at least two tokens");
    ScoredSequence ss{SequenceGraph(params, std::span<const TokenId>(tokens.data(), n - 1)), {}};
    const RowMatrix& logits = ss.graph.logits();

    for (int r = 0; r < n - 1; ++r) {
      const auto row = row_span(logits, r);
      const double nll = log_sum_exp(row) - row[tokens[r + 1]];
      if (!std::isfinite(nll)) throw NumericalError("non-finite NTP loss at position " + std::to_string(r + 1) + " of " + describe(item, s));
      terms.ntp_sum += nll;
      ++terms.ntp_positions;
    }

    for (const ConceptAnnotation& a : item.concepts) {
      if (a.position < 1 || a.position >= n)
        throw ContextError(describe(item, s) + ": annotation position " + std::to_string(a.position) + " has no prefix");
      if (tokens[a.position] != a.original)
        throw VocabularyError(describe(item, s) + ": annotation original does not match token at position " +
                              std::to_string(a.position));
      if (a.synonyms.empty()) {
        ++terms.skipped_empty;
        continue;
      }
      const auto row = row_span(logits, a.position - 1);
      const ConceptTerm term = concept_loss(row, a.synonyms, a.original, cfg.mass_threshold, cfg.include_original_in_mass);
      if (!std::isfinite(term.loss)) throw NumericalError("non-finite concept loss at position " + std::to_string(a.position) + " of " + describe(item, s));
      ScoredAnnotation sa;
      sa.row = a.position - 1;
      if (term.gated) {
        ++terms.gated;
      } else {
        ++terms.active;
        terms.concept_sum += term.loss;
        sa.active = true;
        sa.members = mass_members(a.synonyms, a.original, cfg.include_original_in_mass);
        sa.log_mass = log_sum_exp_subset(row, sa.members);
      }
      ss.annotations.push_back(std::move(sa));
    }
    // Activations are only retained when a backward pass follows.
    if (grads) scored.push_back(std::move(ss));
  }

  const LossBreakdown loss = combined_loss(terms, cfg.concept_weight, cfg.mass_threshold);
  if (!std::isfinite(loss.combined)) throw NumericalError("non-finite combined loss");
  if (!grads) return loss;

  const double lambda = cfg.concept_weight;
  const double w_ntp = (1.0 - lambda) / static_cast<double>(terms.ntp_positions);
  const double w_concept = terms.active ? lambda / static_cast<double>(terms.active) : 0.0;
  for (std::size_t s = 0; s < batch.size(); ++s) {
    const auto& tokens = batch[s].sequence.token_ids;
    const ScoredSequence& ss = scored[s];
    const RowMatrix& logits = ss.graph.logits();
    RowMatrix dlogits(logits.rows(), logits.cols());
    for (Eigen::Index r = 0; r < logits.rows(); ++r) {
      Eigen::VectorXd d = softmax(row_span(logits, r));
      d[tokens[r + 1]] -= 1.0;
      dlogits.row(r) = (w_ntp * d).transpose();
    }
    // lambda == 0 leaves the pure next-token gradient untouched.
    if (lambda != 0.0) {
      for (const ScoredAnnotation& a : ss.annotations) {
        if (!a.active) continue;
        const auto row = row_span(logits, a.row);
        const double lse = log_sum_exp(row);
        for (Eigen::Index j = 0; j < logits.cols(); ++j) dlogits(a.row, j) += w_concept * std::exp(row[j] - lse);
        for (TokenId m : a.members) dlogits(a.row, m) -= w_concept * std::exp(row[m] - a.log_mass);
      }
    }
    ss.graph.backward(dlogits, *grads);
  }
  return loss;
}

}  // namespace

LossAndGrad loss_and_grad(const ModelParams& params, std::span<const AnnotatedSequence> batch,
                          const ObjectiveConfig& cfg) {
  LossAndGrad out{LossBreakdown{}, Gradients(params.config())};
  out.loss = run_objective(params, batch, cfg, &out.grads);
  return out;
}

LossBreakdown evaluate_loss(const ModelParams& params, std::span<const AnnotatedSequence> batch,
                            const ObjectiveConfig& cfg) {
  return run_objective(params, batch, cfg, nullptr);
}

}  // namespace conceptlm
