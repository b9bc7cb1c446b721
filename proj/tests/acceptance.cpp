// Copyright (c) 2026, The conceptlm Authors
// SPDX-License-Identifier: Apache-2.0
//
// Acceptance checks. Prints one [PASS]/[FAIL] line per criterion and exits
// nonzero when any criterion fails.
//
// Tolerances:
//   C1  bitwise equality (loss and every gradient entry)
//   C2  ||g_analytic - g_fd|| / max(||g_analytic||, ||g_fd||) < 1e-6, eps = 1e-5
//   C3  concept loss <= NTP NLL, no slack
//   C4  loss == 0.0 and gradient == 0.0 exactly
//   C5  |metric - oracle| < 1e-10
//   C6-C10 direction of the desk sweep means per seed, CIs at 95%
//   C11 byte equality of the report CSVs

#include <chrono>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <functional>
#include <iomanip>
#include <iostream>
#include <random>
#include <sstream>

#include "conceptlm/config.hpp"
#include "conceptlm/error.hpp"
#include "conceptlm/eval.hpp"
#include "conceptlm/objective.hpp"
#include "conceptlm/report.hpp"
#include "conceptlm/stats.hpp"
#include "conceptlm/sweep.hpp"
#include "conceptlm/util.hpp"

using namespace conceptlm;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void report(int id, const std::string& name, const std::function<Outcome()>& check) {
  Outcome o;
  const auto start = std::chrono::steady_clock::now();
  try {
    o = check();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (!o.pass) ++failures;
  std::cout << (o.pass ? "[PASS] " : "[FAIL] ") << "C" << id << " " << name << ": " << o.detail << " ("
            << std::fixed << std::setprecision(1) << secs << "s)" << std::defaultfloat << std::endl;
}

std::string fmt(double x, int precision = 4) {
  std::ostringstream s;
  s << std::setprecision(precision) << x;
  return s.str();
}

bool same_bits(double a, double b) { return std::memcmp(&a, &b, sizeof(double)) == 0; }

fs::path source(const std::string& rel) { return fs::path(CONCEPTLM_SOURCE_DIR) / rel; }

// ---------------------------------------------------------------------------
// Small models for the exact checks.

Vocabulary check_vocab() { return build_vocabulary(2, 3, 3, 12, 21); }

ModelConfig check_model(const Vocabulary& v) {
  ModelConfig c;
  c.vocab_size = v.size();
  c.d_model = 8;
  c.n_heads = 2;
  c.n_layers = 1;
  c.max_context = 12;
  return c;
}

ModelParams scaled(const ModelConfig& c, std::uint64_t seed, double scale) {
  ModelParams p = init_params(c, seed);
  for (const auto& t : p.tensors())
    if (t.name.find("ln") == std::string::npos)
      for (std::size_t i = 0; i < t.size(); ++i) p.data()[t.offset + i] *= scale;
  return p;
}

std::vector<Sequence> check_corpus(const Vocabulary& v, int n, std::uint64_t seed) {
  GeneratorConfig g;
  g.n_sequences = n;
  g.min_len = 6;
  g.max_len = 12;
  g.seed = seed;
  return generate_corpus(v, g);
}

// Same-concept synonyms at every content position.
Dataset concept_annotations(const std::vector<Sequence>& seqs, const Vocabulary& v) {
  Dataset out;
  for (const auto& s : seqs) {
    AnnotatedSequence a{s, {}};
    for (int p : s.content_positions) {
      ConceptAnnotation c{p, s.token_ids[p], {}};
      for (TokenId m : v.members(v.concept_of(s.token_ids[p])))
        if (m != c.original) c.synonyms.push_back(m);
      a.concepts.push_back(std::move(c));
    }
    out.push_back(std::move(a));
  }
  return out;
}

// Probability mass of `members` under softmax(row), in long double.
double independent_mass(std::span<const double> row, const std::vector<TokenId>& members) {
  long double z = 0.0L, m = 0.0L;
  for (double x : row) z += std::exp(static_cast<long double>(x));
  for (TokenId t : members) m += std::exp(static_cast<long double>(row[t]));
  return static_cast<double>(m / z);
}

std::vector<TokenId> members_of(const ConceptAnnotation& a) {
  std::vector<TokenId> m{a.original};
  for (TokenId t : a.synonyms)
    if (std::find(m.begin(), m.end(), t) == m.end()) m.push_back(t);
  return m;
}

// ---------------------------------------------------------------------------
// C1

// Next-token loss and gradient written out directly, with no concept path.
LossAndGrad pure_ntp(const ModelParams& params, std::span<const AnnotatedSequence> batch) {
  std::vector<SequenceGraph> graphs;
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& item : batch) {
    const auto& t = item.sequence.token_ids;
    graphs.emplace_back(params, std::span<const TokenId>(t.data(), t.size() - 1));
    const RowMatrix& logits = graphs.back().logits();
    for (Eigen::Index r = 0; r < logits.rows(); ++r) {
      const auto row = row_span(logits, r);
      sum += log_sum_exp(row) - row[t[r + 1]];
      ++n;
    }
  }
  LossAndGrad out{LossBreakdown{}, Gradients(params.config())};
  out.loss.ntp_loss = sum / static_cast<double>(n);
  out.loss.combined = out.loss.ntp_loss;
  const double w = 1.0 / static_cast<double>(n);
  for (std::size_t s = 0; s < batch.size(); ++s) {
    const auto& t = batch[s].sequence.token_ids;
    const RowMatrix& logits = graphs[s].logits();
    RowMatrix dlogits(logits.rows(), logits.cols());
    for (Eigen::Index r = 0; r < logits.rows(); ++r) {
      Eigen::VectorXd d = softmax(row_span(logits, r));
      d[t[r + 1]] -= 1.0;
      dlogits.row(r) = (w * d).transpose();
    }
    graphs[s].backward(dlogits, out.grads);
  }
  return out;
}

Outcome criterion1() {
  const Vocabulary v = check_vocab();
  const ModelParams p = scaled(check_model(v), 101, 4.0);
  const Dataset data = concept_annotations(check_corpus(v, 80, 7), v);
  std::size_t batches = 0, annotations = 0;
  for (std::size_t at = 0; at + 4 <= data.size() && batches < 20; at += 4, ++batches) {
    const std::span<const AnnotatedSequence> batch(data.data() + at, 4);
    for (const auto& b : batch) annotations += b.concepts.size();
    const LossAndGrad lib = loss_and_grad(p, batch, {0.0, kDefaultMassThreshold, true});
    const LossAndGrad ref = pure_ntp(p, batch);
    if (!same_bits(lib.loss.combined, ref.loss.combined) || !same_bits(lib.loss.ntp_loss, ref.loss.ntp_loss))
      return {false, "loss differs in batch " + std::to_string(batches)};
    for (std::size_t i = 0; i < p.size(); ++i)
      if (!same_bits(lib.grads.data()[i], ref.grads.data()[i]))
        return {false, "gradient entry " + std::to_string(i) + " differs in batch " + std::to_string(batches)};
  }
  if (batches != 20) return {false, "only " + std::to_string(batches) + " batches"};
  return {true, "20 batches, " + std::to_string(annotations) + " annotations ignored, loss and " +
                    std::to_string(p.size()) + " gradient entries bit-identical"};
}

// ---------------------------------------------------------------------------
// C2

Outcome criterion2() {
  const Vocabulary v = check_vocab();
  ModelParams p = scaled(check_model(v), 202, 4.0);
  if (p.size() > 5000) return {false, "model has " + std::to_string(p.size()) + " parameters"};
  const auto seqs = check_corpus(v, 15, 8);
  Dataset data = concept_annotations(seqs, v);

  // Widen one set per sequence so some annotations sit above the gate.
  std::mt19937_64 rng(3);
  for (auto& item : data)
    if (!item.concepts.empty()) {
      auto& a = item.concepts[rng() % item.concepts.size()];
      a.synonyms.clear();
      for (TokenId t = 0; t < v.size(); ++t)
        if (t != a.original && rng() % 10 < 8) a.synonyms.push_back(t);
    }

  // Drop annotations whose mass sits close enough to the gate that a
  // perturbation of eps could flip it.
  std::size_t gated = 0, active = 0;
  for (auto& item : data) {
    const auto& t = item.sequence.token_ids;
    const RowMatrix logits = forward(p, std::span<const TokenId>(t.data(), t.size() - 1)).logits;
    std::erase_if(item.concepts, [&](const ConceptAnnotation& a) {
      const double m = independent_mass(row_span(logits, a.position - 1), members_of(a));
      return std::abs(m - kDefaultMassThreshold) < 1e-3;
    });
    for (const auto& a : item.concepts)
      (independent_mass(row_span(logits, a.position - 1), members_of(a)) > kDefaultMassThreshold ? gated : active)++;
  }
  if (gated == 0 || active == 0) return {false, "batches lack gated or active annotations"};

  const double eps = 1e-5;
  double worst = 0.0;
  for (double lambda : {0.0, 0.5, 1.0}) {
    const ObjectiveConfig cfg{lambda, kDefaultMassThreshold, true};
    for (std::size_t b = 0; b < 5; ++b) {
      const std::span<const AnnotatedSequence> batch(data.data() + 3 * b, 3);
      const LossAndGrad lg = loss_and_grad(p, batch, cfg);
      double diff2 = 0.0, a2 = 0.0, n2 = 0.0;
      for (std::size_t i = 0; i < p.size(); ++i) {
        const double x = p.data()[i];
        p.data()[i] = x + eps;
        const double up = evaluate_loss(p, batch, cfg).combined;
        p.data()[i] = x - eps;
        const double down = evaluate_loss(p, batch, cfg).combined;
        p.data()[i] = x;
        const double num = (up - down) / (2.0 * eps);
        const double ana = lg.grads.data()[i];
        diff2 += (num - ana) * (num - ana);
        a2 += ana * ana;
        n2 += num * num;
      }
      const double rel = std::sqrt(diff2) / std::max(std::sqrt(a2), std::sqrt(n2));
      worst = std::max(worst, rel);
    }
  }
  return {worst < 1e-6, "f64, " + std::to_string(p.size()) + " params, 5 batches x lambda {0, 0.5, 1}, " +
                            std::to_string(gated) + " gated / " + std::to_string(active) +
                            " active annotations, worst relative error " + fmt(worst, 3) + " (< 1e-6)"};
}

// ---------------------------------------------------------------------------
// C3 and C4

struct ScoredAnnotations {
  std::size_t active = 0, gated = 0, violations = 0;
  double worst_margin = -std::numeric_limits<double>::infinity();
};

// Random sets of every size over several weight scales.
Dataset random_annotations(const std::vector<Sequence>& seqs, const Vocabulary& v, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Dataset out;
  for (const auto& s : seqs) {
    AnnotatedSequence a{s, {}};
    for (int p : s.content_positions) {
      ConceptAnnotation c{p, s.token_ids[p], {}};
      const int want = 1 + static_cast<int>(rng() % static_cast<std::uint64_t>(v.size() - 1));
      std::vector<TokenId> pool;
      for (TokenId t = 0; t < v.size(); ++t)
        if (t != c.original) pool.push_back(t);
      std::shuffle(pool.begin(), pool.end(), rng);
      c.synonyms.assign(pool.begin(), pool.begin() + std::min<std::size_t>(pool.size(), want));
      a.concepts.push_back(std::move(c));
    }
    out.push_back(std::move(a));
  }
  return out;
}

Outcome criterion3() {
  const Vocabulary v = check_vocab();
  const auto seqs = check_corpus(v, 200, 9);
  const Dataset sets[] = {concept_annotations(seqs, v), random_annotations(seqs, v, 4)};
  ScoredAnnotations s;
  for (double scale : {1.0, 4.0, 12.0}) {
    const ModelParams p = scaled(check_model(v), 303, scale);
    for (const Dataset& data : sets)
      for (const auto& item : data) {
        const auto& t = item.sequence.token_ids;
        const RowMatrix logits = forward(p, std::span<const TokenId>(t.data(), t.size() - 1)).logits;
        for (const auto& a : item.concepts) {
          const auto row = row_span(logits, a.position - 1);
          const ConceptTerm term = concept_loss(row, a.synonyms, a.original, kDefaultMassThreshold);
          if (term.gated) {
            ++s.gated;
            continue;
          }
          ++s.active;
          const double ntp = log_sum_exp(row) - row[a.original];
          s.worst_margin = std::max(s.worst_margin, term.loss - ntp);
          if (term.loss > ntp) ++s.violations;
        }
      }
  }
  return {s.violations == 0 && s.active > 0,
          std::to_string(s.active) + " non-gated annotations, " + std::to_string(s.violations) +
              " with concept loss above NTP NLL, max(concept - ntp) = " + fmt(s.worst_margin, 3)};
}

Outcome criterion4() {
  const Vocabulary v = check_vocab();
  const auto seqs = check_corpus(v, 120, 10);
  const Dataset data = random_annotations(seqs, v, 5);
  std::size_t checked = 0;
  for (double scale : {1.0, 4.0, 12.0}) {
    const ModelParams p = scaled(check_model(v), 404, scale);
    for (const auto& item : data) {
      const auto& t = item.sequence.token_ids;
      const RowMatrix logits = forward(p, std::span<const TokenId>(t.data(), t.size() - 1)).logits;
      for (const auto& a : item.concepts) {
        const auto row = row_span(logits, a.position - 1);
        const double mass = independent_mass(row, members_of(a));
        // Recomputed masses within rounding of the gate are ambiguous.
        if (!(mass > kDefaultMassThreshold + 1e-12)) continue;
        const ConceptTerm term = concept_loss(row, a.synonyms, a.original, kDefaultMassThreshold);
        if (!term.gated || term.loss != 0.0)
          return {false, "mass " + fmt(mass, 17) + " produced loss " + fmt(term.loss, 17)};

        // Alone at lambda = 1 the batch objective must be exactly flat.
        const AnnotatedSequence single{item.sequence, {a}};
        const LossAndGrad only = loss_and_grad(p, std::span(&single, 1), {1.0, kDefaultMassThreshold, true});
        if (only.loss.combined != 0.0 || only.loss.gated_count != 1)
          return {false, "gated annotation contributes loss " + fmt(only.loss.combined, 17)};
        for (double g : only.grads.data())
          if (g != 0.0) return {false, "gated annotation has a nonzero gradient entry " + fmt(g, 17)};

        // Mixed with NTP it must change nothing.
        const AnnotatedSequence bare{item.sequence, {}};
        const LossAndGrad with = loss_and_grad(p, std::span(&single, 1), {0.5, kDefaultMassThreshold, true});
        const LossAndGrad without = loss_and_grad(p, std::span(&bare, 1), {0.5, kDefaultMassThreshold, true});
        if (!same_bits(with.loss.combined, without.loss.combined) || !(with.grads == without.grads))
          return {false, "gated annotation changes the lambda = 0.5 objective"};
        ++checked;
      }
    }
  }
  return {checked >= 50, std::to_string(checked) + " annotations with recomputed mass > 0.6: zero loss, zero gradient"};
}

// ---------------------------------------------------------------------------
// C5

Outcome criterion5() {
  std::vector<std::string> notes;
  double worst = 0.0;
  auto track = [&](double got, double want) { worst = std::max(worst, std::abs(got - want)); };

  // Content-word PPL against a long-double pass over the logits.
  {
    const Vocabulary v = check_vocab();
    const ModelParams p = scaled(check_model(v), 505, 3.0);
    const auto seqs = check_corpus(v, 40, 11);
    const ScoreResult s = score_corpus(p, seqs);
    long double sum = 0.0L;
    std::size_t n = 0;
    for (const auto& seq : seqs) {
      const auto& t = seq.token_ids;
      const RowMatrix logits = forward(p, std::span<const TokenId>(t.data(), t.size() - 1)).logits;
      for (int pos : seq.content_positions) {
        long double z = 0.0L;
        for (double x : row_span(logits, pos - 1)) z += std::exp(static_cast<long double>(x));
        sum += std::log(z) - static_cast<long double>(logits(pos - 1, t[pos]));
        ++n;
      }
    }
    track(content_word_ppl(s.records), static_cast<double>(std::exp(sum / static_cast<long double>(n))));
    notes.push_back("content PPL over " + std::to_string(n) + " tokens");
  }

  // Clustering on 48 vectors against explicit pairwise cosines.
  {
    std::mt19937_64 rng(12);
    std::normal_distribution<double> n01;
    std::vector<std::vector<Eigen::VectorXd>> groups(6);
    for (int g = 0; g < 6; ++g) {
      Eigen::VectorXd c(10);
      for (int d = 0; d < 10; ++d) c[d] = n01(rng);
      for (int i = 0; i < 8; ++i) {
        Eigen::VectorXd x(10);
        for (int d = 0; d < 10; ++d) x[d] = c[d] + 0.5 * n01(rng);
        groups[g].push_back(x);
      }
    }
    auto cos = [](const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
      long double dot = 0, na = 0, nb = 0;
      for (Eigen::Index i = 0; i < a.size(); ++i) {
        dot += static_cast<long double>(a[i]) * b[i];
        na += static_cast<long double>(a[i]) * a[i];
        nb += static_cast<long double>(b[i]) * b[i];
      }
      return static_cast<double>(dot / std::sqrt(na * nb));
    };
    double intra = 0, inter = 0, cent = 0;
    std::size_t ni = 0, nx = 0, nc = 0;
    std::vector<Eigen::VectorXd> centroids;
    for (std::size_t g = 0; g < groups.size(); ++g) {
      Eigen::VectorXd c = Eigen::VectorXd::Zero(10);
      for (const auto& x : groups[g]) c += x;
      centroids.push_back(c / static_cast<double>(groups[g].size()));
      for (std::size_t h = g; h < groups.size(); ++h)
        for (std::size_t i = 0; i < groups[g].size(); ++i)
          for (std::size_t j = (g == h ? i + 1 : 0); j < groups[h].size(); ++j) {
            const double c2 = cos(groups[g][i], groups[h][j]);
            if (g == h) {
              intra += c2;
              ++ni;
            } else {
              inter += c2;
              ++nx;
            }
          }
    }
    for (std::size_t i = 0; i < centroids.size(); ++i)
      for (std::size_t j = i + 1; j < centroids.size(); ++j, ++nc) cent += cos(centroids[i], centroids[j]);
    const ClusteringResult r = clustering_from_groups(groups);
    track(r.intra, intra / ni);
    track(r.inter, inter / nx);
    track(r.clustering_score, intra / ni - inter / nx);
    track(r.centroid_similarity, cent / nc);
    notes.push_back("clustering on 48 vectors");
  }

  // Spearman with ties: ranks by hand, then the textbook Pearson.
  {
    const std::vector<double> x{2, 2, 5, 1, 7, 5, 5, 3};
    const std::vector<double> y{1, 3, 3, 0, 9, 4, 4, 3};
    const std::vector<double> rx{2.5, 2.5, 6, 1, 8, 6, 6, 4};
    const std::vector<double> ry{2, 4, 4, 1, 8, 6.5, 6.5, 4};
    const double mean = 4.5;
    double sxy = 0, sxx = 0, syy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      sxy += (rx[i] - mean) * (ry[i] - mean);
      sxx += (rx[i] - mean) * (rx[i] - mean);
      syy += (ry[i] - mean) * (ry[i] - mean);
    }
    track(spearman(x, y), sxy / std::sqrt(sxx * syy));
    notes.push_back("Spearman with ties");
  }

  // Bootstrap with n = 3: the 27 equally likely resamples give the exact
  // distribution of the mean; percentiles are read off its CDF.
  {
    const std::vector<double> d{-0.7, 0.4, 2.25};
    std::vector<double> means;
    for (double a : d)
      for (double b : d)
        for (double c : d) means.push_back((a + b + c) / 3.0);
    std::sort(means.begin(), means.end());
    auto exact_quantile = [&](double q) {
      for (std::size_t i = 0; i < means.size(); ++i)
        if (static_cast<double>(i + 1) / 27.0 >= q) return means[i];
      return means.back();
    };
    for (double level : {0.5, 0.9, 0.95}) {
      const BootstrapCI ci = bootstrap_mean_ci(d, 200000, level, 77);
      track(ci.lower, exact_quantile(0.5 * (1.0 - level)));
      track(ci.upper, exact_quantile(0.5 * (1.0 + level)));
      track(ci.point, (d[0] + d[1] + d[2]) / 3.0);
    }
    notes.push_back("bootstrap n=3 against 27 enumerated draws");
  }

  std::string detail;
  for (const auto& n : notes) detail += (detail.empty() ? "" : ", ") + n;
  return {worst < 1e-10, detail + "; max abs error " + fmt(worst, 3) + " (< 1e-10)"};
}

// ---------------------------------------------------------------------------
// C6 to C10: the desk sweep, three seeds.

struct SeedResult {
  std::uint64_t seed = 0;
  std::map<std::string, DomainMetrics> by_run;  // in-domain metrics
  std::optional<BootstrapCI> nll_ci_half;       // lambda 0.5 vs lambda 0, content NLL
  std::size_t train_sequences = 0;
  double seconds = 0.0;
};

std::string run_id(double lambda, ConceptMode mode) {
  return post_run_id({TemplateProfile::kA, "desk", lambda, mode, SupervisionMode::kAll});
}

std::vector<SeedResult> desk_results;
double desk_seconds = 0.0;

void run_desk(const fs::path& base) {
  for (std::uint64_t seed : {1, 2, 3}) {
    ToolkitConfig cfg = load_config(source("configs/desk.json"));
    cfg.seed = seed;
    const fs::path root = base / ("desk-seed" + std::to_string(seed));
    fs::remove_all(root);
    const auto start = std::chrono::steady_clock::now();
    const SweepSummary s = run_sweep(cfg, root, {1, true});
    if (s.failed > 0) throw Error("desk sweep seed " + std::to_string(seed) + ": " + std::to_string(s.failed) + " runs failed");
    const SweepReport r = write_report(root);
    SeedResult out;
    out.seed = seed;
    out.train_sequences = static_cast<std::size_t>(cfg.corpus.n_sequences);
    for (const auto& row : r.rows) {
      if (row.domain != kInDomain) continue;
      out.by_run[row.run.id] = row.metrics;
      if (row.run.id == run_id(0.5, ConceptMode::kConcepts)) out.nll_ci_half = row.content_nll_diff;
    }
    out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    desk_seconds += out.seconds;
    std::cout << "  desk sweep seed " << seed << ": " << s.done << " runs in " << fmt(out.seconds, 4) << "s"
              << std::endl;
    desk_results.push_back(std::move(out));
  }
}

const DomainMetrics& metric(const SeedResult& r, double lambda, ConceptMode mode = ConceptMode::kConcepts) {
  const auto it = r.by_run.find(run_id(lambda, mode));
  if (it == r.by_run.end()) throw Error("seed " + std::to_string(r.seed) + ": no metrics for " + run_id(lambda, mode));
  return it->second;
}

template <typename Pred>
Outcome per_seed(const std::string& what, Pred&& holds) {
  if (desk_results.size() != 3) return {false, "desk sweep did not complete"};
  bool all = true;
  std::string detail;
  for (const auto& r : desk_results) {
    std::string d;
    const bool ok = holds(r, d);
    all = all && ok;
    detail += (detail.empty() ? "" : "; ") + std::string("seed ") + std::to_string(r.seed) + " " + d +
              (ok ? "" : " (no)");
  }
  return {all, what + ": " + detail};
}

Outcome criterion6() {
  if (desk_results.size() != 3) return {false, "desk sweep did not complete"};
  int lower = 0, excludes = 0;
  std::string detail;
  for (const auto& r : desk_results) {
    if (r.train_sequences < 2000) return {false, "fewer than 2000 training sequences"};
    const double a = metric(r, 0.0).content_ppl, b = metric(r, 0.5).content_ppl;
    lower += b < a;
    const bool ex = r.nll_ci_half && r.nll_ci_half->upper < 0.0;
    excludes += ex;
    detail += (detail.empty() ? "" : "; ") + std::string("seed ") + std::to_string(r.seed) + " " + fmt(b) + " vs " +
              fmt(a) + ", dNLL CI [" + (r.nll_ci_half ? fmt(r.nll_ci_half->lower) + ", " + fmt(r.nll_ci_half->upper) : "missing") + "]";
  }
  const bool budget = desk_seconds <= 1800.0;
  return {lower == 3 && excludes >= 2 && budget,
          "content PPL lambda 0.5 < lambda 0 in " + std::to_string(lower) + "/3 seeds, CI below 0 in " +
              std::to_string(excludes) + "/3 (need 2); " + detail + "; sweeps " + fmt(desk_seconds, 4) +
              "s (budget 1800s)"};
}

Outcome criterion7() {
  return per_seed("clustering lambda 0.75 > lambda 0", [](const SeedResult& r, std::string& d) {
    const double a = metric(r, 0.0).clustering_score, b = metric(r, 0.75).clustering_score;
    d = fmt(b) + " vs " + fmt(a);
    return b > a;
  });
}

Outcome criterion8() {
  return per_seed("Spearman lambda 1 > lambda 0", [](const SeedResult& r, std::string& d) {
    const double a = metric(r, 0.0).spearman, b = metric(r, 1.0).spearman;
    d = fmt(b) + " vs " + fmt(a);
    return b > a;
  });
}

Outcome criterion9() {
  Outcome o = per_seed("noise below true concepts at lambda 0.5 (content acc, Spearman)",
                       [](const SeedResult& r, std::string& d) {
                         const auto& t = metric(r, 0.5);
                         const auto& n = metric(r, 0.5, ConceptMode::kNoise);
                         d = "acc " + fmt(n.content_acc) + " vs " + fmt(t.content_acc) + ", rho " + fmt(n.spearman) +
                             " vs " + fmt(t.spearman);
                         return n.content_acc < t.content_acc && n.spearman < t.spearman;
                       });
  // Shares the desk sweeps with C6.
  o.pass = o.pass && desk_seconds <= 1800.0;
  return o;
}

Outcome criterion10() {
  return per_seed("global PPL lambda 1 > lambda 0", [](const SeedResult& r, std::string& d) {
    const double a = metric(r, 0.0).global_ppl, b = metric(r, 1.0).global_ppl;
    d = fmt(b) + " vs " + fmt(a);
    return b > a;
  });
}

// ---------------------------------------------------------------------------
// C11

Outcome criterion11(const fs::path& base) {
  const ToolkitConfig cfg = load_config(source("configs/tiny.json"));
  const fs::path a = base / "repro-a", b = base / "repro-b";
  fs::remove_all(a);
  fs::remove_all(b);
  run_sweep(cfg, a, {1, true});
  run_sweep(cfg, b, {1, true});
  write_report(a);
  write_report(b);
  std::size_t bytes = 0;
  for (const char* f : {"eval_report.csv", "long.csv"}) {
    const std::string x = read_file(a / "report" / f), y = read_file(b / "report" / f);
    if (x != y) return {false, std::string(f) + " differs between reruns"};
    bytes += x.size();
  }
  return {true, "tiny sweep run twice with seed " + std::to_string(cfg.seed) + ": eval_report.csv and long.csv identical (" +
                    std::to_string(bytes) + " bytes)"};
}

}  // namespace

int main() {
  const fs::path base = fs::absolute("acceptance-runs");
  fs::create_directories(base);
  std::cout << "acceptance run root: " << base.string() << std::endl;

  report(1, "lambda=0 matches pure NTP bitwise", criterion1);
  report(2, "finite-difference gradient check", criterion2);
  report(3, "concept loss <= NTP NLL when not gated", criterion3);
  report(4, "gated annotations give zero loss and gradient", criterion4);
  report(5, "metric oracles", criterion5);

  try {
    run_desk(base);
  } catch (const std::exception& e) {
    std::cout << "  desk sweep failed: " << e.what() << std::endl;
  }
  report(6, "content PPL improves at lambda=0.5", criterion6);
  report(7, "clustering improves at lambda=0.75", criterion7);
  report(8, "semantic alignment improves at lambda=1", criterion8);
  report(9, "noise concepts underperform true concepts", criterion9);
  report(10, "global PPL degrades at lambda=1", criterion10);
  report(11, "sweep reports are reproducible", [&] { return criterion11(base); });

  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << std::endl;
  return failures == 0 ? 0 : 1;
}
