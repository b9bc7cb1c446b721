// Copyright (c) 2026, The conceptlm Authors
// SPDX-License-Identifier: Apache-2.0

#include "conceptlm/sweep.hpp"

#include <signal.h>
#include <unistd.h>

#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "conceptlm/checkpoint.hpp"
#include "conceptlm/error.hpp"
#include "conceptlm/interchange.hpp"
#include "conceptlm/rng.hpp"
#include "conceptlm/util.hpp"

namespace conceptlm {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace layout {
fs::path config(const fs::path& root) { return root / "config.json"; }
fs::path manifest(const fs::path& root) { return root / "manifest.json"; }
fs::path vocabulary(const fs::path& root) { return root / "data" / "vocab.json"; }
fs::path similarity(const fs::path& root) { return root / "data" / "similarity.tsv"; }
fs::path corpus(const fs::path& root, TemplateProfile p) {
  return root / "data" / ("corpus-" + std::string(to_string(p)) + ".jsonl");
}
fs::path held_out(const fs::path& root, TemplateProfile p) {
  return root / "data" / ("heldout-" + std::string(to_string(p)) + ".jsonl");
}
fs::path base_dir(const std::string& base_id) { return fs::path("base") / base_id; }
fs::path run_dir(const std::string& run_id) { return fs::path("runs") / run_id; }
}  // namespace layout

std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t run_seed(std::uint64_t master, std::uint64_t tag, std::string_view run_id) {
  return derive_seed(derive_seed(master, tag), fnv1a64(run_id));
}

std::unique_ptr<FilterProvider> make_provider(const ConceptSettings& cfg) {
  if (cfg.provider == "external") return std::make_unique<ExternalProvider>(cfg.external);
  return std::make_unique<OracleProvider>();
}

namespace {

constexpr TemplateProfile kProfiles[] = {TemplateProfile::kA, TemplateProfile::kB};

TemplateProfile other(TemplateProfile p) { return p == TemplateProfile::kA ? TemplateProfile::kB : TemplateProfile::kA; }

std::string held_out_concepts_name(TemplateProfile p) {
  return "heldout-" + std::string(to_string(p)) + ".concepts.jsonl";
}

Dataset plain(const std::vector<Sequence>& corpus) {
  Dataset d;
  d.reserve(corpus.size());
  for (const auto& s : corpus) d.push_back({s, {}});
  return d;
}

std::vector<Sequence> load_or_generate(const fs::path& path, const Vocabulary& vocab, const GeneratorConfig& g) {
  if (fs::exists(path)) return sequences_of(ingest_annotated(path, vocab).data);
  auto corpus = generate_corpus(vocab, g);
  export_jsonl(plain(corpus), vocab, path);
  return corpus;
}

template <typename Writer>
void write_text(const fs::path& path, Writer w) {
  std::ostringstream out;
  w(out);
  write_file_atomic(path, out.str());
}

std::string rel(const fs::path& p) { return p.generic_string(); }

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// Trains to completion with a trainer state file after every epoch, so an
// interrupted run resumes where it stopped.
TrainResult resumable_train(const ModelParams& init, const Dataset& data, const TrainConfig& t, const fs::path& state) {
  std::optional<Trainer> trainer;
  if (fs::exists(state))
    trainer.emplace(Trainer::load_state(state, data, t));
  else
    trainer.emplace(init, data, t);
  while (!trainer->finished()) {
    trainer->run_epoch();
    trainer->save_state(state);
  }
  return trainer->result();
}

void write_logs(const RunLog& log, const fs::path& dir) {
  write_text(dir / "steps.csv", [&](std::ostream& o) { write_step_csv(log, o); });
  write_text(dir / "epochs.csv", [&](std::ostream& o) { write_epoch_csv(log, o); });
}

json metrics_json(const DomainMetrics& m) {
  return {{"content_ppl", m.content_ppl},
          {"global_ppl", m.global_ppl},
          {"content_acc", m.content_acc},
          {"global_acc", m.global_acc},
          {"clustering_score", m.clustering_score},
          {"centroid_similarity", m.centroid_similarity},
          {"spearman", m.spearman},
          {"truncated", m.truncated}};
}

}  // namespace

SweepData prepare_data(const ToolkitConfig& cfg, const fs::path& root, const std::vector<TemplateProfile>& training_profiles) {
  fs::create_directories(root / "data");
  FileLock lock(root / "data" / ".lock");
  SweepData d{build_vocabulary(vocabulary_spec(cfg)), {}, {}, {}};
  const fs::path vp = layout::vocabulary(root);
  if (fs::exists(vp)) {
    std::ifstream in(vp);
    Vocabulary stored = read_vocabulary(in);
    if (!(stored == d.vocab)) throw ConfigError(vp.string() + " does not match the configured vocabulary");
  } else {
    write_text(vp, [&](std::ostream& o) { write_vocabulary(d.vocab, o); });
  }
  const fs::path sp = layout::similarity(root);
  if (fs::exists(sp)) {
    std::ifstream in(sp);
    d.similarity = read_similarity(in, d.vocab);
  } else {
    d.similarity = ground_truth_similarity(d.vocab);
    write_text(sp, [&](std::ostream& o) { write_similarity(d.similarity, d.vocab, o); });
  }
  for (TemplateProfile p : training_profiles)
    d.training[p] = load_or_generate(layout::corpus(root, p), d.vocab, training_corpus_config(cfg, p));
  for (TemplateProfile p : kProfiles)
    d.held_out[p] = load_or_generate(layout::held_out(root, p), d.vocab, held_out_corpus_config(cfg, p));
  return d;
}

void write_records_csv(const std::vector<PerTokenRecord>& records, const fs::path& path) {
  write_text(path, [&](std::ostream& o) {
    o << "sequence_id,position,is_content,nll,correct\n";
    for (const auto& r : records)
      o << r.sequence_id << ',' << r.position << ',' << (r.is_content ? 1 : 0) << ',' << format_double(r.nll) << ','
        << (r.correct ? 1 : 0) << '\n';
  });
}

std::vector<PerTokenRecord> read_records_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  std::string line;
  std::getline(in, line);
  if (line != "sequence_id,position,is_content,nll,correct") throw ParseError(path.string() + ": unexpected header", 1);
  std::vector<PerTokenRecord> out;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream f(line);
    PerTokenRecord r;
    std::string cell[5];
    for (auto& c : cell)
      if (!std::getline(f, c, ',')) throw ParseError(path.string() + ": expected 5 fields", lineno);
    try {
      r.sequence_id = std::stoull(cell[0]);
      r.position = std::stoi(cell[1]);
      r.is_content = cell[2] == "1";
      r.nll = std::stod(cell[3]);
      r.correct = cell[4] == "1";
    } catch (const std::exception&) {
      throw ParseError(path.string() + ": malformed record", lineno);
    }
    out.push_back(r);
  }
  return out;
}

std::map<std::string, DomainMetrics> evaluate_model(const ToolkitConfig& cfg, const fs::path& root,
                                                    const SweepData& data, const ModelParams& params,
                                                    TemplateProfile trained_on, const std::string& base_id,
                                                    const fs::path& run_rel, std::uint64_t seed) {
  const fs::path eval_dir = root / run_rel / "eval";
  fs::create_directories(eval_dir);
  const double rho = semantic_alignment(params, data.vocab, data.similarity).spearman;
  std::map<std::string, DomainMetrics> out;
  json j = json::object();
  for (const auto& [domain, profile] : {std::pair{std::string(kInDomain), trained_on},
                                        std::pair{std::string(kOutOfDomain), other(trained_on)}}) {
    const ScoreResult sr = score_corpus(params, data.held_out.at(profile));
    const Dataset annotated = ingest_annotated(root / layout::base_dir(base_id) / held_out_concepts_name(profile),
                                               data.vocab, {cfg.concepts.cap, 0})
                                  .data;
    const ClusteringResult cl = clustering_metrics(params, data.vocab, annotated, cfg.eval.clustering_sample, seed);
    DomainMetrics m;
    m.content_ppl = content_word_ppl(sr.records);
    m.global_ppl = global_ppl(sr.records);
    m.content_acc = content_accuracy(sr.records);
    m.global_acc = global_accuracy(sr.records);
    m.clustering_score = cl.clustering_score;
    m.centroid_similarity = cl.centroid_similarity;
    m.spearman = rho;
    m.truncated = sr.truncated;
    write_records_csv(sr.records, eval_dir / (domain + ".records.csv"));
    j[domain] = metrics_json(m);
    out[domain] = m;
  }
  write_file_atomic(eval_dir / "metrics.json", j.dump(2) + "\n");
  return out;
}

std::map<std::string, DomainMetrics> read_metrics(const fs::path& path) {
  std::map<std::string, DomainMetrics> out;
  try {
    const json j = json::parse(read_file(path));
    for (const auto& [domain, v] : j.items()) {
      DomainMetrics m;
      m.content_ppl = v.at("content_ppl").get<double>();
      m.global_ppl = v.at("global_ppl").get<double>();
      m.content_acc = v.at("content_acc").get<double>();
      m.global_acc = v.at("global_acc").get<double>();
      m.clustering_score = v.at("clustering_score").get<double>();
      m.centroid_similarity = v.at("centroid_similarity").get<double>();
      m.spearman = v.at("spearman").get<double>();
      m.truncated = v.at("truncated").get<std::size_t>();
      out[domain] = m;
    }
  } catch (const json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  return out;
}

std::vector<RunEntry> plan_runs(const ToolkitConfig& cfg) {
  std::vector<RunEntry> runs;
  for (TemplateProfile p : cfg.sweep.profiles) {
    for (const auto& size : cfg.model_sizes) {
      RunEntry base;
      base.kind = RunKind::kBase;
      base.point.profile = p;
      base.point.model_size = size.name;
      base.id = base_run_id(p, size.name);
      base.seed = run_seed(cfg.seed, stream::kInit, base.id);
      runs.push_back(base);
    }
  }
  for (TemplateProfile p : cfg.sweep.profiles)
    for (const auto& size : cfg.model_sizes)
      for (ConceptMode mode : cfg.sweep.modes)
        for (SupervisionMode prop : cfg.sweep.proportions)
          for (double lambda : cfg.sweep.lambdas) {
            RunEntry r;
            r.kind = RunKind::kPost;
            r.point = {p, size.name, lambda, mode, prop};
            r.id = post_run_id(r.point);
            r.seed = run_seed(cfg.seed, stream::kSweepRun, r.id);
            runs.push_back(r);
          }
  return runs;
}

namespace {

struct Context {
  const ToolkitConfig& cfg;
  fs::path root;
  const SweepData& data;
  const FilterProvider& provider;
  bool quiet;
};

void log_line(const Context& ctx, const std::string& s) {
  if (ctx.quiet) return;
  static std::mutex mu;
  std::lock_guard lock(mu);
  std::cerr << "[sweep] " << s << '\n';
}

// Returns artifacts to record.
std::map<std::string, std::string> execute_base(const Context& ctx, const RunEntry& e) {
  const auto& cfg = ctx.cfg;
  const fs::path dir_rel = layout::base_dir(e.id);
  const fs::path dir = ctx.root / dir_rel;
  fs::create_directories(dir);
  const Vocabulary& vocab = ctx.data.vocab;
  const ModelConfig mc = model_config(cfg, find_model_size(cfg, e.point.model_size), vocab);
  ModelParams params = init_params(mc, e.seed);
  const auto& corpus = ctx.data.training.at(e.point.profile);

  if (cfg.pretrain.epochs > 0) {
    TrainConfig t = cfg.train;
    t.learning_rate = cfg.pretrain.learning_rate;
    t.batch_size = cfg.pretrain.batch_size;
    t.max_epochs = cfg.pretrain.epochs;
    t.early_stop_patience = cfg.pretrain.epochs;
    t.objective.concept_weight = 0.0;
    t.seed = run_seed(cfg.seed, stream::kPretrain, e.id);
    TrainResult r = resumable_train(params, plain(corpus), t, dir / "state.ckpt");
    params = std::move(r.params);
    write_logs(r.log, dir);
  }
  save_checkpoint(dir / "model.ckpt", params);

  BuildOptions opts;
  opts.k = cfg.concepts.k;
  opts.cap = cfg.concepts.cap;
  opts.jobs = cfg.concepts.provider == "external" ? cfg.concepts.external.concurrency : 1;
  json stats = json::object();
  auto build = [&](const std::vector<Sequence>& seqs, const std::string& name) {
    BuildResult b = build_dataset(params, vocab, seqs, ctx.provider, opts);
    export_jsonl(b.data, vocab, dir / name);
    stats[name] = {{"annotations", count_annotations(b.data)},
                   {"duplicates_removed", b.stats.duplicates_removed},
                   {"non_candidates_removed", b.stats.non_candidates_removed},
                   {"truncated", b.stats.truncated}};
  };
  build(corpus, "concepts.jsonl");
  for (TemplateProfile p : kProfiles) build(ctx.data.held_out.at(p), held_out_concepts_name(p));
  write_file_atomic(dir / "concepts.stats.json", stats.dump(2) + "\n");

  evaluate_model(cfg, ctx.root, ctx.data, params, e.point.profile, e.id, dir_rel,
                 derive_seed(e.seed, stream::kClustering));
  return {{"model", rel(dir_rel / "model.ckpt")},
          {"concepts", rel(dir_rel / "concepts.jsonl")},
          {"eval_metrics", rel(dir_rel / "eval" / "metrics.json")}};
}

std::map<std::string, std::string> execute_post(const Context& ctx, const RunEntry& e) {
  const auto& cfg = ctx.cfg;
  const std::string base_id = base_run_id(e.point.profile, e.point.model_size);
  const fs::path base = ctx.root / layout::base_dir(base_id);
  const fs::path dir_rel = layout::run_dir(e.id);
  const fs::path dir = ctx.root / dir_rel;
  fs::create_directories(dir);

  const ModelParams init = load_checkpoint(base / "model.ckpt");
  Dataset data = ingest_annotated(base / "concepts.jsonl", ctx.data.vocab, {cfg.concepts.cap, 0}).data;
  if (e.point.mode == ConceptMode::kNoise) data = randomize_synonyms(data, e.seed);
  SubsampleResult sub = subsample_supervision(data, e.point.proportion, e.seed);

  TrainConfig t = cfg.train;
  t.seed = e.seed;
  t.objective.concept_weight = e.point.lambda;
  json run = {{"id", e.id},
              {"base", base_id},
              {"seed", e.seed},
              {"lambda", e.point.lambda},
              {"mode", to_string(e.point.mode)},
              {"proportion", to_string(e.point.proportion)},
              {"training_sequences", sub.data.size()},
              {"filtered_sequences", sub.filtered_sequences},
              {"annotations", count_annotations(sub.data)}};

  TrainResult r;
  try {
    r = resumable_train(init, sub.data, t, dir / "state.ckpt");
  } catch (const DivergenceError& d) {
    save_checkpoint(dir / "model.ckpt", d.last_good().params);
    write_logs(d.last_good().log, dir);
    throw;
  }
  save_checkpoint(dir / "model.ckpt", r.params);
  write_logs(r.log, dir);
  run["best_epoch"] = r.log.best_epoch;
  run["stopping_epoch"] = r.log.stopping_epoch;
  write_file_atomic(dir / "run.json", run.dump(2) + "\n");

  evaluate_model(cfg, ctx.root, ctx.data, r.params, e.point.profile, base_id, dir_rel,
                 derive_seed(e.seed, stream::kClustering));
  return {{"model", rel(dir_rel / "model.ckpt")},
          {"steps", rel(dir_rel / "steps.csv")},
          {"epochs", rel(dir_rel / "epochs.csv")},
          {"eval_metrics", rel(dir_rel / "eval" / "metrics.json")}};
}

std::string owner_note() { return "owner pid " + std::to_string(::getpid()); }

bool owned_by_live_process(const RunEntry& e) {
  constexpr std::string_view prefix = "owner pid ";
  if (e.status != RunStatus::kRunning || e.note.rfind(prefix, 0) != 0) return false;
  const long pid = std::strtol(e.note.c_str() + prefix.size(), nullptr, 10);
  if (pid <= 0 || pid == ::getpid()) return false;
  return ::kill(static_cast<pid_t>(pid), 0) == 0;
}

}  // namespace

SweepSummary run_sweep(const ToolkitConfig& cfg, const fs::path& root, const SweepOptions& opts) {
  cfg.validate();
  fs::create_directories(root);
  const std::string snapshot = dump_config(cfg);
  {
    FileLock lock(root / ".config.lock");
    const fs::path cp = layout::config(root);
    if (fs::exists(cp)) {
      if (read_file(cp) != snapshot)
        throw ConfigError(root.string() + " already holds a sweep created from a different config");
    } else {
      write_file_atomic(cp, snapshot);
    }
  }
  const SweepData data = prepare_data(cfg, root, cfg.sweep.profiles);
  const auto provider = make_provider(cfg.concepts);
  const Context ctx{cfg, root, data, *provider, opts.quiet};
  const fs::path mpath = layout::manifest(root);

  const std::vector<RunEntry> plan = plan_runs(cfg);
  update_manifest(mpath, [&](RunManifest& m) {
    for (const auto& e : plan) m.add(e);
  });

  SweepSummary summary;
  summary.total = plan.size();
  std::mutex summary_mu;

  auto process = [&](const RunEntry& planned) {
    bool claimed = false;
    bool base_failed = false;
    update_manifest(mpath, [&](RunManifest& m) {
      const RunEntry* cur = m.find(planned.id);
      if (cur->status == RunStatus::kDone || cur->status == RunStatus::kFailed || owned_by_live_process(*cur)) return;
      if (planned.kind == RunKind::kPost) {
        const RunEntry* b = m.find(base_run_id(planned.point.profile, planned.point.model_size));
        if (b && owned_by_live_process(*b)) return;
        if (!b || b->status != RunStatus::kDone) {
          base_failed = true;
          if (cur->status == RunStatus::kPending) m.set_status(planned.id, RunStatus::kRunning, owner_note());
          m.set_status(planned.id, RunStatus::kFailed, "base run did not finish");
          return;
        }
      }
      m.set_status(planned.id, RunStatus::kRunning, owner_note());
      claimed = true;
    });
    if (!claimed) {
      std::lock_guard lock(summary_mu);
      base_failed ? ++summary.failed : ++summary.skipped;
      return;
    }
    const auto t0 = std::chrono::steady_clock::now();
    try {
      const auto artifacts = planned.kind == RunKind::kBase ? execute_base(ctx, planned) : execute_post(ctx, planned);
      update_manifest(mpath, [&](RunManifest& m) {
        for (const auto& [k, v] : artifacts) m.set_artifact(planned.id, k, v);
        m.set_status(planned.id, RunStatus::kDone);
      });
      log_line(ctx, planned.id + " done in " + format_double(std::round(seconds_since(t0) * 10) / 10) + "s");
      std::lock_guard lock(summary_mu);
      ++summary.done;
    } catch (const std::exception& ex) {
      const std::string what = ex.what();
      update_manifest(mpath, [&](RunManifest& m) { m.set_status(planned.id, RunStatus::kFailed, what); });
      log_line(ctx, planned.id + " failed: " + what);
      std::lock_guard lock(summary_mu);
      ++summary.failed;
    }
  };

  auto run_all = [&](const std::vector<const RunEntry*>& entries) {
    const int jobs = std::max(1, std::min<int>(opts.jobs, static_cast<int>(entries.size())));
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
      for (std::size_t i; (i = next.fetch_add(1)) < entries.size();) process(*entries[i]);
    };
    if (jobs == 1) {
      worker();
      return;
    }
    std::vector<std::thread> pool;
    for (int w = 0; w < jobs; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  };

  std::vector<const RunEntry*> bases, posts;
  for (const auto& e : plan) (e.kind == RunKind::kBase ? bases : posts).push_back(&e);
  run_all(bases);
  run_all(posts);
  return summary;
}

std::vector<EvalOutcome> evaluate_runs(const fs::path& root, const std::string& run_id) {
  const fs::path cp = layout::config(root);
  if (!fs::exists(cp)) throw IoError(root.string() + " holds no sweep (missing config.json)");
  const ToolkitConfig cfg = parse_config(read_file(cp));
  const RunManifest manifest = read_manifest(layout::manifest(root));
  if (run_id != "all" && !manifest.find(run_id)) throw ConfigError("manifest has no run '" + run_id + "'");
  const SweepData data = prepare_data(cfg, root, cfg.sweep.profiles);

  std::vector<EvalOutcome> out;
  for (const auto& e : manifest.runs()) {
    if (run_id != "all" && e.id != run_id) continue;
    EvalOutcome o{e.id, false, {}};
    if (e.status != RunStatus::kDone) {
      o.note = "skipped: run is " + std::string(to_string(e.status));
      out.push_back(o);
      continue;
    }
    const auto model = e.artifacts.find("model");
    if (model == e.artifacts.end() || !fs::exists(root / model->second)) {
      o.note = "failed: checkpoint missing";
      out.push_back(o);
      continue;
    }
    try {
      const ModelParams params = load_checkpoint(root / model->second);
      const std::string base_id = base_run_id(e.point.profile, e.point.model_size);
      const fs::path dir_rel = e.kind == RunKind::kBase ? layout::base_dir(e.id) : layout::run_dir(e.id);
      evaluate_model(cfg, root, data, params, e.point.profile, base_id, dir_rel,
                     derive_seed(e.seed, stream::kClustering));
      update_manifest(layout::manifest(root), [&](RunManifest& m) {
        m.set_artifact(e.id, "eval_metrics", rel(dir_rel / "eval" / "metrics.json"));
      });
      o.evaluated = true;
    } catch (const std::exception& ex) {
      o.note = std::string("failed: ") + ex.what();
    }
    out.push_back(o);
  }
  return out;
}

}  // namespace conceptlm
