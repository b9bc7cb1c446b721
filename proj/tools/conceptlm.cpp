// Copyright (c) 2026, The conceptlm Authors
// SPDX-License-Identifier: Apache-2.0
//
// conceptlm: command-line front end.
//
//   conceptlm --config desk.json gen-corpus
//   conceptlm --config desk.json build-concepts --model base.ckpt --corpus c.jsonl --out c.concepts.jsonl
//   conceptlm --config desk.json train --dataset c.concepts.jsonl --lambda 0.5 --out runs/x
//   conceptlm --config desk.json --jobs 4 sweep
//   conceptlm eval all
//   conceptlm report

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "conceptlm/checkpoint.hpp"
#include "conceptlm/config.hpp"
#include "conceptlm/error.hpp"
#include "conceptlm/interchange.hpp"
#include "conceptlm/report.hpp"
#include "conceptlm/rng.hpp"
#include "conceptlm/sweep.hpp"
#include "conceptlm/util.hpp"

namespace fs = std::filesystem;
using namespace conceptlm;

namespace {

struct Globals {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string run_root;
  int jobs = 1;
};

fs::path resolve_run_root(const Globals& g) {
  if (!g.run_root.empty()) return g.run_root;
  if (const char* env = std::getenv(kRunRootEnv); env && *env) return env;
  return "conceptlm-runs";
}

ToolkitConfig require_config(const Globals& g) {
  if (g.config.empty()) throw ConfigError("--config is required for this command");
  ToolkitConfig cfg = load_config(g.config);
  if (g.seed) cfg.seed = *g.seed;
  return cfg;
}

Vocabulary load_vocab(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read vocabulary " + path.string());
  return read_vocabulary(in);
}

int cmd_gen_corpus(const Globals& g) {
  const ToolkitConfig cfg = require_config(g);
  const fs::path root = resolve_run_root(g);
  const SweepData d = prepare_data(cfg, root, cfg.sweep.profiles);
  std::cout << "vocabulary: " << d.vocab.size() << " tokens, " << d.vocab.num_concepts() << " concepts -> "
            << layout::vocabulary(root).string() << '\n';
  for (const auto& [p, seqs] : d.training)
    std::cout << "corpus " << to_string(p) << ": " << seqs.size() << " sequences -> "
              << layout::corpus(root, p).string() << '\n';
  for (const auto& [p, seqs] : d.held_out)
    std::cout << "held-out " << to_string(p) << ": " << seqs.size() << " sequences -> "
              << layout::held_out(root, p).string() << '\n';
  std::cout << "similarity: " << d.similarity.pairs().size() << " pairs -> " << layout::similarity(root).string()
            << '\n';
  return 0;
}

int cmd_build_concepts(const Globals& g, const std::string& model, const std::string& corpus,
                       const std::string& out, std::string vocab_path) {
  const ToolkitConfig cfg = require_config(g);
  if (vocab_path.empty()) vocab_path = layout::vocabulary(resolve_run_root(g)).string();
  const Vocabulary vocab = load_vocab(vocab_path);
  const ModelParams params = load_checkpoint(model);
  const auto seqs = sequences_of(ingest_annotated(fs::path(corpus), vocab, {cfg.concepts.cap, 0}).data);
  const auto provider = make_provider(cfg.concepts);
  BuildOptions opts;
  opts.k = cfg.concepts.k;
  opts.cap = cfg.concepts.cap;
  opts.jobs = cfg.concepts.provider == "external" ? cfg.concepts.external.concurrency : std::max(1, g.jobs);
  const BuildResult b = build_dataset(params, vocab, seqs, *provider, opts);
  export_jsonl(b.data, vocab, fs::path(out));
  std::cout << count_annotations(b.data) << " annotations over " << b.data.size() << " sequences -> " << out
            << "\nprovider " << cfg.concepts.provider << ": " << b.stats.duplicates_removed << " duplicates, "
            << b.stats.non_candidates_removed << " non-candidates, " << b.stats.truncated
            << " over cap removed\n";
  return 0;
}

int cmd_train(const Globals& g, const std::string& dataset, const std::string& init, const std::string& out,
              double lambda, std::string vocab_path, const std::string& model_size) {
  const ToolkitConfig cfg = require_config(g);
  if (vocab_path.empty()) vocab_path = layout::vocabulary(resolve_run_root(g)).string();
  const Vocabulary vocab = load_vocab(vocab_path);
  const Dataset data = ingest_annotated(fs::path(dataset), vocab, {cfg.concepts.cap, 0}).data;
  const ModelParams params =
      init.empty() ? init_params(model_config(cfg, find_model_size(cfg, model_size), vocab),
                                 derive_seed(cfg.seed, stream::kInit))
                   : load_checkpoint(init);
  TrainConfig t = cfg.train;
  t.seed = derive_seed(cfg.seed, stream::kSweepRun);
  t.objective.concept_weight = lambda;
  const fs::path dir = out;
  fs::create_directories(dir);
  write_file_atomic(dir / "config.json", dump_config(cfg));

  const fs::path state = dir / "state.ckpt";
  std::optional<Trainer> trainer;
  if (fs::exists(state))
    trainer.emplace(Trainer::load_state(state, data, t));
  else
    trainer.emplace(params, data, t);
  while (!trainer->finished()) {
    trainer->run_epoch();
    trainer->save_state(state);
    const auto& e = trainer->result().log.epochs.back();
    std::cout << "epoch " << e.epoch << ": validation combined " << format_double(e.validation.combined)
              << " (ntp " << format_double(e.validation.ntp_loss) << ", concept "
              << format_double(e.validation.concept_loss) << ")\n";
  }
  const TrainResult r = trainer->result();
  save_checkpoint(dir / "model.ckpt", r.params);
  std::ostringstream steps, epochs;
  write_step_csv(r.log, steps);
  write_epoch_csv(r.log, epochs);
  write_file_atomic(dir / "steps.csv", steps.str());
  write_file_atomic(dir / "epochs.csv", epochs.str());
  std::cout << "best epoch " << r.log.best_epoch << ", stopped at " << r.log.stopping_epoch << " -> "
            << (dir / "model.ckpt").string() << '\n';
  return 0;
}

int cmd_sweep(const Globals& g) {
  const ToolkitConfig cfg = require_config(g);
  const fs::path root = resolve_run_root(g);
  const SweepSummary s = run_sweep(cfg, root, {std::max(1, g.jobs), false});
  std::cout << s.total << " runs: " << s.done << " done, " << s.failed << " failed, " << s.skipped
            << " skipped -> " << root.string() << '\n';
  // Partial failures are recorded in the manifest; only a total loss is an error.
  return s.failed > 0 && s.done == 0 && s.skipped == 0 ? 1 : 0;
}

int cmd_eval(const Globals& g, const std::string& run_id) {
  const auto outcomes = evaluate_runs(resolve_run_root(g), run_id);
  std::size_t ok = 0, failed = 0;
  for (const auto& o : outcomes) {
    std::cout << o.run_id << ": " << (o.evaluated ? "evaluated" : o.note) << '\n';
    if (o.evaluated)
      ++ok;
    else if (o.note.rfind("failed", 0) == 0)
      ++failed;
  }
  return failed > 0 && ok == 0 ? 1 : 0;
}

int cmd_report(const Globals& g, const std::string& dir) {
  const fs::path root = dir.empty() ? resolve_run_root(g) : fs::path(dir);
  const SweepReport r = write_report(root);
  write_text_report(r, std::cout);
  std::cout << "-> " << (root / "report").string() << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Concept-level language-model training toolkit"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  std::uint64_t seed = 0;
  app.add_option("--config", g.config, "Config file (JSON)");
  auto* seed_opt = app.add_option("--seed", seed, "Master seed, overrides the config");
  app.add_option("--run-root", g.run_root,
                 std::string("Run root directory (default: $") + kRunRootEnv + " or ./conceptlm-runs)");
  app.add_option("--jobs", g.jobs, "Parallel runs or workers")->check(CLI::PositiveNumber);

  auto* gen = app.add_subcommand("gen-corpus", "Generate vocabulary, corpora and similarity benchmark");

  auto* build = app.add_subcommand("build-concepts", "Annotate a corpus with synonym sets");
  std::string b_model, b_corpus, b_out, b_vocab;
  build->add_option("--model", b_model, "Model checkpoint used for candidate ranking")->required();
  build->add_option("--corpus", b_corpus, "Corpus in the interchange format")->required();
  build->add_option("--out", b_out, "Output JSONL")->required();
  build->add_option("--vocab", b_vocab, "Vocabulary file (default: <run-root>/data/vocab.json)");

  auto* train = app.add_subcommand("train", "Train one model");
  std::string t_dataset, t_init, t_out, t_vocab, t_size = "desk";
  double t_lambda = 0.0;
  train->add_option("--dataset", t_dataset, "Annotated dataset (JSONL)")->required();
  train->add_option("--init", t_init, "Starting checkpoint (default: fresh initialization)");
  train->add_option("--out", t_out, "Output directory")->required();
  train->add_option("--lambda", t_lambda, "Concept-loss weight")->check(CLI::Range(0.0, 1.0));
  train->add_option("--vocab", t_vocab, "Vocabulary file (default: <run-root>/data/vocab.json)");
  train->add_option("--model-size", t_size, "Model size name from the config");

  auto* sweep = app.add_subcommand("sweep", "Run or resume the configured sweep");

  auto* eval = app.add_subcommand("eval", "Re-evaluate finished runs");
  std::string e_run = "all";
  eval->add_option("run", e_run, "Run id or 'all'");

  auto* report = app.add_subcommand("report", "Write report CSVs for a sweep");
  std::string r_dir;
  report->add_option("dir", r_dir, "Sweep directory (default: the run root)");

  CLI11_PARSE(app, argc, argv);
  if (*seed_opt) g.seed = seed;

  try {
    if (*gen) return cmd_gen_corpus(g);
    if (*build) return cmd_build_concepts(g, b_model, b_corpus, b_out, b_vocab);
    if (*train) return cmd_train(g, t_dataset, t_init, t_out, t_lambda, t_vocab, t_size);
    if (*sweep) return cmd_sweep(g);
    if (*eval) return cmd_eval(g, e_run);
    if (*report) return cmd_report(g, r_dir);
  } catch (const ConfigError& e) {
    std::cerr << "conceptlm: config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "conceptlm: error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
