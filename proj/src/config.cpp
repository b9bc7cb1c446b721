// Copyright (c) 2026, The conceptlm Authors
// SPDX-License-Identifier: Apache-2.0

#include "conceptlm/config.hpp"

#include <algorithm>
#include <limits>
#include <set>

#include <json.hpp>

#include "conceptlm/error.hpp"
#include "conceptlm/rng.hpp"
#include "conceptlm/util.hpp"

namespace conceptlm {

using json = nlohmann::ordered_json;

namespace {

// Strict view of one JSON object: every key read is recorded and finish()
// rejects the rest.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(where() + " must be an object");
  }

  bool has(const char* key) const { return j_.contains(key); }

  template <typename T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    const json& v = j_.at(key);
    const std::string at = path_.empty() ? key : path_ + "." + key;
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) throw ConfigError(at + " must be a boolean");
      out = v.get<bool>();
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) throw ConfigError(at + " must be a string");
      out = v.get<std::string>();
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!v.is_number()) throw ConfigError(at + " must be a number");
      out = v.get<T>();
    } else {
      if (!v.is_number_integer()) throw ConfigError(at + " must be an integer");
      if constexpr (std::is_unsigned_v<T>) {
        if (!v.is_number_unsigned()) throw ConfigError(at + " must be non-negative");
        out = v.get<T>();
      } else {
        const auto x = v.get<std::int64_t>();
        if (x < std::numeric_limits<T>::min() || x > std::numeric_limits<T>::max())
          throw ConfigError(at + " is out of range");
        out = static_cast<T>(x);
      }
    }
  }

  template <typename T, typename Parse>
  void get_list(const char* key, std::vector<T>& out, Parse parse) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    const json& v = j_.at(key);
    const std::string at = path_.empty() ? key : path_ + "." + key;
    if (!v.is_array()) throw ConfigError(at + " must be a list");
    out.clear();
    for (const auto& item : v) out.push_back(parse(item, at));
  }

  // Null json when absent.
  const json& child(const char* key) {
    seen_.insert(key);
    static const json kNull;
    return j_.contains(key) ? j_.at(key) : kNull;
  }

  std::string sub(const char* key) const { return path_.empty() ? key : path_ + "." + key; }

  void finish() const {
    for (const auto& [k, v] : j_.items())
      if (!seen_.count(k)) throw ConfigError("unknown config key '" + (path_.empty() ? k : path_ + "." + k) + "'");
  }

 private:
  std::string where() const { return path_.empty() ? "config" : path_; }
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

std::string as_string(const json& v, const std::string& at) {
  if (!v.is_string()) throw ConfigError(at + " entries must be strings");
  return v.get<std::string>();
}

void read_model(const json& j, const std::string& path, ModelSize& m) {
  Section s(j, path);
  s.get("name", m.name);
  s.get("d_model", m.model.d_model);
  s.get("n_heads", m.model.n_heads);
  s.get("n_layers", m.model.n_layers);
  s.get("max_context", m.model.max_context);
  s.get("mlp_ratio", m.model.mlp_ratio);
  std::string dtype(to_string(m.model.dtype));
  s.get("dtype", dtype);
  m.model.dtype = dtype_from_string(dtype);
  s.finish();
}

json model_json(const ModelSize& m) {
  json j;
  j["name"] = m.name;
  j["d_model"] = m.model.d_model;
  j["n_heads"] = m.model.n_heads;
  j["n_layers"] = m.model.n_layers;
  j["max_context"] = m.model.max_context;
  j["mlp_ratio"] = m.model.mlp_ratio;
  j["dtype"] = to_string(m.model.dtype);
  return j;
}

std::size_t profile_index(TemplateProfile p) { return p == TemplateProfile::kA ? 0 : 1; }

}  // namespace

std::string_view to_string(ConceptMode m) { return m == ConceptMode::kConcepts ? "concepts" : "noise"; }

ConceptMode concept_mode_from_string(std::string_view s) {
  if (s == "concepts") return ConceptMode::kConcepts;
  if (s == "noise") return ConceptMode::kNoise;
  throw ConfigError("concept mode must be concepts or noise; got '" + std::string(s) + "'");
}

void ToolkitConfig::validate() const {
  if (vocabulary.n_domains < 1 || vocabulary.concepts_per_domain < 1 || vocabulary.tokens_per_concept < 1 ||
      vocabulary.n_function < 1)
    throw ConfigError("vocabulary counts must be >= 1");
  if (corpus.n_sequences < 1) throw ConfigError("corpus.n_sequences must be >= 1");
  if (corpus.held_out_sequences < 1) throw ConfigError("corpus.held_out_sequences must be >= 1");
  if (corpus.min_len < 2 || corpus.max_len < corpus.min_len)
    throw ConfigError("corpus lengths must satisfy 2 <= min_len <= max_len");
  if (model_sizes.empty()) throw ConfigError("model_sizes must not be empty");
  std::set<std::string> names;
  for (const auto& m : model_sizes) {
    if (m.name.empty()) throw ConfigError("model size name must not be empty");
    if (!names.insert(m.name).second) throw ConfigError("duplicate model size '" + m.name + "'");
    ModelConfig probe = m.model;
    probe.vocab_size = 1;
    probe.validate();
    if (m.model.max_context < corpus.max_len)
      throw ConfigError("model '" + m.name + "' context " + std::to_string(m.model.max_context) +
                        " is shorter than corpus.max_len " + std::to_string(corpus.max_len));
  }
  if (pretrain.epochs < 0) throw ConfigError("pretrain.epochs must be >= 0");
  if (!(pretrain.learning_rate >= 0.0)) throw ConfigError("pretrain.learning_rate must be >= 0");
  if (pretrain.batch_size < 1) throw ConfigError("pretrain.batch_size must be >= 1");
  if (concepts.k < 1) throw ConfigError("concepts.k must be >= 1");
  if (concepts.cap < 0) throw ConfigError("concepts.cap must be >= 0");
  if (concepts.provider != "oracle" && concepts.provider != "external")
    throw ConfigError("concepts.provider must be oracle or external");
  train.validate();
  if (sweep.lambdas.empty() || sweep.modes.empty() || sweep.proportions.empty() || sweep.profiles.empty())
    throw ConfigError("sweep grids must not be empty");
  for (double l : sweep.lambdas)
    if (!(l >= 0.0 && l <= 1.0)) throw ConfigError("sweep.lambdas entries must lie in [0, 1]");
  if (eval.clustering_sample < 2) throw ConfigError("eval.clustering_sample must be >= 2");
  if (eval.bootstrap_resamples < 1) throw ConfigError("eval.bootstrap_resamples must be >= 1");
  if (!(eval.bootstrap_level > 0.0 && eval.bootstrap_level < 1.0))
    throw ConfigError("eval.bootstrap_level must lie in (0, 1)");
}

ToolkitConfig parse_config(std::string_view text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  ToolkitConfig cfg;
  Section top(root, "");
  std::string format;
  int version = 0;
  top.get("format", format);
  top.get("version", version);
  if (format != kConfigFormat) throw ConfigError("config format must be '" + std::string(kConfigFormat) + "'");
  if (version != kConfigVersion)
    throw ConfigError("unsupported config version " + std::to_string(version) + " (expected " +
                      std::to_string(kConfigVersion) + ")");
  top.get("seed", cfg.seed);

  if (const json& j = top.child("vocabulary"); !j.is_null()) {
    Section s(j, "vocabulary");
    s.get("n_domains", cfg.vocabulary.n_domains);
    s.get("concepts_per_domain", cfg.vocabulary.concepts_per_domain);
    s.get("tokens_per_concept", cfg.vocabulary.tokens_per_concept);
    s.get("n_function", cfg.vocabulary.n_function);
    s.finish();
  }
  if (const json& j = top.child("corpus"); !j.is_null()) {
    Section s(j, "corpus");
    s.get("n_sequences", cfg.corpus.n_sequences);
    s.get("held_out_sequences", cfg.corpus.held_out_sequences);
    s.get("target_content_fraction", cfg.corpus.target_content_fraction);
    s.get("min_len", cfg.corpus.min_len);
    s.get("max_len", cfg.corpus.max_len);
    s.get("successor_prob", cfg.corpus.successor_prob);
    s.get("member_zipf", cfg.corpus.member_zipf);
    s.finish();
  }
  if (const json& j = top.child("model_sizes"); !j.is_null()) {
    if (!j.is_array()) throw ConfigError("model_sizes must be a list");
    cfg.model_sizes.clear();
    for (std::size_t i = 0; i < j.size(); ++i) {
      ModelSize m;
      read_model(j[i], "model_sizes[" + std::to_string(i) + "]", m);
      cfg.model_sizes.push_back(m);
    }
  }
  if (const json& j = top.child("pretrain"); !j.is_null()) {
    Section s(j, "pretrain");
    s.get("epochs", cfg.pretrain.epochs);
    s.get("learning_rate", cfg.pretrain.learning_rate);
    s.get("batch_size", cfg.pretrain.batch_size);
    s.finish();
  }
  if (const json& j = top.child("concepts"); !j.is_null()) {
    Section s(j, "concepts");
    s.get("k", cfg.concepts.k);
    s.get("cap", cfg.concepts.cap);
    s.get("provider", cfg.concepts.provider);
    if (const json& e = s.child("external"); !e.is_null()) {
      Section x(e, "concepts.external");
      auto& ext = cfg.concepts.external;
      x.get("base_url", ext.base_url);
      x.get("path", ext.path);
      x.get("model", ext.model);
      x.get("timeout_seconds", ext.timeout_seconds);
      x.get("max_retries", ext.max_retries);
      x.get("concurrency", ext.concurrency);
      x.get("repetition_penalty", ext.repetition_penalty);
      x.get("max_tokens", ext.max_tokens);
      long long backoff = ext.retry_backoff.count();
      x.get("retry_backoff_ms", backoff);
      ext.retry_backoff = std::chrono::milliseconds(backoff);
      x.finish();
    }
    s.finish();
  }
  if (const json& j = top.child("train"); !j.is_null()) {
    Section s(j, "train");
    auto& t = cfg.train;
    s.get("learning_rate", t.learning_rate);
    s.get("batch_size", t.batch_size);
    s.get("max_epochs", t.max_epochs);
    s.get("early_stop_patience", t.early_stop_patience);
    s.get("optimizer", t.optimizer);
    s.get("train_split", t.train_split);
    s.get("mass_threshold", t.objective.mass_threshold);
    s.get("include_original_in_mass", t.objective.include_original_in_mass);
    if (const json& a = s.child("adam"); !a.is_null()) {
      Section x(a, "train.adam");
      x.get("beta1", t.adam.beta1);
      x.get("beta2", t.adam.beta2);
      x.get("eps", t.adam.eps);
      x.finish();
    }
    s.finish();
  }
  if (const json& j = top.child("sweep"); !j.is_null()) {
    Section s(j, "sweep");
    s.get_list("lambdas", cfg.sweep.lambdas, [](const json& v, const std::string& at) {
      if (!v.is_number()) throw ConfigError(at + " entries must be numbers");
      return v.get<double>();
    });
    s.get_list("modes", cfg.sweep.modes,
               [](const json& v, const std::string& at) { return concept_mode_from_string(as_string(v, at)); });
    s.get_list("proportions", cfg.sweep.proportions,
               [](const json& v, const std::string& at) { return supervision_mode_from_string(as_string(v, at)); });
    s.get_list("profiles", cfg.sweep.profiles,
               [](const json& v, const std::string& at) { return template_profile_from_string(as_string(v, at)); });
    s.finish();
  }
  if (const json& j = top.child("eval"); !j.is_null()) {
    Section s(j, "eval");
    s.get("clustering_sample", cfg.eval.clustering_sample);
    s.get("bootstrap_resamples", cfg.eval.bootstrap_resamples);
    s.get("bootstrap_level", cfg.eval.bootstrap_level);
    s.finish();
  }
  top.finish();
  cfg.validate();
  return cfg;
}

ToolkitConfig load_config(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw ConfigError("config file not found: " + path.string());
  return parse_config(read_file(path));
}

std::string dump_config(const ToolkitConfig& cfg) {
  json j;
  j["format"] = kConfigFormat;
  j["version"] = kConfigVersion;
  j["seed"] = cfg.seed;
  j["vocabulary"] = {{"n_domains", cfg.vocabulary.n_domains},
                     {"concepts_per_domain", cfg.vocabulary.concepts_per_domain},
                     {"tokens_per_concept", cfg.vocabulary.tokens_per_concept},
                     {"n_function", cfg.vocabulary.n_function}};
  j["corpus"] = {{"n_sequences", cfg.corpus.n_sequences},
                 {"held_out_sequences", cfg.corpus.held_out_sequences},
                 {"target_content_fraction", cfg.corpus.target_content_fraction},
                 {"min_len", cfg.corpus.min_len},
                 {"max_len", cfg.corpus.max_len},
                 {"successor_prob", cfg.corpus.successor_prob},
                 {"member_zipf", cfg.corpus.member_zipf}};
  j["model_sizes"] = json::array();
  for (const auto& m : cfg.model_sizes) j["model_sizes"].push_back(model_json(m));
  j["pretrain"] = {{"epochs", cfg.pretrain.epochs},
                   {"learning_rate", cfg.pretrain.learning_rate},
                   {"batch_size", cfg.pretrain.batch_size}};
  const auto& ext = cfg.concepts.external;
  j["concepts"] = {{"k", cfg.concepts.k},
                   {"cap", cfg.concepts.cap},
                   {"provider", cfg.concepts.provider},
                   {"external",
                    {{"base_url", ext.base_url},
                     {"path", ext.path},
                     {"model", ext.model},
                     {"timeout_seconds", ext.timeout_seconds},
                     {"max_retries", ext.max_retries},
                     {"concurrency", ext.concurrency},
                     {"repetition_penalty", ext.repetition_penalty},
                     {"max_tokens", ext.max_tokens},
                     {"retry_backoff_ms", ext.retry_backoff.count()}}}};
  const auto& t = cfg.train;
  j["train"] = {{"learning_rate", t.learning_rate},
                {"batch_size", t.batch_size},
                {"max_epochs", t.max_epochs},
                {"early_stop_patience", t.early_stop_patience},
                {"optimizer", t.optimizer},
                {"train_split", t.train_split},
                {"mass_threshold", t.objective.mass_threshold},
                {"include_original_in_mass", t.objective.include_original_in_mass},
                {"adam", {{"beta1", t.adam.beta1}, {"beta2", t.adam.beta2}, {"eps", t.adam.eps}}}};
  json modes = json::array(), props = json::array(), profiles = json::array();
  for (auto m : cfg.sweep.modes) modes.push_back(to_string(m));
  for (auto p : cfg.sweep.proportions) props.push_back(to_string(p));
  for (auto p : cfg.sweep.profiles) profiles.push_back(to_string(p));
  j["sweep"] = {{"lambdas", cfg.sweep.lambdas}, {"modes", modes}, {"proportions", props}, {"profiles", profiles}};
  j["eval"] = {{"clustering_sample", cfg.eval.clustering_sample},
               {"bootstrap_resamples", cfg.eval.bootstrap_resamples},
               {"bootstrap_level", cfg.eval.bootstrap_level}};
  return j.dump(2) + "\n";
}

VocabularySpec vocabulary_spec(const ToolkitConfig& cfg) {
  VocabularySpec spec = cfg.vocabulary;
  spec.seed = derive_seed(cfg.seed, stream::kVocabulary);
  return spec;
}

namespace {
GeneratorConfig corpus_config(const ToolkitConfig& cfg, TemplateProfile profile, int n, std::uint64_t tag) {
  GeneratorConfig g;
  g.n_sequences = n;
  g.profile = profile;
  g.target_content_fraction = cfg.corpus.target_content_fraction;
  g.min_len = cfg.corpus.min_len;
  g.max_len = cfg.corpus.max_len;
  g.successor_prob = cfg.corpus.successor_prob;
  g.member_zipf = cfg.corpus.member_zipf;
  g.seed = derive_seed(derive_seed(cfg.seed, tag), profile_index(profile));
  return g;
}
}  // namespace

GeneratorConfig training_corpus_config(const ToolkitConfig& cfg, TemplateProfile profile) {
  return corpus_config(cfg, profile, cfg.corpus.n_sequences, stream::kCorpus);
}

GeneratorConfig held_out_corpus_config(const ToolkitConfig& cfg, TemplateProfile profile) {
  return corpus_config(cfg, profile, cfg.corpus.held_out_sequences, stream::kHeldOut);
}

ModelConfig model_config(const ToolkitConfig&, const ModelSize& size, const Vocabulary& vocab) {
  ModelConfig m = size.model;
  m.vocab_size = vocab.size();
  return m;
}

const ModelSize& find_model_size(const ToolkitConfig& cfg, std::string_view name) {
  for (const auto& m : cfg.model_sizes)
    if (m.name == name) return m;
  throw ConfigError("unknown model size '" + std::string(name) + "'");
}

}  // namespace conceptlm
