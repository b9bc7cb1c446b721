// Copyright (c) 2026, The conceptlm Authors
// SPDX-License-Identifier: Apache-2.0

#include "conceptlm/trainer.hpp"

#include <chrono>
#include <cmath>
#include <numeric>
#include <ostream>

#include "conceptlm/checkpoint.hpp"
#include "conceptlm/error.hpp"
#include "conceptlm/rng.hpp"
#include "conceptlm/util.hpp"

namespace conceptlm {

void TrainConfig::validate() const {
  if (!(learning_rate >= 0.0)) throw ConfigError("learning_rate must be >= 0");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (max_epochs < 1) throw ConfigError("max_epochs must be >= 1");
  if (early_stop_patience < 1 || early_stop_patience > max_epochs)
    throw ConfigError("early_stop_patience must lie in [1, max_epochs]");
  if (optimizer != "adam") throw ConfigError("unsupported optimizer '" + optimizer + "'");
  if (!(train_split > 0.0 && train_split < 1.0)) throw ConfigError("train_split must lie in (0, 1)");
  if (!(adam.beta1 >= 0.0 && adam.beta1 < 1.0 && adam.beta2 >= 0.0 && adam.beta2 < 1.0 && adam.eps > 0.0))
    throw ConfigError("invalid Adam hyperparameters");
  objective.validate();
}

void write_step_csv(const RunLog& log, std::ostream& out) {
  out << "step,ntp,concept,combined,gated_count,active_count\n";
  for (const auto& s : log.steps)
    out << s.step << ',' << format_double(s.loss.ntp_loss) << ',' << format_double(s.loss.concept_loss) << ','
        << format_double(s.loss.combined) << ',' << s.loss.gated_count << ',' << s.loss.active_count << '\n';
}

void write_epoch_csv(const RunLog& log, std::ostream& out) {
  out << "epoch,val_ntp,val_concept,val_combined,val_gated_count,val_active_count,train_gated_fraction\n";
  for (const auto& e : log.epochs)
    out << e.epoch << ',' << format_double(e.validation.ntp_loss) << ',' << format_double(e.validation.concept_loss)
        << ',' << format_double(e.validation.combined) << ',' << e.validation.gated_count << ','
        << e.validation.active_count << ',' << format_double(e.train_gated_fraction) << '\n';
}

void AdamOptimizer::step(std::span<double> params, std::span<const double> grads, double learning_rate) {
  if (params.size() != m_.size() || grads.size() != m_.size()) throw ShapeError("optimizer size mismatch");
  ++t_;
  const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    m_[i] = cfg_.beta1 * m_[i] + (1.0 - cfg_.beta1) * grads[i];
    v_[i] = cfg_.beta2 * v_[i] + (1.0 - cfg_.beta2) * grads[i] * grads[i];
    params[i] -= learning_rate * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + cfg_.eps);
  }
}

void AdamOptimizer::restore(std::size_t t, std::vector<double> m, std::vector<double> v) {
  if (m.size() != m_.size() || v.size() != v_.size()) throw ShapeError("optimizer state size mismatch");
  t_ = t;
  m_ = std::move(m);
  v_ = std::move(v);
}

DataSplit split_dataset(std::size_t n, double train_fraction, std::uint64_t seed) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng = make_rng(seed, stream::kSplit);
  for (std::size_t i = n; i > 1; --i) std::swap(idx[i - 1], idx[uniform_index(rng, i)]);
  std::size_t n_train = static_cast<std::size_t>(std::floor(static_cast<double>(n) * train_fraction));
  n_train = std::clamp<std::size_t>(n_train, std::min<std::size_t>(n, 1), n > 1 ? n - 1 : n);
  DataSplit split;
  split.train.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_train));
  split.validation.assign(idx.begin() + static_cast<std::ptrdiff_t>(n_train), idx.end());
  // A single sequence validates on itself.
  if (split.validation.empty()) split.validation = split.train;
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.validation.begin(), split.validation.end());
  return split;
}

Trainer::Trainer(ModelParams init, Dataset data, TrainConfig cfg)
    : cfg_(std::move(cfg)), data_(std::move(data)), params_(std::move(init)) {
  cfg_.validate();
  if (data_.empty()) throw ConfigError("training dataset is empty");
  for (const auto& item : data_)
    if (item.sequence.length() - 1 > params_.config().max_context)
      throw ContextError("training sequence of length " + std::to_string(item.sequence.length()) +
                         " does not fit max_context " + std::to_string(params_.config().max_context));
  split_ = split_dataset(data_.size(), cfg_.train_split, cfg_.seed);
  adam_ = AdamOptimizer(params_.size(), cfg_.adam);
  best_ = params_;
  validate_epoch();
  best_val_ = log_.epochs.back().validation.combined;
}

std::vector<AnnotatedSequence> Trainer::subset(const std::vector<std::size_t>& idx) const {
  std::vector<AnnotatedSequence> out;
  out.reserve(idx.size());
  for (std::size_t i : idx) out.push_back(data_[i]);
  return out;
}

void Trainer::validate_epoch() {
  const auto val = subset(split_.validation);
  EpochRecord rec;
  rec.epoch = epoch_;
  rec.validation = evaluate_loss(params_, val, cfg_.objective);
  log_.epochs.push_back(rec);
}

void Trainer::run_epoch() {
  if (finished_) return;
  const auto start = std::chrono::steady_clock::now();
  ++epoch_;
  std::vector<std::size_t> order = split_.train;
  Rng rng(derive_seed(derive_seed(cfg_.seed, stream::kShuffle), static_cast<std::uint64_t>(epoch_)));
  for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[uniform_index(rng, i)]);

  std::size_t gated = 0, annotated = 0;
  for (std::size_t at = 0; at < order.size(); at += cfg_.batch_size) {
    std::vector<AnnotatedSequence> batch;
    for (std::size_t j = at; j < std::min(order.size(), at + cfg_.batch_size); ++j) batch.push_back(data_[order[j]]);
    LossAndGrad lg{LossBreakdown{}, Gradients{}};
    try {
      lg = loss_and_grad(params_, batch, cfg_.objective);
    } catch (const NumericalError& e) {
      log_.diverged = true;
      log_.stopping_epoch = epoch_;
      finished_ = true;
      throw DivergenceError(std::string("training diverged: ") + e.what(), result());
    }
    adam_.step(params_.data(), lg.grads.data(), cfg_.learning_rate);
    if (!params_.all_finite()) {
      log_.diverged = true;
      log_.stopping_epoch = epoch_;
      finished_ = true;
      throw DivergenceError("training diverged: non-finite parameters after step " + std::to_string(adam_.steps()),
                            result());
    }
    gated += lg.loss.gated_count;
    annotated += lg.loss.gated_count + lg.loss.active_count;
    log_.steps.push_back({adam_.steps(), epoch_, lg.loss});
  }

  validate_epoch();
  auto& rec = log_.epochs.back();
  rec.train_gated_fraction = annotated ? static_cast<double>(gated) / static_cast<double>(annotated) : 0.0;
  if (rec.validation.combined < best_val_) {
    best_val_ = rec.validation.combined;
    best_ = params_;
    log_.best_epoch = epoch_;
    bad_epochs_ = 0;
  } else {
    ++bad_epochs_;
  }
  if (bad_epochs_ >= cfg_.early_stop_patience || epoch_ >= cfg_.max_epochs) finished_ = true;
  log_.stopping_epoch = epoch_;
  log_.wall_seconds += std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

void Trainer::run_to_completion() {
  while (!finished_) run_epoch();
}

TrainResult Trainer::result() const { return {best_, log_}; }

namespace {

nlohmann::json loss_to_json(const LossBreakdown& l) {
  return {{"ntp", l.ntp_loss},          {"concept", l.concept_loss},       {"combined", l.combined},
          {"gated", l.gated_count},     {"active", l.active_count},        {"skipped", l.skipped_empty},
          {"positions", l.ntp_positions}, {"lambda", l.concept_weight}, {"threshold", l.mass_threshold}};
}

LossBreakdown loss_from_json(const nlohmann::json& j) {
  LossBreakdown l;
  l.ntp_loss = j.at("ntp");
  l.concept_loss = j.at("concept");
  l.combined = j.at("combined");
  l.gated_count = j.at("gated");
  l.active_count = j.at("active");
  l.skipped_empty = j.at("skipped");
  l.ntp_positions = j.at("positions");
  l.concept_weight = j.at("lambda");
  l.mass_threshold = j.at("threshold");
  return l;
}

}  // namespace

void Trainer::save_state(const std::filesystem::path& path) const {
  TensorContainer c;
  c.metadata["kind"] = "train_state";
  c.metadata["config"] = model_config_to_json(params_.config());
  c.metadata["epoch"] = epoch_;
  c.metadata["bad_epochs"] = bad_epochs_;
  c.metadata["best_val"] = best_val_;
  c.metadata["finished"] = finished_;
  c.metadata["adam_steps"] = adam_.steps();
  c.metadata["seed"] = cfg_.seed;
  c.metadata["n_sequences"] = data_.size();
  nlohmann::json steps = nlohmann::json::array(), epochs = nlohmann::json::array();
  for (const auto& s : log_.steps) steps.push_back({{"step", s.step}, {"epoch", s.epoch}, {"loss", loss_to_json(s.loss)}});
  for (const auto& e : log_.epochs)
    epochs.push_back({{"epoch", e.epoch}, {"val", loss_to_json(e.validation)}, {"gated_fraction", e.train_gated_fraction}});
  c.metadata["log"] = {{"steps", steps},
                       {"epochs", epochs},
                       {"stopping_epoch", log_.stopping_epoch},
                       {"best_epoch", log_.best_epoch},
                       {"wall_seconds", log_.wall_seconds},
                       {"diverged", log_.diverged}};
  append_params(c, params_, "param/");
  append_params(c, best_, "best/");
  c.tensors.push_back({"adam/m", {adam_.first_moment().size()}, adam_.first_moment()});
  c.tensors.push_back({"adam/v", {adam_.second_moment().size()}, adam_.second_moment()});
  write_container(path, c);
}

Trainer Trainer::load_state(const std::filesystem::path& path, Dataset data, TrainConfig cfg) {
  const TensorContainer c = read_container(path);
  const auto& meta = c.metadata;
  if (meta.value("kind", "") != "train_state") throw ParseError(path.string() + ": not a trainer state");
  cfg.validate();
  if (meta.at("seed").get<std::uint64_t>() != cfg.seed || meta.at("n_sequences").get<std::size_t>() != data.size())
    throw ConfigError(path.string() + ": state was written for a different seed or dataset");

  Trainer t;
  t.cfg_ = std::move(cfg);
  t.data_ = std::move(data);
  const ModelConfig mcfg = model_config_from_json(meta.at("config"));
  t.params_ = extract_params(c, mcfg, "param/");
  t.best_ = extract_params(c, mcfg, "best/");
  t.split_ = split_dataset(t.data_.size(), t.cfg_.train_split, t.cfg_.seed);
  t.adam_ = AdamOptimizer(t.params_.size(), t.cfg_.adam);
  t.adam_.restore(meta.at("adam_steps").get<std::size_t>(), c.get("adam/m").values, c.get("adam/v").values);
  t.epoch_ = meta.at("epoch");
  t.bad_epochs_ = meta.at("bad_epochs");
  t.best_val_ = meta.at("best_val");
  t.finished_ = meta.at("finished");
  const auto& log = meta.at("log");
  for (const auto& s : log.at("steps")) t.log_.steps.push_back({s.at("step"), s.at("epoch"), loss_from_json(s.at("loss"))});
  for (const auto& e : log.at("epochs"))
    t.log_.epochs.push_back({e.at("epoch"), loss_from_json(e.at("val")), e.at("gated_fraction")});
  t.log_.stopping_epoch = log.at("stopping_epoch");
  t.log_.best_epoch = log.at("best_epoch");
  t.log_.wall_seconds = log.at("wall_seconds");
  t.log_.diverged = log.at("diverged");
  return t;
}

TrainResult train(const ModelParams& params, const Dataset& data, const TrainConfig& cfg) {
  Trainer trainer(params, data, cfg);
  trainer.run_to_completion();
  return trainer.result();
}

}  // namespace conceptlm
