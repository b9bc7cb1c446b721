// Copyright (c) 2026, The conceptlm Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "conceptlm/annotation.hpp"
#include "conceptlm/error.hpp"
#include "conceptlm/model.hpp"
#include "conceptlm/objective.hpp"

namespace conceptlm {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct TrainConfig {
  double learning_rate = 7e-5;
  int batch_size = 2;
  int max_epochs = 5;
  int early_stop_patience = 1;
  std::uint64_t seed = 0;
  std::string optimizer = "adam";
  AdamConfig adam;
  ObjectiveConfig objective;
  double train_split = 0.9;

  void validate() const;
};

struct StepRecord {
  std::size_t step = 0;  // 1-based, global across epochs
  int epoch = 0;
  LossBreakdown loss;
};

struct EpochRecord {
  int epoch = 0;  // 0 is the untrained model
  LossBreakdown validation;
  double train_gated_fraction = 0.0;
};

struct RunLog {
  std::vector<StepRecord> steps;
  std::vector<EpochRecord> epochs;
  int stopping_epoch = 0;
  int best_epoch = 0;
  double wall_seconds = 0.0;
  bool diverged = false;
};

// CSV columns: step,ntp,concept,combined,gated_count,active_count
void write_step_csv(const RunLog& log, std::ostream& out);
void write_epoch_csv(const RunLog& log, std::ostream& out);

struct TrainResult {
  ModelParams params;  // best validation checkpoint
  RunLog log;
};

class DivergenceError : public NumericalError {
 public:
  DivergenceError(const std::string& what, TrainResult last_good)
      : NumericalError(what), last_good_(std::move(last_good)) {}
  const TrainResult& last_good() const { return last_good_; }

 private:
  TrainResult last_good_;
};

class AdamOptimizer {
 public:
  AdamOptimizer() = default;
  AdamOptimizer(std::size_t n, AdamConfig cfg) : cfg_(cfg), m_(n, 0.0), v_(n, 0.0) {}

  void step(std::span<double> params, std::span<const double> grads, double learning_rate);

  std::size_t steps() const { return t_; }
  const std::vector<double>& first_moment() const { return m_; }
  const std::vector<double>& second_moment() const { return v_; }
  void restore(std::size_t t, std::vector<double> m, std::vector<double> v);

 private:
  AdamConfig cfg_;
  std::size_t t_ = 0;
  std::vector<double> m_, v_;
};

// Deterministic train/validation split of dataset indices.
struct DataSplit {
  std::vector<std::size_t> train;
  std::vector<std::size_t> validation;
};
DataSplit split_dataset(std::size_t n, double train_fraction, std::uint64_t seed);

// Epoch-at-a-time training with early stopping on validation combined loss.
// State can be saved between epochs and resumed bit-exactly.
class Trainer {
 public:
  Trainer(ModelParams init, Dataset data, TrainConfig cfg);

  bool finished() const { return finished_; }
  int epoch() const { return epoch_; }
  // Trains one epoch and updates early-stopping state. Throws
  // DivergenceError carrying the best checkpoint so far.
  void run_epoch();
  void run_to_completion();

  const ModelParams& current() const { return params_; }
  TrainResult result() const;

  void save_state(const std::filesystem::path& path) const;
  static Trainer load_state(const std::filesystem::path& path, Dataset data, TrainConfig cfg);

 private:
  Trainer() = default;
  void validate_epoch();
  std::vector<AnnotatedSequence> subset(const std::vector<std::size_t>& idx) const;

  TrainConfig cfg_;
  Dataset data_;
  DataSplit split_;
  ModelParams params_;
  ModelParams best_;
  AdamOptimizer adam_;
  RunLog log_;
  int epoch_ = 0;
  int bad_epochs_ = 0;
  double best_val_ = 0.0;
  bool finished_ = false;
};

TrainResult train(const ModelParams& params, const Dataset& data, const TrainConfig& cfg);

}  // namespace conceptlm
