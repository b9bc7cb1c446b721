// Copyright (c) 2026, The conceptlm Authors
// SPDX-License-Identifier: Apache-2.0
//
// A small pre-norm decoder-only transformer: learned positional embeddings,
// multi-head causal self-attention without biases, GELU (tanh) MLP with
// biases, final LayerNorm and an untied output projection.
//
// Parameters live in one flat double buffer so optimizers, checkpoints and
// finite-difference checks can treat them uniformly; named tensors are views
// into it. Gradients use the same type and layout.

#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "conceptlm/corpus.hpp"

namespace conceptlm {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

enum class DType : std::uint8_t { kF32, kF64 };

std::string_view to_string(DType t);
DType dtype_from_string(std::string_view s);

struct ModelConfig {
  int vocab_size = 300;
  int d_model = 64;
  int n_heads = 4;
  int n_layers = 2;
  int max_context = 64;
  int mlp_ratio = 4;
  DType dtype = DType::kF64;

  int d_head() const { return d_model / n_heads; }
  int d_mlp() const { return d_model * mlp_ratio; }
  // Throws ConfigError.
  void validate() const;
  bool operator==(const ModelConfig&) const = default;
};

struct TensorInfo {
  std::string name;
  int rows = 0;
  int cols = 0;
  std::size_t offset = 0;
  std::size_t size() const { return static_cast<std::size_t>(rows) * cols; }
};

// Offsets of every tensor, computed once from a config.
struct ParamLayout {
  struct Block {
    std::size_t ln1_g, ln1_b, wq, wk, wv, wo, ln2_g, ln2_b, w1, b1, w2, b2;
  };
  std::size_t wte = 0, wpe = 0, lnf_g = 0, lnf_b = 0, wout = 0;
  std::vector<Block> blocks;
  std::vector<TensorInfo> tensors;
  std::size_t total = 0;

  explicit ParamLayout(const ModelConfig& cfg);
  ParamLayout() = default;
};

class ModelParams {
 public:
  ModelParams() = default;
  // Zero-filled buffer shaped by `cfg`.
  explicit ModelParams(const ModelConfig& cfg);

  const ModelConfig& config() const { return config_; }
  const ParamLayout& layout() const { return *layout_; }
  std::size_t size() const { return data_.size(); }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }

  const std::vector<TensorInfo>& tensors() const { return layout_->tensors; }
  const TensorInfo& info(std::string_view name) const;
  Eigen::Map<RowMatrix> tensor(std::string_view name);
  Eigen::Map<const RowMatrix> tensor(std::string_view name) const;

  void set_zero();
  bool all_finite() const;

  bool operator==(const ModelParams& other) const {
    return config_ == other.config_ && data_ == other.data_;
  }

 private:
  ModelConfig config_;
  std::shared_ptr<const ParamLayout> layout_;
  std::vector<double> data_;
};

using Gradients = ModelParams;

// Closed-form parameter count implied by the config.
std::size_t parameter_count(const ModelConfig& cfg);

// Normal(0, 0.02) weights and embeddings, unit norm gains, zero biases.
ModelParams init_params(const ModelConfig& cfg, std::uint64_t seed);

inline constexpr double kInitStd = 0.02;
inline constexpr double kLayerNormEps = 1e-5;

struct ForwardOutput {
  RowMatrix logits;        // [length x vocab]
  RowMatrix final_hidden;  // [length x d_model], after the final LayerNorm
};

// Forward activations of one sequence, retained for reverse accumulation.
// The referenced ModelParams must outlive the graph.
class SequenceGraph {
 public:
  // Throws ContextError for empty or over-length input, VocabularyError for
  // ids outside the vocabulary.
  SequenceGraph(const ModelParams& params, std::span<const TokenId> tokens);
  ~SequenceGraph();
  SequenceGraph(SequenceGraph&&) noexcept;
  SequenceGraph& operator=(SequenceGraph&&) noexcept;

  int length() const;
  const RowMatrix& logits() const;
  const RowMatrix& final_hidden() const;

  // Adds d(loss)/d(params) to `grads` given d(loss)/d(logits).
  void backward(const RowMatrix& dlogits, Gradients& grads) const;

  struct Impl;

 private:
  std::unique_ptr<Impl> impl_;
};

ForwardOutput forward(const ModelParams& params, std::span<const TokenId> tokens);

// Row-wise softmax with max subtraction.
RowMatrix softmax_rows(const RowMatrix& logits);
Eigen::VectorXd softmax(std::span<const double> row);
// log-sum-exp of a row with max subtraction.
double log_sum_exp(std::span<const double> row);
// Index of the maximum, lowest id on ties.
int argmax_lowest(std::span<const double> row);

// View of row `i` of a row-major matrix.
inline std::span<const double> row_span(const RowMatrix& m, Eigen::Index i) {
  return {m.data() + i * m.cols(), static_cast<std::size_t>(m.cols())};
}

}  // namespace conceptlm
