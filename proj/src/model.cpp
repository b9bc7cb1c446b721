// Copyright (c) 2026, The conceptlm Authors
// SPDX-License-Identifier: Apache-2.0

#include "conceptlm/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "conceptlm/error.hpp"
#include "conceptlm/rng.hpp"

namespace conceptlm {

std::string_view to_string(DType t) { return t == DType::kF32 ? "f32" : "f64"; }

DType dtype_from_string(std::string_view s) {
  if (s == "f32") return DType::kF32;
  if (s == "f64") return DType::kF64;
  throw ConfigError("dtype must be f32 or f64, got '" + std::string(s) + "'");
}

void ModelConfig::validate() const {
  if (vocab_size < 1 || d_model < 1 || n_heads < 1 || n_layers < 1 || mlp_ratio < 1)
    throw ConfigError("model counts must be >= 1");
  if (d_model % n_heads != 0) throw ConfigError("d_model must be divisible by n_heads");
  if (max_context < 2) throw ConfigError("max_context must be >= 2");
}

ParamLayout::ParamLayout(const ModelConfig& cfg) {
  cfg.validate();
  const int d = cfg.d_model, v = cfg.vocab_size, f = cfg.d_mlp();
  auto add = [&](std::string name, int rows, int cols) {
    tensors.push_back({std::move(name), rows, cols, total});
    const std::size_t at = total;
    total += static_cast<std::size_t>(rows) * cols;
    return at;
  };
  wte = add("wte", v, d);
  wpe = add("wpe", cfg.max_context, d);
  for (int l = 0; l < cfg.n_layers; ++l) {
    const std::string p = "h" + std::to_string(l) + ".";
    Block b{};
    b.ln1_g = add(p + "ln1.g", 1, d);
    b.ln1_b = add(p + "ln1.b", 1, d);
    b.wq = add(p + "attn.wq", d, d);
    b.wk = add(p + "attn.wk", d, d);
    b.wv = add(p + "attn.wv", d, d);
    b.wo = add(p + "attn.wo", d, d);
    b.ln2_g = add(p + "ln2.g", 1, d);
    b.ln2_b = add(p + "ln2.b", 1, d);
    b.w1 = add(p + "mlp.w1", d, f);
    b.b1 = add(p + "mlp.b1", 1, f);
    b.w2 = add(p + "mlp.w2", f, d);
    b.b2 = add(p + "mlp.b2", 1, d);
    blocks.push_back(b);
  }
  lnf_g = add("lnf.g", 1, d);
  lnf_b = add("lnf.b", 1, d);
  wout = add("wout", d, v);
}

ModelParams::ModelParams(const ModelConfig& cfg)
    : config_(cfg), layout_(std::make_shared<const ParamLayout>(cfg)), data_(layout_->total, 0.0) {}

const TensorInfo& ModelParams::info(std::string_view name) const {
  for (const auto& t : layout_->tensors)
    if (t.name == name) return t;
  throw Error("no parameter tensor named '" + std::string(name) + "'");
}

Eigen::Map<RowMatrix> ModelParams::tensor(std::string_view name) {
  const auto& t = info(name);
  return {data_.data() + t.offset, t.rows, t.cols};
}

Eigen::Map<const RowMatrix> ModelParams::tensor(std::string_view name) const {
  const auto& t = info(name);
  return {data_.data() + t.offset, t.rows, t.cols};
}

void ModelParams::set_zero() { std::fill(data_.begin(), data_.end(), 0.0); }

bool ModelParams::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double x) { return std::isfinite(x); });
}

std::size_t parameter_count(const ModelConfig& cfg) {
  const std::size_t d = cfg.d_model, v = cfg.vocab_size, f = cfg.d_mlp(), c = cfg.max_context;
  const std::size_t per_block = 4 * d + 4 * d * d + d * f + f + f * d + d;
  return v * d + c * d + cfg.n_layers * per_block + 2 * d + d * v;
}

ModelParams init_params(const ModelConfig& cfg, std::uint64_t seed) {
  ModelParams params(cfg);
  Rng rng = make_rng(seed, stream::kInit);
  // Box-Muller on our own uniforms keeps initial weights toolchain-stable.
  auto normal = [&rng]() {
    double u1;
    do {
      u1 = uniform01(rng);
    } while (u1 <= 0.0);
    const double u2 = uniform01(rng);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  };
  auto data = params.data();
  for (const auto& t : params.tensors()) {
    const bool is_gain = t.name.ends_with(".g");
    const bool is_bias = t.name.ends_with(".b") || t.name.ends_with(".b1") || t.name.ends_with(".b2");
    for (std::size_t i = 0; i < t.size(); ++i) {
      double& x = data[t.offset + i];
      if (is_gain)
        x = 1.0;
      else if (is_bias)
        x = 0.0;
      else
        x = kInitStd * normal();
    }
  }
  return params;
}

// ---------------------------------------------------------------------------
// Softmax helpers

Eigen::VectorXd softmax(std::span<const double> row) {
  const double m = *std::max_element(row.begin(), row.end());
  Eigen::VectorXd p(row.size());
  double z = 0.0;
  for (std::size_t j = 0; j < row.size(); ++j) {
    p[j] = std::exp(row[j] - m);
    z += p[j];
  }
  return p / z;
}

RowMatrix softmax_rows(const RowMatrix& logits) {
  RowMatrix out(logits.rows(), logits.cols());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) out.row(i) = softmax(row_span(logits, i)).transpose();
  return out;
}

double log_sum_exp(std::span<const double> row) {
  const double m = *std::max_element(row.begin(), row.end());
  double z = 0.0;
  for (double x : row) z += std::exp(x - m);
  return m + std::log(z);
}

int argmax_lowest(std::span<const double> row) {
  // max_element returns the first maximum.
  return static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
}

// ---------------------------------------------------------------------------
// Forward / backward

namespace {

template <typename T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using Vec = Eigen::Matrix<T, Eigen::Dynamic, 1>;
template <typename T>
using CMap = Eigen::Map<const Mat<T>>;
template <typename T>
using RowVecMap = Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>>;

constexpr double kGeluC = 0.7978845608028654;  // sqrt(2 / pi)
constexpr double kGeluA = 0.044715;

template <typename T>
struct LayerNormCache {
  Mat<T> xhat;
  Vec<T> rstd;
};

template <typename T>
Mat<T> layer_norm(const Mat<T>& x, const T* gain, const T* bias, LayerNormCache<T>& cache) {
  const Eigen::Index n = x.rows(), d = x.cols();
  cache.xhat.resize(n, d);
  cache.rstd.resize(n);
  Mat<T> y(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    const T mean = x.row(i).sum() / static_cast<T>(d);
    const T var = (x.row(i).array() - mean).square().sum() / static_cast<T>(d);
    const T rstd = T(1) / std::sqrt(var + static_cast<T>(kLayerNormEps));
    cache.rstd[i] = rstd;
    for (Eigen::Index j = 0; j < d; ++j) {
      const T xh = (x(i, j) - mean) * rstd;
      cache.xhat(i, j) = xh;
      y(i, j) = xh * gain[j] + bias[j];
    }
  }
  return y;
}

// Returns dx; accumulates gain/bias gradients.
template <typename T>
Mat<T> layer_norm_backward(const Mat<T>& dy, const T* gain, const LayerNormCache<T>& cache, T* dgain, T* dbias) {
  const Eigen::Index n = dy.rows(), d = dy.cols();
  Mat<T> dx(n, d);
  Vec<T> dxhat(d);
  for (Eigen::Index i = 0; i < n; ++i) {
    T mean_dxhat = 0, mean_dxhat_xhat = 0;
    for (Eigen::Index j = 0; j < d; ++j) {
      dgain[j] += dy(i, j) * cache.xhat(i, j);
      dbias[j] += dy(i, j);
      dxhat[j] = dy(i, j) * gain[j];
      mean_dxhat += dxhat[j];
      mean_dxhat_xhat += dxhat[j] * cache.xhat(i, j);
    }
    mean_dxhat /= static_cast<T>(d);
    mean_dxhat_xhat /= static_cast<T>(d);
    for (Eigen::Index j = 0; j < d; ++j)
      dx(i, j) = cache.rstd[i] * (dxhat[j] - mean_dxhat - cache.xhat(i, j) * mean_dxhat_xhat);
  }
  return dx;
}

template <typename T>
struct BlockCache {
  Mat<T> x_in;
  LayerNormCache<T> ln1;
  Mat<T> a, q, k, v;
  std::vector<Mat<T>> probs;  // per head [n x n], zero above the diagonal
  Mat<T> o;
  LayerNormCache<T> ln2;
  Mat<T> m, h_pre, h_act;
};

}  // namespace

struct SequenceGraph::Impl {
  virtual ~Impl() = default;
  virtual int length() const = 0;
  virtual const RowMatrix& logits() const = 0;
  virtual const RowMatrix& final_hidden() const = 0;
  virtual void backward(const RowMatrix& dlogits, Gradients& grads) const = 0;
};

namespace {

template <typename T>
class GraphImpl final : public SequenceGraph::Impl {
 public:
  GraphImpl(const ModelParams& params, std::span<const TokenId> tokens)
      : cfg_(params.config()), layout_(params.layout()), tokens_(tokens.begin(), tokens.end()) {
    if constexpr (std::is_same_v<T, double>) {
      w_ = params.data().data();
    } else {
      local_.assign(params.data().begin(), params.data().end());
      w_ = local_.data();
    }
    run_forward();
  }

  int length() const override { return static_cast<int>(tokens_.size()); }
  const RowMatrix& logits() const override { return logits_out_; }
  const RowMatrix& final_hidden() const override { return hidden_out_; }

  void backward(const RowMatrix& dlogits_in, Gradients& grads) const override {
    if (dlogits_in.rows() != length() || dlogits_in.cols() != cfg_.vocab_size)
      throw ShapeError("dlogits shape does not match the forward pass");
    if (grads.size() != layout_.total) throw ShapeError("gradient buffer does not match the model layout");
    if constexpr (std::is_same_v<T, double>) {
      backward_into(dlogits_in, grads.data().data());
    } else {
      std::vector<T> g(layout_.total, T(0));
      backward_into(dlogits_in.cast<T>(), g.data());
      auto out = grads.data();
      for (std::size_t i = 0; i < g.size(); ++i) out[i] += static_cast<double>(g[i]);
    }
  }

 private:
  CMap<T> mat(std::size_t offset, int rows, int cols) const { return CMap<T>(w_ + offset, rows, cols); }

  void run_forward() {
    const int n = length(), d = cfg_.d_model, f = cfg_.d_mlp(), hd = cfg_.d_head();
    const T scale = T(1) / std::sqrt(static_cast<T>(hd));

    Mat<T> x(n, d);
    const CMap<T> wte = mat(layout_.wte, cfg_.vocab_size, d);
    const CMap<T> wpe = mat(layout_.wpe, cfg_.max_context, d);
    for (int i = 0; i < n; ++i) x.row(i) = wte.row(tokens_[i]) + wpe.row(i);

    blocks_.resize(cfg_.n_layers);
    for (int l = 0; l < cfg_.n_layers; ++l) {
      const auto& b = layout_.blocks[l];
      BlockCache<T>& c = blocks_[l];
      c.x_in = x;
      c.a = layer_norm<T>(x, w_ + b.ln1_g, w_ + b.ln1_b, c.ln1);
      c.q.noalias() = c.a * mat(b.wq, d, d);
      c.k.noalias() = c.a * mat(b.wk, d, d);
      c.v.noalias() = c.a * mat(b.wv, d, d);
      c.o.setZero(n, d);
      c.probs.assign(cfg_.n_heads, Mat<T>());
      for (int h = 0; h < cfg_.n_heads; ++h) {
        Mat<T> s = (c.q.middleCols(h * hd, hd) * c.k.middleCols(h * hd, hd).transpose()) * scale;
        Mat<T>& p = c.probs[h];
        p.setZero(n, n);
        for (int i = 0; i < n; ++i) {
          T mx = s(i, 0);
          for (int j = 1; j <= i; ++j) mx = std::max(mx, s(i, j));
          T z = 0;
          for (int j = 0; j <= i; ++j) {
            p(i, j) = std::exp(s(i, j) - mx);
            z += p(i, j);
          }
          for (int j = 0; j <= i; ++j) p(i, j) /= z;
        }
        c.o.middleCols(h * hd, hd).noalias() = p * c.v.middleCols(h * hd, hd);
      }
      x.noalias() += c.o * mat(b.wo, d, d);

      c.m = layer_norm<T>(x, w_ + b.ln2_g, w_ + b.ln2_b, c.ln2);
      c.h_pre.noalias() = c.m * mat(b.w1, d, f);
      c.h_pre.rowwise() += RowVecMap<T>(w_ + b.b1, f);
      c.h_act.resize(n, f);
      for (Eigen::Index i = 0; i < c.h_pre.size(); ++i) {
        const T u = c.h_pre.data()[i];
        c.h_act.data()[i] = T(0.5) * u * (T(1) + std::tanh(T(kGeluC) * (u + T(kGeluA) * u * u * u)));
      }
      x.noalias() += c.h_act * mat(b.w2, f, d);
      x.rowwise() += RowVecMap<T>(w_ + b.b2, d);
    }

    final_ = layer_norm<T>(x, w_ + layout_.lnf_g, w_ + layout_.lnf_b, lnf_);
    Mat<T> logits = final_ * mat(layout_.wout, d, cfg_.vocab_size);
    if constexpr (std::is_same_v<T, double>) {
      logits_out_ = std::move(logits);
      hidden_out_ = final_;
    } else {
      logits_out_ = logits.template cast<double>();
      hidden_out_ = final_.template cast<double>();
    }
  }

  template <typename Derived>
  void backward_into(const Eigen::MatrixBase<Derived>& dlogits, T* g) const {
    const int n = length(), d = cfg_.d_model, f = cfg_.d_mlp(), hd = cfg_.d_head(), v = cfg_.vocab_size;
    const T scale = T(1) / std::sqrt(static_cast<T>(hd));
    auto gmat = [g](std::size_t offset, int rows, int cols) { return Eigen::Map<Mat<T>>(g + offset, rows, cols); };
    auto gvec = [g](std::size_t offset, int cols) { return Eigen::Map<Eigen::Matrix<T, 1, Eigen::Dynamic>>(g + offset, cols); };

    gmat(layout_.wout, d, v).noalias() += final_.transpose() * dlogits;
    Mat<T> dfinal = dlogits * mat(layout_.wout, d, v).transpose();
    Mat<T> dx = layer_norm_backward<T>(dfinal, w_ + layout_.lnf_g, lnf_, g + layout_.lnf_g, g + layout_.lnf_b);

    for (int l = cfg_.n_layers - 1; l >= 0; --l) {
      const auto& b = layout_.blocks[l];
      const BlockCache<T>& c = blocks_[l];

      // MLP branch; dx is the gradient of the block output.
      gmat(b.w2, f, d).noalias() += c.h_act.transpose() * dx;
      gvec(b.b2, d) += dx.colwise().sum();
      Mat<T> dh = dx * mat(b.w2, f, d).transpose();
      for (Eigen::Index i = 0; i < dh.size(); ++i) {
        const T u = c.h_pre.data()[i];
        const T inner = T(kGeluC) * (u + T(kGeluA) * u * u * u);
        const T t = std::tanh(inner);
        const T dinner = T(kGeluC) * (T(1) + T(3 * kGeluA) * u * u);
        dh.data()[i] *= T(0.5) * (T(1) + t) + T(0.5) * u * (T(1) - t * t) * dinner;
      }
      gmat(b.w1, d, f).noalias() += c.m.transpose() * dh;
      gvec(b.b1, f) += dh.colwise().sum();
      Mat<T> dm = dh * mat(b.w1, d, f).transpose();
      dx += layer_norm_backward<T>(dm, w_ + b.ln2_g, c.ln2, g + b.ln2_g, g + b.ln2_b);

      // Attention branch.
      gmat(b.wo, d, d).noalias() += c.o.transpose() * dx;
      Mat<T> d_o = dx * mat(b.wo, d, d).transpose();
      Mat<T> dq(n, d), dk(n, d), dv(n, d);
      for (int h = 0; h < cfg_.n_heads; ++h) {
        const Mat<T>& p = c.probs[h];
        const auto doh = d_o.middleCols(h * hd, hd);
        Mat<T> dp = doh * c.v.middleCols(h * hd, hd).transpose();
        dv.middleCols(h * hd, hd).noalias() = p.transpose() * doh;
        Mat<T> ds(n, n);
        for (int i = 0; i < n; ++i) {
          T dot = 0;
          for (int j = 0; j <= i; ++j) dot += p(i, j) * dp(i, j);
          for (int j = 0; j < n; ++j) ds(i, j) = j <= i ? p(i, j) * (dp(i, j) - dot) * scale : T(0);
        }
        dq.middleCols(h * hd, hd).noalias() = ds * c.k.middleCols(h * hd, hd);
        dk.middleCols(h * hd, hd).noalias() = ds.transpose() * c.q.middleCols(h * hd, hd);
      }
      gmat(b.wq, d, d).noalias() += c.a.transpose() * dq;
      gmat(b.wk, d, d).noalias() += c.a.transpose() * dk;
      gmat(b.wv, d, d).noalias() += c.a.transpose() * dv;
      Mat<T> da = dq * mat(b.wq, d, d).transpose();
      da.noalias() += dk * mat(b.wk, d, d).transpose();
      da.noalias() += dv * mat(b.wv, d, d).transpose();
      dx += layer_norm_backward<T>(da, w_ + b.ln1_g, c.ln1, g + b.ln1_g, g + b.ln1_b);
    }

    auto dwte = gmat(layout_.wte, v, d);
    auto dwpe = gmat(layout_.wpe, cfg_.max_context, d);
    for (int i = 0; i < n; ++i) {
      dwte.row(tokens_[i]) += dx.row(i);
      dwpe.row(i) += dx.row(i);
    }
  }

  ModelConfig cfg_;
  const ParamLayout& layout_;
  std::vector<TokenId> tokens_;
  std::vector<T> local_;
  const T* w_ = nullptr;

  std::vector<BlockCache<T>> blocks_;
  LayerNormCache<T> lnf_;
  Mat<T> final_;
  RowMatrix logits_out_;
  RowMatrix hidden_out_;
};

}  // namespace

SequenceGraph::SequenceGraph(const ModelParams& params, std::span<const TokenId> tokens) {
  const ModelConfig& cfg = params.config();
  if (tokens.empty()) throw ContextError("empty input sequence");
  if (static_cast<int>(tokens.size()) > cfg.max_context)
    throw ContextError("input length " + std::to_string(tokens.size()) + " exceeds max_context " +
                       std::to_string(cfg.max_context));
  for (TokenId t : tokens)
    if (t < 0 || t >= cfg.vocab_size) throw VocabularyError("token id " + std::to_string(t) + " outside vocabulary");
  if (cfg.dtype == DType::kF64)
    impl_ = std::make_unique<GraphImpl<double>>(params, tokens);
  else
    impl_ = std::make_unique<GraphImpl<float>>(params, tokens);
}

SequenceGraph::~SequenceGraph() = default;
SequenceGraph::SequenceGraph(SequenceGraph&&) noexcept = default;
SequenceGraph& SequenceGraph::operator=(SequenceGraph&&) noexcept = default;

int SequenceGraph::length() const { return impl_->length(); }
const RowMatrix& SequenceGraph::logits() const { return impl_->logits(); }
const RowMatrix& SequenceGraph::final_hidden() const { return impl_->final_hidden(); }
void SequenceGraph::backward(const RowMatrix& dlogits, Gradients& grads) const { impl_->backward(dlogits, grads); }

ForwardOutput forward(const ModelParams& params, std::span<const TokenId> tokens) {
  SequenceGraph graph(params, tokens);
  return {graph.logits(), graph.final_hidden()};
}

}  // namespace conceptlm
