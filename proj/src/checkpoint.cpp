// Copyright (c) 2026, The conceptlm Authors
// SPDX-License-Identifier: Apache-2.0

#include "conceptlm/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "conceptlm/error.hpp"

namespace conceptlm {

namespace {

template <typename U>
void put_le(std::string& buf, U value) {
  for (std::size_t i = 0; i < sizeof(U); ++i) buf.push_back(static_cast<char>((value >> (8 * i)) & 0xff));
}

template <typename U>
U get_le(const unsigned char* p) {
  U value = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) value |= static_cast<U>(p[i]) << (8 * i);
  return value;
}

std::uint64_t element_count(const std::vector<std::uint64_t>& shape) {
  std::uint64_t n = 1;
  for (auto s : shape) n *= s;
  return n;
}

}  // namespace

const NamedTensor& TensorContainer::get(const std::string& name) const {
  for (const auto& t : tensors)
    if (t.name == name) return t;
  throw ParseError("checkpoint has no tensor '" + name + "'");
}

void write_container(const std::filesystem::path& path, const TensorContainer& c) {
  nlohmann::json header;
  header["metadata"] = c.metadata;
  header["tensors"] = nlohmann::json::array();
  for (const auto& t : c.tensors) {
    if (element_count(t.shape) != t.values.size()) throw ShapeError("tensor '" + t.name + "' shape/value mismatch");
    header["tensors"].push_back({{"name", t.name}, {"shape", t.shape}});
  }
  const std::string text = header.dump();

  std::string buf(kCheckpointMagic, sizeof(kCheckpointMagic));
  put_le<std::uint32_t>(buf, kCheckpointVersion);
  put_le<std::uint64_t>(buf, text.size());
  buf += text;
  for (const auto& t : c.tensors)
    for (double v : t.values) put_le<std::uint64_t>(buf, std::bit_cast<std::uint64_t>(v));

  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp);
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!out) throw IoError("write failed: " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

TensorContainer read_container(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const auto* p = reinterpret_cast<const unsigned char*>(buf.data());
  constexpr std::size_t kFixed = sizeof(kCheckpointMagic) + 4 + 8;
  if (buf.size() < kFixed || std::memcmp(buf.data(), kCheckpointMagic, sizeof(kCheckpointMagic)) != 0)
    throw ParseError(path.string() + ": not a conceptlm checkpoint");
  const auto version = get_le<std::uint32_t>(p + 8);
  if (version != kCheckpointVersion)
    throw ParseError(path.string() + ": unsupported checkpoint version " + std::to_string(version));
  const auto header_len = get_le<std::uint64_t>(p + 12);
  if (buf.size() < kFixed + header_len) throw ParseError(path.string() + ": truncated header");

  TensorContainer c;
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(buf.begin() + kFixed, buf.begin() + static_cast<std::ptrdiff_t>(kFixed + header_len));
    c.metadata = header.at("metadata");
    std::size_t at = kFixed + header_len;
    for (const auto& entry : header.at("tensors")) {
      NamedTensor t;
      t.name = entry.at("name").get<std::string>();
      t.shape = entry.at("shape").get<std::vector<std::uint64_t>>();
      const auto n = element_count(t.shape);
      if (buf.size() < at + 8 * n) throw ParseError(path.string() + ": truncated tensor '" + t.name + "'");
      t.values.resize(n);
      for (std::uint64_t i = 0; i < n; ++i) t.values[i] = std::bit_cast<double>(get_le<std::uint64_t>(p + at + 8 * i));
      at += 8 * n;
      c.tensors.push_back(std::move(t));
    }
    if (at != buf.size()) throw ParseError(path.string() + ": trailing bytes after tensors");
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path.string() + ": bad header: " + e.what());
  }
  return c;
}

nlohmann::json model_config_to_json(const ModelConfig& cfg) {
  return {{"vocab_size", cfg.vocab_size}, {"d_model", cfg.d_model},         {"n_heads", cfg.n_heads},
          {"n_layers", cfg.n_layers},     {"max_context", cfg.max_context}, {"mlp_ratio", cfg.mlp_ratio},
          {"dtype", std::string(to_string(cfg.dtype))}};
}

ModelConfig model_config_from_json(const nlohmann::json& j) {
  ModelConfig cfg;
  try {
    cfg.vocab_size = j.at("vocab_size").get<int>();
    cfg.d_model = j.value("d_model", cfg.d_model);
    cfg.n_heads = j.value("n_heads", cfg.n_heads);
    cfg.n_layers = j.value("n_layers", cfg.n_layers);
    cfg.max_context = j.value("max_context", cfg.max_context);
    cfg.mlp_ratio = j.value("mlp_ratio", cfg.mlp_ratio);
    cfg.dtype = dtype_from_string(j.value("dtype", std::string("f64")));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("model config: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

void append_params(TensorContainer& c, const ModelParams& params, const std::string& prefix) {
  const auto data = params.data();
  for (const auto& t : params.tensors())
    c.tensors.push_back({prefix + t.name,
                         {static_cast<std::uint64_t>(t.rows), static_cast<std::uint64_t>(t.cols)},
                         std::vector<double>(data.begin() + t.offset, data.begin() + t.offset + t.size())});
}

ModelParams extract_params(const TensorContainer& c, const ModelConfig& cfg, const std::string& prefix) {
  ModelParams params(cfg);
  auto data = params.data();
  for (const auto& t : params.tensors()) {
    const auto& src = c.get(prefix + t.name);
    if (src.shape != std::vector<std::uint64_t>{static_cast<std::uint64_t>(t.rows), static_cast<std::uint64_t>(t.cols)})
      throw ShapeError("tensor '" + t.name + "' has the wrong shape for this config");
    std::copy(src.values.begin(), src.values.end(), data.begin() + t.offset);
  }
  return params;
}

void save_checkpoint(const std::filesystem::path& path, const ModelParams& params) {
  TensorContainer c;
  c.metadata["kind"] = "model";
  c.metadata["config"] = model_config_to_json(params.config());
  append_params(c, params);
  write_container(path, c);
}

ModelParams load_checkpoint(const std::filesystem::path& path) {
  const TensorContainer c = read_container(path);
  if (c.metadata.value("kind", "") != "model") throw ParseError(path.string() + ": not a model checkpoint");
  return extract_params(c, model_config_from_json(c.metadata.at("config")));
}

}  // namespace conceptlm
