// Copyright (c) 2026, The conceptlm Authors
// SPDX-License-Identifier: Apache-2.0
//
// Binary tensor container:
//   magic "CLMCKPT\0" | u32 version | u64 header length | header JSON
//   | tensor payloads, little-endian IEEE-754 binary64, in header order.
// The header holds free-form metadata plus a table of {name, shape}.

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "conceptlm/model.hpp"

namespace conceptlm {

inline constexpr char kCheckpointMagic[8] = {'C', 'L', 'M', 'C', 'K', 'P', 'T', '\0'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct NamedTensor {
  std::string name;
  std::vector<std::uint64_t> shape;
  std::vector<double> values;
};

struct TensorContainer {
  nlohmann::json metadata = nlohmann::json::object();
  std::vector<NamedTensor> tensors;

  const NamedTensor& get(const std::string& name) const;
};

// Writes through a temporary file and renames it into place.
void write_container(const std::filesystem::path& path, const TensorContainer& c);
TensorContainer read_container(const std::filesystem::path& path);

nlohmann::json model_config_to_json(const ModelConfig& cfg);
ModelConfig model_config_from_json(const nlohmann::json& j);

// Appends every parameter tensor under `prefix` + tensor name.
void append_params(TensorContainer& c, const ModelParams& params, const std::string& prefix = "");
// Rebuilds parameters of shape `cfg` from tensors named `prefix` + name.
ModelParams extract_params(const TensorContainer& c, const ModelConfig& cfg, const std::string& prefix = "");

void save_checkpoint(const std::filesystem::path& path, const ModelParams& params);
ModelParams load_checkpoint(const std::filesystem::path& path);

}  // namespace conceptlm
