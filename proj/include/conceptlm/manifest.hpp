// Copyright (c) 2026, The conceptlm Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "conceptlm/config.hpp"

namespace conceptlm {

enum class RunStatus : std::uint8_t { kPending, kRunning, kDone, kFailed };
std::string_view to_string(RunStatus s);
RunStatus run_status_from_string(std::string_view s);
// pending -> running -> {done, failed}. Staying put is allowed, and so is
// running -> running when an interrupted run is resumed.
bool status_transition_allowed(RunStatus from, RunStatus to);

// Base runs are the NTP-pretrained starting point of each (profile, size);
// post runs are one grid point each.
enum class RunKind : std::uint8_t { kBase, kPost };
std::string_view to_string(RunKind k);

struct GridPoint {
  TemplateProfile profile = TemplateProfile::kA;
  std::string model_size;
  double lambda = 0.0;
  ConceptMode mode = ConceptMode::kConcepts;
  SupervisionMode proportion = SupervisionMode::kAll;
  bool operator==(const GridPoint&) const = default;
};

struct RunEntry {
  std::string id;
  RunKind kind = RunKind::kPost;
  GridPoint point;  // lambda, mode and proportion unused for base runs
  std::uint64_t seed = 0;
  RunStatus status = RunStatus::kPending;
  std::string note;
  std::map<std::string, std::string> artifacts;  // name -> path relative to the run root
};

std::string base_run_id(TemplateProfile profile, std::string_view model_size);
std::string post_run_id(const GridPoint& p);

class RunManifest {
 public:
  const std::vector<RunEntry>& runs() const { return runs_; }
  const RunEntry* find(std::string_view id) const;

  // Appends a new entry; existing ids are left untouched. Returns true when
  // the entry was added.
  bool add(const RunEntry& entry);
  // Throws ConfigError for unknown ids or a non-monotone status change.
  void set_status(std::string_view id, RunStatus status, std::string note = {});
  void set_artifact(std::string_view id, const std::string& name, const std::string& relative_path);

  std::string to_json() const;
  static RunManifest from_json(std::string_view text);

 private:
  RunEntry& at(std::string_view id);
  std::vector<RunEntry> runs_;
};

// Missing file -> empty manifest.
RunManifest read_manifest(const std::filesystem::path& path);

// Read-modify-write under an exclusive lock on a sibling lock file; the new
// contents replace the old by rename. Entries are never removed and statuses
// only move forward.
RunManifest update_manifest(const std::filesystem::path& path, const std::function<void(RunManifest&)>& change);

}  // namespace conceptlm
