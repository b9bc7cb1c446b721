// Copyright (c) 2026, The conceptlm Authors
// SPDX-License-Identifier: Apache-2.0

#include "conceptlm/manifest.hpp"

#include <algorithm>
#include <mutex>

#include <json.hpp>

#include "conceptlm/error.hpp"
#include "conceptlm/util.hpp"

namespace conceptlm {

using json = nlohmann::ordered_json;

namespace {
constexpr std::string_view kManifestFormat = "conceptlm-manifest";
constexpr int kManifestVersion = 1;

// flock does not exclude threads of one process from each other.
std::mutex& process_mutex() {
  static std::mutex mu;
  return mu;
}
}  // namespace

std::string_view to_string(RunStatus s) {
  switch (s) {
    case RunStatus::kPending:
      return "pending";
    case RunStatus::kRunning:
      return "running";
    case RunStatus::kDone:
      return "done";
    case RunStatus::kFailed:
      return "failed";
  }
  return "?";
}

RunStatus run_status_from_string(std::string_view s) {
  if (s == "pending") return RunStatus::kPending;
  if (s == "running") return RunStatus::kRunning;
  if (s == "done") return RunStatus::kDone;
  if (s == "failed") return RunStatus::kFailed;
  throw ParseError("unknown run status '" + std::string(s) + "'");
}

bool status_transition_allowed(RunStatus from, RunStatus to) {
  if (from == to) return true;
  switch (from) {
    case RunStatus::kPending:
      return to == RunStatus::kRunning;
    case RunStatus::kRunning:
      return to == RunStatus::kDone || to == RunStatus::kFailed;
    default:
      return false;
  }
}

std::string_view to_string(RunKind k) { return k == RunKind::kBase ? "base" : "post"; }

std::string base_run_id(TemplateProfile profile, std::string_view model_size) {
  return "base-" + std::string(to_string(profile)) + "-" + std::string(model_size);
}

std::string post_run_id(const GridPoint& p) {
  return std::string(to_string(p.profile)) + "-" + p.model_size + "-" + std::string(to_string(p.mode)) + "-" +
         std::string(to_string(p.proportion)) + "-l" + format_double(p.lambda);
}

const RunEntry* RunManifest::find(std::string_view id) const {
  for (const auto& r : runs_)
    if (r.id == id) return &r;
  return nullptr;
}

RunEntry& RunManifest::at(std::string_view id) {
  for (auto& r : runs_)
    if (r.id == id) return r;
  throw ConfigError("manifest has no run '" + std::string(id) + "'");
}

bool RunManifest::add(const RunEntry& entry) {
  if (find(entry.id)) return false;
  runs_.push_back(entry);
  return true;
}

void RunManifest::set_status(std::string_view id, RunStatus status, std::string note) {
  RunEntry& r = at(id);
  if (!status_transition_allowed(r.status, status))
    throw ConfigError("run '" + r.id + "' cannot move from " + std::string(to_string(r.status)) + " to " +
                      std::string(to_string(status)));
  r.status = status;
  r.note = std::move(note);
}

void RunManifest::set_artifact(std::string_view id, const std::string& name, const std::string& relative_path) {
  at(id).artifacts[name] = relative_path;
}

std::string RunManifest::to_json() const {
  json j;
  j["format"] = kManifestFormat;
  j["version"] = kManifestVersion;
  j["runs"] = json::array();
  for (const auto& r : runs_) {
    json e;
    e["id"] = r.id;
    e["kind"] = to_string(r.kind);
    e["profile"] = to_string(r.point.profile);
    e["model_size"] = r.point.model_size;
    if (r.kind == RunKind::kPost) {
      e["lambda"] = r.point.lambda;
      e["mode"] = to_string(r.point.mode);
      e["proportion"] = to_string(r.point.proportion);
    }
    e["seed"] = r.seed;
    e["status"] = to_string(r.status);
    e["note"] = r.note;
    e["artifacts"] = json::object();
    for (const auto& [k, v] : r.artifacts) e["artifacts"][k] = v;
    j["runs"].push_back(std::move(e));
  }
  return j.dump(2) + "\n";
}

RunManifest RunManifest::from_json(std::string_view text) {
  RunManifest m;
  try {
    const json j = json::parse(text);
    if (j.at("format").get<std::string>() != kManifestFormat) throw ParseError("not a run manifest");
    if (j.at("version").get<int>() != kManifestVersion) throw ParseError("unsupported manifest version");
    for (const auto& e : j.at("runs")) {
      RunEntry r;
      r.id = e.at("id").get<std::string>();
      const auto kind = e.at("kind").get<std::string>();
      if (kind != "base" && kind != "post") throw ParseError("unknown run kind '" + kind + "'");
      r.kind = kind == "base" ? RunKind::kBase : RunKind::kPost;
      r.point.profile = template_profile_from_string(e.at("profile").get<std::string>());
      r.point.model_size = e.at("model_size").get<std::string>();
      if (r.kind == RunKind::kPost) {
        r.point.lambda = e.at("lambda").get<double>();
        r.point.mode = concept_mode_from_string(e.at("mode").get<std::string>());
        r.point.proportion = supervision_mode_from_string(e.at("proportion").get<std::string>());
      }
      r.seed = e.at("seed").get<std::uint64_t>();
      r.status = run_status_from_string(e.at("status").get<std::string>());
      r.note = e.at("note").get<std::string>();
      for (const auto& [k, v] : e.at("artifacts").items()) r.artifacts[k] = v.get<std::string>();
      if (!m.add(r)) throw ParseError("duplicate run id '" + r.id + "'");
    }
  } catch (const json::exception& e) {
    throw ParseError(std::string("malformed manifest: ") + e.what());
  } catch (const ConfigError& e) {
    throw ParseError(std::string("malformed manifest: ") + e.what());
  }
  return m;
}

RunManifest read_manifest(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) return {};
  return RunManifest::from_json(read_file(path));
}

RunManifest update_manifest(const std::filesystem::path& path, const std::function<void(RunManifest&)>& change) {
  std::lock_guard guard(process_mutex());
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  FileLock lock(path.string() + ".lock");
  const RunManifest before = read_manifest(path);
  RunManifest after = before;
  change(after);
  // Append-only check against the on-disk state.
  for (const auto& old : before.runs()) {
    const RunEntry* now = after.find(old.id);
    if (!now) throw ConfigError("manifest update removed run '" + old.id + "'");
    if (!status_transition_allowed(old.status, now->status))
      throw ConfigError("manifest update moved run '" + old.id + "' backwards");
  }
  write_file_atomic(path, after.to_json());
  return after;
}

}  // namespace conceptlm
