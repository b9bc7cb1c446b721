// Copyright (c) 2026, The conceptlm Authors
// SPDX-License-Identifier: Apache-2.0

#include "conceptlm/report.hpp"

#include <iomanip>
#include <map>
#include <ostream>
#include <sstream>

#include "conceptlm/error.hpp"
#include "conceptlm/rng.hpp"
#include "conceptlm/util.hpp"

namespace conceptlm {

namespace fs = std::filesystem;

namespace {

constexpr std::string_view kEvalHeader =
    "run_id,kind,model_size,profile,lambda,mode,proportion,domain,content_ppl,global_ppl,content_acc,global_acc,"
    "clustering_score,centroid_similarity,spearman_alignment,content_nll_diff,content_nll_ci_lower,"
    "content_nll_ci_upper,content_acc_diff,content_acc_ci_lower,content_acc_ci_upper,reference,baseline";

constexpr std::string_view kLongHeader =
    "run_id,model_size,profile,lambda,mode,proportion,domain,metric,value,ci_lower,ci_upper,reference,baseline";

const char* const kDomains[] = {kInDomain, kOutOfDomain};

fs::path eval_dir(const fs::path& root, const RunEntry& e) {
  return root / (e.kind == RunKind::kBase ? layout::base_dir(e.id) : layout::run_dir(e.id)) / "eval";
}

bool evaluated(const fs::path& root, const RunEntry& e) {
  return e.status == RunStatus::kDone && e.artifacts.count("eval_metrics") && fs::exists(root / e.artifacts.at("eval_metrics"));
}

// Grid columns; empty for base runs.
void grid_cells(const RunEntry& e, std::ostream& out) {
  if (e.kind == RunKind::kBase) {
    out << ",,";
    return;
  }
  out << format_double(e.point.lambda) << ',' << to_string(e.point.mode) << ',' << to_string(e.point.proportion);
}

void ci_cells(const std::optional<BootstrapCI>& ci, std::ostream& out) {
  if (ci)
    out << format_double(ci->point) << ',' << format_double(ci->lower) << ',' << format_double(ci->upper);
  else
    out << ",,";
}

}  // namespace

std::string_view eval_report_header() { return kEvalHeader; }
std::string_view long_report_header() { return kLongHeader; }

std::optional<std::string> reference_run(const RunManifest& manifest, const RunEntry& run) {
  if (run.kind == RunKind::kBase) return std::nullopt;
  std::string id;
  if (run.point.lambda == 0.0) {
    id = base_run_id(run.point.profile, run.point.model_size);
  } else {
    GridPoint p = run.point;
    p.lambda = 0.0;
    id = post_run_id(p);
  }
  if (!manifest.find(id)) return std::nullopt;
  return id;
}

SweepReport build_report(const fs::path& root) {
  const fs::path cp = layout::config(root);
  if (!fs::exists(cp)) throw IoError(root.string() + " holds no sweep (missing config.json)");
  const ToolkitConfig cfg = parse_config(read_file(cp));
  const RunManifest manifest = read_manifest(layout::manifest(root));

  std::map<std::string, std::vector<PerTokenRecord>> cache;
  auto content = [&](const RunEntry& e, const std::string& domain) -> const std::vector<PerTokenRecord>& {
    const std::string key = e.id + "/" + domain;
    auto it = cache.find(key);
    if (it == cache.end())
      it = cache.emplace(key, content_records(read_records_csv(eval_dir(root, e) / (domain + ".records.csv")))).first;
    return it->second;
  };

  SweepReport report;
  for (const auto& e : manifest.runs()) {
    if (!evaluated(root, e)) {
      report.skipped.push_back(e.id);
      continue;
    }
    const auto metrics = read_metrics(root / e.artifacts.at("eval_metrics"));
    const auto ref_id = reference_run(manifest, e);
    const RunEntry* ref = ref_id ? manifest.find(*ref_id) : nullptr;
    if (ref && !evaluated(root, *ref)) ref = nullptr;
    for (const char* domain : kDomains) {
      ReportRow row;
      row.run = e;
      row.domain = domain;
      row.metrics = metrics.at(domain);
      if (e.kind == RunKind::kBase)
        row.baseline = "pretrained";
      else if (e.point.lambda == 0.0)
        row.baseline = "ntp";
      if (ref) {
        row.reference = ref->id;
        const std::uint64_t seed = run_seed(cfg.seed, stream::kBootstrap, e.id + "/" + domain);
        const auto& a = content(*ref, domain);
        const auto& b = content(e, domain);
        row.content_nll_diff = paired_bootstrap(a, b, PairedMetric::kNll, cfg.eval.bootstrap_resamples,
                                                cfg.eval.bootstrap_level, seed);
        row.content_acc_diff = paired_bootstrap(a, b, PairedMetric::kAccuracy, cfg.eval.bootstrap_resamples,
                                                cfg.eval.bootstrap_level, seed);
      }
      report.rows.push_back(std::move(row));
    }
  }
  return report;
}

void write_eval_report_csv(const SweepReport& report, std::ostream& out) {
  out << kEvalHeader << '\n';
  for (const auto& r : report.rows) {
    const RunEntry& e = r.run;
    const DomainMetrics& m = r.metrics;
    out << e.id << ',' << to_string(e.kind) << ',' << e.point.model_size << ',' << to_string(e.point.profile) << ',';
    grid_cells(e, out);
    out << ',' << r.domain << ',' << format_double(m.content_ppl) << ',' << format_double(m.global_ppl) << ','
        << format_double(m.content_acc) << ',' << format_double(m.global_acc) << ','
        << format_double(m.clustering_score) << ',' << format_double(m.centroid_similarity) << ','
        << format_double(m.spearman) << ',';
    ci_cells(r.content_nll_diff, out);
    out << ',';
    ci_cells(r.content_acc_diff, out);
    out << ',' << r.reference << ',' << r.baseline << '\n';
  }
}

void write_long_csv(const SweepReport& report, std::ostream& out) {
  out << kLongHeader << '\n';
  for (const auto& r : report.rows) {
    const RunEntry& e = r.run;
    auto prefix = [&] {
      out << e.id << ',' << e.point.model_size << ',' << to_string(e.point.profile) << ',';
      grid_cells(e, out);
      out << ',' << r.domain << ',';
    };
    const std::pair<const char*, double> plain[] = {{"content_ppl", r.metrics.content_ppl},
                                                    {"global_ppl", r.metrics.global_ppl},
                                                    {"content_acc", r.metrics.content_acc},
                                                    {"global_acc", r.metrics.global_acc},
                                                    {"clustering_score", r.metrics.clustering_score},
                                                    {"centroid_similarity", r.metrics.centroid_similarity},
                                                    {"spearman_alignment", r.metrics.spearman}};
    for (const auto& [name, value] : plain) {
      prefix();
      out << name << ',' << format_double(value) << ",,," << r.reference << ',' << r.baseline << '\n';
    }
    const std::pair<const char*, const std::optional<BootstrapCI>*> diffs[] = {
        {"content_nll_diff", &r.content_nll_diff}, {"content_acc_diff", &r.content_acc_diff}};
    for (const auto& [name, ci] : diffs) {
      if (!*ci) continue;
      prefix();
      out << name << ',' << format_double((*ci)->point) << ',' << format_double((*ci)->lower) << ','
          << format_double((*ci)->upper) << ',' << r.reference << ',' << r.baseline << '\n';
    }
  }
}

void write_text_report(const SweepReport& report, std::ostream& out) {
  out << std::left << std::setw(34) << "run" << std::setw(10) << "domain" << std::right << std::setw(11)
      << "content_ppl" << std::setw(11) << "global_ppl" << std::setw(9) << "c_acc" << std::setw(9) << "cluster"
      << std::setw(9) << "spearman" << "  content NLL diff [CI]\n";
  for (const auto& r : report.rows) {
    std::ostringstream line;
    line << std::left << std::setw(34) << r.run.id << std::setw(10) << r.domain << std::right << std::fixed
         << std::setprecision(3) << std::setw(11) << r.metrics.content_ppl << std::setw(11) << r.metrics.global_ppl
         << std::setprecision(4) << std::setw(9) << r.metrics.content_acc << std::setw(9)
         << r.metrics.clustering_score << std::setw(9) << r.metrics.spearman;
    if (r.content_nll_diff)
      line << "  " << std::showpos << r.content_nll_diff->point << " [" << r.content_nll_diff->lower << ", "
           << r.content_nll_diff->upper << "] vs " << std::noshowpos << r.reference;
    if (!r.baseline.empty()) line << "  (baseline: " << r.baseline << ")";
    out << line.str() << '\n';
  }
  if (!report.skipped.empty()) {
    out << "\nnot evaluated:";
    for (const auto& id : report.skipped) out << ' ' << id;
    out << '\n';
  }
}

SweepReport write_report(const fs::path& root) {
  SweepReport report = build_report(root);
  const fs::path dir = root / "report";
  std::ostringstream a, b, c;
  write_eval_report_csv(report, a);
  write_long_csv(report, b);
  write_text_report(report, c);
  write_file_atomic(dir / "eval_report.csv", a.str());
  write_file_atomic(dir / "long.csv", b.str());
  write_file_atomic(dir / "summary.txt", c.str());
  return report;
}

}  // namespace conceptlm
