// Copyright (c) 2026, The conceptlm Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "conceptlm/manifest.hpp"
#include "conceptlm/stats.hpp"
#include "conceptlm/sweep.hpp"

namespace conceptlm {

// Column contracts. tests/golden holds copies that the tests compare against.
std::string_view eval_report_header();
std::string_view long_report_header();

struct ReportRow {
  RunEntry run;
  std::string domain;
  DomainMetrics metrics;
  // Paired bootstrap of (this run - reference) over content-word records.
  std::string reference;  // empty when no reference run exists
  std::optional<BootstrapCI> content_nll_diff;
  std::optional<BootstrapCI> content_acc_diff;
  std::string baseline;  // "pretrained", "ntp" or empty
};

struct SweepReport {
  std::vector<ReportRow> rows;
  std::vector<std::string> skipped;  // run ids without evaluation output
};

// Reference of a run: the base model for lambda = 0, otherwise the lambda = 0
// run of the same profile, size, mode and proportion.
std::optional<std::string> reference_run(const RunManifest& manifest, const RunEntry& run);

SweepReport build_report(const std::filesystem::path& root);

void write_eval_report_csv(const SweepReport& report, std::ostream& out);
void write_long_csv(const SweepReport& report, std::ostream& out);
void write_text_report(const SweepReport& report, std::ostream& out);

// Writes report/eval_report.csv, report/long.csv and report/summary.txt.
SweepReport write_report(const std::filesystem::path& root);

}  // namespace conceptlm
