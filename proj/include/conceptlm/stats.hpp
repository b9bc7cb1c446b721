// Copyright (c) 2026, The conceptlm Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace conceptlm {

// 1-based ranks; tied values share the mean of the ranks they span.
std::vector<double> average_ranks(std::span<const double> values);

double pearson(std::span<const double> x, std::span<const double> y);

// Pearson correlation of average ranks. Throws ShapeError on length mismatch
// or fewer than two points, NumericalError when either side is constant.
double spearman(std::span<const double> x, std::span<const double> y);

struct BootstrapCI {
  double lower = 0.0;
  double upper = 0.0;
  double point = 0.0;  // mean of the observed differences
  std::size_t resamples = 1000;
  double level = 0.95;
};

inline constexpr std::size_t kDefaultBootstrapResamples = 1000;
inline constexpr double kDefaultBootstrapLevel = 0.95;

// Percentile bootstrap of the mean of `diffs`: `resamples` draws of n indices
// with replacement. Bounds are inverse-ECDF quantiles at (1-level)/2 and
// (1+level)/2 of the resampled means.
BootstrapCI bootstrap_mean_ci(std::span<const double> diffs, std::size_t resamples, double level, std::uint64_t seed);

// Smallest value whose cumulative weight reaches q. `values` sorted
// ascending, weights non-negative and summing to 1.
double weighted_quantile(std::span<const double> values, std::span<const double> weights, double q);

}  // namespace conceptlm
