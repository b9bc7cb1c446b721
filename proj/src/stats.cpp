// Copyright (c) 2026, The conceptlm Authors
// SPDX-License-Identifier: Apache-2.0

#include "conceptlm/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "conceptlm/error.hpp"
#include "conceptlm/rng.hpp"

namespace conceptlm {

std::vector<double> average_ranks(std::span<const double> values) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(n);
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
    i = j + 1;
  }
  return ranks;
}

double pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw ShapeError("correlation inputs differ in length");
  if (x.size() < 2) throw ShapeError("correlation needs at least two points");
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) throw NumericalError("correlation undefined for a constant input");
  return sxy / std::sqrt(sxx * syy);
}

double spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw ShapeError("correlation inputs differ in length");
  const auto rx = average_ranks(x);
  const auto ry = average_ranks(y);
  return pearson(rx, ry);
}

double weighted_quantile(std::span<const double> values, std::span<const double> weights, double q) {
  if (values.empty() || values.size() != weights.size()) throw ShapeError("weighted_quantile: bad inputs");
  // Slack for cumulative rounding so an exact hit at q is not missed.
  constexpr double kSlack = 1e-12;
  double cum = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    cum += weights[i];
    if (cum >= q - kSlack) return values[i];
  }
  return values.back();
}

BootstrapCI bootstrap_mean_ci(std::span<const double> diffs, std::size_t resamples, double level, std::uint64_t seed) {
  if (diffs.empty()) throw EmptySetError("bootstrap over an empty sample");
  if (resamples < 1) throw ConfigError("bootstrap needs at least one resample");
  if (!(level > 0.0 && level < 1.0)) throw ConfigError("bootstrap level must lie in (0, 1)");
  const std::size_t n = diffs.size();
  Rng rng = make_rng(seed, stream::kBootstrap);
  std::vector<double> means(resamples);
  for (std::size_t b = 0; b < resamples; ++b) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += diffs[uniform_index(rng, n)];
    means[b] = s / static_cast<double>(n);
  }
  std::sort(means.begin(), means.end());
  const std::vector<double> w(resamples, 1.0 / static_cast<double>(resamples));
  BootstrapCI ci;
  ci.resamples = resamples;
  ci.level = level;
  ci.point = std::accumulate(diffs.begin(), diffs.end(), 0.0) / static_cast<double>(n);
  ci.lower = weighted_quantile(means, w, 0.5 * (1.0 - level));
  ci.upper = weighted_quantile(means, w, 0.5 * (1.0 + level));
  return ci;
}

}  // namespace conceptlm
