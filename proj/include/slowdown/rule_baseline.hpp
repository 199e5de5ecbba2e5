#pragma once

#include <span>
#include <vector>

#include "slowdown/timeseries.hpp"

namespace slowdown {

// Threshold-on-free-flow comparator. These defaults are the untuned starting
// point; configs/acceptance.conf carries values picked once by
// tools/tune_rule_baseline on a separate validation corpus and then frozen.
struct RuleConfig {
  double free_flow_percentile = 0.85;
  double threshold_fraction = 0.75;
  Minute min_duration = kMinEventMinutes;
  Minute merge_gap = 15;
  int smoothing_window = 10;

  void validate() const;
};

// Nearest-rank quantile: the element at zero-based index
// min(ceil(p * n), n - 1) of the sorted speeds.
double estimate_free_flow(const SpeedSeries& series, const RuleConfig& cfg);

// Centered moving average; near the edges only the available samples are
// averaged. For an even width the window is [i - w/2, i + w/2).
std::vector<double> centered_moving_average(std::span<const double> values, int width);

// Minutes whose smoothed speed is below threshold_fraction * free flow,
// runs separated by fewer than merge_gap minutes joined, runs shorter than
// min_duration dropped. Events are [first flagged minute, last + 1).
std::vector<SlowdownEvent> detect_rule_based(const SpeedSeries& series, const RuleConfig& cfg);

}  // namespace slowdown
