#include "slowdown/rule_baseline.hpp"

#include <algorithm>
#include <cmath>

#include "slowdown/error.hpp"

namespace slowdown {

void RuleConfig::validate() const {
  if (!(free_flow_percentile > 0.0 && free_flow_percentile < 1.0)) {
    fail(ErrorCode::kInvalidArgument, "free_flow_percentile must be in (0, 1)");
  }
  if (!(threshold_fraction > 0.0 && threshold_fraction < 1.0)) {
    fail(ErrorCode::kInvalidArgument, "threshold_fraction must be in (0, 1)");
  }
  if (min_duration < 1) fail(ErrorCode::kInvalidArgument, "min_duration must be >= 1");
  if (merge_gap < 0) fail(ErrorCode::kInvalidArgument, "merge_gap must be >= 0");
  if (smoothing_window < 1) fail(ErrorCode::kInvalidArgument, "smoothing_window must be >= 1");
}

double estimate_free_flow(const SpeedSeries& series, const RuleConfig& cfg) {
  cfg.validate();
  if (series.speeds.empty()) fail(ErrorCode::kEmptySeries, "segment '" + series.segment_id + "' is empty");
  std::vector<double> sorted = series.speeds;
  const std::size_t n = sorted.size();
  const auto rank = static_cast<std::size_t>(std::ceil(cfg.free_flow_percentile * static_cast<double>(n)));
  const std::size_t index = std::min(rank, n - 1);
  std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(index), sorted.end());
  return sorted[index];
}

std::vector<double> centered_moving_average(std::span<const double> values, int width) {
  const auto n = static_cast<std::ptrdiff_t>(values.size());
  std::vector<double> prefix(values.size() + 1, 0.0);
  for (std::size_t i = 0; i < values.size(); ++i) prefix[i + 1] = prefix[i] + values[i];
  std::vector<double> out(values.size());
  const std::ptrdiff_t before = width / 2;
  const std::ptrdiff_t after = width - before;  // exclusive
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const std::ptrdiff_t lo = std::max<std::ptrdiff_t>(0, i - before);
    const std::ptrdiff_t hi = std::min(n, i + after);
    out[static_cast<std::size_t>(i)] = (prefix[hi] - prefix[lo]) / static_cast<double>(hi - lo);
  }
  return out;
}

std::vector<SlowdownEvent> detect_rule_based(const SpeedSeries& series, const RuleConfig& cfg) {
  const double threshold = cfg.threshold_fraction * estimate_free_flow(series, cfg);
  const auto smoothed = centered_moving_average(series.speeds, cfg.smoothing_window);

  struct Run {
    Minute begin;
    Minute end;  // exclusive
  };
  std::vector<Run> runs;
  const auto n = static_cast<Minute>(smoothed.size());
  for (Minute i = 0; i < n;) {
    if (smoothed[static_cast<std::size_t>(i)] >= threshold) {
      ++i;
      continue;
    }
    Minute j = i;
    while (j < n && smoothed[static_cast<std::size_t>(j)] < threshold) ++j;
    if (!runs.empty() && i - runs.back().end < cfg.merge_gap) {
      runs.back().end = j;
    } else {
      runs.push_back({i, j});
    }
    i = j;
  }

  std::vector<SlowdownEvent> events;
  for (const auto& r : runs) {
    if (r.end - r.begin < cfg.min_duration) continue;
    events.push_back({series.t0 + r.begin, series.t0 + r.end, EventSource::kRuleDetector});
  }
  return events;
}

}  // namespace slowdown
