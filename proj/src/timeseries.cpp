#include "slowdown/timeseries.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "slowdown/error.hpp"

namespace slowdown {

const char* event_source_name(EventSource source) noexcept {
  switch (source) {
    case EventSource::kLabel: return "label";
    case EventSource::kMlDetector: return "ml_detector";
    case EventSource::kRuleDetector: return "rule_detector";
  }
  return "unknown";
}

const std::vector<SlowdownEvent>& LabeledCorpus::events_for(const std::string& segment_id) const {
  static const std::vector<SlowdownEvent> kNone;
  const auto it = events.find(segment_id);
  return it == events.end() ? kNone : it->second;
}

void LabeledCorpus::validate() const {
  std::set<std::string> ids;
  for (const auto& s : series) {
    if (!ids.insert(s.segment_id).second) {
      fail(ErrorCode::kInvalidCorpus, "duplicate segment '" + s.segment_id + "'");
    }
  }
  for (const auto& [id, list] : events) {
    const auto it = std::find_if(series.begin(), series.end(),
                                 [&](const SpeedSeries& s) { return s.segment_id == id; });
    if (it == series.end()) {
      fail(ErrorCode::kInvalidCorpus, "events for unknown segment '" + id + "'");
    }
    for (std::size_t i = 0; i < list.size(); ++i) {
      const auto& ev = list[i];
      if (ev.start_min < it->t0 || ev.end_min > it->end()) {
        fail(ErrorCode::kInvalidCorpus, "event outside series range on '" + id + "'");
      }
      if (ev.duration() < kMinEventMinutes || ev.duration() > kMaxEventMinutes) {
        fail(ErrorCode::kInvalidCorpus, "event duration outside [60, 360] on '" + id + "'");
      }
      if (i > 0 && list[i - 1].end_min > ev.start_min) {
        fail(ErrorCode::kInvalidCorpus, "overlapping or unsorted events on '" + id + "'");
      }
    }
  }
}

double NormalizationSpec::normalize(double speed) const noexcept {
  return std::clamp(speed / v_max, 0.0, 1.0);
}

void NormalizationSpec::check() const {
  if (!(v_max > 0.0) || !std::isfinite(v_max)) {
    fail(ErrorCode::kInvalidArgument, "v_max must be positive");
  }
}

namespace {

void sanitize(SpeedSeries& s) {
  if (s.speeds.size() < kWindowLength) {
    fail(ErrorCode::kSeriesTooShort, "segment '" + s.segment_id + "' has " +
                                         std::to_string(s.speeds.size()) + " samples, need " +
                                         std::to_string(kWindowLength));
  }
  s.gap_mask.resize(s.speeds.size(), 0);
  for (std::size_t i = 0; i < s.speeds.size(); ++i) {
    double& v = s.speeds[i];
    if (!std::isfinite(v) || v < kMinSpeed) {
      s.gap_mask[i] = 1;
      v = 0.0;
    } else if (v > kMaxSpeed) {
      v = kMaxSpeed;
    }
    if (s.gap_mask[i]) v = 0.0;
  }
}

}  // namespace

SpeedSeries validate_series(const RawSamples& raw) {
  if (raw.timestamps.size() != raw.speeds.size()) {
    fail(ErrorCode::kInvalidArgument, "timestamp and speed counts differ");
  }
  SpeedSeries s;
  s.segment_id = raw.segment_id;
  s.t0 = raw.timestamps.empty() ? 0 : raw.timestamps.front();
  for (std::size_t i = 1; i < raw.timestamps.size(); ++i) {
    if (raw.timestamps[i] != raw.timestamps[i - 1] + 1) {
      fail(ErrorCode::kNonUniformSampling,
           "segment '" + raw.segment_id + "' jumps from minute " +
               std::to_string(raw.timestamps[i - 1]) + " to " + std::to_string(raw.timestamps[i]));
    }
  }
  s.speeds = raw.speeds;
  sanitize(s);
  return s;
}

SpeedSeries validate_series(SpeedSeries series) {
  if (!series.gap_mask.empty() && series.gap_mask.size() != series.speeds.size()) {
    fail(ErrorCode::kInvalidArgument, "gap mask length differs from speed count");
  }
  sanitize(series);
  return series;
}

SpeedSeries fill_gaps(SpeedSeries series) {
  const std::size_t n = series.speeds.size();
  series.gap_mask.resize(n, 0);
  std::size_t first = n;
  for (std::size_t i = 0; i < n; ++i) {
    if (!series.gap_mask[i]) {
      first = i;
      break;
    }
  }
  if (first == n) fail(ErrorCode::kAllGaps, "segment '" + series.segment_id + "' has no samples");

  auto& v = series.speeds;
  for (std::size_t i = 0; i < first; ++i) v[i] = v[first];
  std::size_t prev = first;
  for (std::size_t i = first + 1; i < n; ++i) {
    if (series.gap_mask[i]) continue;
    if (i > prev + 1) {
      const double span = static_cast<double>(i - prev);
      for (std::size_t k = prev + 1; k < i; ++k) {
        const double t = static_cast<double>(k - prev) / span;
        v[k] = v[prev] + t * (v[i] - v[prev]);
      }
    }
    prev = i;
  }
  for (std::size_t i = prev + 1; i < n; ++i) v[i] = v[prev];
  return series;
}

std::span<const double> slice_window(std::span<const double> speeds, std::size_t start) {
  if (start > speeds.size() || speeds.size() - start < kWindowLength) {
    fail(ErrorCode::kOutOfRange, "window at " + std::to_string(start) +
                                     " exceeds series of length " + std::to_string(speeds.size()));
  }
  return speeds.subspan(start, kWindowLength);
}

std::span<const double> slice_window(const SpeedSeries& series, std::size_t start) {
  return slice_window(std::span<const double>(series.speeds), start);
}

std::vector<double> normalize(std::span<const double> window, const NormalizationSpec& spec) {
  spec.check();
  std::vector<double> out(window.size());
  std::transform(window.begin(), window.end(), out.begin(),
                 [&](double x) { return spec.normalize(x); });
  return out;
}

}  // namespace slowdown
