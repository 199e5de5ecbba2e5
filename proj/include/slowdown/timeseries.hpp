#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace slowdown {

// Absolute time in integer minutes since the corpus epoch.
using Minute = std::int64_t;

inline constexpr std::size_t kWindowLength = 600;
inline constexpr double kMinSpeed = 0.0;
inline constexpr double kMaxSpeed = 120.0;

// A slowdown is a drop of at least this many mph held for at least
// kMinEventMinutes.
inline constexpr double kMinSlowdownDrop = 15.0;
inline constexpr Minute kMinEventMinutes = 60;
inline constexpr Minute kMaxEventMinutes = 360;

// One-minute speed trace for a single road segment. Sample i is at t0 + i.
struct SpeedSeries {
  std::string segment_id;
  Minute t0 = 0;
  std::vector<double> speeds;
  std::vector<std::uint8_t> gap_mask;

  std::size_t size() const noexcept { return speeds.size(); }
  Minute end() const noexcept { return t0 + static_cast<Minute>(speeds.size()); }
};

// Samples as read from disk, before validation. NaN marks a missing speed.
struct RawSamples {
  std::string segment_id;
  std::vector<Minute> timestamps;
  std::vector<double> speeds;
};

enum class EventSource { kLabel, kMlDetector, kRuleDetector };

const char* event_source_name(EventSource source) noexcept;

// Congestion interval [start_min, end_min) in absolute minutes.
struct SlowdownEvent {
  Minute start_min = 0;
  Minute end_min = 0;
  EventSource source = EventSource::kLabel;

  Minute duration() const noexcept { return end_min - start_min; }
  friend bool operator==(const SlowdownEvent&, const SlowdownEvent&) = default;
};

using EventsBySegment = std::map<std::string, std::vector<SlowdownEvent>>;

struct LabeledCorpus {
  std::vector<SpeedSeries> series;
  EventsBySegment events;

  const std::vector<SlowdownEvent>& events_for(const std::string& segment_id) const;

  // Throws InvalidCorpus unless every event lies inside its series, events on
  // one segment are disjoint and every duration is within [60, 360] minutes.
  void validate() const;
};

struct NormalizationSpec {
  double v_max = 100.0;

  double normalize(double speed) const noexcept;
  double denormalize(double unit) const noexcept { return unit * v_max; }
  void check() const;
};

// Builds a validated series from raw samples. Non-finite or negative speeds
// become gaps (stored as 0 until fill_gaps); values above 120 are clamped.
SpeedSeries validate_series(const RawSamples& raw);

// Re-checks an in-memory series with the same value rules.
SpeedSeries validate_series(SpeedSeries series);

// Linear interpolation across interior gaps, nearest value at the edges.
SpeedSeries fill_gaps(SpeedSeries series);

std::span<const double> slice_window(const SpeedSeries& series, std::size_t start);
std::span<const double> slice_window(std::span<const double> speeds, std::size_t start);

std::vector<double> normalize(std::span<const double> window, const NormalizationSpec& spec);

}  // namespace slowdown
