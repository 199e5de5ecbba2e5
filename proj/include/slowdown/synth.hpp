#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "slowdown/timeseries.hpp"

namespace slowdown {

struct Interval {
  double lo = 0.0;
  double hi = 0.0;

  friend bool operator==(const Interval&, const Interval&) = default;
};

// Synthetic corpus generator settings. The labeled-event fields follow the
// slowdown definition (>= 15 mph for 60..360 minutes). The `minor_*` and
// `brief_*` families inject unlabeled dips that fall short of that definition
// (too shallow or too short) so detectors face realistic distractors.
struct GenConfig {
  std::uint64_t rng_seed = 1;
  int n_segments = 20;
  double hours_per_segment = 240.0;
  double free_flow_mean = 65.0;
  double free_flow_spread = 0.0;  // per-segment mean offset, uniform in +-spread
  double free_flow_daily_amplitude = 4.0;
  double noise_std = 3.0;
  double events_per_1000h = 9.61;
  Interval drop_range{15.0, 35.0};
  Interval duration_range{60.0, 360.0};
  Interval ramp_minutes_range{10.0, 30.0};
  double minor_per_1000h = 0.0;
  Interval minor_drop_range{4.0, 10.0};
  Interval minor_duration_range{30.0, 240.0};
  double brief_per_1000h = 0.0;
  Interval brief_drop_range{15.0, 35.0};
  Interval brief_duration_range{10.0, 40.0};
  int placement_retries = 200;

  // Throws InvalidArgument when an invariant is violated.
  void validate() const;

  std::size_t minutes_per_segment() const;
  // Minutes kept free before an event's descent ramp so the pre-event
  // reference level is measured on undisturbed traffic.
  Minute pre_event_guard() const;
};

std::string segment_name(int segment_index);

// Baseline trace: free-flow level plus a 24 h sinusoid plus white noise,
// clamped to [0, 120]. Deterministic in (rng_seed, segment_index).
SpeedSeries generate_trace(const GenConfig& cfg, int segment_index);

// Applies a trapezoidal speed reduction: `ramp` minutes of linear descent
// ending at `start`, `drop` mph held on [start, start + duration) and `ramp`
// minutes of linear recovery. The returned event is the sustained interval.
// Throws Overlap if [start - ramp, start + duration + ramp) meets any event in
// `existing`.
std::pair<SpeedSeries, SlowdownEvent> inject_slowdown(SpeedSeries series, Minute start,
                                                      Minute duration, double drop, Minute ramp,
                                                      std::span<const SlowdownEvent> existing = {});

LabeledCorpus generate_corpus(const GenConfig& cfg);

// Pre-event reference (mean of the 60 minutes ending `lead` minutes before
// the event) minus the lowest 10-minute moving average inside the event.
double measured_drop(const SpeedSeries& series, const SlowdownEvent& event, Minute lead);

}  // namespace slowdown
