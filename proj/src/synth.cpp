#include "slowdown/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>

#include "slowdown/error.hpp"
#include "slowdown/random.hpp"

namespace slowdown {

namespace {

constexpr std::uint64_t kTraceStream = 0x7472616365ULL;  // "trace"
constexpr std::uint64_t kEventStream = 0x6576656e74ULL;  // "event"
constexpr Minute kMinutesPerDay = 1440;
constexpr Minute kReferenceMinutes = 60;
constexpr Minute kMovingAverage = 10;

void require(bool ok, const std::string& what) {
  if (!ok) fail(ErrorCode::kInvalidArgument, what);
}

bool valid_range(const Interval& r) { return std::isfinite(r.lo) && std::isfinite(r.hi) && r.lo <= r.hi; }

Minute draw_minutes(Rng& rng, const Interval& r) {
  return rng.uniform_int(static_cast<std::int64_t>(std::ceil(r.lo)),
                         static_cast<std::int64_t>(std::floor(r.hi)));
}

// Subtracts the trapezoid without any precondition checks.
void apply_dip(std::vector<double>& speeds, Minute start, Minute duration, double drop, Minute ramp) {
  const auto n = static_cast<Minute>(speeds.size());
  const Minute end = start + duration;
  auto reduce = [&](Minute t, double amount) {
    if (t >= 0 && t < n) speeds[t] = std::clamp(speeds[t] - amount, kMinSpeed, kMaxSpeed);
  };
  const double steps = static_cast<double>(ramp + 1);
  for (Minute t = start - ramp; t < start; ++t) {
    reduce(t, drop * static_cast<double>(t - (start - ramp) + 1) / steps);
  }
  for (Minute t = start; t < end; ++t) reduce(t, drop);
  for (Minute t = end; t < end + ramp; ++t) {
    reduce(t, drop * static_cast<double>(end + ramp - t) / steps);
  }
}

struct Footprint {
  Minute lo;
  Minute hi;  // exclusive
};

bool collides(const std::vector<Footprint>& taken, Footprint f) {
  return std::any_of(taken.begin(), taken.end(),
                     [&](const Footprint& o) { return f.lo < o.hi && o.lo < f.hi; });
}

}  // namespace

void GenConfig::validate() const {
  require(n_segments >= 0, "n_segments must be >= 0");
  require(hours_per_segment * 60.0 >= static_cast<double>(kWindowLength),
          "hours_per_segment must cover at least one 600-minute window");
  require(std::isfinite(free_flow_mean) && free_flow_mean > 0.0, "free_flow_mean must be positive");
  require(free_flow_spread >= 0.0, "free_flow_spread must be >= 0");
  require(free_flow_daily_amplitude >= 0.0, "free_flow_daily_amplitude must be >= 0");
  require(noise_std >= 0.0, "noise_std must be >= 0");
  require(events_per_1000h >= 0.0, "events_per_1000h must be >= 0");
  require(valid_range(drop_range), "drop_range must be non-empty");
  require(drop_range.lo >= kMinSlowdownDrop, "drop_range minimum must be >= 15 mph");
  require(valid_range(duration_range), "duration_range must be non-empty");
  require(duration_range.lo >= static_cast<double>(kMinEventMinutes) &&
              duration_range.hi <= static_cast<double>(kMaxEventMinutes),
          "duration_range must lie within [60, 360] minutes");
  require(std::ceil(duration_range.lo) <= std::floor(duration_range.hi),
          "duration_range holds no whole minute");
  require(valid_range(ramp_minutes_range) && ramp_minutes_range.lo >= 0.0,
          "ramp_minutes_range must be non-empty and >= 0");
  require(std::ceil(ramp_minutes_range.lo) <= std::floor(ramp_minutes_range.hi),
          "ramp_minutes_range holds no whole minute");
  require(minor_per_1000h >= 0.0 && brief_per_1000h >= 0.0, "distractor rates must be >= 0");
  require(valid_range(minor_drop_range) && valid_range(minor_duration_range) &&
              valid_range(brief_drop_range) && valid_range(brief_duration_range),
          "distractor ranges must be non-empty");
  require(minor_drop_range.lo >= 0.0 && minor_duration_range.lo >= 1.0 &&
              brief_drop_range.lo >= 0.0 && brief_duration_range.lo >= 1.0,
          "distractor ranges must be positive");
  require(placement_retries >= 1, "placement_retries must be >= 1");
}

std::size_t GenConfig::minutes_per_segment() const {
  return static_cast<std::size_t>(std::llround(hours_per_segment * 60.0));
}

Minute GenConfig::pre_event_guard() const {
  return kReferenceMinutes + static_cast<Minute>(std::floor(ramp_minutes_range.hi));
}

std::string segment_name(int segment_index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "seg%03d", segment_index);
  return buf;
}

SpeedSeries generate_trace(const GenConfig& cfg, int segment_index) {
  cfg.validate();
  Rng rng(derive_seed(cfg.rng_seed, kTraceStream, static_cast<std::uint64_t>(segment_index)));
  const double level = cfg.free_flow_mean + rng.uniform(-cfg.free_flow_spread, cfg.free_flow_spread);
  const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
  const std::size_t n = cfg.minutes_per_segment();

  SpeedSeries s;
  s.segment_id = segment_name(segment_index);
  s.t0 = 0;
  s.speeds.resize(n);
  s.gap_mask.assign(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    const double daily = cfg.free_flow_daily_amplitude *
                         std::sin(2.0 * std::numbers::pi * static_cast<double>(i) /
                                      static_cast<double>(kMinutesPerDay) +
                                  phase);
    const double noise = cfg.noise_std > 0.0 ? rng.normal(0.0, cfg.noise_std) : 0.0;
    s.speeds[i] = std::clamp(level + daily + noise, kMinSpeed, kMaxSpeed);
  }
  return s;
}

std::pair<SpeedSeries, SlowdownEvent> inject_slowdown(SpeedSeries series, Minute start,
                                                      Minute duration, double drop, Minute ramp,
                                                      std::span<const SlowdownEvent> existing) {
  require(drop >= kMinSlowdownDrop, "slowdown drop must be >= 15 mph");
  require(duration >= kMinEventMinutes && duration <= kMaxEventMinutes,
          "slowdown duration must be within [60, 360] minutes");
  require(ramp >= 0, "ramp must be >= 0");
  const Minute lo = start - ramp;
  const Minute hi = start + duration + ramp;
  require(lo >= series.t0 && hi <= series.end(), "slowdown and ramps must fit inside the series");
  for (const auto& ev : existing) {
    if (lo < ev.end_min && ev.start_min < hi) {
      fail(ErrorCode::kOverlap, "slowdown [" + std::to_string(lo) + ", " + std::to_string(hi) +
                                    ") intersects existing event [" +
                                    std::to_string(ev.start_min) + ", " +
                                    std::to_string(ev.end_min) + ")");
    }
  }
  apply_dip(series.speeds, start - series.t0, duration, drop, ramp);
  return {std::move(series), SlowdownEvent{start, start + duration, EventSource::kLabel}};
}

double measured_drop(const SpeedSeries& series, const SlowdownEvent& event, Minute lead) {
  const Minute ref_end = event.start_min - lead - series.t0;
  const Minute ref_begin = ref_end - kReferenceMinutes;
  const Minute ev_begin = event.start_min - series.t0;
  const Minute ev_end = event.end_min - series.t0;
  if (ref_begin < 0 || ev_end > static_cast<Minute>(series.size()) ||
      ev_end - ev_begin < kMovingAverage) {
    fail(ErrorCode::kOutOfRange, "event too close to the series edge to measure its drop");
  }
  double ref = 0.0;
  for (Minute t = ref_begin; t < ref_end; ++t) ref += series.speeds[t];
  ref /= static_cast<double>(kReferenceMinutes);

  double lowest = kMaxSpeed;
  double run = 0.0;
  for (Minute t = ev_begin; t < ev_end; ++t) {
    run += series.speeds[t];
    if (t - ev_begin >= kMovingAverage) run -= series.speeds[t - kMovingAverage];
    if (t - ev_begin + 1 >= kMovingAverage) {
      lowest = std::min(lowest, run / static_cast<double>(kMovingAverage));
    }
  }
  return ref - lowest;
}

LabeledCorpus generate_corpus(const GenConfig& cfg) {
  cfg.validate();
  LabeledCorpus corpus;
  const double hours = cfg.hours_per_segment;
  const Minute guard = cfg.pre_event_guard();
  const Minute max_ramp = static_cast<Minute>(std::floor(cfg.ramp_minutes_range.hi));

  for (int seg = 0; seg < cfg.n_segments; ++seg) {
    SpeedSeries series = generate_trace(cfg, seg);
    const auto n = static_cast<Minute>(series.size());
    Rng rng(derive_seed(cfg.rng_seed, kEventStream, static_cast<std::uint64_t>(seg)));
    const auto n_events = rng.poisson(cfg.events_per_1000h * hours / 1000.0);
    const auto n_minor = rng.poisson(cfg.minor_per_1000h * hours / 1000.0);
    const auto n_brief = rng.poisson(cfg.brief_per_1000h * hours / 1000.0);

    std::vector<Footprint> taken;
    std::vector<SlowdownEvent> events;
    for (std::int64_t k = 0; k < n_events; ++k) {
      bool placed = false;
      for (int attempt = 0; attempt < cfg.placement_retries && !placed; ++attempt) {
        const Minute duration = draw_minutes(rng, cfg.duration_range);
        const Minute ramp = draw_minutes(rng, cfg.ramp_minutes_range);
        const double drop = rng.uniform(cfg.drop_range.lo, cfg.drop_range.hi);
        const Minute lo_start = ramp + guard;
        const Minute hi_start = n - duration - ramp;
        if (hi_start < lo_start) continue;
        const Minute start = rng.uniform_int(lo_start, hi_start);
        const Footprint f{start - ramp - guard, start + duration + ramp};
        if (collides(taken, f)) continue;

        auto [candidate, event] = inject_slowdown(series, start, duration, drop, ramp);
        // The noise realization can eat into a shallow drop; redraw rather
        // than emit a label that fails the 15 mph definition.
        if (measured_drop(candidate, event, max_ramp) < kMinSlowdownDrop) continue;
        series = std::move(candidate);
        taken.push_back(f);
        events.push_back(event);
        placed = true;
      }
      if (!placed) {
        fail(ErrorCode::kPlacementFailure,
             "could not place slowdown " + std::to_string(k + 1) + " of " +
                 std::to_string(n_events) + " on " + series.segment_id);
      }
    }

    // Distractors go into whatever room is left; a dense config just gets
    // fewer of them.
    auto place_distractors = [&](std::int64_t count, const Interval& drops, const Interval& durations) {
      for (std::int64_t k = 0; k < count; ++k) {
        for (int attempt = 0; attempt < cfg.placement_retries; ++attempt) {
          const Minute duration = draw_minutes(rng, durations);
          const Minute ramp = draw_minutes(rng, cfg.ramp_minutes_range) / 2;
          const double drop = rng.uniform(drops.lo, drops.hi);
          const Minute hi_start = n - duration - ramp;
          if (hi_start < ramp) continue;
          const Minute start = rng.uniform_int(ramp, hi_start);
          const Footprint f{start - ramp - guard, start + duration + ramp + guard};
          if (collides(taken, f)) continue;
          apply_dip(series.speeds, start, duration, drop, ramp);
          taken.push_back(f);
          break;
        }
      }
    };
    place_distractors(n_minor, cfg.minor_drop_range, cfg.minor_duration_range);
    place_distractors(n_brief, cfg.brief_drop_range, cfg.brief_duration_range);

    std::sort(events.begin(), events.end(), [](const SlowdownEvent& a, const SlowdownEvent& b) {
      return a.start_min < b.start_min;
    });
    if (!events.empty()) corpus.events[series.segment_id] = std::move(events);
    corpus.series.push_back(std::move(series));
  }
  corpus.validate();
  return corpus;
}

}  // namespace slowdown
