#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <limits>
#include <random>

#include "slowdown/csv_io.hpp"
#include "slowdown/error.hpp"
#include "slowdown/timeseries.hpp"
#include "support.hpp"

namespace slowdown {
namespace {

using testing::code_of;
using testing::constant_series;
using testing::TempDir;

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

RawSamples raw_of(std::vector<double> speeds, Minute t0 = 0) {
  RawSamples raw;
  raw.segment_id = "seg";
  raw.speeds = std::move(speeds);
  for (std::size_t i = 0; i < raw.speeds.size(); ++i) raw.timestamps.push_back(t0 + static_cast<Minute>(i));
  return raw;
}

TEST(ValidateSeries, InRangeSamplesPassUnchanged) {
  std::vector<double> speeds(600);
  for (std::size_t i = 0; i < speeds.size(); ++i) speeds[i] = 40.0 + static_cast<double>(i % 30);
  const auto s = validate_series(raw_of(speeds, 1000));
  EXPECT_EQ(s.t0, 1000);
  EXPECT_EQ(s.speeds, speeds);
  EXPECT_EQ(s.gap_mask, std::vector<std::uint8_t>(600, 0));
}

TEST(ValidateSeries, NanBecomesGap) {
  std::vector<double> speeds(600, 60.0);
  speeds[17] = kNaN;
  const auto s = validate_series(raw_of(speeds));
  for (std::size_t i = 0; i < s.size(); ++i) EXPECT_EQ(s.gap_mask[i], i == 17 ? 1 : 0) << i;
  EXPECT_TRUE(std::isfinite(s.speeds[17]));
}

TEST(ValidateSeries, NegativeAndInfiniteAreGapsAndHighValuesClamp) {
  std::vector<double> speeds(600, 60.0);
  speeds[0] = -3.0;
  speeds[1] = std::numeric_limits<double>::infinity();
  speeds[2] = 250.0;
  const auto s = validate_series(raw_of(speeds));
  EXPECT_EQ(s.gap_mask[0], 1);
  EXPECT_EQ(s.gap_mask[1], 1);
  EXPECT_EQ(s.gap_mask[2], 0);
  EXPECT_DOUBLE_EQ(s.speeds[2], kMaxSpeed);
  for (double v : s.speeds) {
    EXPECT_GE(v, kMinSpeed);
    EXPECT_LE(v, kMaxSpeed);
  }
}

TEST(ValidateSeries, TooShort) {
  EXPECT_EQ(code_of([] { validate_series(raw_of(std::vector<double>(599, 60.0))); }),
            ErrorCode::kSeriesTooShort);
}

TEST(ValidateSeries, NonUniformSampling) {
  auto raw = raw_of(std::vector<double>(700, 60.0));
  raw.timestamps[300] += 1;
  EXPECT_EQ(code_of([&] { validate_series(raw); }), ErrorCode::kNonUniformSampling);
}

TEST(FillGaps, NoGapsUnchanged) {
  auto s = constant_series(600, 61.0);
  s.speeds[5] = 42.0;
  const auto filled = fill_gaps(s);
  EXPECT_EQ(filled.speeds, s.speeds);
}

TEST(FillGaps, InteriorGapIsLinear) {
  auto s = constant_series(3, 0.0);
  s.speeds = {60.0, 0.0, 70.0};
  s.gap_mask = {0, 1, 0};
  const auto filled = fill_gaps(s);
  EXPECT_EQ(filled.speeds, (std::vector<double>{60.0, 65.0, 70.0}));
  EXPECT_EQ(filled.gap_mask, s.gap_mask);
}

TEST(FillGaps, EdgeGapsTakeNearestValue) {
  auto s = constant_series(5, 0.0);
  s.speeds = {0.0, 50.0, 52.0, 54.0, 0.0};
  s.gap_mask = {1, 0, 0, 0, 1};
  const auto filled = fill_gaps(s);
  EXPECT_EQ(filled.speeds, (std::vector<double>{50.0, 50.0, 52.0, 54.0, 54.0}));
}

TEST(FillGaps, AllGapsThrows) {
  auto s = constant_series(10, 0.0);
  s.gap_mask.assign(10, 1);
  EXPECT_EQ(code_of([&] { fill_gaps(s); }), ErrorCode::kAllGaps);
}

TEST(FillGaps, IdempotentOnRandomGapPatterns) {
  std::mt19937_64 gen(42);
  std::uniform_real_distribution<double> speed(0.0, 120.0);
  std::bernoulli_distribution gap(0.3);
  for (int trial = 0; trial < 200; ++trial) {
    auto s = constant_series(50, 0.0);
    for (std::size_t i = 0; i < s.size(); ++i) {
      s.speeds[i] = speed(gen);
      s.gap_mask[i] = gap(gen) ? 1 : 0;
    }
    s.gap_mask[gen() % s.size()] = 0;
    const auto once = fill_gaps(s);
    const auto twice = fill_gaps(once);
    EXPECT_EQ(once.speeds, twice.speeds);
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (!s.gap_mask[i]) {
        EXPECT_EQ(once.speeds[i], s.speeds[i]);
      }
    }
  }
}

TEST(SliceWindow, Examples) {
  auto s = constant_series(601, 0.0);
  for (std::size_t i = 0; i < s.size(); ++i) s.speeds[i] = static_cast<double>(i);
  const auto w1 = slice_window(s, 1);
  ASSERT_EQ(w1.size(), kWindowLength);
  EXPECT_EQ(w1.front(), 1.0);
  EXPECT_EQ(w1.back(), 600.0);

  s.speeds.pop_back();
  s.gap_mask.pop_back();
  const auto w0 = slice_window(s, 0);
  EXPECT_EQ(std::vector<double>(w0.begin(), w0.end()), s.speeds);
  EXPECT_EQ(code_of([&] { slice_window(s, 1); }), ErrorCode::kOutOfRange);
}

TEST(SliceWindow, MatchesIndexingEverywhere) {
  auto s = constant_series(700, 0.0);
  for (std::size_t i = 0; i < s.size(); ++i) s.speeds[i] = std::sin(static_cast<double>(i));
  for (std::size_t a = 0; a + kWindowLength <= s.size(); a += 7) {
    const auto w = slice_window(s, a);
    for (std::size_t i = 0; i < kWindowLength; i += 13) EXPECT_EQ(w[i], s.speeds[a + i]);
  }
}

TEST(Normalize, Examples) {
  NormalizationSpec spec;
  const std::vector<double> in{0.0, 100.0, 55.0, 120.0};
  const auto out = normalize(in, spec);
  EXPECT_EQ(out[0], 0.0);
  EXPECT_EQ(out[1], 1.0);
  EXPECT_DOUBLE_EQ(out[2], 0.55);
  EXPECT_EQ(out[3], 1.0);  // clamped
}

TEST(Normalize, RoundTripWithinTolerance) {
  NormalizationSpec spec;
  spec.v_max = 87.5;
  std::mt19937_64 gen(7);
  std::uniform_real_distribution<double> speed(0.0, spec.v_max);
  for (int i = 0; i < 10000; ++i) {
    const double x = speed(gen);
    EXPECT_NEAR(spec.denormalize(spec.normalize(x)), x, 1e-12);
  }
}

TEST(Normalize, RejectsNonPositiveScale) {
  NormalizationSpec spec;
  spec.v_max = 0.0;
  EXPECT_THROW(spec.check(), Error);
}

TEST(LabeledCorpus, ValidateRejectsBadEvents) {
  LabeledCorpus c;
  c.series.push_back(constant_series(1000, 60.0, "a"));
  c.events["a"] = {{100, 200, EventSource::kLabel}, {150, 260, EventSource::kLabel}};
  EXPECT_EQ(code_of([&] { c.validate(); }), ErrorCode::kInvalidCorpus);
  c.events["a"] = {{100, 130, EventSource::kLabel}};
  EXPECT_EQ(code_of([&] { c.validate(); }), ErrorCode::kInvalidCorpus);
  c.events["a"] = {{900, 1001, EventSource::kLabel}};
  EXPECT_EQ(code_of([&] { c.validate(); }), ErrorCode::kInvalidCorpus);
  c.events["a"] = {{100, 200, EventSource::kLabel}, {200, 300, EventSource::kLabel}};
  EXPECT_NO_THROW(c.validate());
}

TEST(CsvIo, SpeedRoundTripWithGap) {
  TempDir dir("csv");
  const auto path = dir / "s.csv";
  {
    std::ofstream out(path);
    out << "segment_id,timestamp_min,speed_mph\n";
    for (int i = 0; i < 600; ++i) {
      out << "x," << 50 + i << ',';
      if (i != 10) out << 60.5;
      out << '\n';
    }
  }
  const auto raws = read_speed_csv(path);
  ASSERT_EQ(raws.size(), 1U);
  EXPECT_TRUE(std::isnan(raws[0].speeds[10]));
  const auto s = fill_gaps(validate_series(raws[0]));
  EXPECT_EQ(s.t0, 50);
  EXPECT_DOUBLE_EQ(s.speeds[10], 60.5);

  write_speed_csv(s, dir / "out.csv");
  const auto back = read_speed_csv(dir / "out.csv");
  ASSERT_EQ(back.size(), 1U);
  EXPECT_EQ(back[0].timestamps, raws[0].timestamps);
  EXPECT_DOUBLE_EQ(back[0].speeds[3], 60.5);
}

TEST(CsvIo, BadHeaderAndMissingFileAreIoErrors) {
  TempDir dir("csv");
  {
    std::ofstream out(dir / "bad.csv");
    out << "segment,time,speed\n";
  }
  EXPECT_EQ(code_of([&] { read_speed_csv(dir / "bad.csv"); }), ErrorCode::kIo);
  EXPECT_EQ(code_of([&] { read_label_csv(dir / "nope.csv"); }), ErrorCode::kIo);
}

TEST(CsvIo, LabelRoundTripIsByteStable) {
  TempDir dir("csv");
  EventsBySegment ev;
  ev["b"] = {{700, 800, EventSource::kLabel}};
  ev["a"] = {{10, 90, EventSource::kLabel}, {200, 300, EventSource::kLabel}};
  write_label_csv(ev, dir / "l1.csv");
  const auto back = read_label_csv(dir / "l1.csv");
  EXPECT_EQ(back, ev);
  write_label_csv(back, dir / "l2.csv");
  EXPECT_EQ(testing::read_file(dir / "l1.csv"), testing::read_file(dir / "l2.csv"));
  EXPECT_EQ(testing::read_file(dir / "l1.csv"),
            "segment_id,start_min,end_min\na,10,90\na,200,300\nb,700,800\n");
}

TEST(CsvIo, FormatFixed) {
  EXPECT_EQ(format_fixed(1.23456, 3), "1.235");
  EXPECT_EQ(format_fixed(-0.0001, 3), "0.000");
  EXPECT_EQ(format_fixed(65.0, 0), "65");
}

}  // namespace
}  // namespace slowdown
