#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "slowdown/mlp.hpp"
#include "slowdown/timeseries.hpp"

namespace slowdown {

struct DetectorConfig {
  int stride = 1;
  double detection_threshold = 0.5;
  int vote_bucket = 15;
  std::int64_t min_votes = 60;
  Minute min_duration = kMinEventMinutes;
  Minute max_duration = kMaxEventMinutes;

  void validate() const;
  Minute suppression_radius() const { return std::max<Minute>(vote_bucket, 30); }
};

// Per-minute start/end vote counts. Index i is absolute minute t0 + i; the
// histogram has one slot more than the series so a vote at the very end of
// the last window fits.
struct VoteHistogram {
  Minute t0 = 0;
  std::vector<std::int64_t> start_votes;
  std::vector<std::int64_t> end_votes;

  std::int64_t total_start() const;
  std::int64_t total_end() const;
};

// Stage-1 output for one window. Fractions are relative to the window start
// in units of the window length and are only meaningful when the window was
// classified sd_included.
struct WindowEstimate {
  double p_sd = 0.0;
  double start_fraction = 0.0;
  double end_fraction = 0.0;
};

// Anything that can classify windows and estimate their start/end times.
class WindowModel {
 public:
  virtual ~WindowModel() = default;

  // `normalized` is the whole series mapped through the normalization spec;
  // `offsets` are window starts relative to series.t0. Windows with
  // p_sd < threshold may leave the fractions unset.
  virtual std::vector<WindowEstimate> estimate(const SpeedSeries& series,
                                               std::span<const double> normalized,
                                               std::span<const std::size_t> offsets,
                                               double threshold) const = 0;
};

// The three trained networks. Regressors only run on windows the classifier
// flags.
class MlpWindowModel final : public WindowModel {
 public:
  MlpWindowModel(MlpModel detection, MlpModel start, MlpModel end);

  std::vector<WindowEstimate> estimate(const SpeedSeries& series,
                                       std::span<const double> normalized,
                                       std::span<const std::size_t> offsets,
                                       double threshold) const override;

  const MlpModel& detection() const noexcept { return detection_; }
  const MlpModel& start() const noexcept { return start_; }
  const MlpModel& end() const noexcept { return end_; }

 private:
  MlpModel detection_;
  MlpModel start_;
  MlpModel end_;
};

// Ground-truth stand-in for the three networks: classifies by the labeling
// convention and returns the exact target fractions. Used to test Stage 2.
class LabelOracleModel final : public WindowModel {
 public:
  explicit LabelOracleModel(EventsBySegment labels) : labels_(std::move(labels)) {}

  std::vector<WindowEstimate> estimate(const SpeedSeries& series,
                                       std::span<const double> normalized,
                                       std::span<const std::size_t> offsets,
                                       double threshold) const override;

 private:
  EventsBySegment labels_;
};

VoteHistogram slide_and_classify(const SpeedSeries& series, const WindowModel& model,
                                 const DetectorConfig& cfg, const NormalizationSpec& spec);
VoteHistogram slide_and_classify(const SpeedSeries& series, const MlpModel& detection,
                                 const MlpModel& start, const MlpModel& end,
                                 const DetectorConfig& cfg, const NormalizationSpec& spec);

struct VotePeak {
  Minute minute = 0;
  std::int64_t votes = 0;

  friend bool operator==(const VotePeak&, const VotePeak&) = default;
};

// Bucketed local maxima with at least cfg.min_votes, thinned by greedy
// non-maximum suppression. `t0` is the absolute minute of votes[0]. Result is
// sorted by minute.
std::vector<VotePeak> extract_peaks(std::span<const std::int64_t> votes, Minute t0,
                                    const DetectorConfig& cfg);

// Greedy start/end pairing in descending start-vote order; returns sorted,
// non-overlapping events tagged as ML detections.
std::vector<SlowdownEvent> pair_events(std::span<const VotePeak> starts,
                                       std::span<const VotePeak> ends, const DetectorConfig& cfg);

struct Detection {
  std::vector<SlowdownEvent> events;
  VoteHistogram votes;
};

Detection detect(const SpeedSeries& series, const WindowModel& model, const DetectorConfig& cfg,
                 const NormalizationSpec& spec);

struct CorpusDetection {
  EventsBySegment events;  // every processed segment has an entry, possibly empty
  std::map<std::string, VoteHistogram> votes;
};

CorpusDetection detect(std::span<const SpeedSeries> series, const WindowModel& model,
                       const DetectorConfig& cfg, const NormalizationSpec& spec,
                       unsigned threads = 1);

// `segment_id,minute,start_votes,end_votes`, only minutes with a vote.
void write_vote_diagnostics(const std::map<std::string, VoteHistogram>& votes,
                            const std::filesystem::path& path);

}  // namespace slowdown
