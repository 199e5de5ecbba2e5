#include "slowdown/detector.hpp"

#include <cmath>
#include <fstream>
#include <numeric>

#include "slowdown/error.hpp"
#include "slowdown/parallel.hpp"
#include "slowdown/windows.hpp"

namespace slowdown {

namespace {

constexpr std::size_t kInferenceChunk = 1024;

}  // namespace

void DetectorConfig::validate() const {
  if (stride < 1) fail(ErrorCode::kInvalidArgument, "stride must be >= 1");
  if (!(detection_threshold > 0.0 && detection_threshold < 1.0)) {
    fail(ErrorCode::kInvalidArgument, "detection_threshold must be in (0, 1)");
  }
  if (vote_bucket < 1) fail(ErrorCode::kInvalidArgument, "vote_bucket must be >= 1");
  if (min_votes < 1) fail(ErrorCode::kInvalidArgument, "min_votes must be >= 1");
  if (min_duration < 1 || min_duration >= max_duration) {
    fail(ErrorCode::kInvalidArgument, "need 1 <= min_duration < max_duration");
  }
}

std::int64_t VoteHistogram::total_start() const {
  return std::accumulate(start_votes.begin(), start_votes.end(), std::int64_t{0});
}

std::int64_t VoteHistogram::total_end() const {
  return std::accumulate(end_votes.begin(), end_votes.end(), std::int64_t{0});
}

MlpWindowModel::MlpWindowModel(MlpModel detection, MlpModel start, MlpModel end)
    : detection_(std::move(detection)), start_(std::move(start)), end_(std::move(end)) {
  if (detection_.head() != Head::kSoftmaxClassifier || start_.head() != Head::kSigmoidRegressor ||
      end_.head() != Head::kSigmoidRegressor) {
    fail(ErrorCode::kWrongHead, "expected one classifier and two regressors");
  }
  for (const auto* m : {&detection_, &start_, &end_}) {
    if (m->dims()[0] != kWindowLength) {
      fail(ErrorCode::kShapeMismatch, "models must take 600-minute windows");
    }
  }
}

std::vector<WindowEstimate> MlpWindowModel::estimate(const SpeedSeries& /*series*/,
                                                     std::span<const double> normalized,
                                                     std::span<const std::size_t> offsets,
                                                     double threshold) const {
  std::vector<WindowEstimate> out(offsets.size());
  const auto rows = static_cast<Eigen::Index>(kWindowLength);
  for (std::size_t begin = 0; begin < offsets.size(); begin += kInferenceChunk) {
    const std::size_t n = std::min(kInferenceChunk, offsets.size() - begin);
    Eigen::MatrixXd batch(rows, static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
      const auto window = slice_window(normalized, offsets[begin + i]);
      batch.col(static_cast<Eigen::Index>(i)) = Eigen::Map<const Eigen::VectorXd>(window.data(), rows);
    }
    const Eigen::VectorXd p = predict_detection_batch(detection_, batch);
    std::vector<Eigen::Index> flagged;
    for (std::size_t i = 0; i < n; ++i) {
      out[begin + i].p_sd = p(static_cast<Eigen::Index>(i));
      if (p(static_cast<Eigen::Index>(i)) >= threshold) flagged.push_back(static_cast<Eigen::Index>(i));
    }
    if (flagged.empty()) continue;
    Eigen::MatrixXd positives(rows, static_cast<Eigen::Index>(flagged.size()));
    for (std::size_t k = 0; k < flagged.size(); ++k) {
      positives.col(static_cast<Eigen::Index>(k)) = batch.col(flagged[k]);
    }
    const Eigen::VectorXd starts = predict_time_batch(start_, positives);
    const Eigen::VectorXd ends = predict_time_batch(end_, positives);
    for (std::size_t k = 0; k < flagged.size(); ++k) {
      auto& est = out[begin + static_cast<std::size_t>(flagged[k])];
      est.start_fraction = starts(static_cast<Eigen::Index>(k));
      est.end_fraction = ends(static_cast<Eigen::Index>(k));
    }
  }
  return out;
}

std::vector<WindowEstimate> LabelOracleModel::estimate(const SpeedSeries& series,
                                                       std::span<const double> /*normalized*/,
                                                       std::span<const std::size_t> offsets,
                                                       double /*threshold*/) const {
  static const std::vector<SlowdownEvent> kNone;
  const auto it = labels_.find(series.segment_id);
  const auto& events = it == labels_.end() ? kNone : it->second;
  std::vector<WindowEstimate> out(offsets.size());
  for (std::size_t i = 0; i < offsets.size(); ++i) {
    const auto label = label_window(series.t0 + static_cast<Minute>(offsets[i]), events);
    if (label.positive()) out[i] = WindowEstimate{1.0, *label.start_target, *label.end_target};
  }
  return out;
}

VoteHistogram slide_and_classify(const SpeedSeries& series, const WindowModel& model,
                                 const DetectorConfig& cfg, const NormalizationSpec& spec) {
  cfg.validate();
  if (series.size() < kWindowLength) {
    fail(ErrorCode::kSeriesTooShort, "segment '" + series.segment_id + "' is shorter than one window");
  }
  const std::vector<double> normalized = normalize(series.speeds, spec);
  std::vector<std::size_t> offsets;
  for (std::size_t s = 0; s + kWindowLength <= series.size(); s += static_cast<std::size_t>(cfg.stride)) {
    offsets.push_back(s);
  }
  const auto estimates = model.estimate(series, normalized, offsets, cfg.detection_threshold);

  VoteHistogram hist;
  hist.t0 = series.t0;
  hist.start_votes.assign(series.size() + 1, 0);
  hist.end_votes.assign(series.size() + 1, 0);
  const auto len = static_cast<double>(kWindowLength);
  for (std::size_t i = 0; i < offsets.size(); ++i) {
    const auto& est = estimates[i];
    if (est.p_sd < cfg.detection_threshold) continue;
    const auto offset = static_cast<Minute>(offsets[i]);
    const Minute start = offset + std::llround(len * est.start_fraction);
    const Minute end = offset + std::llround(len * est.end_fraction);
    if (end <= start) continue;
    if (start < offset || end > offset + static_cast<Minute>(kWindowLength)) {
      fail(ErrorCode::kOutOfRange, "vote outside its originating window");
    }
    ++hist.start_votes[static_cast<std::size_t>(start)];
    ++hist.end_votes[static_cast<std::size_t>(end)];
  }
  return hist;
}

VoteHistogram slide_and_classify(const SpeedSeries& series, const MlpModel& detection,
                                 const MlpModel& start, const MlpModel& end,
                                 const DetectorConfig& cfg, const NormalizationSpec& spec) {
  return slide_and_classify(series, MlpWindowModel(detection, start, end), cfg, spec);
}

std::vector<VotePeak> extract_peaks(std::span<const std::int64_t> votes, Minute t0,
                                    const DetectorConfig& cfg) {
  cfg.validate();
  const std::size_t n = votes.size();
  if (n == 0) return {};
  const auto width = static_cast<std::size_t>(cfg.vote_bucket);

  // bucket[i] = votes in [i, i + width), truncated at the end.
  std::vector<std::int64_t> prefix(n + 1, 0);
  for (std::size_t i = 0; i < n; ++i) prefix[i + 1] = prefix[i] + votes[i];
  auto bucket = [&](std::size_t i) { return prefix[std::min(n, i + width)] - prefix[i]; };

  struct Candidate {
    std::size_t index;
    std::int64_t sum;
  };
  std::vector<Candidate> candidates;
  for (std::size_t i = 0; i < n; ++i) {
    const auto sum = bucket(i);
    if (sum < cfg.min_votes) continue;
    if (i > 0 && bucket(i - 1) > sum) continue;
    if (i + 1 < n && bucket(i + 1) > sum) continue;
    candidates.push_back({i, sum});
  }
  std::stable_sort(candidates.begin(), candidates.end(),
                   [](const Candidate& a, const Candidate& b) { return a.sum > b.sum; });

  const Minute radius = cfg.suppression_radius();
  std::vector<VotePeak> peaks;
  for (const auto& c : candidates) {
    double weighted = 0.0;
    for (std::size_t k = c.index; k < std::min(n, c.index + width); ++k) {
      weighted += static_cast<double>(k) * static_cast<double>(votes[k]);
    }
    const Minute minute = t0 + std::llround(weighted / static_cast<double>(c.sum));
    const bool suppressed = std::any_of(peaks.begin(), peaks.end(), [&](const VotePeak& p) {
      return std::abs(p.minute - minute) <= radius;
    });
    if (!suppressed) peaks.push_back({minute, c.sum});
  }
  std::sort(peaks.begin(), peaks.end(),
            [](const VotePeak& a, const VotePeak& b) { return a.minute < b.minute; });
  return peaks;
}

std::vector<SlowdownEvent> pair_events(std::span<const VotePeak> starts,
                                       std::span<const VotePeak> ends, const DetectorConfig& cfg) {
  cfg.validate();
  std::vector<std::size_t> order(starts.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return starts[a].votes > starts[b].votes; });

  struct Scored {
    SlowdownEvent event;
    std::int64_t score;
  };
  std::vector<Scored> paired;
  std::vector<std::uint8_t> used(ends.size(), 0);
  for (const auto si : order) {
    const auto& s = starts[si];
    std::size_t best = ends.size();
    for (std::size_t ei = 0; ei < ends.size(); ++ei) {
      if (used[ei]) continue;
      const Minute duration = ends[ei].minute - s.minute;
      if (duration < cfg.min_duration || duration > cfg.max_duration) continue;
      if (best == ends.size() || duration < ends[best].minute - s.minute) best = ei;
    }
    if (best == ends.size()) continue;
    used[best] = 1;
    paired.push_back({SlowdownEvent{s.minute, ends[best].minute, EventSource::kMlDetector},
                      s.votes + ends[best].votes});
  }

  std::stable_sort(paired.begin(), paired.end(),
                   [](const Scored& a, const Scored& b) { return a.score > b.score; });
  std::vector<SlowdownEvent> kept;
  for (const auto& p : paired) {
    const bool overlaps = std::any_of(kept.begin(), kept.end(), [&](const SlowdownEvent& k) {
      return p.event.start_min < k.end_min && k.start_min < p.event.end_min;
    });
    if (!overlaps) kept.push_back(p.event);
  }
  std::sort(kept.begin(), kept.end(), [](const SlowdownEvent& a, const SlowdownEvent& b) {
    return a.start_min < b.start_min;
  });
  return kept;
}

Detection detect(const SpeedSeries& series, const WindowModel& model, const DetectorConfig& cfg,
                 const NormalizationSpec& spec) {
  Detection out;
  out.votes = slide_and_classify(series, model, cfg, spec);
  const auto starts = extract_peaks(out.votes.start_votes, out.votes.t0, cfg);
  const auto ends = extract_peaks(out.votes.end_votes, out.votes.t0, cfg);
  out.events = pair_events(starts, ends, cfg);
  return out;
}

CorpusDetection detect(std::span<const SpeedSeries> series, const WindowModel& model,
                       const DetectorConfig& cfg, const NormalizationSpec& spec, unsigned threads) {
  std::vector<Detection> results(series.size());
  parallel_for(series.size(), threads,
               [&](std::size_t i) { results[i] = detect(series[i], model, cfg, spec); });
  CorpusDetection out;
  for (std::size_t i = 0; i < series.size(); ++i) {
    out.events[series[i].segment_id] = std::move(results[i].events);
    out.votes[series[i].segment_id] = std::move(results[i].votes);
  }
  return out;
}

void write_vote_diagnostics(const std::map<std::string, VoteHistogram>& votes,
                            const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::kIo, "cannot write '" + path.string() + "'");
  out << "segment_id,minute,start_votes,end_votes\n";
  for (const auto& [id, hist] : votes) {
    for (std::size_t i = 0; i < hist.start_votes.size(); ++i) {
      if (hist.start_votes[i] == 0 && hist.end_votes[i] == 0) continue;
      out << id << ',' << hist.t0 + static_cast<Minute>(i) << ',' << hist.start_votes[i] << ','
          << hist.end_votes[i] << '\n';
    }
  }
}

}  // namespace slowdown
