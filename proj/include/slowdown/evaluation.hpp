#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "slowdown/timeseries.hpp"

namespace slowdown {

// Conjunctive: both endpoints within tolerance. Disjunctive: either one.
enum class MatchMode { kConjunctive, kDisjunctive };

struct MatchResult {
  std::vector<std::pair<SlowdownEvent, SlowdownEvent>> pairs;  // (truth, detection)
  std::vector<SlowdownEvent> unmatched_truth;
  std::vector<SlowdownEvent> unmatched_detections;
  Minute tolerance = 0;
};

// One-to-one matching, greedy by ascending |dstart| + |dend| (ties broken by
// truth index, then detection index) over admissible pairs.
MatchResult match_events(std::span<const SlowdownEvent> truth,
                         std::span<const SlowdownEvent> detections, Minute tolerance,
                         MatchMode mode = MatchMode::kConjunctive);

struct MetricsReport {
  std::string detector_id;
  std::string corpus_id;
  Minute tolerance = 0;
  std::int64_t tp = 0;
  std::int64_t fn = 0;
  std::int64_t fp = 0;
  std::optional<double> ptp;  // tp / (tp + fn); absent without ground truth
};

MetricsReport compute_metrics(const MatchResult& match, std::string detector_id = {},
                              std::string corpus_id = {});
// Sums counts over several matches (one per segment) at a common tolerance.
MetricsReport compute_metrics(std::span<const MatchResult> matches, std::string detector_id = {},
                              std::string corpus_id = {});

// Matches segment by segment over `segments`, then aggregates.
MetricsReport evaluate_corpus(const EventsBySegment& truth, const EventsBySegment& detections,
                              std::span<const std::string> segments, Minute tolerance,
                              const std::string& detector_id, const std::string& corpus_id,
                              MatchMode mode = MatchMode::kConjunctive);

// One report per tolerance (ascending), matching recomputed each time.
std::vector<MetricsReport> tolerance_sweep(std::span<const SlowdownEvent> truth,
                                           std::span<const SlowdownEvent> detections,
                                           std::span<const Minute> tolerances,
                                           MatchMode mode = MatchMode::kConjunctive);
std::vector<MetricsReport> tolerance_sweep(const EventsBySegment& truth,
                                           const EventsBySegment& detections,
                                           std::span<const std::string> segments,
                                           std::span<const Minute> tolerances,
                                           const std::string& detector_id,
                                           const std::string& corpus_id,
                                           MatchMode mode = MatchMode::kConjunctive);

std::vector<Minute> default_tolerance_grid();

// CSV `detector,corpus,tolerance_min,tp,fn,fp,ptp` and a JSON summary, both
// ordered by (detector, corpus, tolerance). Either path may be empty to skip.
void emit_report(std::vector<MetricsReport> reports, const std::filesystem::path& csv_path,
                 const std::filesystem::path& json_path);

}  // namespace slowdown
