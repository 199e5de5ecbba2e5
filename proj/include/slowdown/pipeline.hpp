#pragma once

#include <functional>
#include <string>
#include <vector>

#include "slowdown/config.hpp"
#include "slowdown/detector.hpp"

namespace slowdown {

using LogFn = std::function<void(const std::string&)>;

enum class DetectorKind { kMl, kRule };

DetectorKind parse_detector_kind(const std::string& name);  // UsageError on unknown names
const char* detector_kind_name(DetectorKind kind) noexcept;

// Segment ids (sorted) used for training and for detection/evaluation.
std::vector<std::string> training_segments(const LabeledCorpus& corpus, const PipelineConfig& cfg);
std::vector<std::string> scope_segments(const LabeledCorpus& corpus, const PipelineConfig& cfg);

// generate: synthetic corpus into <out>/speeds/*.csv and <out>/labels.csv.
// The generator seed is the global seed.
LabeledCorpus run_generate(const PipelineConfig& cfg, const LogFn& log = {});

struct TrainSummary {
  std::size_t windows_total = 0;
  std::size_t windows_balanced = 0;
  std::size_t train_windows = 0;
  std::size_t val_windows = 0;
  TrainReport detection;
  TrainReport start;
  TrainReport end;
};

// train: windows -> balance -> split -> three networks. Writes
// <models>/{detection,start,end}.mlp, <out>/train_report_<net>.csv and
// <out>/train_summary.json.
TrainSummary run_train(const PipelineConfig& cfg, const LogFn& log = {});

// detect: writes <out>/detections_<kind>.csv (Label CSV) and, for the ML
// detector, <out>/votes_ml.csv. `override_model` replaces the trained
// networks (used with LabelOracleModel).
EventsBySegment run_detect(const PipelineConfig& cfg, DetectorKind kind,
                           const WindowModel* override_model = nullptr, const LogFn& log = {});

// evaluate: matches every detections_<kind>.csv present in <out> against the
// labels over the evaluation scope; writes <out>/report.csv and
// <out>/report.json (sweep rows plus the headline tolerance).
std::vector<MetricsReport> run_evaluate(const PipelineConfig& cfg, const LogFn& log = {});

}  // namespace slowdown
