#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "slowdown/timeseries.hpp"

namespace slowdown {

enum class WindowClass : std::uint8_t { kSdIncluded = 0, kNonSdIncluded = 1 };

struct WindowLabel {
  WindowClass label = WindowClass::kNonSdIncluded;
  std::optional<double> start_target;  // minutes from window start / 600
  std::optional<double> end_target;

  bool positive() const noexcept { return label == WindowClass::kSdIncluded; }
};

// One 600-minute training example. Features are a view into normalized
// speed storage shared by every window cut from the same segment.
class WindowSample {
 public:
  WindowSample(std::shared_ptr<const std::vector<double>> storage, std::size_t offset,
               WindowLabel label, std::string segment_id, Minute window_start);

  std::span<const double> features() const noexcept {
    return std::span<const double>(*storage_).subspan(offset_, kWindowLength);
  }
  const WindowLabel& label() const noexcept { return label_; }
  bool positive() const noexcept { return label_.positive(); }
  const std::string& segment_id() const noexcept { return segment_id_; }
  Minute window_start() const noexcept { return window_start_; }

 private:
  std::shared_ptr<const std::vector<double>> storage_;
  std::size_t offset_;
  WindowLabel label_;
  std::string segment_id_;
  Minute window_start_;
};

struct DatasetSplit {
  std::vector<WindowSample> train;
  std::vector<WindowSample> val;
  std::uint64_t split_seed = 0;
};

// Positive iff some event satisfies window_start <= start and
// end <= window_start + 600; targets come from the earliest such event.
// `events` must be sorted by start and disjoint.
WindowLabel label_window(Minute window_start, std::span<const SlowdownEvent> events);

// Every admissible 600-minute window (1-minute step) of every segment, in
// segment order then start order. Series must already be gap-filled.
std::vector<WindowSample> extract_training_windows(const LabeledCorpus& corpus,
                                                   const NormalizationSpec& spec);

// Keeps every positive and a seeded uniform subset of negatives so that the
// negative count lies in [P, P * (1 + ratio_tolerance)]. Output preserves
// input order.
std::vector<WindowSample> balance_dataset(const std::vector<WindowSample>& samples,
                                          double ratio_tolerance, std::uint64_t seed);

// Stratified seeded split; `fraction` of each class goes to train.
DatasetSplit split_train_val(const std::vector<WindowSample>& samples, double fraction,
                             std::uint64_t seed);

std::vector<WindowSample> positives_only(const std::vector<WindowSample>& samples);

// Binary cache: "SDWINDS\0", u32 version, u32 window length, f64 v_max, u64
// count, then per sample 600 f32 features, u8 label, f32 start and end
// targets (NaN when absent). Little-endian throughout.
void save_dataset_cache(const std::vector<WindowSample>& samples, const NormalizationSpec& spec,
                        const std::filesystem::path& path);
std::vector<WindowSample> load_dataset_cache(const std::filesystem::path& path,
                                             const NormalizationSpec& expected);

}  // namespace slowdown
