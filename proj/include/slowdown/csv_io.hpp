#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "slowdown/timeseries.hpp"

namespace slowdown {

// Speed CSV: header `segment_id,timestamp_min,speed_mph`, ascending timestamps,
// empty speed field for a gap. A file may hold several segments; rows of one
// segment must be contiguous.
std::vector<RawSamples> read_speed_csv(const std::filesystem::path& path);
void write_speed_csv(const SpeedSeries& series, const std::filesystem::path& path);

// Label CSV: header `segment_id,start_min,end_min`. Rows are grouped per
// segment and sorted by start.
EventsBySegment read_label_csv(const std::filesystem::path& path,
                               EventSource source = EventSource::kLabel);
void write_label_csv(const EventsBySegment& events, const std::filesystem::path& path);

// Reads every *.csv in `speed_dir` (sorted by file name), validates and
// gap-fills the series, attaches labels from `label_path` and validates the
// corpus.
LabeledCorpus read_corpus(const std::filesystem::path& speed_dir,
                          const std::filesystem::path& label_path);

// Writes one `<segment_id>.csv` per series into `speed_dir` plus the label file.
void write_corpus(const LabeledCorpus& corpus, const std::filesystem::path& speed_dir,
                  const std::filesystem::path& label_path);

// Fixed-format double rendering shared by every writer so outputs are
// byte-stable.
std::string format_fixed(double value, int decimals);

}  // namespace slowdown
