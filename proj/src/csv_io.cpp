#include "slowdown/csv_io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "slowdown/error.hpp"

namespace slowdown {

namespace fs = std::filesystem;

namespace {

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (true) {
    const auto comma = line.find(',', pos);
    if (comma == std::string_view::npos) {
      out.push_back(line.substr(pos));
      break;
    }
    out.push_back(line.substr(pos, comma - pos));
    pos = comma + 1;
  }
  return out;
}

std::int64_t parse_int(std::string_view field, const fs::path& path, std::size_t line_no) {
  std::int64_t value = 0;
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc() || ptr != field.data() + field.size()) {
    fail(ErrorCode::kIo, path.string() + ":" + std::to_string(line_no) + ": bad integer '" +
                             std::string(field) + "'");
  }
  return value;
}

double parse_speed(std::string_view field, const fs::path& path, std::size_t line_no) {
  if (field.empty()) return std::numeric_limits<double>::quiet_NaN();
  // std::from_chars for double is not available in every toolchain we target.
  const std::string text(field);
  char* end = nullptr;
  const double value = std::strtod(text.c_str(), &end);
  if (end != text.c_str() + text.size()) {
    fail(ErrorCode::kIo, path.string() + ":" + std::to_string(line_no) + ": bad speed '" + text +
                             "'");
  }
  return value;
}

std::ifstream open_input(const fs::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kIo, "cannot open '" + path.string() + "'");
  return in;
}

std::ofstream open_output(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::kIo, "cannot write '" + path.string() + "'");
  return out;
}

void expect_header(std::istream& in, std::string_view header, const fs::path& path) {
  std::string line;
  if (!std::getline(in, line)) fail(ErrorCode::kIo, "'" + path.string() + "' is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != header) {
    fail(ErrorCode::kIo, "'" + path.string() + "': expected header '" + std::string(header) +
                             "', got '" + line + "'");
  }
}

}  // namespace

std::string format_fixed(double value, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", decimals, value);
  std::string s(buf);
  if (s == "-0" || s.rfind("-0.", 0) == 0) {
    if (s.find_first_not_of("-0.") == std::string::npos) s.erase(0, 1);
  }
  return s;
}

std::vector<RawSamples> read_speed_csv(const fs::path& path) {
  auto in = open_input(path);
  expect_header(in, "segment_id,timestamp_min,speed_mph", path);
  std::vector<RawSamples> out;
  std::string line;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = split_fields(line);
    if (fields.size() != 3) {
      fail(ErrorCode::kIo, path.string() + ":" + std::to_string(line_no) + ": expected 3 fields");
    }
    const std::string id(fields[0]);
    if (out.empty() || out.back().segment_id != id) {
      if (std::any_of(out.begin(), out.end(), [&](const RawSamples& r) { return r.segment_id == id; })) {
        fail(ErrorCode::kIo, path.string() + ": rows of segment '" + id + "' are not contiguous");
      }
      out.push_back(RawSamples{id, {}, {}});
    }
    out.back().timestamps.push_back(parse_int(fields[1], path, line_no));
    out.back().speeds.push_back(parse_speed(fields[2], path, line_no));
  }
  return out;
}

void write_speed_csv(const SpeedSeries& series, const fs::path& path) {
  auto out = open_output(path);
  out << "segment_id,timestamp_min,speed_mph\n";
  for (std::size_t i = 0; i < series.speeds.size(); ++i) {
    out << series.segment_id << ',' << series.t0 + static_cast<Minute>(i) << ',';
    const bool gap = i < series.gap_mask.size() && series.gap_mask[i];
    if (!gap) out << format_fixed(series.speeds[i], 3);
    out << '\n';
  }
  if (!out) fail(ErrorCode::kIo, "write failed for '" + path.string() + "'");
}

EventsBySegment read_label_csv(const fs::path& path, EventSource source) {
  auto in = open_input(path);
  expect_header(in, "segment_id,start_min,end_min", path);
  EventsBySegment events;
  std::string line;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = split_fields(line);
    if (fields.size() != 3) {
      fail(ErrorCode::kIo, path.string() + ":" + std::to_string(line_no) + ": expected 3 fields");
    }
    SlowdownEvent ev{parse_int(fields[1], path, line_no), parse_int(fields[2], path, line_no),
                     source};
    if (ev.end_min <= ev.start_min) {
      fail(ErrorCode::kIo, path.string() + ":" + std::to_string(line_no) + ": end before start");
    }
    events[std::string(fields[0])].push_back(ev);
  }
  for (auto& [id, list] : events) {
    std::sort(list.begin(), list.end(), [](const SlowdownEvent& a, const SlowdownEvent& b) {
      return a.start_min < b.start_min;
    });
  }
  return events;
}

void write_label_csv(const EventsBySegment& events, const fs::path& path) {
  auto out = open_output(path);
  out << "segment_id,start_min,end_min\n";
  for (const auto& [id, list] : events) {
    for (const auto& ev : list) out << id << ',' << ev.start_min << ',' << ev.end_min << '\n';
  }
  if (!out) fail(ErrorCode::kIo, "write failed for '" + path.string() + "'");
}

LabeledCorpus read_corpus(const fs::path& speed_dir, const fs::path& label_path) {
  if (!fs::is_directory(speed_dir)) {
    fail(ErrorCode::kIo, "speed directory '" + speed_dir.string() + "' not found");
  }
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(speed_dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".csv") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  LabeledCorpus corpus;
  for (const auto& file : files) {
    for (const auto& raw : read_speed_csv(file)) {
      corpus.series.push_back(fill_gaps(validate_series(raw)));
    }
  }
  std::sort(corpus.series.begin(), corpus.series.end(),
            [](const SpeedSeries& a, const SpeedSeries& b) { return a.segment_id < b.segment_id; });
  corpus.events = read_label_csv(label_path);
  corpus.validate();
  return corpus;
}

void write_corpus(const LabeledCorpus& corpus, const fs::path& speed_dir,
                  const fs::path& label_path) {
  fs::create_directories(speed_dir);
  for (const auto& s : corpus.series) write_speed_csv(s, speed_dir / (s.segment_id + ".csv"));
  write_label_csv(corpus.events, label_path);
}

}  // namespace slowdown
