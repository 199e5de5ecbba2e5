#include "slowdown/evaluation.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <tuple>

#include "json.hpp"
#include "slowdown/csv_io.hpp"
#include "slowdown/error.hpp"

namespace slowdown {

namespace {

Minute abs_diff(Minute a, Minute b) { return a > b ? a - b : b - a; }

std::ofstream open_output(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::kIo, "cannot write '" + path.string() + "'");
  return out;
}

void require_ascending(std::span<const Minute> tolerances) {
  if (!std::is_sorted(tolerances.begin(), tolerances.end())) {
    fail(ErrorCode::kInvalidArgument, "tolerances must be ascending");
  }
}

}  // namespace

MatchResult match_events(std::span<const SlowdownEvent> truth,
                         std::span<const SlowdownEvent> detections, Minute tolerance,
                         MatchMode mode) {
  if (tolerance < 0) fail(ErrorCode::kInvalidArgument, "tolerance must be >= 0");
  struct Candidate {
    Minute cost;
    std::size_t t;
    std::size_t d;
  };
  std::vector<Candidate> candidates;
  for (std::size_t t = 0; t < truth.size(); ++t) {
    for (std::size_t d = 0; d < detections.size(); ++d) {
      const Minute ds = abs_diff(truth[t].start_min, detections[d].start_min);
      const Minute de = abs_diff(truth[t].end_min, detections[d].end_min);
      const bool admissible = mode == MatchMode::kConjunctive
                                  ? (ds <= tolerance && de <= tolerance)
                                  : (ds <= tolerance || de <= tolerance);
      if (admissible) candidates.push_back({ds + de, t, d});
    }
  }
  std::sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
    return std::tie(a.cost, a.t, a.d) < std::tie(b.cost, b.t, b.d);
  });

  std::vector<std::uint8_t> truth_used(truth.size(), 0);
  std::vector<std::uint8_t> det_used(detections.size(), 0);
  MatchResult result;
  result.tolerance = tolerance;
  for (const auto& c : candidates) {
    if (truth_used[c.t] || det_used[c.d]) continue;
    truth_used[c.t] = det_used[c.d] = 1;
    result.pairs.emplace_back(truth[c.t], detections[c.d]);
  }
  std::sort(result.pairs.begin(), result.pairs.end(), [](const auto& a, const auto& b) {
    return a.first.start_min < b.first.start_min;
  });
  for (std::size_t t = 0; t < truth.size(); ++t) {
    if (!truth_used[t]) result.unmatched_truth.push_back(truth[t]);
  }
  for (std::size_t d = 0; d < detections.size(); ++d) {
    if (!det_used[d]) result.unmatched_detections.push_back(detections[d]);
  }
  return result;
}

MetricsReport compute_metrics(const MatchResult& match, std::string detector_id,
                              std::string corpus_id) {
  return compute_metrics(std::span<const MatchResult>(&match, 1), std::move(detector_id),
                         std::move(corpus_id));
}

MetricsReport compute_metrics(std::span<const MatchResult> matches, std::string detector_id,
                              std::string corpus_id) {
  MetricsReport report;
  report.detector_id = std::move(detector_id);
  report.corpus_id = std::move(corpus_id);
  for (const auto& m : matches) {
    if (&m != matches.data() && m.tolerance != matches.front().tolerance) {
      fail(ErrorCode::kInvalidArgument, "matches aggregated across different tolerances");
    }
    report.tolerance = m.tolerance;
    report.tp += static_cast<std::int64_t>(m.pairs.size());
    report.fn += static_cast<std::int64_t>(m.unmatched_truth.size());
    report.fp += static_cast<std::int64_t>(m.unmatched_detections.size());
  }
  if (report.tp + report.fn > 0) {
    report.ptp = static_cast<double>(report.tp) / static_cast<double>(report.tp + report.fn);
  }
  return report;
}

MetricsReport evaluate_corpus(const EventsBySegment& truth, const EventsBySegment& detections,
                              std::span<const std::string> segments, Minute tolerance,
                              const std::string& detector_id, const std::string& corpus_id,
                              MatchMode mode) {
  static const std::vector<SlowdownEvent> kNone;
  auto lookup = [](const EventsBySegment& m, const std::string& id) -> const std::vector<SlowdownEvent>& {
    const auto it = m.find(id);
    return it == m.end() ? kNone : it->second;
  };
  std::vector<MatchResult> matches;
  matches.reserve(segments.size());
  for (const auto& id : segments) {
    matches.push_back(match_events(lookup(truth, id), lookup(detections, id), tolerance, mode));
  }
  auto report = compute_metrics(matches, detector_id, corpus_id);
  report.tolerance = tolerance;
  return report;
}

std::vector<MetricsReport> tolerance_sweep(std::span<const SlowdownEvent> truth,
                                           std::span<const SlowdownEvent> detections,
                                           std::span<const Minute> tolerances, MatchMode mode) {
  require_ascending(tolerances);
  std::vector<MetricsReport> out;
  for (const Minute tol : tolerances) {
    out.push_back(compute_metrics(match_events(truth, detections, tol, mode)));
  }
  return out;
}

std::vector<MetricsReport> tolerance_sweep(const EventsBySegment& truth,
                                           const EventsBySegment& detections,
                                           std::span<const std::string> segments,
                                           std::span<const Minute> tolerances,
                                           const std::string& detector_id,
                                           const std::string& corpus_id, MatchMode mode) {
  require_ascending(tolerances);
  std::vector<MetricsReport> out;
  for (const Minute tol : tolerances) {
    out.push_back(evaluate_corpus(truth, detections, segments, tol, detector_id, corpus_id, mode));
  }
  return out;
}

std::vector<Minute> default_tolerance_grid() { return {5, 10, 15, 20, 30, 45, 60}; }

void emit_report(std::vector<MetricsReport> reports, const std::filesystem::path& csv_path,
                 const std::filesystem::path& json_path) {
  std::stable_sort(reports.begin(), reports.end(), [](const MetricsReport& a, const MetricsReport& b) {
    return std::tie(a.detector_id, a.corpus_id, a.tolerance) <
           std::tie(b.detector_id, b.corpus_id, b.tolerance);
  });
  if (!csv_path.empty()) {
    auto out = open_output(csv_path);
    out << "detector,corpus,tolerance_min,tp,fn,fp,ptp\n";
    for (const auto& r : reports) {
      out << r.detector_id << ',' << r.corpus_id << ',' << r.tolerance << ',' << r.tp << ','
          << r.fn << ',' << r.fp << ',' << (r.ptp ? format_fixed(*r.ptp, 6) : std::string{})
          << '\n';
    }
    if (!out) fail(ErrorCode::kIo, "write failed for '" + csv_path.string() + "'");
  }
  if (!json_path.empty()) {
    nlohmann::ordered_json rows = nlohmann::ordered_json::array();
    for (const auto& r : reports) {
      nlohmann::ordered_json row;
      row["detector"] = r.detector_id;
      row["corpus"] = r.corpus_id;
      row["tolerance_min"] = r.tolerance;
      row["tp"] = r.tp;
      row["fn"] = r.fn;
      row["fp"] = r.fp;
      if (r.ptp) {
        row["ptp"] = *r.ptp;
      } else {
        row["ptp"] = nullptr;
      }
      rows.push_back(std::move(row));
    }
    nlohmann::ordered_json doc;
    doc["columns"] = {"detector", "corpus", "tolerance_min", "tp", "fn", "fp", "ptp"};
    doc["reports"] = std::move(rows);
    auto out = open_output(json_path);
    out << doc.dump(2) << '\n';
  }
}

}  // namespace slowdown
