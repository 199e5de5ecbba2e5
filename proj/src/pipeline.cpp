#include "slowdown/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <fstream>
#include <set>

#include "json.hpp"
#include "slowdown/csv_io.hpp"
#include "slowdown/error.hpp"
#include "slowdown/parallel.hpp"

namespace slowdown {

namespace fs = std::filesystem;

namespace {

void say(const LogFn& log, const std::string& msg) {
  if (log) log(msg);
}

std::vector<std::string> sorted_ids(const LabeledCorpus& corpus) {
  std::vector<std::string> ids;
  for (const auto& s : corpus.series) ids.push_back(s.segment_id);
  std::sort(ids.begin(), ids.end());
  return ids;
}

LabeledCorpus subset(const LabeledCorpus& corpus, const std::vector<std::string>& ids) {
  const std::set<std::string> keep(ids.begin(), ids.end());
  LabeledCorpus out;
  for (const auto& s : corpus.series) {
    if (keep.count(s.segment_id)) out.series.push_back(s);
  }
  for (const auto& [id, events] : corpus.events) {
    if (keep.count(id)) out.events[id] = events;
  }
  return out;
}

fs::path detections_path(const PipelineConfig& cfg, DetectorKind kind) {
  return cfg.out_dir / (std::string("detections_") + detector_kind_name(kind) + ".csv");
}

nlohmann::ordered_json report_json(const TrainReport& r, bool classifier) {
  nlohmann::ordered_json j;
  j["epochs"] = r.train_loss.size();
  j["best_epoch"] = r.best_epoch;
  if (classifier) {
    j["train_accuracy"] = r.train_accuracy;
    j["val_accuracy"] = r.val_accuracy;
  } else {
    j["train_mse"] = r.train_mse;
    j["val_mse"] = r.val_mse;
    j["train_rmse_minutes"] = std::sqrt(r.train_mse) * static_cast<double>(kWindowLength);
    j["val_rmse_minutes"] = std::sqrt(r.val_mse) * static_cast<double>(kWindowLength);
  }
  return j;
}

}  // namespace

DetectorKind parse_detector_kind(const std::string& name) {
  if (name == "ml") return DetectorKind::kMl;
  if (name == "rule") return DetectorKind::kRule;
  fail(ErrorCode::kUsage, "unknown detector '" + name + "' (expected ml or rule)");
}

const char* detector_kind_name(DetectorKind kind) noexcept {
  return kind == DetectorKind::kMl ? "ml" : "rule";
}

std::vector<std::string> training_segments(const LabeledCorpus& corpus, const PipelineConfig& cfg) {
  auto ids = sorted_ids(corpus);
  const auto hold = std::min(ids.size(), static_cast<std::size_t>(cfg.holdout_segments));
  ids.resize(ids.size() - hold);
  return ids;
}

std::vector<std::string> scope_segments(const LabeledCorpus& corpus, const PipelineConfig& cfg) {
  auto ids = sorted_ids(corpus);
  const auto hold = std::min(ids.size(), static_cast<std::size_t>(cfg.holdout_segments));
  switch (cfg.eval_scope) {
    case EvalScope::kAll: return ids;
    case EvalScope::kTrain: ids.resize(ids.size() - hold); return ids;
    case EvalScope::kHoldout:
      return std::vector<std::string>(ids.end() - static_cast<std::ptrdiff_t>(hold), ids.end());
  }
  return ids;
}

LabeledCorpus run_generate(const PipelineConfig& cfg, const LogFn& log) {
  GenConfig gen = cfg.gen;
  gen.rng_seed = cfg.seed;
  const auto corpus = generate_corpus(gen);
  write_corpus(corpus, cfg.out_dir / "speeds", cfg.out_dir / "labels.csv");
  std::size_t n_events = 0;
  for (const auto& [id, list] : corpus.events) n_events += list.size();
  say(log, "generated " + std::to_string(corpus.series.size()) + " segments, " +
               std::to_string(n_events) + " labeled slowdowns -> " + cfg.out_dir.string());
  return corpus;
}

TrainSummary run_train(const PipelineConfig& cfg, const LogFn& log) {
  cfg.validate();
  const auto corpus = read_corpus(cfg.speeds_dir(), cfg.labels_path());
  const auto train_ids = training_segments(corpus, cfg);
  if (train_ids.empty()) fail(ErrorCode::kTooFewSamples, "no segments left for training");
  const auto train_corpus = subset(corpus, train_ids);

  TrainSummary summary;
  const auto windows = extract_training_windows(train_corpus, cfg.norm);
  summary.windows_total = windows.size();
  const auto balanced = balance_dataset(windows, cfg.balance_tolerance, cfg.stage_seed("balance"));
  summary.windows_balanced = balanced.size();
  const auto split = split_train_val(balanced, cfg.train_fraction, cfg.stage_seed("split"));
  summary.train_windows = split.train.size();
  summary.val_windows = split.val.size();
  say(log, "windows: " + std::to_string(windows.size()) + " extracted, " +
               std::to_string(balanced.size()) + " after balancing, " +
               std::to_string(split.train.size()) + " train / " + std::to_string(split.val.size()) +
               " val");

  DatasetSplit positive_split;
  positive_split.split_seed = split.split_seed;
  positive_split.train = positives_only(split.train);
  positive_split.val = positives_only(split.val);

  struct Job {
    TrainTarget target;
    const DatasetSplit* data;
    TrainConfig tc;
    MlpModel model;
  };
  auto make_job = [&](TrainTarget target) {
    const bool det = target == TrainTarget::kDetection;
    const std::string name = train_target_name(target);
    TrainConfig tc = det ? cfg.train : cfg.train_regressor;
    tc.seed = cfg.stage_seed("train." + name);
    auto model = MlpModel::initialized(det ? MlpModel::detection_dims() : MlpModel::regressor_dims(),
                                       det ? Head::kSoftmaxClassifier : Head::kSigmoidRegressor,
                                       cfg.stage_seed("init." + name));
    return Job{target, det ? &split : &positive_split, tc, std::move(model)};
  };
  std::vector<Job> jobs;
  for (auto target : {TrainTarget::kDetection, TrainTarget::kStartTime, TrainTarget::kEndTime}) {
    jobs.push_back(make_job(target));
  }

  std::vector<std::optional<TrainResult>> results(jobs.size());
  parallel_for(jobs.size(), cfg.threads, [&](std::size_t i) {
    const auto& job = jobs[i];
    const std::string name = train_target_name(job.target);
    const int every = std::max(1, job.tc.epochs / 10);
    results[i] = train(job.model, *job.data, job.tc, job.target,
                       [&](int epoch, double tl, double vl) {
                         if (epoch % every == 0 || epoch == job.tc.epochs) {
                           say(log, name + " epoch " + std::to_string(epoch) + ": train " +
                                        format_fixed(tl, 6) + " val " + format_fixed(vl, 6));
                         }
                       });
  });

  const fs::path models = cfg.model_dir();
  nlohmann::ordered_json doc;
  doc["windows_total"] = summary.windows_total;
  doc["windows_balanced"] = summary.windows_balanced;
  doc["train_windows"] = summary.train_windows;
  doc["val_windows"] = summary.val_windows;
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    const std::string name = train_target_name(jobs[i].target);
    const auto& result = *results[i];
    save_model(result.model, models / (name + ".mlp"));
    write_train_report_csv(result.report, cfg.out_dir / ("train_report_" + name + ".csv"));
    doc[name] = report_json(result.report, jobs[i].target == TrainTarget::kDetection);
    (jobs[i].target == TrainTarget::kDetection ? summary.detection
     : jobs[i].target == TrainTarget::kStartTime ? summary.start
                                                 : summary.end) = result.report;
  }
  std::filesystem::create_directories(cfg.out_dir);
  std::ofstream out(cfg.out_dir / "train_summary.json", std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::kIo, "cannot write train_summary.json in '" + cfg.out_dir.string() + "'");
  out << doc.dump(2) << '\n';
  say(log, "detection val accuracy " + format_fixed(summary.detection.val_accuracy, 4) +
               ", start val MSE " + format_fixed(summary.start.val_mse, 5) + ", end val MSE " +
               format_fixed(summary.end.val_mse, 5));
  return summary;
}

EventsBySegment run_detect(const PipelineConfig& cfg, DetectorKind kind,
                           const WindowModel* override_model, const LogFn& log) {
  cfg.validate();
  const auto corpus = read_corpus(cfg.speeds_dir(), cfg.labels_path());
  const auto ids = scope_segments(corpus, cfg);
  const std::set<std::string> keep(ids.begin(), ids.end());
  std::vector<SpeedSeries> series;
  for (const auto& s : corpus.series) {
    if (keep.count(s.segment_id)) series.push_back(s);
  }

  EventsBySegment events;
  if (kind == DetectorKind::kMl) {
    std::optional<MlpWindowModel> trained;
    if (override_model == nullptr) {
      const fs::path dir = cfg.model_dir();
      trained.emplace(load_model(dir / "detection.mlp"), load_model(dir / "start.mlp"),
                      load_model(dir / "end.mlp"));
    }
    const WindowModel& model = override_model ? *override_model : *trained;
    auto result = detect(series, model, cfg.detector, cfg.norm, cfg.threads);
    write_vote_diagnostics(result.votes, cfg.out_dir / "votes_ml.csv");
    events = std::move(result.events);
  } else {
    std::vector<std::vector<SlowdownEvent>> per(series.size());
    parallel_for(series.size(), cfg.threads,
                 [&](std::size_t i) { per[i] = detect_rule_based(series[i], cfg.rule); });
    for (std::size_t i = 0; i < series.size(); ++i) events[series[i].segment_id] = std::move(per[i]);
  }
  write_label_csv(events, detections_path(cfg, kind));
  std::size_t n = 0;
  for (const auto& [id, list] : events) n += list.size();
  say(log, std::string(detector_kind_name(kind)) + " detector: " + std::to_string(n) +
               " events on " + std::to_string(series.size()) + " segments");
  return events;
}

std::vector<MetricsReport> run_evaluate(const PipelineConfig& cfg, const LogFn& log) {
  cfg.validate();
  const auto corpus = read_corpus(cfg.speeds_dir(), cfg.labels_path());
  const auto ids = scope_segments(corpus, cfg);
  const std::string corpus_id = cfg.corpus_dir().filename().string().empty()
                                    ? cfg.corpus_dir().parent_path().filename().string()
                                    : cfg.corpus_dir().filename().string();

  std::vector<Minute> grid = cfg.tolerances;
  if (std::find(grid.begin(), grid.end(), cfg.headline_tolerance) == grid.end()) {
    grid.push_back(cfg.headline_tolerance);
    std::sort(grid.begin(), grid.end());
  }

  std::vector<MetricsReport> reports;
  bool any = false;
  for (auto kind : {DetectorKind::kMl, DetectorKind::kRule}) {
    const auto path = detections_path(cfg, kind);
    if (!fs::exists(path)) continue;
    any = true;
    const auto detections = read_label_csv(path, kind == DetectorKind::kMl
                                                     ? EventSource::kMlDetector
                                                     : EventSource::kRuleDetector);
    auto rows = tolerance_sweep(corpus.events, detections, ids, grid, detector_kind_name(kind),
                                corpus_id, cfg.match_mode);
    for (const auto& r : rows) {
      if (r.tolerance == cfg.headline_tolerance) {
        say(log, std::string(detector_kind_name(kind)) + " @" + std::to_string(r.tolerance) +
                     " min: TP " + std::to_string(r.tp) + " FN " + std::to_string(r.fn) + " FP " +
                     std::to_string(r.fp) + " PTP " + (r.ptp ? format_fixed(*r.ptp, 3) : "n/a"));
      }
    }
    reports.insert(reports.end(), rows.begin(), rows.end());
  }
  if (!any) {
    fail(ErrorCode::kIo, "no detections_ml.csv or detections_rule.csv in '" + cfg.out_dir.string() + "'");
  }
  emit_report(reports, cfg.out_dir / "report.csv", cfg.out_dir / "report.json");
  return reports;
}

}  // namespace slowdown
