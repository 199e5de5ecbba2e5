// Acceptance run. Prints one "[PASS]" or "[FAIL]" line per criterion and
// exits nonzero if any criterion fails. Criteria 4, 5, 6 and 8 share a full
// generate/train/detect/evaluate run driven by --config.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "exhaustive_match.hpp"
#include "gradcheck.hpp"
#include "slowdown/csv_io.hpp"
#include "slowdown/pipeline.hpp"
#include "slowdown/random.hpp"
#include "slowdown/windows.hpp"

namespace fs = std::filesystem;
using namespace slowdown;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

// ---- 1: analytic gradients against central differences ------------------

Outcome gradient_oracle() {
  const auto t0 = Clock::now();
  std::mt19937_64 gen(20240101);
  double worst = 0.0;
  for (int i = 0; i < 50; ++i) {
    const Head head = i % 2 == 0 ? Head::kSoftmaxClassifier : Head::kSigmoidRegressor;
    worst = std::max(worst, testing::max_gradient_error(testing::random_gradcheck_case(gen, head)));
  }
  const double t = seconds_since(t0);
  return {worst < 1e-4 && t < 10.0,
          "50 nets, max rel err " + fmt("%.2e", worst) + ", " + fmt("%.2f", t) + " s"};
}

// ---- 2: label_window against full-containment scanning -------------------

WindowLabel brute_force_label(Minute ws, const std::vector<SlowdownEvent>& events) {
  const Minute we = ws + static_cast<Minute>(kWindowLength);
  const SlowdownEvent* first = nullptr;
  for (const auto& e : events) {
    if (e.start_min >= ws && e.end_min <= we && (!first || e.start_min < first->start_min)) first = &e;
  }
  if (!first) return {};
  return {WindowClass::kSdIncluded, (first->start_min - ws) / 600.0, (first->end_min - ws) / 600.0};
}

Outcome labeling_oracle() {
  const auto t0 = Clock::now();
  std::mt19937_64 gen(77);
  std::uniform_int_distribution<int> count(0, 6);
  std::uniform_int_distribution<Minute> dur(kMinEventMinutes, kMaxEventMinutes), gap(0, 300);
  int agree = 0, multi = 0;
  for (int c = 0; c < 10000; ++c) {
    std::vector<SlowdownEvent> events;
    Minute t = gap(gen);
    for (int k = count(gen); k > 0; --k) {
      const Minute d = dur(gen);
      events.push_back({t, t + d});
      t += d + gap(gen);
    }
    const Minute ws = std::uniform_int_distribution<Minute>(-600, std::max<Minute>(t, 1))(gen);
    const auto got = label_window(ws, events);
    const auto want = brute_force_label(ws, events);
    int contained = 0;
    for (const auto& e : events) contained += e.start_min >= ws && e.end_min <= ws + 600;
    multi += contained > 1;
    agree += got.label == want.label && got.start_target == want.start_target &&
             got.end_target == want.end_target;
  }
  const double t = seconds_since(t0);
  return {agree == 10000 && t < 5.0, std::to_string(agree) + "/10000 agree (" + std::to_string(multi) +
                                         " multi-event windows), " + fmt("%.2f", t) + " s"};
}

// ---- 3: detect() with ground-truth window estimates ----------------------

Outcome oracle_end_to_end(const PipelineConfig& cfg) {
  const auto t0 = Clock::now();
  GenConfig gen = cfg.gen;
  gen.rng_seed = cfg.seed;
  const auto corpus = generate_corpus(gen);
  const LabelOracleModel oracle(corpus.events);
  const auto detected = detect(std::span<const SpeedSeries>(corpus.series), oracle, cfg.detector,
                               cfg.norm, cfg.threads);
  int interior = 0, recovered = 0, vote_ok = 0;
  for (const auto& s : corpus.series) {
    const auto& truth = corpus.events_for(s.segment_id);
    const auto& found = detected.events.at(s.segment_id);
    const auto& votes = detected.votes.at(s.segment_id);
    const Minute lo = s.t0, hi = s.t0 + static_cast<Minute>(s.size());
    for (std::size_t i = 0; i < truth.size(); ++i) {
      const auto& e = truth[i];
      // Interior: every window that fully contains the event fits in the
      // series and sees no other event.
      const Minute span_lo = e.end_min - 600, span_hi = e.start_min + 600;
      if (span_lo < lo || span_hi > hi) continue;
      const bool alone = std::none_of(truth.begin(), truth.end(), [&](const SlowdownEvent& o) {
        return &o != &e && o.start_min < span_hi && o.end_min > span_lo;
      });
      if (!alone) continue;
      ++interior;
      const bool hit = std::any_of(found.begin(), found.end(), [&](const SlowdownEvent& d) {
        return std::abs(d.start_min - e.start_min) <= 1 && std::abs(d.end_min - e.end_min) <= 1;
      });
      recovered += hit;
      // Every containing window votes at the exact start minute.
      vote_ok += votes.start_votes[static_cast<std::size_t>(e.start_min - lo)] == 600 - e.duration() + 1;
    }
  }
  const double t = seconds_since(t0);
  return {interior > 0 && recovered == interior && vote_ok == interior && t < 30.0,
          std::to_string(recovered) + "/" + std::to_string(interior) + " interior events within 1 min, " +
              std::to_string(vote_ok) + "/" + std::to_string(interior) + " vote totals = 601 - L, " +
              fmt("%.1f", t) + " s"};
}

// ---- 4, 5, 6, 8: the full pipeline --------------------------------------

struct PipelineRun {
  TrainSummary summary;
  std::vector<MetricsReport> reports;
  double train_and_inference_seconds = 0.0;
};

PipelineRun full_run(PipelineConfig cfg, const fs::path& out) {
  cfg.out_dir = out;
  fs::remove_all(out);
  auto log = [](const std::string& msg) { std::cerr << "  " << msg << '\n'; };
  PipelineRun run;
  run_generate(cfg, log);
  const auto t0 = Clock::now();
  run.summary = run_train(cfg, log);
  run_detect(cfg, DetectorKind::kMl, nullptr, log);
  run.train_and_inference_seconds = seconds_since(t0);
  run_detect(cfg, DetectorKind::kRule, nullptr, log);
  run.reports = run_evaluate(cfg, log);
  return run;
}

const MetricsReport* row(const std::vector<MetricsReport>& rs, const std::string& det, Minute tol) {
  for (const auto& r : rs) {
    if (r.detector_id == det && r.tolerance == tol) return &r;
  }
  return nullptr;
}

Outcome trained_reproduction(const PipelineRun& run, const PipelineConfig& cfg) {
  const auto* ml = row(run.reports, "ml", 30);
  const auto* rb = row(run.reports, "rule", 30);
  if (!ml || !rb || !ml->ptp || !rb->ptp) return {false, "missing 30-min rows"};
  const bool ok = *ml->ptp >= 0.80 && *ml->ptp > *rb->ptp && ml->fp <= rb->fp &&
                  run.train_and_inference_seconds < 15 * 60;
  std::ostringstream os;
  os << cfg.gen.n_segments << " segs x " << cfg.gen.hours_per_segment << " h, " << ml->tp + ml->fn
     << " held-out events; ML TP/FN/FP " << ml->tp << "/" << ml->fn << "/" << ml->fp << " PTP "
     << fmt("%.3f", *ml->ptp) << " vs RB " << rb->tp << "/" << rb->fn << "/" << rb->fp << " PTP "
     << fmt("%.3f", *rb->ptp) << "; train+inference " << fmt("%.0f", run.train_and_inference_seconds)
     << " s";
  return {ok, os.str()};
}

Outcome training_quality(const PipelineRun& run) {
  const auto& s = run.summary;
  const bool ok = s.detection.val_accuracy >= 0.95 && s.start.val_mse <= 0.01 && s.end.val_mse <= 0.01;
  return {ok, "val accuracy " + fmt("%.4f", s.detection.val_accuracy) + ", start MSE " +
                  fmt("%.5f", s.start.val_mse) + ", end MSE " + fmt("%.5f", s.end.val_mse)};
}

Outcome sweep_properties(const PipelineRun& run, const PipelineConfig& cfg) {
  bool ok = true;
  std::ostringstream os;
  for (const char* det : {"ml", "rule"}) {
    const MetricsReport* prev = nullptr;
    for (const Minute tol : cfg.tolerances) {
      const auto* r = row(run.reports, det, tol);
      if (!r || !r->ptp) return {false, std::string("missing row for ") + det};
      if (prev && (*r->ptp < *prev->ptp || r->fn > prev->fn)) {
        ok = false;
        os << det << " not monotone at " << tol << " min; ";
      }
      prev = r;
    }
  }
  os << "PTP ml/rule:";
  for (const Minute tol : cfg.tolerances) {
    const double m = *row(run.reports, "ml", tol)->ptp;
    const double r = *row(run.reports, "rule", tol)->ptp;
    if (m < r) ok = false;
    os << ' ' << tol << "=" << fmt("%.2f", m) << "/" << fmt("%.2f", r);
  }
  const auto* m10 = row(run.reports, "ml", 10);
  const auto* r10 = row(run.reports, "rule", 10);
  if (!m10 || !r10) return {false, "10-min tolerance not in the grid"};
  if (*m10->ptp < 1.5 * *r10->ptp) ok = false;
  return {ok, os.str()};
}

Outcome determinism(const fs::path& a, const fs::path& b) {
  std::vector<std::string> files{"labels.csv", "models/detection.mlp", "models/start.mlp",
                                 "models/end.mlp", "detections_ml.csv", "detections_rule.csv",
                                 "votes_ml.csv", "report.csv", "report.json", "train_summary.json"};
  int same = 0;
  std::string diff;
  for (const auto& f : files) {
    const auto x = slurp(a / f);
    if (!x.empty() && x == slurp(b / f)) {
      ++same;
    } else {
      diff += " " + f;
    }
  }
  return {same == static_cast<int>(files.size()),
          std::to_string(same) + "/" + std::to_string(files.size()) + " artifacts byte-identical" +
              (diff.empty() ? "" : "; differ:" + diff)};
}

// ---- 7: greedy matcher against exhaustive search -------------------------

Outcome matching_oracle() {
  const auto t0 = Clock::now();
  std::mt19937_64 gen(4242);
  int agree = 0;
  for (int i = 0; i < 1000; ++i) {
    const auto truth = testing::random_event_list(gen, 8, EventSource::kLabel);
    auto det = testing::jittered_detections(gen, truth, 45);
    if (det.size() > 8) det.resize(8);
    const Minute tol = default_tolerance_grid()[gen() % default_tolerance_grid().size()];
    const auto greedy = match_events(truth, det, tol);
    const auto best = testing::exhaustive_match(truth, det, tol);
    agree += static_cast<std::int64_t>(greedy.pairs.size()) == best.matched &&
             testing::match_cost(greedy) == best.cost;
  }
  const double t = seconds_since(t0);
  return {agree == 1000 && t < 10.0,
          std::to_string(agree) + "/1000 instances match the optimum, " + fmt("%.2f", t) + " s"};
}

// ---- 9: model files --------------------------------------------------------

Outcome serialization(const fs::path& run_dir, const fs::path& scratch) {
  fs::create_directories(scratch);
  std::vector<MlpModel> models;
  for (const char* n : {"detection.mlp", "start.mlp", "end.mlp"}) {
    if (fs::exists(run_dir / "models" / n)) models.push_back(load_model(run_dir / "models" / n));
  }
  if (models.empty()) {
    models.push_back(MlpModel::initialized(MlpModel::detection_dims(), Head::kSoftmaxClassifier, 1));
    models.push_back(MlpModel::initialized(MlpModel::regressor_dims(), Head::kSigmoidRegressor, 2));
  }
  Rng rng(99);
  std::vector<std::vector<double>> windows(100, std::vector<double>(kWindowLength));
  for (auto& w : windows) {
    for (auto& x : w) x = rng.uniform(0.0, 1.0);
  }
  int identical = 0, total = 0;
  for (std::size_t k = 0; k < models.size(); ++k) {
    const fs::path p = scratch / ("m" + std::to_string(k) + ".mlp");
    save_model(models[k], p);
    const auto back = load_model(p);
    for (const auto& w : windows) {
      ++total;
      if (models[k].head() == Head::kSoftmaxClassifier) {
        const auto a = predict_detection(models[k], w), b = predict_detection(back, w);
        identical += std::memcmp(&a.sd_included, &b.sd_included, sizeof(double)) == 0 &&
                     std::memcmp(&a.non_sd_included, &b.non_sd_included, sizeof(double)) == 0;
      } else {
        const double a = predict_time(models[k], w), b = predict_time(back, w);
        identical += std::memcmp(&a, &b, sizeof(double)) == 0;
      }
    }
  }

  const std::string good = slurp(scratch / "m0.mlp");
  std::vector<std::pair<std::string, std::string>> corrupt{
      {"truncated", good.substr(0, good.size() / 2)},
      {"empty", ""},
      {"bad magic", "XXXX" + good.substr(4)},
  };
  auto flip = [&](std::size_t pos) {
    std::string s = good;
    s[pos] = static_cast<char>(s[pos] ^ 0x5a);
    return s;
  };
  corrupt.emplace_back("version", flip(8));
  corrupt.emplace_back("payload bit", flip(good.size() / 2));
  corrupt.emplace_back("trailing byte", good + "x");
  int rejected = 0;
  for (const auto& [name, bytes] : corrupt) {
    const fs::path p = scratch / "corrupt.mlp";
    std::ofstream(p, std::ios::binary | std::ios::trunc) << bytes;
    try {
      load_model(p);
      std::cerr << "  corrupt case accepted: " << name << '\n';
    } catch (const Error& e) {
      rejected += e.code() == ErrorCode::kCorruptModel;
    }
  }
  return {identical == total && rejected == static_cast<int>(corrupt.size()),
          std::to_string(identical) + "/" + std::to_string(total) + " predictions bit-identical, " +
              std::to_string(rejected) + "/" + std::to_string(corrupt.size()) + " corrupt files rejected"};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria"};
  std::string config_path;
  fs::path work = "acceptance_work";
  std::vector<int> only;
  std::optional<unsigned> threads;
  app.add_option("--config", config_path, "Config for the pipeline criteria (4, 5, 6, 8)");
  app.add_option("--work", work, "Scratch directory")->capture_default_str();
  app.add_option("--only", only, "Run only these criteria");
  app.add_option("--threads", threads, "Worker threads");
  CLI11_PARSE(app, argc, argv);

  PipelineConfig cfg;
  try {
    if (!config_path.empty()) apply_config_file(cfg, config_path);
    if (threads) cfg.threads = *threads;
    cfg.validate();
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code(e.code());
  }
  auto wanted = [&](int n) { return only.empty() || std::find(only.begin(), only.end(), n) != only.end(); };

  std::map<int, std::pair<std::string, std::function<Outcome()>>> criteria;
  std::optional<PipelineRun> run;
  const fs::path run_a = work / "a" / "run", run_b = work / "b" / "run";
  auto need_run = [&]() -> const PipelineRun& {
    if (!run) run = full_run(cfg, run_a);
    return *run;
  };

  criteria[1] = {"gradient oracle", gradient_oracle};
  criteria[2] = {"labeling oracle", labeling_oracle};
  criteria[3] = {"oracle end-to-end", [&] { return oracle_end_to_end(cfg); }};
  criteria[4] = {"trained pipeline vs rule baseline", [&] { return trained_reproduction(need_run(), cfg); }};
  criteria[5] = {"training quality", [&] { return training_quality(need_run()); }};
  criteria[6] = {"tolerance sweep", [&] { return sweep_properties(need_run(), cfg); }};
  criteria[7] = {"matching oracle", matching_oracle};
  criteria[8] = {"determinism", [&] {
                   need_run();
                   full_run(cfg, run_b);
                   return determinism(run_a, run_b);
                 }};
  criteria[9] = {"serialization", [&] { return serialization(run_a, work / "serialization"); }};

  int failed = 0;
  for (auto& [n, entry] : criteria) {
    if (!wanted(n)) continue;
    const auto t0 = Clock::now();
    Outcome out;
    try {
      out = entry.second();
    } catch (const std::exception& e) {
      out = {false, std::string("threw: ") + e.what()};
    }
    failed += !out.pass;
    std::printf("[%s] criterion %d: %s: %s (%.1f s)\n", out.pass ? "PASS" : "FAIL", n, entry.first.c_str(),
                out.detail.c_str(), seconds_since(t0));
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
