#include <gtest/gtest.h>

#include "slowdown/csv_io.hpp"
#include "slowdown/pipeline.hpp"
#include "support.hpp"

namespace slowdown {
namespace {

using testing::code_of;
using testing::read_file;

PipelineConfig small_config(const std::filesystem::path& out) {
  PipelineConfig cfg;
  cfg.out_dir = out;
  cfg.seed = 5;
  cfg.threads = 2;
  cfg.gen.n_segments = 4;
  cfg.gen.hours_per_segment = 48;
  cfg.gen.events_per_1000h = 40.0;
  cfg.holdout_segments = 2;
  cfg.train.epochs = 2;
  cfg.train.batch_size = 256;
  cfg.train_regressor = cfg.train;
  return cfg;
}

TEST(Pipeline, DetectorKindNames) {
  EXPECT_EQ(parse_detector_kind("ml"), DetectorKind::kMl);
  EXPECT_EQ(parse_detector_kind("rule"), DetectorKind::kRule);
  EXPECT_EQ(code_of([] { parse_detector_kind("svm"); }), ErrorCode::kUsage);
  EXPECT_STREQ(detector_kind_name(DetectorKind::kRule), "rule");
}

TEST(Pipeline, SegmentScopes) {
  testing::TempDir dir("scope");
  auto cfg = small_config(dir.path());
  const auto corpus = run_generate(cfg);
  const auto train = training_segments(corpus, cfg);
  ASSERT_EQ(train.size(), 2U);
  EXPECT_EQ(scope_segments(corpus, cfg).size(), 2U);
  EXPECT_NE(scope_segments(corpus, cfg).front(), train.front());
  cfg.eval_scope = EvalScope::kAll;
  EXPECT_EQ(scope_segments(corpus, cfg).size(), 4U);
  cfg.eval_scope = EvalScope::kTrain;
  EXPECT_EQ(scope_segments(corpus, cfg), train);
}

TEST(Pipeline, OracleEndToEnd) {
  testing::TempDir dir("oracle");
  auto cfg = small_config(dir.path());
  cfg.eval_scope = EvalScope::kAll;
  const auto corpus = run_generate(cfg);
  const LabelOracleModel oracle(corpus.events);
  run_detect(cfg, DetectorKind::kMl, &oracle);
  run_detect(cfg, DetectorKind::kRule);
  const auto reports = run_evaluate(cfg);
  EXPECT_TRUE(std::filesystem::exists(dir / "report.csv"));
  EXPECT_TRUE(std::filesystem::exists(dir / "report.json"));
  EXPECT_TRUE(std::filesystem::exists(dir / "votes_ml.csv"));
  std::int64_t truth_count = 0;
  for (const auto& [id, evs] : corpus.events) truth_count += static_cast<std::int64_t>(evs.size());
  ASSERT_GT(truth_count, 0);
  int ml_rows = 0;
  for (const auto& r : reports) {
    EXPECT_EQ(r.corpus_id, dir.path().filename().string());
    EXPECT_EQ(r.tp + r.fn, truth_count);
    // Perfect window estimates reproduce the labels to within a minute.
    if (r.detector_id == "ml") {
      ++ml_rows;
      if (r.tolerance >= 1) {
        EXPECT_EQ(r.tp, truth_count);
        EXPECT_EQ(r.fp, 0);
      }
    }
  }
  EXPECT_EQ(ml_rows, static_cast<int>(cfg.tolerances.size()));  // headline 30 is in the grid
}

TEST(Pipeline, MissingInputs) {
  testing::TempDir dir("missing");
  auto cfg = small_config(dir.path());
  EXPECT_EQ(code_of([&] { run_detect(cfg, DetectorKind::kRule); }), ErrorCode::kIo);
  run_generate(cfg);
  EXPECT_EQ(code_of([&] { run_evaluate(cfg); }), ErrorCode::kIo);  // no detections yet
  EXPECT_EQ(code_of([&] { run_detect(cfg, DetectorKind::kMl); }), ErrorCode::kIo);  // no models
}

TEST(Pipeline, TrainSmokeAndDeterminism) {
  testing::TempDir a("det_a"), b("det_b");
  std::string models[2][3];
  int run = 0;
  for (const auto* dir : {&a, &b}) {
    auto cfg = small_config(dir->path());
    run_generate(cfg);
    const auto summary = run_train(cfg);
    EXPECT_GT(summary.windows_total, summary.windows_balanced);
    EXPECT_EQ(summary.train_windows + summary.val_windows, summary.windows_balanced);
    EXPECT_EQ(summary.detection.train_loss.size(), 2U);
    int k = 0;
    for (const char* name : {"detection.mlp", "start.mlp", "end.mlp"}) {
      models[run][k++] = read_file(dir->path() / "models" / name);
    }
    EXPECT_TRUE(std::filesystem::exists(dir->path() / "train_summary.json"));
    run_detect(cfg, DetectorKind::kMl);
    run_detect(cfg, DetectorKind::kRule);
    run_evaluate(cfg);
    ++run;
  }
  for (int k = 0; k < 3; ++k) {
    EXPECT_FALSE(models[0][k].empty());
    EXPECT_EQ(models[0][k], models[1][k]) << k;
  }
  for (const char* name : {"labels.csv", "detections_ml.csv", "detections_rule.csv", "votes_ml.csv",
                           "train_report_detection.csv"}) {
    EXPECT_EQ(read_file(a / name), read_file(b / name)) << name;
  }
}

}  // namespace
}  // namespace slowdown
