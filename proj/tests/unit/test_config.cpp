#include <gtest/gtest.h>

#include <fstream>
#include <set>

#include "slowdown/config.hpp"
#include "support.hpp"

namespace slowdown {
namespace {

using testing::code_of;

TEST(Config, KeysAreUniqueAndTagged) {
  std::set<std::string> seen;
  for (const auto& k : config_keys()) {
    EXPECT_TRUE(seen.insert(k.key).second) << k.key;
    EXPECT_FALSE(k.description.empty()) << k.key;
    EXPECT_NE(k.commands & kCmdAll, 0U) << k.key;
  }
  for (const char* key : {"seed", "threads", "out.dir", "gen.n_segments", "train.learning_rate",
                          "detect.stride", "rule.free_flow_percentile", "eval.tolerance"}) {
    EXPECT_TRUE(seen.count(key)) << key;
  }
}

TEST(Config, SetValues) {
  PipelineConfig cfg;
  set_config_value(cfg, "seed", "42");
  set_config_value(cfg, "gen.n_segments", "7");
  set_config_value(cfg, "train.learning_rate", "0.125");
  set_config_value(cfg, "corpus.eval_scope", "all");
  EXPECT_EQ(cfg.seed, 42U);
  EXPECT_EQ(cfg.gen.n_segments, 7);
  EXPECT_DOUBLE_EQ(cfg.train.learning_rate, 0.125);
  EXPECT_EQ(cfg.eval_scope, EvalScope::kAll);
}

TEST(Config, BadInputIsUsageError) {
  PipelineConfig cfg;
  EXPECT_EQ(code_of([&] { set_config_value(cfg, "no.such.key", "1"); }), ErrorCode::kUsage);
  EXPECT_EQ(code_of([&] { set_config_value(cfg, "seed", "abc"); }), ErrorCode::kUsage);
  EXPECT_EQ(code_of([&] { set_config_value(cfg, "train.learning_rate", "0.1x"); }), ErrorCode::kUsage);
  EXPECT_EQ(code_of([&] { set_config_value(cfg, "corpus.eval_scope", "most"); }), ErrorCode::kUsage);
}

TEST(Config, FileParsing) {
  testing::TempDir dir("cfg");
  {
    std::ofstream f(dir / "a.conf");
    f << "# comment\n\n  seed = 9   # trailing\ngen.hours_per_segment=12\n";
  }
  PipelineConfig cfg;
  apply_config_file(cfg, dir / "a.conf");
  EXPECT_EQ(cfg.seed, 9U);
  EXPECT_DOUBLE_EQ(cfg.gen.hours_per_segment, 12.0);

  {
    std::ofstream f(dir / "bad.conf");
    f << "seed 9\n";
  }
  EXPECT_EQ(code_of([&] { apply_config_file(cfg, dir / "bad.conf"); }), ErrorCode::kUsage);
  EXPECT_EQ(code_of([&] { apply_config_file(cfg, dir / "missing.conf"); }), ErrorCode::kIo);
}

TEST(Config, DumpRoundTrips) {
  PipelineConfig cfg;
  set_config_value(cfg, "seed", "77");
  set_config_value(cfg, "train.learning_rate", "0.0123456789");
  set_config_value(cfg, "rule.merge_gap", "12");
  const std::string text = dump_config(cfg);
  testing::TempDir dir("cfg");
  {
    std::ofstream f(dir / "d.conf");
    f << text;
  }
  PipelineConfig back;
  apply_config_file(back, dir / "d.conf");
  EXPECT_EQ(dump_config(back), text);
  EXPECT_DOUBLE_EQ(back.train.learning_rate, 0.0123456789);
}

TEST(Config, StageSeeds) {
  PipelineConfig a, b;
  b.seed = 2;
  EXPECT_EQ(a.stage_seed("split"), a.stage_seed("split"));
  EXPECT_NE(a.stage_seed("split"), a.stage_seed("balance"));
  EXPECT_NE(a.stage_seed("split"), b.stage_seed("split"));
}

TEST(Config, Validate) {
  PipelineConfig cfg;
  EXPECT_NO_THROW(cfg.validate());
  cfg.tolerances = {30, 10};
  EXPECT_THROW(cfg.validate(), Error);
}

}  // namespace
}  // namespace slowdown
