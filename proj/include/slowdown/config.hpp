#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "slowdown/detector.hpp"
#include "slowdown/evaluation.hpp"
#include "slowdown/rule_baseline.hpp"
#include "slowdown/synth.hpp"
#include "slowdown/timeseries.hpp"
#include "slowdown/training.hpp"

namespace slowdown {

enum class EvalScope { kHoldout, kTrain, kAll };

// Every setting a pipeline run reads. Seeds for the individual stages are
// derived from `seed` (see PipelineConfig::stage_seed).
struct PipelineConfig {
  std::uint64_t seed = 1;
  unsigned threads = 0;  // 0 = hardware concurrency
  std::filesystem::path out_dir = "run";
  std::filesystem::path data_dir;    // corpus location; defaults to out_dir
  std::filesystem::path models_dir;  // defaults to out_dir/models

  int holdout_segments = 5;
  EvalScope eval_scope = EvalScope::kHoldout;

  GenConfig gen;
  NormalizationSpec norm;
  double balance_tolerance = 0.05;
  double train_fraction = 0.8;
  TrainConfig train;            // detection network
  TrainConfig train_regressor;  // start and end networks
  DetectorConfig detector;
  RuleConfig rule;
  Minute headline_tolerance = 30;
  std::vector<Minute> tolerances = default_tolerance_grid();
  MatchMode match_mode = MatchMode::kConjunctive;

  void validate() const;

  std::filesystem::path corpus_dir() const { return data_dir.empty() ? out_dir : data_dir; }
  std::filesystem::path speeds_dir() const { return corpus_dir() / "speeds"; }
  std::filesystem::path labels_path() const { return corpus_dir() / "labels.csv"; }
  std::filesystem::path model_dir() const { return models_dir.empty() ? out_dir / "models" : models_dir; }

  // Seed for a named stage: "balance", "split", "init.detection", ...
  std::uint64_t stage_seed(const std::string& stage) const;
};

// Which subcommands read a key; used for per-command --help listings.
enum CommandMask : unsigned {
  kCmdGenerate = 1U << 0,
  kCmdTrain = 1U << 1,
  kCmdDetect = 1U << 2,
  kCmdEvaluate = 1U << 3,
  kCmdAll = 0xfU,
};

struct ConfigKeyInfo {
  std::string key;
  std::string description;
  unsigned commands;
};

const std::vector<ConfigKeyInfo>& config_keys();

// Sets one key from its textual value. Unknown keys and malformed values
// raise UsageError.
void set_config_value(PipelineConfig& cfg, const std::string& key, const std::string& value);

// Flat `key = value` file; `#` starts a comment.
void apply_config_file(PipelineConfig& cfg, const std::filesystem::path& path);

// `key = value` line per setting, in config_keys() order.
std::string dump_config(const PipelineConfig& cfg);

}  // namespace slowdown
