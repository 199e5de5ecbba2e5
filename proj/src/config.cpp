#include "slowdown/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <sstream>

#include "slowdown/csv_io.hpp"
#include "slowdown/error.hpp"
#include "slowdown/random.hpp"

namespace slowdown {

namespace {

struct KeyEntry {
  ConfigKeyInfo info;
  std::function<void(PipelineConfig&, const std::string&)> set;
  std::function<std::string(const PipelineConfig&)> get;
};

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const char* expected) {
  fail(ErrorCode::kUsage, "config key '" + key + "': '" + value + "' is not " + expected);
}

double parse_double(const std::string& key, const std::string& value) {
  char* end = nullptr;
  const double v = std::strtod(value.c_str(), &end);
  if (value.empty() || end != value.c_str() + value.size() || !std::isfinite(v)) {
    bad_value(key, value, "a finite number");
  }
  return v;
}

std::int64_t parse_int(const std::string& key, const std::string& value) {
  std::int64_t v = 0;
  const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
  if (value.empty() || ec != std::errc() || ptr != value.data() + value.size()) {
    bad_value(key, value, "an integer");
  }
  return v;
}

std::uint64_t parse_uint(const std::string& key, const std::string& value) {
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
  if (value.empty() || ec != std::errc() || ptr != value.data() + value.size()) {
    bad_value(key, value, "a non-negative integer");
  }
  return v;
}

std::string fmt_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

template <typename Member>
KeyEntry real(std::string key, std::string desc, unsigned cmds, Member member) {
  return {{key, std::move(desc), cmds},
          [key, member](PipelineConfig& c, const std::string& v) { member(c) = parse_double(key, v); },
          [member](const PipelineConfig& c) { return fmt_double(member(const_cast<PipelineConfig&>(c))); }};
}

template <typename Member>
KeyEntry integer(std::string key, std::string desc, unsigned cmds, Member member) {
  return {{key, std::move(desc), cmds},
          [key, member](PipelineConfig& c, const std::string& v) {
            using T = std::remove_reference_t<decltype(member(c))>;
            member(c) = static_cast<T>(parse_int(key, v));
          },
          [member](const PipelineConfig& c) {
            return std::to_string(member(const_cast<PipelineConfig&>(c)));
          }};
}

std::vector<Minute> parse_tolerances(const std::string& key, const std::string& value) {
  std::vector<Minute> out;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_int(key, trim(item)));
  if (out.empty()) bad_value(key, value, "a comma-separated list of minutes");
  return out;
}

const std::vector<KeyEntry>& entries() {
  using C = PipelineConfig;
  constexpr unsigned G = kCmdGenerate, T = kCmdTrain, D = kCmdDetect, E = kCmdEvaluate;
  static const std::vector<KeyEntry> table = [] {
    std::vector<KeyEntry> t;
    t.push_back({{"seed", "global seed; every stage seed derives from it", kCmdAll},
                 [](C& c, const std::string& v) { c.seed = parse_uint("seed", v); },
                 [](const C& c) { return std::to_string(c.seed); }});
    t.push_back(integer("threads", "worker threads, 0 = all cores", T | D,
                        [](C& c) -> unsigned& { return c.threads; }));
    t.push_back({{"out.dir", "output directory", kCmdAll},
                 [](C& c, const std::string& v) { c.out_dir = v; },
                 [](const C& c) { return c.out_dir.string(); }});
    t.push_back({{"data.dir", "corpus directory (speeds/ + labels.csv); default out.dir", T | D | E},
                 [](C& c, const std::string& v) { c.data_dir = v; },
                 [](const C& c) { return c.data_dir.string(); }});
    t.push_back({{"models.dir", "model directory; default <out.dir>/models", T | D},
                 [](C& c, const std::string& v) { c.models_dir = v; },
                 [](const C& c) { return c.models_dir.string(); }});
    t.push_back(integer("corpus.holdout_segments", "trailing segments (by id) kept out of training",
                        T | D | E, [](C& c) -> int& { return c.holdout_segments; }));
    t.push_back({{"corpus.eval_scope", "segments to detect/evaluate: holdout | train | all", D | E},
                 [](C& c, const std::string& v) {
                   if (v == "holdout") c.eval_scope = EvalScope::kHoldout;
                   else if (v == "train") c.eval_scope = EvalScope::kTrain;
                   else if (v == "all") c.eval_scope = EvalScope::kAll;
                   else bad_value("corpus.eval_scope", v, "holdout, train or all");
                 },
                 [](const C& c) {
                   return std::string(c.eval_scope == EvalScope::kHoldout ? "holdout"
                                      : c.eval_scope == EvalScope::kTrain ? "train"
                                                                          : "all");
                 }});

    t.push_back(integer("gen.n_segments", "number of synthetic segments", G,
                        [](C& c) -> int& { return c.gen.n_segments; }));
    t.push_back(real("gen.hours_per_segment", "hours of data per segment", G,
                     [](C& c) -> double& { return c.gen.hours_per_segment; }));
    t.push_back(real("gen.free_flow_mean", "mean free-flow speed (mph)", G,
                     [](C& c) -> double& { return c.gen.free_flow_mean; }));
    t.push_back(real("gen.free_flow_spread", "per-segment free-flow offset range (+- mph)", G,
                     [](C& c) -> double& { return c.gen.free_flow_spread; }));
    t.push_back(real("gen.free_flow_daily_amplitude", "24 h sinusoid amplitude (mph)", G,
                     [](C& c) -> double& { return c.gen.free_flow_daily_amplitude; }));
    t.push_back(real("gen.noise_std", "white-noise standard deviation (mph)", G,
                     [](C& c) -> double& { return c.gen.noise_std; }));
    t.push_back(real("gen.events_per_1000h", "labeled slowdowns per 1000 hours", G,
                     [](C& c) -> double& { return c.gen.events_per_1000h; }));
    t.push_back(real("gen.min_drop", "slowdown drop lower bound (mph, >= 15)", G,
                     [](C& c) -> double& { return c.gen.drop_range.lo; }));
    t.push_back(real("gen.max_drop", "slowdown drop upper bound (mph)", G,
                     [](C& c) -> double& { return c.gen.drop_range.hi; }));
    t.push_back(real("gen.min_duration", "slowdown duration lower bound (min, >= 60)", G,
                     [](C& c) -> double& { return c.gen.duration_range.lo; }));
    t.push_back(real("gen.max_duration", "slowdown duration upper bound (min, <= 360)", G,
                     [](C& c) -> double& { return c.gen.duration_range.hi; }));
    t.push_back(real("gen.min_ramp", "onset/recovery ramp lower bound (min)", G,
                     [](C& c) -> double& { return c.gen.ramp_minutes_range.lo; }));
    t.push_back(real("gen.max_ramp", "onset/recovery ramp upper bound (min)", G,
                     [](C& c) -> double& { return c.gen.ramp_minutes_range.hi; }));
    t.push_back(real("gen.minor_per_1000h", "unlabeled shallow dips per 1000 hours", G,
                     [](C& c) -> double& { return c.gen.minor_per_1000h; }));
    t.push_back(real("gen.minor_min_drop", "shallow dip drop lower bound (mph)", G,
                     [](C& c) -> double& { return c.gen.minor_drop_range.lo; }));
    t.push_back(real("gen.minor_max_drop", "shallow dip drop upper bound (mph)", G,
                     [](C& c) -> double& { return c.gen.minor_drop_range.hi; }));
    t.push_back(real("gen.minor_min_duration", "shallow dip duration lower bound (min)", G,
                     [](C& c) -> double& { return c.gen.minor_duration_range.lo; }));
    t.push_back(real("gen.minor_max_duration", "shallow dip duration upper bound (min)", G,
                     [](C& c) -> double& { return c.gen.minor_duration_range.hi; }));
    t.push_back(real("gen.brief_per_1000h", "unlabeled short deep dips per 1000 hours", G,
                     [](C& c) -> double& { return c.gen.brief_per_1000h; }));
    t.push_back(real("gen.brief_min_drop", "short dip drop lower bound (mph)", G,
                     [](C& c) -> double& { return c.gen.brief_drop_range.lo; }));
    t.push_back(real("gen.brief_max_drop", "short dip drop upper bound (mph)", G,
                     [](C& c) -> double& { return c.gen.brief_drop_range.hi; }));
    t.push_back(real("gen.brief_min_duration", "short dip duration lower bound (min)", G,
                     [](C& c) -> double& { return c.gen.brief_duration_range.lo; }));
    t.push_back(real("gen.brief_max_duration", "short dip duration upper bound (min)", G,
                     [](C& c) -> double& { return c.gen.brief_duration_range.hi; }));

    t.push_back(real("norm.v_max", "speed scale mapped to 1.0 (mph)", T | D,
                     [](C& c) -> double& { return c.norm.v_max; }));
    t.push_back(real("window.balance_tolerance", "allowed negative excess over 1:1", T,
                     [](C& c) -> double& { return c.balance_tolerance; }));
    t.push_back(real("window.train_fraction", "share of windows used for training", T,
                     [](C& c) -> double& { return c.train_fraction; }));

    for (const auto& [prefix, pick] :
         std::vector<std::pair<std::string, std::function<TrainConfig&(C&)>>>{
             {"train.", [](C& c) -> TrainConfig& { return c.train; }},
             {"train.regressor.", [](C& c) -> TrainConfig& { return c.train_regressor; }}}) {
      const std::string who = prefix == "train." ? "detection network" : "start/end networks";
      t.push_back(integer(prefix + "epochs", "epochs, " + who, T,
                          [pick](C& c) -> int& { return pick(c).epochs; }));
      t.push_back(integer(prefix + "batch_size", "minibatch size, " + who, T,
                          [pick](C& c) -> int& { return pick(c).batch_size; }));
      t.push_back(real(prefix + "dropout_rate", "hidden-unit dropout rate, " + who, T,
                       [pick](C& c) -> double& { return pick(c).dropout_rate; }));
      t.push_back(real(prefix + "learning_rate", "SGD step size, " + who, T,
                       [pick](C& c) -> double& { return pick(c).learning_rate; }));
      t.push_back({{prefix + "lr_schedule", "constant | step_decay, " + who, T},
                   [pick, key = prefix + "lr_schedule"](C& c, const std::string& v) {
                     if (v == "constant") pick(c).lr_schedule = LrSchedule::kConstant;
                     else if (v == "step_decay") pick(c).lr_schedule = LrSchedule::kStepDecay;
                     else bad_value(key, v, "constant or step_decay");
                   },
                   [pick](const C& c) {
                     return std::string(pick(const_cast<C&>(c)).lr_schedule == LrSchedule::kConstant
                                            ? "constant"
                                            : "step_decay");
                   }});
      t.push_back(real(prefix + "decay_factor", "step-decay multiplier, " + who, T,
                       [pick](C& c) -> double& { return pick(c).decay_factor; }));
      t.push_back(integer(prefix + "decay_every", "epochs between decays, " + who, T,
                          [pick](C& c) -> int& { return pick(c).decay_every; }));
    }

    t.push_back(integer("detect.stride", "sliding-window step (min)", D,
                        [](C& c) -> int& { return c.detector.stride; }));
    t.push_back(real("detect.threshold", "p(sd_included) needed to vote", D,
                     [](C& c) -> double& { return c.detector.detection_threshold; }));
    t.push_back(integer("detect.vote_bucket", "vote aggregation width (min)", D,
                        [](C& c) -> int& { return c.detector.vote_bucket; }));
    t.push_back(integer("detect.min_votes", "bucket votes needed for a peak", D,
                        [](C& c) -> std::int64_t& { return c.detector.min_votes; }));
    t.push_back(integer("detect.min_duration", "shortest emitted event (min)", D,
                        [](C& c) -> Minute& { return c.detector.min_duration; }));
    t.push_back(integer("detect.max_duration", "longest emitted event (min)", D,
                        [](C& c) -> Minute& { return c.detector.max_duration; }));

    t.push_back(real("rule.free_flow_percentile", "quantile taken as free-flow speed", D,
                     [](C& c) -> double& { return c.rule.free_flow_percentile; }));
    t.push_back(real("rule.threshold_fraction", "fraction of free flow that flags congestion", D,
                     [](C& c) -> double& { return c.rule.threshold_fraction; }));
    t.push_back(integer("rule.min_duration", "shortest rule-based event (min)", D,
                        [](C& c) -> Minute& { return c.rule.min_duration; }));
    t.push_back(integer("rule.merge_gap", "runs closer than this are merged (min)", D,
                        [](C& c) -> Minute& { return c.rule.merge_gap; }));
    t.push_back(integer("rule.smoothing_window", "centered moving-average width (min)", D,
                        [](C& c) -> int& { return c.rule.smoothing_window; }));

    t.push_back(integer("eval.tolerance", "headline matching tolerance (min)", E,
                        [](C& c) -> Minute& { return c.headline_tolerance; }));
    t.push_back({{"eval.tolerances", "comma-separated tolerance sweep (min)", E},
                 [](C& c, const std::string& v) { c.tolerances = parse_tolerances("eval.tolerances", v); },
                 [](const C& c) {
                   std::string s;
                   for (std::size_t i = 0; i < c.tolerances.size(); ++i) {
                     s += (i ? "," : "") + std::to_string(c.tolerances[i]);
                   }
                   return s;
                 }});
    t.push_back({{"eval.match_mode", "conjunctive | disjunctive endpoint matching", E},
                 [](C& c, const std::string& v) {
                   if (v == "conjunctive") c.match_mode = MatchMode::kConjunctive;
                   else if (v == "disjunctive") c.match_mode = MatchMode::kDisjunctive;
                   else bad_value("eval.match_mode", v, "conjunctive or disjunctive");
                 },
                 [](const C& c) {
                   return std::string(c.match_mode == MatchMode::kConjunctive ? "conjunctive"
                                                                              : "disjunctive");
                 }});
    return t;
  }();
  return table;
}

}  // namespace

void PipelineConfig::validate() const {
  if (holdout_segments < 0) fail(ErrorCode::kUsage, "corpus.holdout_segments must be >= 0");
  gen.validate();
  norm.check();
  if (!(balance_tolerance >= 0.0)) fail(ErrorCode::kUsage, "window.balance_tolerance must be >= 0");
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    fail(ErrorCode::kUsage, "window.train_fraction must be in (0, 1)");
  }
  train.validate();
  train_regressor.validate();
  detector.validate();
  rule.validate();
  if (headline_tolerance < 0) fail(ErrorCode::kUsage, "eval.tolerance must be >= 0");
  if (!std::is_sorted(tolerances.begin(), tolerances.end()) || tolerances.front() < 0) {
    fail(ErrorCode::kUsage, "eval.tolerances must be ascending and >= 0");
  }
}

std::uint64_t PipelineConfig::stage_seed(const std::string& stage) const {
  // FNV-1a of the stage name, mixed with the global seed.
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const char ch : stage) {
    h ^= static_cast<unsigned char>(ch);
    h *= 0x100000001b3ULL;
  }
  return derive_seed(seed, h);
}

const std::vector<ConfigKeyInfo>& config_keys() {
  static const std::vector<ConfigKeyInfo> keys = [] {
    std::vector<ConfigKeyInfo> out;
    for (const auto& e : entries()) out.push_back(e.info);
    return out;
  }();
  return keys;
}

void set_config_value(PipelineConfig& cfg, const std::string& key, const std::string& value) {
  for (const auto& e : entries()) {
    if (e.info.key == key) {
      e.set(cfg, value);
      return;
    }
  }
  fail(ErrorCode::kUsage, "unknown config key '" + key + "'");
}

void apply_config_file(PipelineConfig& cfg, const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kIo, "cannot open config '" + path.string() + "'");
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const std::string text = trim(line);
    if (text.empty()) continue;
    const auto eq = text.find('=');
    if (eq == std::string::npos) {
      fail(ErrorCode::kUsage, path.string() + ":" + std::to_string(line_no) + ": expected key = value");
    }
    set_config_value(cfg, trim(text.substr(0, eq)), trim(text.substr(eq + 1)));
  }
}

std::string dump_config(const PipelineConfig& cfg) {
  std::string out;
  for (const auto& e : entries()) out += e.info.key + " = " + e.get(cfg) + "\n";
  return out;
}

}  // namespace slowdown
