// Command-line front end: generate, train, detect, evaluate.
//
// Settings are applied in order: built-in defaults, --config file, --set
// overrides, then the dedicated flags (--seed, --threads, --out, ...).

#include <chrono>
#include <cstdio>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "slowdown/error.hpp"
#include "slowdown/pipeline.hpp"

namespace {

using slowdown::PipelineConfig;

struct CommonFlags {
  std::string config_path;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> threads;
  std::string out_dir;
  bool print_config = false;
  unsigned mask = 0;
};

std::string key_listing(unsigned mask) {
  std::ostringstream os;
  os << "\nConfig keys read by this command (--config file or --set key=value):\n";
  for (const auto& k : slowdown::config_keys()) {
    if ((k.commands & mask) == 0) continue;
    os << "  " << k.key;
    if (k.key.size() < 34) os << std::string(34 - k.key.size(), ' ');
    else os << "\n" << std::string(36, ' ');
    os << k.description << '\n';
  }
  return os.str();
}

void add_common(CLI::App* cmd, CommonFlags& flags, unsigned mask) {
  cmd->add_option("--config", flags.config_path, "Config file with key = value lines");
  cmd->add_option("--set", flags.overrides, "Override one config key (key=value); repeatable")
      ->type_name("KEY=VALUE");
  cmd->add_option("--seed", flags.seed, "Global seed (config key: seed)");
  cmd->add_option("--threads", flags.threads, "Worker threads, 0 = all cores (config key: threads)");
  cmd->add_option("--out", flags.out_dir, "Output directory (config key: out.dir)");
  cmd->add_flag("--print-config", flags.print_config,
                "Print the resolved keys this command reads, then exit without running");
  cmd->footer(key_listing(mask));
  flags.mask = mask;
}

PipelineConfig resolve(const CommonFlags& flags) {
  PipelineConfig cfg;
  if (!flags.config_path.empty()) slowdown::apply_config_file(cfg, flags.config_path);
  for (const auto& kv : flags.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos || eq == 0) {
      slowdown::fail(slowdown::ErrorCode::kUsage, "--set expects key=value, got '" + kv + "'");
    }
    slowdown::set_config_value(cfg, kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (flags.seed) cfg.seed = *flags.seed;
  if (flags.threads) cfg.threads = *flags.threads;
  if (!flags.out_dir.empty()) cfg.out_dir = flags.out_dir;
  cfg.validate();
  return cfg;
}

// `key = value` lines of the resolved config, limited to the command's keys.
void print_config(const PipelineConfig& cfg, unsigned mask) {
  std::istringstream dump(slowdown::dump_config(cfg));
  const auto& keys = slowdown::config_keys();
  std::string line;
  for (std::size_t i = 0; std::getline(dump, line) && i < keys.size(); ++i) {
    if (keys[i].commands & mask) std::cout << line << '\n';
  }
}

void log_line(const std::string& msg) {
  using clock = std::chrono::steady_clock;
  static const auto t0 = clock::now();
  const double s = std::chrono::duration<double>(clock::now() - t0).count();
  std::fprintf(stderr, "[%8.1fs] %s\n", s, msg.c_str());
}

constexpr const char* kExitCodes =
    "Exit codes:\n"
    "  0  success\n"
    "  1  unexpected internal error\n"
    "  2  usage error (bad flag, unknown config key, malformed value)\n"
    "  3  I/O error (missing or unwritable file)\n"
    "  4  invalid input data (short or non-uniform series, all gaps, bad corpus)\n"
    "  5  synthetic placement failure or overlapping events\n"
    "  6  dataset problem (a class missing, too few samples, corrupt cache)\n"
    "  7  training diverged (non-finite loss)\n"
    "  8  corrupt or unreadable model file\n"
    "  9  internal contract violation (shape, head or argument mismatch)\n";

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sliding-window slowdown detection for minute-resolution freeway speeds"};
  app.require_subcommand(1);
  app.footer(kExitCodes);

  CommonFlags gen_flags, train_flags, detect_flags, eval_flags;
  std::string detector_name = "ml";
  std::optional<std::int64_t> tolerance;

  auto* gen = app.add_subcommand("generate", "Write a synthetic labeled corpus to <out>");
  add_common(gen, gen_flags, slowdown::kCmdGenerate);

  auto* trn = app.add_subcommand("train", "Train the detection, start and end networks");
  add_common(trn, train_flags, slowdown::kCmdTrain);

  auto* det = app.add_subcommand("detect", "Run a detector over the evaluation segments");
  add_common(det, detect_flags, slowdown::kCmdDetect);
  det->add_option("--detector", detector_name, "Detector to run")
      ->check(CLI::IsMember({"ml", "rule"}))
      ->capture_default_str();

  auto* evl = app.add_subcommand("evaluate", "Score detections_*.csv in <out> against the labels");
  add_common(evl, eval_flags, slowdown::kCmdEvaluate);
  evl->add_option("--tolerance", tolerance, "Headline tolerance in minutes (config key: eval.tolerance)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    for (const auto* flags : {&gen_flags, &train_flags, &detect_flags, &eval_flags}) {
      if (flags->print_config) {
        print_config(resolve(*flags), flags->mask);
        return 0;
      }
    }
    if (gen->parsed()) {
      slowdown::run_generate(resolve(gen_flags), log_line);
    } else if (trn->parsed()) {
      slowdown::run_train(resolve(train_flags), log_line);
    } else if (det->parsed()) {
      slowdown::run_detect(resolve(detect_flags), slowdown::parse_detector_kind(detector_name),
                           nullptr, log_line);
    } else if (evl->parsed()) {
      auto cfg = resolve(eval_flags);
      if (tolerance) {
        cfg.headline_tolerance = *tolerance;
        cfg.validate();
      }
      for (const auto& r : slowdown::run_evaluate(cfg, log_line)) {
        if (r.tolerance != cfg.headline_tolerance) continue;
        std::printf("%s\tTP=%lld\tFN=%lld\tFP=%lld\tPTP=%s\n", r.detector_id.c_str(),
                    static_cast<long long>(r.tp), static_cast<long long>(r.fn),
                    static_cast<long long>(r.fp),
                    r.ptp ? std::to_string(*r.ptp).c_str() : "n/a");
      }
    }
  } catch (const slowdown::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return slowdown::exit_code(e.code());
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
