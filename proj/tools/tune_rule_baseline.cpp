// Grid search for the rule-based comparator on a synthetic validation corpus.
//
// The corpus is generated from the config's gen.* keys with a seed that must
// differ from the one used for evaluation. Candidates are ranked by TP at the
// headline tolerance, then by fewest FP; ties keep the earlier grid point.
// The winning settings are printed as config lines.

#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "slowdown/config.hpp"
#include "slowdown/error.hpp"
#include "slowdown/parallel.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Tune the rule-based baseline on a synthetic validation corpus"};
  std::string config_path;
  std::uint64_t seed = 1001;
  unsigned threads = 0;
  bool verbose = false;
  app.add_option("--config", config_path, "Config file (gen.*, rule.*, eval.tolerance are read)");
  app.add_option("--seed", seed, "Validation corpus seed")->capture_default_str();
  app.add_option("--threads", threads, "Worker threads, 0 = all cores");
  app.add_flag("--verbose", verbose, "Print every grid point");
  CLI11_PARSE(app, argc, argv);

  try {
    slowdown::PipelineConfig cfg;
    if (!config_path.empty()) slowdown::apply_config_file(cfg, config_path);
    cfg.gen.rng_seed = seed;
    const auto corpus = slowdown::generate_corpus(cfg.gen);
    std::vector<std::string> ids;
    for (const auto& s : corpus.series) ids.push_back(s.segment_id);

    std::vector<slowdown::RuleConfig> grid;
    for (double pct : {0.5, 0.7, 0.85, 0.95}) {
      for (double frac : {0.65, 0.7, 0.75, 0.8, 0.85}) {
        for (int smooth : {1, 5, 10, 20}) {
          for (int gap : {0, 15, 30}) {
            slowdown::RuleConfig rc;
            rc.free_flow_percentile = pct;
            rc.threshold_fraction = frac;
            rc.smoothing_window = smooth;
            rc.merge_gap = gap;
            grid.push_back(rc);
          }
        }
      }
    }

    std::vector<slowdown::MetricsReport> scores(grid.size());
    slowdown::parallel_for(grid.size(), threads, [&](std::size_t g) {
      slowdown::EventsBySegment found;
      for (const auto& s : corpus.series) found[s.segment_id] = slowdown::detect_rule_based(s, grid[g]);
      scores[g] = slowdown::evaluate_corpus(corpus.events, found, ids, cfg.headline_tolerance, "rule",
                                            "validation", cfg.match_mode);
    });

    std::size_t best = 0;
    for (std::size_t g = 0; g < grid.size(); ++g) {
      const auto& r = scores[g];
      if (verbose) {
        std::fprintf(stderr, "pct=%.2f frac=%.2f smooth=%lld gap=%lld  TP=%lld FN=%lld FP=%lld\n",
                     grid[g].free_flow_percentile, grid[g].threshold_fraction,
                     static_cast<long long>(grid[g].smoothing_window),
                     static_cast<long long>(grid[g].merge_gap), static_cast<long long>(r.tp),
                     static_cast<long long>(r.fn), static_cast<long long>(r.fp));
      }
      const auto& b = scores[best];
      if (r.tp > b.tp || (r.tp == b.tp && r.fp < b.fp)) best = g;
    }
    const auto& rc = grid[best];
    const auto& r = scores[best];
    std::printf("# validation seed %llu: TP=%lld FN=%lld FP=%lld at %lld min\n",
                static_cast<unsigned long long>(seed), static_cast<long long>(r.tp),
                static_cast<long long>(r.fn), static_cast<long long>(r.fp),
                static_cast<long long>(cfg.headline_tolerance));
    std::printf("rule.free_flow_percentile = %g\nrule.threshold_fraction = %g\n", rc.free_flow_percentile,
                rc.threshold_fraction);
    std::printf("rule.smoothing_window = %lld\nrule.merge_gap = %lld\nrule.min_duration = %lld\n",
                static_cast<long long>(rc.smoothing_window), static_cast<long long>(rc.merge_gap),
                static_cast<long long>(rc.min_duration));
  } catch (const slowdown::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return slowdown::exit_code(e.code());
  }
  return 0;
}
