#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace syncap::harness {

/// Sample summary; sd and the interval are NaN below two values.
struct Stat {
  int n = 0;
  double mean = 0.0;
  double sd = 0.0;
  double ci_lo = 0.0;
  double ci_hi = 0.0;
};

/// Mean, sample standard deviation and a two-sided Student-t interval.
Stat summarize(const std::vector<double>& values, double level = 0.95);

/// Flat view of one metrics.json record. Recalls, tag accuracy,
/// wellformedness and retrieval recalls are scaled to points (x100).
std::map<std::string, double> run_metrics(const std::string& metrics_json);

struct Report {
  std::string config_hash;  // of the first experiment
  std::vector<std::string> cells;    // matrix order
  std::vector<std::string> metrics;  // column order
  std::vector<int> recall_ks;
  /// stats[cell][metric] over every completed (seed, set) run.
  std::map<std::string, std::map<std::string, Stat>> stats;
  /// Paired differences against the standard cell over shared (seed, set).
  std::map<std::string, std::map<std::string, Stat>> deltas;
  /// curves[cell][pair][j]; pair "mean" averages the pairs of each run.
  std::map<std::string, std::map<std::string, std::map<int, Stat>>> curves;
  std::vector<std::string> failed;  // run ids that did not complete
  int runs = 0;
};

/// Aggregates completed runs of one or more experiment directories. The
/// directories must share their config apart from seeds and held-out sets,
/// and may not repeat a run; otherwise ConfigError.
Report aggregate(const std::vector<std::filesystem::path>& experiment_dirs);

std::string render_table(const Report& r);
std::string render_curves_csv(const Report& r);
std::string render_summary_json(const Report& r);

/// report.txt, curves.csv and summary.json under `out_dir`.
void write_report(const Report& r, const std::filesystem::path& out_dir);

}  // namespace syncap::harness
