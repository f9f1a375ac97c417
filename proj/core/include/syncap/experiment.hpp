#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "syncap/config.hpp"
#include "syncap/decode.hpp"
#include "syncap/splits.hpp"

namespace syncap::harness {

/// Version string recorded in manifests ("git describe" when available).
std::string version_string();

/// One trained and evaluated (cell, seed, held-out set) unit of work.
struct RunRecord {
  std::string id;  // "<cell>/seed<S>/set<N>"
  Cell cell;
  std::uint64_t seed = 0;
  int heldout_set = 0;
  std::string status;  // "done" or "failed"
  std::string failed_stage;
  std::string error;
  std::string checkpoint;  // paths relative to the experiment directory
  std::string decode;
  std::string metrics;
  std::map<std::string, double> timings;  // seconds per stage
};

struct RunManifest {
  std::string config_hash;
  std::string version;
  std::map<std::string, double> timings;  // shared stages
  std::vector<RunRecord> runs;
  std::vector<std::string> warnings;

  const RunRecord* find(const std::string& id) const;
  std::string to_json() const;
  static RunManifest from_json(const std::string& text);
  static RunManifest load(const std::filesystem::path& dir);
  /// Writes manifest.json through a temporary file and a rename.
  void save(const std::filesystem::path& dir) const;
};

std::string run_id(const Cell& cell, std::uint64_t seed, int heldout_set);

/// Progress callback: a line of free text per finished stage.
using Progress = std::function<void(const std::string&)>;

/// Runs world, splits, training, decoding and evaluation for every
/// (cell, seed, held-out set) into `dir`. Completed runs of an earlier
/// invocation with the same config are kept; a different config in the same
/// directory is a ConfigError. Per-run failures are recorded in the manifest
/// and the remaining runs still execute.
RunManifest run_experiment(const ExperimentConfig& config, const std::filesystem::path& dir,
                           const Progress& progress = {});

/// Scenes evaluated under a partition, in split order.
std::vector<std::int64_t> partition_scenes(const splits::DatasetSplit& split, EvalPartition p);

/// Metrics record (JSON text) for decoded captions, grouped by scene in file
/// order: recall per active pair and K, category table, minimum-importance
/// curves at the largest K, BLEU, tag accuracy, wellformedness, diversity.
std::string evaluate_decodes(const std::vector<cap::DecodedCaption>& decoded,
                             const std::vector<world::CorpusEntry>& corpus,
                             const splits::DatasetSplit& split, planner::Approach approach,
                             world::Tagset tagset, const std::vector<int>& recall_ks,
                             const world::Lexicon& lexicon);

/// Writes `text` to `path` via a sibling temporary file and a rename.
void write_atomic(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

}  // namespace syncap::harness
