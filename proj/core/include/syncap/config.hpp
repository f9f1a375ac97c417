#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "syncap/captioner.hpp"
#include "syncap/decode.hpp"
#include "syncap/planner.hpp"
#include "syncap/splits.hpp"
#include "syncap/trainer.hpp"
#include "syncap/world.hpp"

namespace syncap::harness {

/// Flat "key = value" text; '#' starts a comment. Keys are unique.
class KeyValues {
 public:
  static KeyValues parse(const std::string& text);
  static KeyValues load(const std::filesystem::path& path);

  bool has(const std::string& key) const { return values_.count(key) > 0; }
  const std::string& get(const std::string& key) const;
  void set(const std::string& key, std::string value) { values_[key] = std::move(value); }
  const std::map<std::string, std::string>& entries() const { return values_; }
  /// Sorted "key = value" lines.
  std::string dump() const;

 private:
  std::map<std::string, std::string> values_;
};

enum class EvalPartition { val, test, heldout };

std::string_view to_string(EvalPartition p);
EvalPartition eval_partition_from_string(std::string_view s);

/// One (approach, tag set) combination of the experiment matrix.
struct Cell {
  planner::Approach approach = planner::Approach::standard;
  world::Tagset tagset = world::Tagset::none;

  std::string label() const;  // e.g. "interleave-pos"
  bool operator==(const Cell&) const = default;
};

struct ExperimentConfig {
  // world
  int scenes = 3000;
  std::uint64_t world_seed = 11;
  world::WorldConfig world;
  // splits
  std::vector<int> heldout_sets = {0};
  std::uint64_t split_seed = 11;
  splits::SplitRatios ratios;
  // matrix
  std::vector<planner::Approach> approaches = {planner::Approach::standard,
                                               planner::Approach::interleave};
  std::vector<world::Tagset> tagsets = {world::Tagset::pos};
  std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};
  // model
  cap::ModelConfig model;
  // training
  train::TrainConfig train = [] {
    train::TrainConfig t;
    t.adam.lr = 1e-2;
    return t;
  }();
  // decoding and evaluation
  cap::DecodeOptions decode;
  /// 0 picks 20 for word-only streams and 40 when tags are generated.
  int max_len = 0;
  EvalPartition eval_partition = EvalPartition::test;
  std::vector<int> recall_ks = {1, 5};
  /// Fresh scenes for image-sentence retrieval (needs the ranker); 0 disables.
  int retrieval_gallery = 0;
  std::vector<int> retrieval_ks = {1, 5, 10};

  /// Defaults overridden by every key present; unknown keys are errors.
  static ExperimentConfig from_kv(const KeyValues& kv);
  static ExperimentConfig load(const std::filesystem::path& path);
  /// Every field, so that from_kv(to_kv()) round-trips.
  KeyValues to_kv() const;
  /// Throws ConfigError with the offending key.
  void validate() const;
  /// Hex digest of the canonical key-value text.
  std::string hash() const;

  /// Approaches x tag sets, standard collapsed to a single tag-free cell.
  std::vector<Cell> cells() const;
};

/// 64-bit FNV-1a, rendered as 16 hex digits.
std::string content_hash(const std::string& text);

}  // namespace syncap::harness
