#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "syncap/world.hpp"

namespace syncap::splits {

enum class PairKind { adjective_noun, verb_noun };

enum class PairCategory {
  color_animate,
  color_inanimate,
  size_animate,
  size_inanimate,
  verb_transitive,
  verb_intransitive,
};

std::string_view to_string(PairCategory c);

/// A held-out (modifier-or-verb, noun) combination, e.g. "black cat" or
/// "eat man" (the noun is the agent of the verb).
struct ConceptPair {
  std::string dependent;
  std::string noun;
  PairKind kind = PairKind::adjective_noun;
  PairCategory category = PairCategory::color_animate;

  std::string label() const { return dependent + " " + noun; }
  bool operator==(const ConceptPair&) const = default;
};

/// Derives kind and category from the lexicon; throws ConfigError for lemmas
/// outside it.
ConceptPair make_pair(const std::string& dependent, const std::string& noun,
                      const world::Lexicon& lexicon);

struct SplitSpec {
  std::vector<std::vector<ConceptPair>> heldout_sets;
  int active_set = 0;

  /// The four six-pair held-out sets of the compositional captioning benchmark.
  static SplitSpec default_spec(const world::Lexicon& lexicon);
  const std::vector<ConceptPair>& active() const;
  /// Throws ConfigError if a pair appears in two sets or active_set is out of range.
  void validate() const;
};

struct SplitRatios {
  double train = 0.8;
  double val = 0.1;
  double test = 0.1;

  void validate() const;
};

struct DatasetSplit {
  std::vector<std::int64_t> train, val, test;
  SplitSpec spec;
  SplitRatios ratios;
  std::uint64_t seed = 0;
  std::vector<std::string> warnings;
};

/// True iff the reference realizes the pair syntactically: an `amod` arc from
/// the adjective to the noun, or for verbs an `acl` arc from the verb to the
/// noun or an `nsubj` arc from the noun to the verb. Tokens are compared by
/// lemma.
bool pair_occurs(const world::Reference& reference, const ConceptPair& pair,
                 const world::Lexicon& lexicon);

/// Scenes with at least one reference realizing an active held-out pair go to
/// val/test (val:test ratio renormalized); everything else goes to train.
DatasetSplit build_splits(const std::vector<world::CorpusEntry>& corpus,
                          const SplitSpec& spec, const SplitRatios& ratios,
                          std::uint64_t seed, const world::Lexicon& lexicon);

/// Header record (spec, ratios, seed, warnings) followed by one
/// {"scene", "partition"} record per scene.
void write_split_manifest(const std::filesystem::path& path, const DatasetSplit& split);
DatasetSplit read_split_manifest(const std::filesystem::path& path,
                                 const world::Lexicon& lexicon);

}  // namespace syncap::splits
