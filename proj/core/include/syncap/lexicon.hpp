#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace syncap::world {

enum class Animacy { animate, inanimate };
enum class Transitivity { transitive, intransitive };

struct NounEntry {
  std::string lemma;
  Animacy animacy;
};

struct VerbEntry {
  std::string lemma;
  Transitivity transitivity;
  std::string participle;  // fixed inflection: eat -> eating, lie -> lying
};

/// Word classes the rule-based tagger distinguishes.
enum class WordClass {
  determiner,
  color,
  size,
  noun,
  participle,
  copula,
  relativizer,
  preposition,
  conjunction,
  unknown,
};

/// Closed vocabulary of the synthetic world.
class Lexicon {
 public:
  std::vector<NounEntry> nouns;
  std::vector<std::string> colors;
  std::vector<std::string> sizes;
  std::vector<VerbEntry> verbs;
  std::vector<std::string> determiners;
  std::vector<std::string> prepositions;
  std::vector<std::string> copulas;
  std::vector<std::string> relativizers;
  std::vector<std::string> conjunctions;

  /// Nouns, colors, sizes and verbs of the compositional-captioning concept
  /// vocabulary, plus a small closed set of function words.
  static Lexicon default_lexicon();

  /// Throws ConfigError on empty classes, upper-case lemmas or duplicates.
  void validate() const;

  /// Builds the lookup tables; called by default_lexicon() and must be called
  /// again after editing the public lists.
  void index();

  WordClass classify(std::string_view token) const;
  /// Maps an inflected surface form to its lemma (eating -> eat). Surface forms
  /// that are not inflected return themselves.
  std::string lemma_of(std::string_view token) const;

  std::optional<std::size_t> noun_index(std::string_view lemma) const;
  std::optional<std::size_t> color_index(std::string_view lemma) const;
  std::optional<std::size_t> size_index(std::string_view lemma) const;
  std::optional<std::size_t> verb_index(std::string_view lemma) const;

  const NounEntry& noun(std::string_view lemma) const;
  const VerbEntry& verb(std::string_view lemma) const;

  /// Every surface form the grammar can emit, sorted.
  std::vector<std::string> surface_forms() const;

 private:
  std::unordered_map<std::string, WordClass> classes_;
  std::unordered_map<std::string, std::string> lemmas_;
  std::unordered_map<std::string, std::size_t> noun_ids_, color_ids_, size_ids_,
      verb_ids_;
};

}  // namespace syncap::world
