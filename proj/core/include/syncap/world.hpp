#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "syncap/lexicon.hpp"

namespace syncap::world {

using Rng = std::mt19937_64;

/// Syntactic annotation schemes. `idle` and `none` carry no gold annotation of
/// their own; they are resolved by the planner.
enum class Tagset { pos, dep, chunk, ccg, idle, none };

std::string_view to_string(Tagset t);
Tagset tagset_from_string(std::string_view s);

struct Action {
  std::string verb;
  std::optional<std::string> object;

  bool operator==(const Action&) const = default;
};

struct Entity {
  std::string category;
  std::optional<std::string> color;
  std::optional<std::string> size;
  std::optional<Action> action;
  Animacy animacy = Animacy::animate;

  bool operator==(const Entity&) const = default;
};

struct Scene {
  std::int64_t id = 0;
  std::vector<Entity> entities;
  std::uint64_t rng_seed = 0;

  bool operator==(const Scene&) const = default;
};

struct DepArc {
  int head = -1;  // -1 for the root
  int dependent = 0;
  std::string label;

  bool operator==(const DepArc&) const = default;
};

/// Attribute of an entity realized in a reference, recorded by the template
/// that produced it. `relation` is amod, acl, nsubj or predicate (copular
/// colour, which is not an attributive modifier).
struct Mention {
  std::string dependent;
  std::string noun;
  std::string relation;

  bool operator==(const Mention&) const = default;
};

struct TagLists {
  std::vector<std::string> pos;
  std::vector<std::string> dep;
  std::vector<std::string> chunk;
  std::vector<std::string> ccg;

  const std::vector<std::string>& get(Tagset t) const;
  std::vector<std::string>& get(Tagset t);
  bool operator==(const TagLists&) const = default;
};

struct Reference {
  std::vector<std::string> tokens;
  TagLists tags;
  std::vector<DepArc> arcs;
  std::string source_template;
  std::vector<Mention> mentions;
};

struct FeatureLayout {
  std::size_t category = 0, color = 0, size = 0, verb = 0, object = 0;
  std::size_t width = 0;

  static FeatureLayout of(const Lexicon& lex);
};

/// Region-style stand-in for image features: one row per entity, then padding.
struct FeatureMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;  // row-major

  double at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
  double& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
};

struct WorldConfig {
  int max_entities = 3;
  std::vector<double> entity_count_weights = {0.5, 0.3, 0.2};
  double color_prob = 0.6;
  double size_prob = 0.4;
  double action_prob = 0.6;
  double mention_prob = 0.6;
  /// Chance that a main clause without a mentioned action predicates its
  /// colour ("a cat is black") instead of using it attributively.
  double copular_prob = 0.25;
  int n_refs = 5;
  int regions = 6;
  double noise_sigma = 0.1;

  void validate() const;
};

Scene generate_scene(Rng& rng, const Lexicon& lexicon, const WorldConfig& config,
                     std::int64_t id = 0);

std::vector<Reference> render_references(const Scene& scene, Rng& rng,
                                         int n_refs, const Lexicon& lexicon,
                                         const WorldConfig& config);

FeatureMatrix scene_features(const Scene& scene, const WorldConfig& config,
                             Rng& rng, const Lexicon& lexicon);

/// Deterministic rule-based annotator for the world grammar: assigns all four
/// tag lists and dependency arcs to an arbitrary token sequence. On grammar
/// output it reproduces the template annotation exactly; on other input it
/// degrades to lexical tags with `dep` arcs to the root.
Reference annotate(const std::vector<std::string>& tokens, const Lexicon& lexicon);

/// Single root, every token headed, no cycles.
bool is_dependency_tree(const std::vector<DepArc>& arcs, std::size_t n_tokens);

struct CorpusEntry {
  Scene scene;
  std::vector<Reference> references;
  FeatureMatrix features;
};

/// Scene `i` is drawn from generators seeded by (seed, i), so entries do not
/// depend on generation order.
std::vector<CorpusEntry> generate_corpus(std::size_t n_scenes, std::uint64_t seed,
                                         const Lexicon& lexicon,
                                         const WorldConfig& config,
                                         std::int64_t first_id = 0);

/// SplitMix64 finalizer, used to derive independent seeds.
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b);

}  // namespace syncap::world
