#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "syncap/errors.hpp"
#include "syncap/planner.hpp"
#include "syncap/splits.hpp"
#include "syncap/world.hpp"

namespace syncap::eval {

using Tokens = std::vector<std::string>;

/// A generated caption after tag stripping, with the oracle annotation of its
/// tokens (tags and arcs) used for pair matching and tag accuracy.
struct GeneratedCaption {
  Tokens tokens;
  Tokens tags;  // generated tags, empty for word-only streams
  bool wellformed = true;
  world::Reference annotation;
};

GeneratedCaption make_caption(Tokens tokens, Tokens tags, bool wellformed,
                              const world::Lexicon& lexicon);

struct SceneGenerations {
  std::int64_t scene = 0;
  std::vector<GeneratedCaption> captions;  // best first
};

using GenerationSet = std::vector<SceneGenerations>;

/// Fraction of scenes with a pair occurrence among their first K captions.
/// Throws EmptyInputError for an empty set.
double recall_at_k(const GenerationSet& gens, const splits::ConceptPair& pair, int k,
                   const world::Lexicon& lexicon);

/// Number of the references that realize the pair.
int pair_importance(const std::vector<world::Reference>& refs, const splits::ConceptPair& pair,
                    const world::Lexicon& lexicon);

/// Scenes of `scene_ids` whose references realize the pair at least once.
std::vector<std::int64_t> evaluation_subset(const std::vector<world::CorpusEntry>& corpus,
                                            const std::vector<std::int64_t>& scene_ids,
                                            const splits::ConceptPair& pair,
                                            const world::Lexicon& lexicon);

struct PairRecall {
  splits::ConceptPair pair;
  double recall = 0.0;
};

/// Unweighted mean recall per category; categories without pairs are absent.
std::map<splits::PairCategory, double> category_breakdown(const std::vector<PairRecall>& recalls);

/// (j, recall) for j = 1..n_refs over the scenes whose importance is at least j.
/// Levels without scenes are skipped.
std::vector<std::pair<int, double>> min_importance_curve(
    const GenerationSet& gens, const std::map<std::int64_t, const world::CorpusEntry*>& scenes,
    const splits::ConceptPair& pair, int k, int n_refs, const world::Lexicon& lexicon);

/// Fraction of captions whose generated tag sequence equals the oracle tags
/// of their own tokens. <idle> streams compare against all-<idle>. Throws
/// NotApplicableError for word-only approaches.
double tag_accuracy(const std::vector<const GeneratedCaption*>& captions,
                    planner::Approach approach, world::Tagset tagset);

/// Corpus BLEU-n (x100) with add-one smoothing of the n > 1 precisions and
/// the closest-reference brevity penalty. Empty input gives 0.
double bleu(const std::vector<Tokens>& hypotheses, const std::vector<std::vector<Tokens>>& refs,
            int max_n = 4);

struct Diversity {
  double asl = 0.0;
  int types = 0;
  double ttr1 = 0.0;
  double ttr2 = 0.0;
  double novel = 0.0;
  double coverage = 0.0;
  double local5 = 0.0;
};

inline constexpr int kTtrSegment = 100;

/// `top1` holds one caption per scene, `topk` the scene's first five, and
/// `references` its gold references, all aligned by scene.
Diversity diversity_metrics(const std::vector<Tokens>& top1,
                            const std::vector<std::vector<Tokens>>& topk,
                            const std::vector<Tokens>& train_captions,
                            const std::vector<std::vector<world::Reference>>& references,
                            const world::Lexicon& lexicon);

/// Content words (NOUN, VERB, ADJ under the oracle POS tags).
std::vector<std::string> content_words(const world::Reference& annotated);

}  // namespace syncap::eval
