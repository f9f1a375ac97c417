#pragma once

#include <optional>
#include <string>
#include <vector>

#include "syncap/beam_search.hpp"
#include "syncap/planner.hpp"
#include "syncap/ranker.hpp"

namespace syncap::cap {

struct DecodeOptions {
  BeamConfig beam;
  /// Re-rank all `beam.beam` candidates with the joint embedding, then keep top_k.
  bool rerank = false;
  double rerank_lambda = 0.0;
  ranker::Pooling pooling = ranker::Pooling::weight;
};

/// One line of a decode file.
struct DecodedCaption {
  std::int64_t scene = 0;
  int rank = 0;
  std::vector<int> ids;
  std::vector<std::string> tokens;
  std::vector<std::string> tags;
  double logprob = 0.0;
  bool finished = false;
  bool wellformed = false;
  std::optional<double> rerank_score;
};

template <class T>
std::vector<DecodedCaption> decode_scene(const Captioner<T>& model,
                                         const world::FeatureMatrix& features,
                                         const planner::Vocabulary& vocab,
                                         planner::StreamKind kind, world::Tagset tagset,
                                         const DecodeOptions& options);

/// Sentence embedding of a hypothesis from its recorded states.
template <class T>
std::vector<float> sentence_embedding(const std::vector<std::vector<float>>& states,
                                      ranker::Pooling mode, const ranker::RankerParams<T>& p);

template <class T>
std::vector<float> image_embedding(const world::FeatureMatrix& features,
                                   const ranker::RankerParams<T>& p);

std::string to_json(const DecodedCaption& c);
DecodedCaption decoded_from_json(const std::string& line);

}  // namespace syncap::cap
