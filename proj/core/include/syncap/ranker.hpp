#pragma once

#include <functional>
#include <random>
#include <string_view>
#include <vector>

#include "syncap/ops.hpp"

namespace syncap::ranker {

using num::Param;
using num::ParamStore;
using num::Tape;
using num::Tensor;
using num::Var;

enum class Pooling { final, mean, weight };

std::string_view to_string(Pooling p);
Pooling pooling_from_string(std::string_view s);

/// Joint-embedding weights, stored in the captioner's parameter store under
/// the "rank." prefix.
template <class T>
struct RankerParams {
  Param<T>* sent_proj = nullptr;   // hidden x embed
  Param<T>* sent_score = nullptr;  // hidden x 1, pooling scorer
  Param<T>* img_score = nullptr;   // feature x 1, region scorer
  Param<T>* img_proj = nullptr;    // feature x embed

  static RankerParams attach(ParamStore<T>& store, int hidden, int feature_dim, int embed_dim,
                             std::mt19937_64& rng);
  static RankerParams find(ParamStore<T>& store);
  int embed_dim() const { return sent_proj->value.cols; }
};

/// Unit-norm 1 x embed sentence vector from T x hidden decoder states.
/// Throws EmptyInputError for T = 0.
template <class T>
Var<T> embed_sentence(Var<T> states, Pooling mode, const RankerParams<T>& p);

/// Unit-norm 1 x embed image vector from R x feature region rows.
template <class T>
Var<T> embed_image(Var<T> regions, const RankerParams<T>& p);

/// Sum of the two hardest-negative hinge terms over the N matched rows.
template <class T>
Var<T> contrastive_loss(Var<T> images, Var<T> sentences, T margin);

/// Pooling weights of weight mode, for inspection (1 x T, sums to one).
template <class T>
Tensor<T> pooling_weights(const Tensor<T>& states, const RankerParams<T>& p);

struct RetrievalRecall {
  std::vector<int> ks;
  std::vector<double> text;   // image query, sentence gallery
  std::vector<double> image;  // sentence query, image gallery
};

/// Cosine-similarity retrieval. `owner[s]` is the image of sentence s. A text
/// query succeeds when any of its sentences ranks in the top K; ranking sorts
/// by similarity descending with ties in index order.
RetrievalRecall retrieval_recall(const std::vector<std::vector<float>>& images,
                                 const std::vector<std::vector<float>>& sentences,
                                 const std::vector<int>& owner, const std::vector<int>& ks);

struct RerankCandidate {
  int index = 0;  // position in the input list
  double logprob = 0.0;
  int length = 1;
  std::vector<float> embedding;
};

struct RerankResult {
  int index = 0;
  double score = 0.0;
  double similarity = 0.0;
};

/// score = lambda * logprob / length + (1 - lambda) * cos(image, sentence),
/// sorted descending (stable).
std::vector<RerankResult> rerank(const std::vector<RerankCandidate>& candidates,
                                 const std::vector<float>& image_embedding, double lambda = 0.0);

double cosine(const std::vector<float>& a, const std::vector<float>& b);

}  // namespace syncap::ranker
