#include "syncap/ranker.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace syncap::ranker {

std::string_view to_string(Pooling p) {
  switch (p) {
    case Pooling::final: return "final";
    case Pooling::mean: return "mean";
    case Pooling::weight: return "weight";
  }
  return "?";
}

Pooling pooling_from_string(std::string_view s) {
  for (Pooling p : {Pooling::final, Pooling::mean, Pooling::weight})
    if (to_string(p) == s) return p;
  throw ConfigError("unknown pooling mode: " + std::string(s));
}

template <class T>
RankerParams<T> RankerParams<T>::attach(ParamStore<T>& store, int hidden, int feature_dim,
                                        int embed_dim, std::mt19937_64& rng) {
  store.add("rank.sent_proj", hidden, embed_dim, num::Init::fan_in, rng);
  store.add("rank.sent_score", hidden, 1, num::Init::fan_in, rng);
  store.add("rank.img_score", feature_dim, 1, num::Init::fan_in, rng);
  store.add("rank.img_proj", feature_dim, embed_dim, num::Init::fan_in, rng);
  return find(store);
}

template <class T>
RankerParams<T> RankerParams<T>::find(ParamStore<T>& store) {
  RankerParams p;
  p.sent_proj = &store.get("rank.sent_proj");
  p.sent_score = &store.get("rank.sent_score");
  p.img_score = &store.get("rank.img_score");
  p.img_proj = &store.get("rank.img_proj");
  return p;
}

namespace {

// Softmax over rows of x (n x d) scored by w (d x 1), then the convex
// combination of rows: returns 1 x d.
template <class T>
Var<T> soft_pool(Var<T> x, Var<T> w) {
  auto alpha = num::softmax_rows(num::transpose(num::matmul(x, w)));
  return num::matmul(alpha, x);
}

}  // namespace

template <class T>
Var<T> embed_sentence(Var<T> states, Pooling mode, const RankerParams<T>& p) {
  if (states.rows() == 0) throw EmptyInputError("embed_sentence: zero states");
  auto& tape = *states.tape;
  Var<T> pooled;
  switch (mode) {
    case Pooling::final: pooled = num::slice_rows(states, states.rows() - 1, 1); break;
    case Pooling::mean: pooled = num::mean_rows(states); break;
    case Pooling::weight: pooled = soft_pool(states, tape.param(*p.sent_score)); break;
  }
  return num::l2_normalize_rows(num::matmul(pooled, tape.param(*p.sent_proj)));
}

template <class T>
Var<T> embed_image(Var<T> regions, const RankerParams<T>& p) {
  if (regions.rows() == 0) throw EmptyInputError("embed_image: zero regions");
  auto& tape = *regions.tape;
  auto pooled = soft_pool(regions, tape.param(*p.img_score));
  return num::l2_normalize_rows(num::matmul(pooled, tape.param(*p.img_proj)));
}

template <class T>
Var<T> contrastive_loss(Var<T> images, Var<T> sentences, T margin) {
  return num::vse_hardest_loss(images, sentences, margin);
}

template <class T>
Tensor<T> pooling_weights(const Tensor<T>& states, const RankerParams<T>& p) {
  Tape<T> tape(false);
  auto x = tape.borrow(states);
  auto w = tape.borrow(p.sent_score->value);
  return num::softmax_rows(num::transpose(num::matmul(x, w))).value();
}

double cosine(const std::vector<float>& a, const std::vector<float>& b) {
  double dot = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += static_cast<double>(a[i]) * b[i];
    na += static_cast<double>(a[i]) * a[i];
    nb += static_cast<double>(b[i]) * b[i];
  }
  if (na == 0 || nb == 0) return 0.0;
  return dot / std::sqrt(na * nb);
}

namespace {

// Position (0-based) of the first gold item when `gallery` is ranked against `query`.
std::size_t best_gold_rank(const std::vector<float>& query,
                           const std::vector<std::vector<float>>& gallery,
                           const std::function<bool(std::size_t)>& gold) {
  std::vector<double> sim(gallery.size());
  for (std::size_t i = 0; i < gallery.size(); ++i) sim[i] = cosine(query, gallery[i]);
  std::vector<std::size_t> order(gallery.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return sim[a] > sim[b]; });
  for (std::size_t r = 0; r < order.size(); ++r)
    if (gold(order[r])) return r;
  return order.size();
}

}  // namespace

RetrievalRecall retrieval_recall(const std::vector<std::vector<float>>& images,
                                 const std::vector<std::vector<float>>& sentences,
                                 const std::vector<int>& owner, const std::vector<int>& ks) {
  if (owner.size() != sentences.size())
    throw ShapeError("retrieval_recall: one owner per sentence required");
  if (images.empty() || sentences.empty()) throw EmptyInputError("retrieval_recall: empty gallery");
  RetrievalRecall out;
  out.ks = ks;
  out.text.assign(ks.size(), 0.0);
  out.image.assign(ks.size(), 0.0);
  for (std::size_t i = 0; i < images.size(); ++i) {
    const auto r = best_gold_rank(images[i], sentences, [&](std::size_t s) {
      return owner[s] == static_cast<int>(i);
    });
    for (std::size_t k = 0; k < ks.size(); ++k)
      if (r < static_cast<std::size_t>(ks[k])) out.text[k] += 1.0;
  }
  for (std::size_t s = 0; s < sentences.size(); ++s) {
    const auto r = best_gold_rank(sentences[s], images, [&](std::size_t i) {
      return static_cast<int>(i) == owner[s];
    });
    for (std::size_t k = 0; k < ks.size(); ++k)
      if (r < static_cast<std::size_t>(ks[k])) out.image[k] += 1.0;
  }
  for (auto& x : out.text) x /= static_cast<double>(images.size());
  for (auto& x : out.image) x /= static_cast<double>(sentences.size());
  return out;
}

std::vector<RerankResult> rerank(const std::vector<RerankCandidate>& candidates,
                                 const std::vector<float>& image_embedding, double lambda) {
  std::vector<RerankResult> out;
  out.reserve(candidates.size());
  for (const auto& c : candidates) {
    const double sim = cosine(image_embedding, c.embedding);
    const double lp = c.logprob / std::max(c.length, 1);
    out.push_back({c.index, lambda * lp + (1.0 - lambda) * sim, sim});
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const RerankResult& a, const RerankResult& b) { return a.score > b.score; });
  return out;
}

#define SYNCAP_RANKER(T)                                                       \
  template struct RankerParams<T>;                                             \
  template Var<T> embed_sentence(Var<T>, Pooling, const RankerParams<T>&);    \
  template Var<T> embed_image(Var<T>, const RankerParams<T>&);                \
  template Var<T> contrastive_loss(Var<T>, Var<T>, T);                        \
  template Tensor<T> pooling_weights(const Tensor<T>&, const RankerParams<T>&);

SYNCAP_RANKER(float)
SYNCAP_RANKER(double)

}  // namespace syncap::ranker
