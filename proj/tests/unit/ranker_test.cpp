#include "doctest.h"

#include <cmath>
#include <random>

#include "../support/fixtures.hpp"
#include "../support/oracles.hpp"

using namespace syncap;

namespace {

// Position of `target` when `sims` is sorted descending with ties in index order.
int rank_of(const std::vector<double>& sims, int target) {
  int r = 0;
  for (int i = 0; i < static_cast<int>(sims.size()); ++i)
    if (sims[static_cast<std::size_t>(i)] > sims[static_cast<std::size_t>(target)] ||
        (sims[static_cast<std::size_t>(i)] == sims[static_cast<std::size_t>(target)] && i < target))
      ++r;
  return r;
}

std::vector<float> random_vec(std::mt19937_64& g, int d) {
  std::normal_distribution<float> n(0.f, 1.f);
  std::vector<float> v(static_cast<std::size_t>(d));
  for (auto& x : v) x = n(g);
  return v;
}

}  // namespace

TEST_SUITE("ranker") {

TEST_CASE("weight pooling is a distribution over time steps") {
  fixture::TinyWorld w;
  auto m = cap::make_captioner<double>(w.model_config(cap::Backend::recurrent, true));
  fixture::jitter(m->params());
  num::Tape<double> tape(false);
  auto ids = w.examples[0].ids;
  ids.pop_back();
  const auto states = m->sentence_states(tape, ids).value();
  const auto pw = ranker::pooling_weights(states, m->ranker_params());
  CHECK(pw.rows == 1);
  CHECK(pw.cols == states.rows);
  double s = 0;
  for (double x : pw.data) {
    CHECK(x > 0);
    s += x;
  }
  CHECK(s == doctest::Approx(1.0));
}

TEST_CASE("sentence and image embeddings have unit norm; final pooling projects the last state") {
  fixture::TinyWorld w;
  auto m = cap::make_captioner<double>(w.model_config(cap::Backend::recurrent, true));
  fixture::jitter(m->params());
  const auto& rp = m->ranker_params();
  num::Tape<double> tape(false);
  auto ids = w.examples[1].ids;
  ids.pop_back();
  auto states = m->sentence_states(tape, ids);
  for (auto mode : {ranker::Pooling::final, ranker::Pooling::mean, ranker::Pooling::weight}) {
    const auto e = ranker::embed_sentence(states, mode, rp).value();
    double n = 0;
    for (double x : e.data) n += x * x;
    CHECK(n == doctest::Approx(1.0));
  }
  const auto& sv = states.value();
  const auto& proj = rp.sent_proj->value;
  std::vector<double> last(static_cast<std::size_t>(proj.cols), 0.0);
  double norm = 0;
  for (int j = 0; j < proj.cols; ++j) {
    for (int h = 0; h < proj.rows; ++h) last[static_cast<std::size_t>(j)] += sv(sv.rows - 1, h) * proj(h, j);
    norm += last[static_cast<std::size_t>(j)] * last[static_cast<std::size_t>(j)];
  }
  const auto fin = ranker::embed_sentence(states, ranker::Pooling::final, rp).value();
  for (int j = 0; j < proj.cols; ++j)
    CHECK(fin(0, j) == doctest::Approx(last[static_cast<std::size_t>(j)] / std::sqrt(norm)));
  const auto img = ranker::embed_image(tape.constant(cap::feature_tensor<double>(w.corpus[0].features)), rp).value();
  double ni = 0;
  for (double x : img.data) ni += x * x;
  CHECK(ni == doctest::Approx(1.0));
  CHECK_THROWS_AS(ranker::embed_sentence(tape.constant(num::Tensor<double>(0, 8)), ranker::Pooling::mean, rp),
                  EmptyInputError);
}

TEST_CASE("ranker gradients match central differences") {
  fixture::TinyWorld w;
  CHECK(fixture::contrastive_gradcheck().passed);
  CHECK(fixture::pooling_gradcheck(w, ranker::Pooling::weight).passed);
  CHECK(fixture::pooling_gradcheck(w, ranker::Pooling::final).passed);
  CHECK(fixture::pooling_gradcheck(w, ranker::Pooling::mean).passed);
}

TEST_CASE("retrieval recall agrees with brute-force ranking") {
  std::mt19937_64 g(21);
  const std::vector<int> ks{1, 2, 5};
  for (int trial = 0; trial < 200; ++trial) {
    const int n_img = 2 + trial % 9, per = 1 + trial % 3, d = 4;
    std::vector<std::vector<float>> images, sentences;
    std::vector<int> owner;
    for (int i = 0; i < n_img; ++i) {
      images.push_back(random_vec(g, d));
      for (int s = 0; s < per; ++s) {
        // duplicates create exact ties
        if (!sentences.empty() && trial % 4 == 0 && s == 0) sentences.push_back(sentences.back());
        else sentences.push_back(random_vec(g, d));
        owner.push_back(i);
      }
    }
    const auto got = ranker::retrieval_recall(images, sentences, owner, ks);
    for (std::size_t k = 0; k < ks.size(); ++k) {
      int text_hits = 0, image_hits = 0;
      for (int i = 0; i < n_img; ++i) {
        std::vector<double> sims;
        for (const auto& s : sentences) sims.push_back(oracle::cosine(images[static_cast<std::size_t>(i)], s));
        bool hit = false;
        for (int s = 0; s < static_cast<int>(sentences.size()); ++s)
          if (owner[static_cast<std::size_t>(s)] == i && rank_of(sims, s) < ks[k]) hit = true;
        text_hits += hit;
      }
      for (std::size_t s = 0; s < sentences.size(); ++s) {
        std::vector<double> sims;
        for (const auto& im : images) sims.push_back(oracle::cosine(sentences[s], im));
        image_hits += rank_of(sims, owner[s]) < ks[k];
      }
      CHECK(got.text[k] == doctest::Approx(double(text_hits) / n_img));
      CHECK(got.image[k] == doctest::Approx(double(image_hits) / double(sentences.size())));
    }
  }
}

TEST_CASE("re-ranking agrees with the score-and-extract oracle") {
  std::mt19937_64 g(8);
  std::uniform_real_distribution<double> lp(-12.0, -0.5);
  for (int trial = 0; trial < 200; ++trial) {
    const auto image = random_vec(g, 5);
    std::vector<ranker::RerankCandidate> cands;
    for (int i = 0; i < 2 + trial % 12; ++i)
      cands.push_back({i, lp(g), 1 + static_cast<int>(g() % 9), random_vec(g, 5)});
    if (trial % 5 == 0 && cands.size() > 2) cands[2] = {2, cands[0].logprob, cands[0].length, cands[0].embedding};
    const double lambda = (trial % 4) / 3.0;
    const auto got = ranker::rerank(cands, image, lambda);
    const auto want = oracle::rerank_order(cands, image, lambda);
    REQUIRE(got.size() == want.size());
    for (std::size_t i = 0; i < got.size(); ++i) CHECK(got[i].index == want[i]);
  }
}

}
