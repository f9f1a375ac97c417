// Small models and gradient checks shared by the unit and acceptance tests.
#pragma once

#include <memory>
#include <random>
#include <vector>

#include "syncap/captioner.hpp"
#include "syncap/gradcheck.hpp"
#include "syncap/planner.hpp"
#include "syncap/ranker.hpp"
#include "syncap/world.hpp"

namespace fixture {

using namespace syncap;

struct TinyWorld {
  world::Lexicon lex = world::Lexicon::default_lexicon();
  std::vector<world::CorpusEntry> corpus;
  planner::Vocabulary vocab;
  std::vector<cap::Example> examples;  // interleave+pos, first reference of each scene

  explicit TinyWorld(std::size_t scenes = 20, std::uint64_t seed = 3) {
    corpus = world::generate_corpus(scenes, seed, lex, world::WorldConfig{});
    vocab = planner::Vocabulary::build(corpus, {world::Tagset::pos});
    for (const auto& e : corpus) {
      auto s = planner::encode(e.references[0], planner::Approach::interleave, world::Tagset::pos, vocab);
      examples.push_back({s[0].ids, &e.features});
    }
  }

  cap::ModelConfig model_config(cap::Backend backend, bool ranker = false) const {
    cap::ModelConfig mc;
    mc.backend = backend;
    mc.vocab = static_cast<int>(vocab.size());
    mc.feature_dim = static_cast<int>(corpus[0].features.cols);
    mc.regions = static_cast<int>(corpus[0].features.rows);
    mc.embed = 8;
    mc.hidden = 8;
    mc.d_model = 8;
    mc.ff = 16;
    mc.heads = 2;
    mc.rank_dim = 4;
    mc.ranker = ranker;
    return mc;
  }
};

// Moves every weight away from its initial scale so that no gradient is
// vanishingly small relative to the finite-difference resolution.
template <class T>
void jitter(num::ParamStore<T>& store, std::uint64_t seed = 5) {
  std::mt19937_64 g(seed);
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  for (auto& p : store)
    for (auto& x : p.value.data) x += static_cast<T>(u(g));
}

// Sampled elements per parameter block; 0 checks every element.
inline num::GradCheckOptions check_options(int max_elements) {
  num::GradCheckOptions o;
  o.max_elements_per_block = max_elements;
  return o;
}

// Teacher-forced NLL of three captions.
inline num::GradCheckReport decoder_gradcheck(const TinyWorld& w, cap::Backend backend,
                                              int max_elements = 20) {
  auto m = cap::make_captioner<double>(w.model_config(backend));
  jitter(m->params());
  std::vector<const cap::Example*> batch{&w.examples[0], &w.examples[1], &w.examples[2]};
  auto loss = [&](bool grad) {
    num::Tape<double> tape(grad);
    auto r = m->forward(tape, batch, false);
    if (grad) tape.backward(r.nll);
    return r.nll.value()(0, 0);
  };
  return num::finite_diff_check(loss, m->params(), check_options(max_elements));
}

// Contrastive loss of a 2-sample batch whose sentence side goes through
// decoder states and the given pooling.
inline num::GradCheckReport pooling_gradcheck(const TinyWorld& w, ranker::Pooling pooling,
                                              int max_elements = 20) {
  auto m = cap::make_captioner<double>(w.model_config(cap::Backend::recurrent, true));
  jitter(m->params());
  auto rp = m->ranker_params();
  std::vector<num::Tensor<double>> regions;
  for (int i = 0; i < 2; ++i) regions.push_back(cap::feature_tensor<double>(*w.examples[i].features));
  auto loss = [&](bool grad) {
    num::Tape<double> tape(grad);
    std::vector<num::Var<double>> img, sen;
    for (int i = 0; i < 2; ++i) {
      auto ids = w.examples[static_cast<std::size_t>(i)].ids;
      ids.pop_back();
      img.push_back(ranker::embed_image(tape.borrow(regions[static_cast<std::size_t>(i)]), rp));
      sen.push_back(ranker::embed_sentence(m->sentence_states(tape, ids), pooling, rp));
    }
    auto l = ranker::contrastive_loss(num::concat_rows(img), num::concat_rows(sen), 0.2);
    if (grad) tape.backward(l);
    return l.value()(0, 0);
  };
  return num::finite_diff_check(loss, m->params(), check_options(max_elements));
}

// Contrastive loss alone, on free 2 x 6 embeddings normalized per row.
inline num::GradCheckReport contrastive_gradcheck(int max_elements = 20, std::uint64_t seed = 7) {
  std::mt19937_64 g(seed);
  num::ParamStore<double> store;
  auto& a = store.add("img", 2, 6, num::Init::zero, g);
  auto& b = store.add("sen", 2, 6, num::Init::zero, g);
  std::normal_distribution<double> n(0.0, 1.0);
  for (auto* p : {&a, &b})
    for (auto& x : p->value.data) x = n(g);
  auto loss = [&](bool grad) {
    num::Tape<double> tape(grad);
    auto l = ranker::contrastive_loss(num::l2_normalize_rows(tape.param(a)),
                                      num::l2_normalize_rows(tape.param(b)), 0.5);
    if (grad) tape.backward(l);
    return l.value()(0, 0);
  };
  return num::finite_diff_check(loss, store, check_options(max_elements));
}

}  // namespace fixture
