#include "doctest.h"

#include <cmath>

#include "syncap/splits.hpp"
#include "syncap/trainer.hpp"

using namespace syncap;

namespace {

struct Setup {
  world::Lexicon lex = world::Lexicon::default_lexicon();
  std::vector<world::CorpusEntry> corpus = world::generate_corpus(80, 5, lex, world::WorldConfig{});
  planner::Vocabulary vocab = planner::Vocabulary::build(corpus, {world::Tagset::pos});
  std::vector<std::int64_t> train_ids, val_ids;

  Setup() {
    for (const auto& e : corpus) (e.scene.id < 64 ? train_ids : val_ids).push_back(e.scene.id);
  }

  std::unique_ptr<cap::Captioner<float>> model() const {
    cap::ModelConfig mc;
    mc.vocab = static_cast<int>(vocab.size());
    mc.feature_dim = static_cast<int>(corpus[0].features.cols);
    mc.regions = static_cast<int>(corpus[0].features.rows);
    mc.embed = 16;
    mc.hidden = 16;
    return cap::make_captioner<float>(mc);
  }

  train::TrainConfig config() const {
    train::TrainConfig tc;
    tc.batch_size = 16;
    tc.max_epochs = 4;
    tc.patience = 10;
    tc.adam.lr = 1e-2;
    return tc;
  }
};

}  // namespace

TEST_SUITE("trainer") {

TEST_CASE("early stopping tracks the best epoch and its patience") {
  train::EarlyStopper s(2);
  CHECK_FALSE(s.update(1.0));
  CHECK_FALSE(s.update(3.0));
  CHECK_FALSE(s.update(3.0));
  CHECK_FALSE(s.update(2.0));
  CHECK(s.update(2.5));
  CHECK(s.best_epoch() == 2);
  CHECK(s.best_score() == 3.0);
  CHECK(s.epochs() == 5);

  train::EarlyStopper five(5);
  int stopped = 0;
  for (double b : {10.0, 12.0, 12.0, 11.0, 11.0, 11.0, 11.0, 11.0}) {
    ++stopped;
    if (five.update(b)) break;
  }
  CHECK(stopped == 8);
  CHECK(five.best_epoch() == 2);

  train::EarlyStopper zero(0);
  CHECK_FALSE(zero.update(3.0));
  CHECK(zero.update(3.0));
}

TEST_CASE("training data holds one planned sequence per reference, two for multitask") {
  Setup s;
  const auto il = train::make_training_data(s.corpus, s.train_ids, planner::Approach::interleave,
                                            world::Tagset::pos, s.vocab);
  const auto mt = train::make_training_data(s.corpus, s.train_ids, planner::Approach::multitask,
                                            world::Tagset::pos, s.vocab);
  REQUIRE(il.scenes.size() == s.train_ids.size());
  CHECK(il.scenes[0].sequences.size() == s.corpus[0].references.size());
  CHECK(il.scenes[0].sequences[0].size() == 1);
  CHECK(mt.scenes[0].sequences[0].size() == 2);
  CHECK(il.scenes[0].sequences[0][0].size() == 2 * s.corpus[0].references[0].tokens.size() + 2);
}

TEST_CASE("training is deterministic and reduces the loss") {
  Setup s;
  const auto data = train::make_training_data(s.corpus, s.train_ids, planner::Approach::interleave,
                                              world::Tagset::pos, s.vocab);
  const auto val = train::make_validation_data(s.corpus, s.val_ids);
  auto a = s.model(), b = s.model();
  const auto ra = train::train(*a, data, val, s.vocab, s.config());
  const auto rb = train::train(*b, data, val, s.vocab, s.config());
  REQUIRE(ra.history.size() == 4);
  REQUIRE(rb.history.size() == 4);
  for (std::size_t i = 0; i < ra.history.size(); ++i) {
    CHECK(ra.history[i].loss == rb.history[i].loss);
    CHECK(ra.history[i].val_bleu == rb.history[i].val_bleu);
  }
  CHECK(ra.history.back().loss < ra.history.front().loss);
  CHECK(ra.best_epoch >= 1);
  CHECK(ra.best_bleu == ra.history[static_cast<std::size_t>(ra.best_epoch - 1)].val_bleu);
  auto pb = b->params().begin();
  for (const auto& p : a->params()) {
    CHECK(p.value.data == pb->value.data);
    ++pb;
  }
}

TEST_CASE("a non-finite loss stops training") {
  Setup s;
  const auto data = train::make_training_data(s.corpus, s.train_ids, planner::Approach::standard,
                                              world::Tagset::none, s.vocab);
  auto m = s.model();
  for (auto& p : m->params()) p.value.fill(std::nanf(""));
  train::TrainState<float> state{num::Adam<float>(s.config().adam), std::mt19937_64(1)};
  CHECK_THROWS_AS(train::train_epoch(*m, data, s.config(), state), TrainingError);
}

}
