#include "doctest.h"

#include <cmath>

#include "../support/fixtures.hpp"
#include "../support/oracles.hpp"
#include "syncap/beam_search.hpp"
#include "syncap/decode.hpp"

using namespace syncap;

TEST_SUITE("captioner") {

TEST_CASE("teacher forcing and incremental decoding give the same likelihood") {
  fixture::TinyWorld w;
  for (auto backend : {cap::Backend::recurrent, cap::Backend::transformer}) {
    CAPTURE(cap::to_string(backend));
    auto m = cap::make_captioner<double>(w.model_config(backend));
    fixture::jitter(m->params());
    std::vector<const cap::Example*> batch;
    double decoded = 0;
    for (int i = 0; i < 4; ++i) {
      batch.push_back(&w.examples[static_cast<std::size_t>(i)]);
      auto s = m->open(*w.examples[static_cast<std::size_t>(i)].features);
      decoded += cap::score_sequence(*s, w.examples[static_cast<std::size_t>(i)].ids);
    }
    num::Tape<double> tape(false);
    auto r = m->forward(tape, batch, false);
    CHECK(-r.nll.value()(0, 0) == doctest::Approx(decoded).epsilon(1e-9));
    int tokens = 0;
    for (auto* e : batch) tokens += static_cast<int>(e->ids.size()) - 1;
    CHECK(r.tokens == tokens);
  }
}

TEST_CASE("reordered live sets keep per-hypothesis state") {
  fixture::TinyWorld w;
  for (auto backend : {cap::Backend::recurrent, cap::Backend::transformer}) {
    auto m = cap::make_captioner<double>(w.model_config(backend));
    fixture::jitter(m->params());
    const auto& a = w.examples[0].ids;
    const auto& b = w.examples[1].ids;
    auto s = m->open(*w.examples[0].features);
    s->begin(a[0]);
    s->advance({0, 0}, {a[1], b[1]});
    auto swapped = s->advance({1, 0}, {b[2], a[2]});
    auto solo = m->open(*w.examples[0].features);
    solo->begin(a[0]);
    solo->advance({0}, {a[1]});
    auto ref = solo->advance({0}, {a[2]});
    for (std::size_t v = 0; v < ref[0].size(); ++v) CHECK(swapped[1][v] == doctest::Approx(ref[0][v]).epsilon(1e-12));
  }
}

TEST_CASE("every decoding step yields a normalized distribution") {
  fixture::TinyWorld w;
  for (auto backend : {cap::Backend::recurrent, cap::Backend::transformer}) {
    auto m = cap::make_captioner<float>(w.model_config(backend));
    const auto& ids = w.examples[2].ids;
    auto s = m->open(*w.examples[2].features);
    auto mass = [](const std::vector<double>& row) {
      double z = 0;
      for (double lp : row) z += std::exp(lp);
      return z;
    };
    CHECK(std::abs(mass(s->begin(ids[0])) - 1.0) < 1e-6);
    for (std::size_t t = 1; t + 1 < ids.size(); ++t)
      CHECK(std::abs(mass(s->advance({0}, {ids[t]})[0]) - 1.0) < 1e-6);
  }
}

TEST_CASE("decoder gradients match central differences") {
  fixture::TinyWorld w;
  CHECK(fixture::decoder_gradcheck(w, cap::Backend::recurrent).passed);
  CHECK(fixture::decoder_gradcheck(w, cap::Backend::transformer).passed);
}

TEST_CASE("sentence states exist only for the recurrent backend") {
  fixture::TinyWorld w;
  auto rec = cap::make_captioner<double>(w.model_config(cap::Backend::recurrent));
  auto tr = cap::make_captioner<double>(w.model_config(cap::Backend::transformer));
  num::Tape<double> tape(false);
  auto ids = w.examples[0].ids;
  ids.pop_back();
  auto st = rec->sentence_states(tape, ids);
  CHECK(st.rows() == static_cast<int>(ids.size()));
  CHECK(st.cols() == 8);
  CHECK_THROWS_AS(tr->sentence_states(tape, ids), NotApplicableError);
  CHECK_THROWS(w.model_config(cap::Backend::transformer, true).validate());
}

TEST_CASE("beam search equals exhaustive search when the beam covers the space") {
  // V = 4 with eos = 1: at most 3^4 = 81 live prefixes at length cap 4.
  const int vocab = 4, eos = 1, max_len = 4, top_k = 10;
  int checked = 0;
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    oracle::ToySession model(vocab, seed);
    const auto expected = oracle::enumerate(model, 0, eos, max_len);
    oracle::ToySession session(vocab, seed);
    cap::BeamConfig bc;
    bc.beam = 81;
    bc.top_k = top_k;
    bc.max_len = max_len;
    const auto got = cap::beam_search(session, 0, eos, bc);
    REQUIRE(got.size() == static_cast<std::size_t>(top_k));
    for (int i = 0; i < top_k; ++i) {
      CHECK(got[static_cast<std::size_t>(i)].ids == expected[static_cast<std::size_t>(i)].ids);
      CHECK(got[static_cast<std::size_t>(i)].logprob ==
            doctest::Approx(expected[static_cast<std::size_t>(i)].logprob).epsilon(1e-12));
      CHECK(got[static_cast<std::size_t>(i)].finished == expected[static_cast<std::size_t>(i)].finished);
    }
    ++checked;
  }
  CHECK(checked == 200);
}

TEST_CASE("a narrow beam never beats the exhaustive optimum") {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    oracle::ToySession model(5, seed);
    const auto best = oracle::enumerate(model, 0, 1, 4).front();
    oracle::ToySession session(5, seed);
    cap::BeamConfig bc;
    bc.beam = 3;
    bc.top_k = 1;
    bc.max_len = 4;
    CHECK(cap::beam_search(session, 0, 1, bc).front().logprob <= best.logprob + 1e-12);
  }
}

TEST_CASE("the best hypothesis does not get worse as the beam widens") {
  fixture::TinyWorld w;
  auto m = cap::make_captioner<float>(w.model_config(cap::Backend::recurrent));
  fixture::jitter(m->params());
  for (int scene = 0; scene < 10; ++scene) {
    double prev = -1e300;
    for (int b : {1, 5, 20}) {
      auto s = m->open(w.corpus[static_cast<std::size_t>(scene)].features);
      cap::BeamConfig bc;
      bc.beam = b;
      bc.top_k = 1;
      bc.max_len = 12;
      const double best = cap::beam_search(*s, w.examples[0].ids[0], 1, bc).front().logprob;
      CHECK(best >= prev - 1e-12);
      prev = best;
    }
  }
}

TEST_CASE("greedy decoding is a beam of one") {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    oracle::ToySession a(6, seed), b(6, seed);
    cap::BeamConfig bc;
    bc.beam = 1;
    bc.top_k = 1;
    bc.max_len = 7;
    const auto beam = cap::beam_search(a, 0, 1, bc).front();
    const auto greedy = cap::greedy_decode(b, 0, 1, 7);
    CHECK(beam.ids == greedy.ids);
    CHECK(beam.logprob == doctest::Approx(greedy.logprob));
  }
}

TEST_CASE("beam configuration is validated") {
  cap::BeamConfig bc;
  bc.beam = 2;
  bc.top_k = 3;
  CHECK_THROWS_AS(bc.validate(), ConfigError);
  bc.top_k = 1;
  bc.max_len = 0;
  CHECK_THROWS_AS(bc.validate(), ConfigError);
}

TEST_CASE("decode records round-trip through JSON") {
  cap::DecodedCaption c;
  c.scene = 42;
  c.rank = 3;
  c.ids = {4, 9, 1};
  c.tokens = {"cat"};
  c.tags = {"NOUN"};
  c.logprob = -1.25;
  c.finished = true;
  c.wellformed = true;
  c.rerank_score = 0.5;
  const auto back = cap::decoded_from_json(cap::to_json(c));
  CHECK(back.scene == 42);
  CHECK(back.rank == 3);
  CHECK(back.ids == c.ids);
  CHECK(back.tokens == c.tokens);
  CHECK(back.tags == c.tags);
  CHECK(back.logprob == -1.25);
  CHECK(back.wellformed);
  CHECK(back.rerank_score.value() == 0.5);
}

}
