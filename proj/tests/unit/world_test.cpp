#include "doctest.h"

#include <cmath>
#include <filesystem>

#include "syncap/corpus_io.hpp"
#include "syncap/errors.hpp"
#include "syncap/world.hpp"

using namespace syncap;
using namespace syncap::world;

TEST_SUITE("world") {

TEST_CASE("corpus generation is a pure function of the seed") {
  const auto lex = Lexicon::default_lexicon();
  const WorldConfig cfg;
  const auto a = generate_corpus(40, 7, lex, cfg);
  const auto b = generate_corpus(40, 7, lex, cfg);
  const auto c = generate_corpus(40, 8, lex, cfg);
  REQUIRE(a.size() == 40);
  bool differs = false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].scene == b[i].scene);
    CHECK(a[i].features.data == b[i].features.data);
    differs |= !(a[i].scene == c[i].scene);
  }
  CHECK(differs);
}

TEST_CASE("references carry aligned tags and a dependency tree") {
  const auto lex = Lexicon::default_lexicon();
  const WorldConfig cfg;
  for (const auto& e : generate_corpus(100, 3, lex, cfg)) {
    CHECK(static_cast<int>(e.references.size()) == cfg.n_refs);
    for (const auto& r : e.references) {
      const auto n = r.tokens.size();
      REQUIRE(n > 0);
      for (auto t : {Tagset::pos, Tagset::dep, Tagset::chunk, Tagset::ccg}) CHECK(r.tags.get(t).size() == n);
      CHECK(is_dependency_tree(r.arcs, n));
      // The oracle annotator reproduces the generator's annotation.
      const auto again = annotate(r.tokens, lex);
      CHECK(again.tags == r.tags);
      CHECK(again.arcs == r.arcs);
    }
  }
}

TEST_CASE("features: fixed shape, zero padding before noise, finite") {
  const auto lex = Lexicon::default_lexicon();
  WorldConfig cfg;
  cfg.noise_sigma = 0.0;
  const auto layout = FeatureLayout::of(lex);
  for (const auto& e : generate_corpus(50, 5, lex, cfg)) {
    CHECK(e.features.rows == static_cast<std::size_t>(cfg.regions));
    CHECK(e.features.cols == layout.width);
    for (std::size_t r = e.scene.entities.size(); r < e.features.rows; ++r)
      for (std::size_t c = 0; c < e.features.cols; ++c) CHECK(e.features.at(r, c) == 0.0);
  }
  cfg.noise_sigma = 0.3;
  for (const auto& e : generate_corpus(20, 5, lex, cfg))
    for (double v : e.features.data) CHECK(std::isfinite(v));
}

TEST_CASE("tagset names round-trip") {
  for (auto t : {Tagset::pos, Tagset::dep, Tagset::chunk, Tagset::ccg, Tagset::idle, Tagset::none})
    CHECK(tagset_from_string(to_string(t)) == t);
  CHECK_THROWS_AS(tagset_from_string("xpos"), ConfigError);
}

TEST_CASE("invalid world configs are rejected") {
  WorldConfig cfg;
  cfg.n_refs = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = {};
  cfg.color_prob = 1.5;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("corpus JSONL round-trips exactly") {
  const auto lex = Lexicon::default_lexicon();
  const auto corpus = generate_corpus(15, 2, lex, WorldConfig{});
  const auto path = std::filesystem::temp_directory_path() / "syncap_world_test.jsonl";
  write_corpus(path, corpus);
  const auto back = read_corpus(path);
  std::filesystem::remove(path);
  REQUIRE(back.size() == corpus.size());
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    CHECK(back[i].scene == corpus[i].scene);
    CHECK(back[i].features.data == corpus[i].features.data);
    REQUIRE(back[i].references.size() == corpus[i].references.size());
    for (std::size_t j = 0; j < corpus[i].references.size(); ++j) {
      CHECK(back[i].references[j].tokens == corpus[i].references[j].tokens);
      CHECK(back[i].references[j].tags == corpus[i].references[j].tags);
    }
  }
}

}
