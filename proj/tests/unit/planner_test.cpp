#include "doctest.h"

#include <filesystem>

#include "syncap/errors.hpp"
#include "syncap/planner.hpp"

using namespace syncap;
using namespace syncap::planner;

namespace {

std::vector<std::string> surfaces(const std::vector<int>& ids, const Vocabulary& v) {
  std::vector<std::string> out;
  for (int id : ids) out.push_back(v.surface(id));
  return out;
}

const std::vector<Tagset> kTagsets = {Tagset::pos, Tagset::dep, Tagset::chunk, Tagset::ccg, Tagset::idle};

}  // namespace

TEST_SUITE("planner") {

TEST_CASE("stream layouts") {
  const auto lex = world::Lexicon::default_lexicon();
  const auto corpus = world::generate_corpus(50, 1, lex, world::WorldConfig{});
  const auto v = Vocabulary::build(corpus, kTagsets);
  const std::vector<std::string> toks{"a", "black", "cat"}, tags{"DET", "ADJ", "NOUN"};
  using S = std::vector<std::string>;
  CHECK(surfaces(encode(toks, tags, Approach::interleave, Tagset::pos, v)[0].ids, v) ==
        S{"<s>", "DET", "a", "ADJ", "black", "NOUN", "cat", "</s>"});
  CHECK(surfaces(encode(toks, tags, Approach::sequential, Tagset::pos, v)[0].ids, v) ==
        S{"<s>", "DET", "ADJ", "NOUN", "a", "black", "cat", "</s>"});
  CHECK(surfaces(encode(toks, {}, Approach::standard, Tagset::none, v)[0].ids, v) ==
        S{"<s>", "a", "black", "cat", "</s>"});
  CHECK(surfaces(encode(toks, {}, Approach::interleave, Tagset::idle, v)[0].ids, v) ==
        S{"<s>", "<idle>", "a", "<idle>", "black", "<idle>", "cat", "</s>"});
  const auto mt = encode(toks, tags, Approach::multitask, Tagset::pos, v);
  REQUIRE(mt.size() == 2);
  CHECK(surfaces(mt[0].ids, v) == S{"<T>", "DET", "ADJ", "NOUN", "</s>"});
  CHECK(surfaces(mt[1].ids, v) == S{"<S>", "a", "black", "cat", "</s>"});
  CHECK(strip(mt[0].ids, v).empty());
}

TEST_CASE("strip inverts encode and lengths follow the approach") {
  const auto lex = world::Lexicon::default_lexicon();
  const auto corpus = world::generate_corpus(300, 2, lex, world::WorldConfig{});
  const auto v = Vocabulary::build(corpus, kTagsets);
  for (const auto& e : corpus)
    for (const auto& r : e.references) {
      const auto T = r.tokens.size();
      for (auto a : {Approach::standard, Approach::sequential, Approach::interleave, Approach::multitask})
        for (auto t : kTagsets) {
          const auto seqs = encode(r, a, t, v);
          if (a == Approach::multitask) {
            REQUIRE(seqs.size() == 2);
            CHECK(seqs[0].ids.size() == T + 2);
            CHECK(seqs[1].ids.size() == T + 2);
            CHECK(strip(seqs[1].ids, v) == r.tokens);
          } else {
            REQUIRE(seqs.size() == 1);
            CHECK(seqs[0].ids.size() == (a == Approach::standard ? T + 2 : 2 * T + 2));
            CHECK(strip(seqs[0].ids, v) == r.tokens);
          }
        }
    }
}

TEST_CASE("tag/token length mismatch is an alignment error") {
  const auto lex = world::Lexicon::default_lexicon();
  const auto v = Vocabulary::build(world::generate_corpus(10, 1, lex, world::WorldConfig{}), kTagsets);
  CHECK_THROWS_AS(encode({"a", "cat"}, {"DET"}, Approach::interleave, Tagset::pos, v), AlignmentError);
}

TEST_CASE("vocabulary: controls first, deterministic, persistent") {
  const auto lex = world::Lexicon::default_lexicon();
  const auto corpus = world::generate_corpus(60, 1, lex, world::WorldConfig{});
  const auto a = Vocabulary::build(corpus, kTagsets);
  const auto b = Vocabulary::build(corpus, kTagsets);
  CHECK(a == b);
  CHECK(a.surface(a.bos()) == "<s>");
  CHECK(a.surface(a.idle()) == "<idle>");
  CHECK(a.role(a.idle()) == Role::tag);
  CHECK(a.size() == a.word_count() + a.tag_count() + 6);  // <idle> is counted as a tag
  CHECK(a.word_id("zebra-not-a-word") == a.unk());
  const auto path = std::filesystem::temp_directory_path() / "syncap_vocab_test.tsv";
  a.save(path);
  CHECK(Vocabulary::load(path) == a);
  std::filesystem::remove(path);
}

TEST_CASE("parse_generated flags malformed streams but keeps the words") {
  const auto lex = world::Lexicon::default_lexicon();
  const auto v = Vocabulary::build(world::generate_corpus(60, 1, lex, world::WorldConfig{}), kTagsets);
  auto ids = encode({"a", "cat"}, {"DET", "NOUN"}, Approach::interleave, Tagset::pos, v)[0].ids;
  auto ok = parse_generated(ids, StreamKind::interleave, Tagset::pos, v);
  CHECK(ok.wellformed);
  CHECK(ok.tokens == std::vector<std::string>{"a", "cat"});
  CHECK(ok.tags == std::vector<std::string>{"DET", "NOUN"});
  // Two tags in a row.
  std::vector<int> bad{ids[0], ids[1], ids[3], ids[2], ids[4], ids.back()};
  auto p = parse_generated(bad, StreamKind::interleave, Tagset::pos, v);
  CHECK_FALSE(p.wellformed);
  CHECK(p.tokens == std::vector<std::string>{"a", "cat"});
}

}
