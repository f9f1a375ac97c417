#include "syncap/splits.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include "json.hpp"
#include "syncap/errors.hpp"

namespace syncap::splits {

using nlohmann::json;
using world::Lexicon;

std::string_view to_string(PairCategory c) {
  switch (c) {
    case PairCategory::color_animate: return "color-animate";
    case PairCategory::color_inanimate: return "color-inanimate";
    case PairCategory::size_animate: return "size-animate";
    case PairCategory::size_inanimate: return "size-inanimate";
    case PairCategory::verb_transitive: return "verb-transitive";
    case PairCategory::verb_intransitive: return "verb-intransitive";
  }
  return "?";
}

ConceptPair make_pair(const std::string& dependent, const std::string& noun,
                      const Lexicon& lexicon) {
  const auto& n = lexicon.noun(noun);
  const bool animate = n.animacy == world::Animacy::animate;
  ConceptPair p{dependent, noun, PairKind::adjective_noun, PairCategory::color_animate};
  if (lexicon.color_index(dependent)) {
    p.category = animate ? PairCategory::color_animate : PairCategory::color_inanimate;
  } else if (lexicon.size_index(dependent)) {
    p.category = animate ? PairCategory::size_animate : PairCategory::size_inanimate;
  } else if (lexicon.verb_index(dependent)) {
    p.kind = PairKind::verb_noun;
    p.category = lexicon.verb(dependent).transitivity == world::Transitivity::transitive
                     ? PairCategory::verb_transitive
                     : PairCategory::verb_intransitive;
  } else {
    throw ConfigError("concept pair dependent is not an adjective or verb: " + dependent);
  }
  return p;
}

SplitSpec SplitSpec::default_spec(const Lexicon& lexicon) {
  const std::vector<std::vector<std::pair<const char*, const char*>>> sets = {
      {{"black", "cat"}, {"big", "bird"}, {"red", "bus"},
       {"small", "plane"}, {"eat", "man"}, {"lie", "woman"}},
      {{"brown", "dog"}, {"small", "cat"}, {"white", "truck"},
       {"big", "plane"}, {"ride", "woman"}, {"fly", "bird"}},
      {{"white", "horse"}, {"big", "cat"}, {"blue", "bus"},
       {"small", "table"}, {"hold", "child"}, {"stand", "bird"}},
      {{"black", "bird"}, {"small", "dog"}, {"white", "boat"},
       {"big", "truck"}, {"eat", "horse"}, {"stand", "child"}},
  };
  SplitSpec spec;
  for (const auto& s : sets) {
    std::vector<ConceptPair> pairs;
    for (const auto& [d, n] : s) pairs.push_back(make_pair(d, n, lexicon));
    spec.heldout_sets.push_back(std::move(pairs));
  }
  return spec;
}

const std::vector<ConceptPair>& SplitSpec::active() const {
  if (active_set < 0 || active_set >= static_cast<int>(heldout_sets.size()))
    throw ConfigError("split spec: active_set out of range");
  return heldout_sets[static_cast<std::size_t>(active_set)];
}

void SplitSpec::validate() const {
  std::set<std::pair<std::string, std::string>> seen;
  for (const auto& set : heldout_sets)
    for (const auto& p : set)
      if (!seen.insert({p.dependent, p.noun}).second)
        throw ConfigError("split spec: pair appears in two held-out sets: " + p.label());
  (void)active();
}

void SplitRatios::validate() const {
  if (!(train > 0 && val > 0 && test > 0))
    throw ConfigError("split ratios must be positive");
  if (std::abs(train + val + test - 1.0) > 1e-9)
    throw ConfigError("split ratios must sum to 1");
}

bool pair_occurs(const world::Reference& reference, const ConceptPair& pair,
                 const Lexicon& lexicon) {
  const auto& toks = reference.tokens;
  auto lemma = [&](int i) { return lexicon.lemma_of(toks[static_cast<std::size_t>(i)]); };
  for (const auto& a : reference.arcs) {
    if (a.head < 0 || a.head >= static_cast<int>(toks.size()) || a.dependent < 0 ||
        a.dependent >= static_cast<int>(toks.size()))
      continue;
    if (pair.kind == PairKind::adjective_noun) {
      if (a.label == "amod" && lemma(a.dependent) == pair.dependent &&
          lemma(a.head) == pair.noun)
        return true;
    } else {
      if (a.label == "acl" && lemma(a.dependent) == pair.dependent &&
          lemma(a.head) == pair.noun)
        return true;
      if (a.label == "nsubj" && lemma(a.dependent) == pair.noun &&
          lemma(a.head) == pair.dependent)
        return true;
    }
  }
  return false;
}

DatasetSplit build_splits(const std::vector<world::CorpusEntry>& corpus,
                          const SplitSpec& spec, const SplitRatios& ratios,
                          std::uint64_t seed, const Lexicon& lexicon) {
  if (corpus.empty()) throw ConfigError("build_splits: empty corpus");
  ratios.validate();
  spec.validate();

  DatasetSplit split;
  split.spec = spec;
  split.ratios = ratios;
  split.seed = seed;
  const auto& active = spec.active();

  std::vector<std::size_t> occurrences(active.size(), 0);
  std::vector<std::int64_t> gap, rest;
  for (const auto& entry : corpus) {
    bool is_gap = false;
    for (std::size_t p = 0; p < active.size(); ++p) {
      bool hit = false;
      for (const auto& r : entry.references)
        if (pair_occurs(r, active[p], lexicon)) {
          hit = true;
          break;
        }
      if (hit) {
        ++occurrences[p];
        is_gap = true;
      }
    }
    (is_gap ? gap : rest).push_back(entry.scene.id);
  }

  world::Rng rng(world::mix_seed(seed, 0x5317));
  if (active.empty()) {
    std::vector<std::int64_t> ids = rest;
    std::shuffle(ids.begin(), ids.end(), rng);
    const auto n = ids.size();
    const auto n_val = static_cast<std::size_t>(std::llround(ratios.val * n));
    const auto n_test = std::min(n - n_val, static_cast<std::size_t>(std::llround(ratios.test * n)));
    split.val.assign(ids.begin(), ids.begin() + n_val);
    split.test.assign(ids.begin() + n_val, ids.begin() + n_val + n_test);
    split.train.assign(ids.begin() + n_val + n_test, ids.end());
  } else {
    std::vector<std::int64_t> ids = gap;
    std::shuffle(ids.begin(), ids.end(), rng);
    const double val_share = ratios.val / (ratios.val + ratios.test);
    const auto n_val = static_cast<std::size_t>(std::llround(val_share * ids.size()));
    split.val.assign(ids.begin(), ids.begin() + n_val);
    split.test.assign(ids.begin() + n_val, ids.end());
    split.train = rest;
  }
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.val.begin(), split.val.end());
  std::sort(split.test.begin(), split.test.end());

  for (std::size_t p = 0; p < active.size(); ++p)
    if (occurrences[p] == 0)
      split.warnings.push_back("held-out pair never occurs in corpus: " + active[p].label());

  // Each held-out lemma should still be observable in training, in other combinations.
  std::set<std::string> train_lemmas;
  std::set<std::int64_t> train_ids(split.train.begin(), split.train.end());
  for (const auto& entry : corpus) {
    if (!train_ids.count(entry.scene.id)) continue;
    for (const auto& r : entry.references)
      for (const auto& t : r.tokens) train_lemmas.insert(lexicon.lemma_of(t));
  }
  for (const auto& p : active) {
    for (const auto* lemma : {&p.dependent, &p.noun})
      if (!train_lemmas.count(*lemma))
        split.warnings.push_back("held-out lemma absent from training references: " +
                                 *lemma + " (pair " + p.label() + ")");
  }
  return split;
}

void write_split_manifest(const std::filesystem::path& path, const DatasetSplit& split) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  json sets = json::array();
  for (const auto& s : split.spec.heldout_sets) {
    json pairs = json::array();
    for (const auto& p : s) pairs.push_back(json::array({p.dependent, p.noun}));
    sets.push_back(std::move(pairs));
  }
  json header = {{"type", "header"},
                 {"spec", {{"active_set", split.spec.active_set}, {"heldout_sets", sets}}},
                 {"ratios", {split.ratios.train, split.ratios.val, split.ratios.test}},
                 {"seed", split.seed},
                 {"warnings", split.warnings}};
  out << header.dump() << '\n';
  auto emit = [&](const std::vector<std::int64_t>& ids, const char* part) {
    for (auto id : ids) out << json{{"scene", id}, {"partition", part}}.dump() << '\n';
  };
  emit(split.train, "train");
  emit(split.val, "val");
  emit(split.test, "test");
  if (!out) throw IoError("write failed: " + path.string());
}

DatasetSplit read_split_manifest(const std::filesystem::path& path, const Lexicon& lexicon) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  DatasetSplit split;
  std::string line;
  bool have_header = false;
  try {
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const json j = json::parse(line);
      if (j.value("type", "") == "header") {
        have_header = true;
        split.spec.active_set = j.at("spec").at("active_set").get<int>();
        for (const auto& s : j["spec"].at("heldout_sets")) {
          std::vector<ConceptPair> pairs;
          for (const auto& p : s)
            pairs.push_back(make_pair(p.at(0).get<std::string>(), p.at(1).get<std::string>(), lexicon));
          split.spec.heldout_sets.push_back(std::move(pairs));
        }
        const auto r = j.at("ratios");
        split.ratios = {r.at(0).get<double>(), r.at(1).get<double>(), r.at(2).get<double>()};
        split.seed = j.at("seed").get<std::uint64_t>();
        split.warnings = j.value("warnings", std::vector<std::string>{});
        continue;
      }
      const auto id = j.at("scene").get<std::int64_t>();
      const auto part = j.at("partition").get<std::string>();
      if (part == "train") split.train.push_back(id);
      else if (part == "val") split.val.push_back(id);
      else if (part == "test") split.test.push_back(id);
      else throw IoError("unknown partition label: " + part);
    }
  } catch (const json::exception& ex) {
    throw IoError(std::string("malformed split manifest: ") + ex.what());
  }
  if (!have_header) throw IoError("split manifest without header: " + path.string());
  return split;
}

}  // namespace syncap::splits
