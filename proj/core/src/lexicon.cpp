#include "syncap/lexicon.hpp"

#include <algorithm>
#include <cctype>
#include <set>

#include "syncap/errors.hpp"

namespace syncap::world {

Lexicon Lexicon::default_lexicon() {
  Lexicon lex;
  for (const char* n : {"cat", "dog", "bird", "horse", "man", "woman", "child"})
    lex.nouns.push_back({n, Animacy::animate});
  for (const char* n : {"bus", "truck", "plane", "boat", "table"})
    lex.nouns.push_back({n, Animacy::inanimate});
  lex.colors = {"black", "white", "brown", "red", "blue"};
  lex.sizes = {"big", "small"};
  lex.verbs = {
      {"eat", Transitivity::transitive, "eating"},
      {"hold", Transitivity::transitive, "holding"},
      {"ride", Transitivity::transitive, "riding"},
      {"stand", Transitivity::intransitive, "standing"},
      {"lie", Transitivity::intransitive, "lying"},
      {"fly", Transitivity::intransitive, "flying"},
  };
  lex.determiners = {"a"};
  lex.prepositions = {"on", "near", "beside"};
  lex.copulas = {"is"};
  lex.relativizers = {"that"};
  lex.conjunctions = {"and"};
  lex.index();
  return lex;
}

void Lexicon::validate() const {
  if (nouns.empty() || colors.empty() || sizes.empty() || verbs.empty() ||
      determiners.empty() || prepositions.empty() || copulas.empty())
    throw ConfigError("lexicon: every word class must be non-empty");
  std::set<std::string> seen;
  auto check = [&](const std::string& w) {
    if (w.empty()) throw ConfigError("lexicon: empty lemma");
    for (char ch : w)
      if (std::isupper(static_cast<unsigned char>(ch)))
        throw ConfigError("lexicon: lemma not lower-case: " + w);
    if (!seen.insert(w).second)
      throw ConfigError("lexicon: duplicate lemma across classes: " + w);
  };
  for (const auto& n : nouns) check(n.lemma);
  for (const auto& c : colors) check(c);
  for (const auto& s : sizes) check(s);
  for (const auto& v : verbs) {
    check(v.lemma);
    check(v.participle);
  }
  for (const auto* group :
       {&determiners, &prepositions, &copulas, &relativizers, &conjunctions})
    for (const auto& w : *group) check(w);
}

void Lexicon::index() {
  classes_.clear();
  lemmas_.clear();
  noun_ids_.clear();
  color_ids_.clear();
  size_ids_.clear();
  verb_ids_.clear();
  for (std::size_t i = 0; i < nouns.size(); ++i) {
    classes_[nouns[i].lemma] = WordClass::noun;
    noun_ids_[nouns[i].lemma] = i;
  }
  for (std::size_t i = 0; i < colors.size(); ++i) {
    classes_[colors[i]] = WordClass::color;
    color_ids_[colors[i]] = i;
  }
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    classes_[sizes[i]] = WordClass::size;
    size_ids_[sizes[i]] = i;
  }
  for (std::size_t i = 0; i < verbs.size(); ++i) {
    classes_[verbs[i].participle] = WordClass::participle;
    lemmas_[verbs[i].participle] = verbs[i].lemma;
    verb_ids_[verbs[i].lemma] = i;
  }
  for (const auto& w : determiners) classes_[w] = WordClass::determiner;
  for (const auto& w : prepositions) classes_[w] = WordClass::preposition;
  for (const auto& w : copulas) classes_[w] = WordClass::copula;
  for (const auto& w : relativizers) classes_[w] = WordClass::relativizer;
  for (const auto& w : conjunctions) classes_[w] = WordClass::conjunction;
}

WordClass Lexicon::classify(std::string_view token) const {
  auto it = classes_.find(std::string(token));
  return it == classes_.end() ? WordClass::unknown : it->second;
}

std::string Lexicon::lemma_of(std::string_view token) const {
  auto it = lemmas_.find(std::string(token));
  return it == lemmas_.end() ? std::string(token) : it->second;
}

namespace {
std::optional<std::size_t> find_in(
    const std::unordered_map<std::string, std::size_t>& m,
    std::string_view key) {
  auto it = m.find(std::string(key));
  if (it == m.end()) return std::nullopt;
  return it->second;
}
}  // namespace

std::optional<std::size_t> Lexicon::noun_index(std::string_view l) const {
  return find_in(noun_ids_, l);
}
std::optional<std::size_t> Lexicon::color_index(std::string_view l) const {
  return find_in(color_ids_, l);
}
std::optional<std::size_t> Lexicon::size_index(std::string_view l) const {
  return find_in(size_ids_, l);
}
std::optional<std::size_t> Lexicon::verb_index(std::string_view l) const {
  return find_in(verb_ids_, l);
}

const NounEntry& Lexicon::noun(std::string_view lemma) const {
  auto i = noun_index(lemma);
  if (!i) throw ConfigError("unknown noun: " + std::string(lemma));
  return nouns[*i];
}

const VerbEntry& Lexicon::verb(std::string_view lemma) const {
  auto i = verb_index(lemma);
  if (!i) throw ConfigError("unknown verb: " + std::string(lemma));
  return verbs[*i];
}

std::vector<std::string> Lexicon::surface_forms() const {
  std::vector<std::string> out;
  out.reserve(classes_.size());
  for (const auto& [w, cls] : classes_) out.push_back(w);
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace syncap::world
