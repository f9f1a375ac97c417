// Template renderer and rule-based annotator for the world grammar.
//
//   sentence := clause [PREP np-phrase] ["and" np-phrase]
//   clause   := np                               (noun phrase)
//            |  np VERB-ing [np]                 (participial, acl)
//            |  np "that" "is" VERB-ing [np]     (relative, acl)
//            |  np "is" VERB-ing [np]            (finite, nsubj)
//            |  np "is" COLOR                    (copular)
//   np       := "a" [SIZE] [COLOR] NOUN
//   np-phrase:= np [VERB-ing [np]]
//
// Prepositional and conjoined phrases attach to the clause head: the noun for
// the first three clause shapes, the predicate for the finite and copular ones.

#include <algorithm>
#include <numeric>

#include "syncap/errors.hpp"
#include "syncap/world.hpp"

namespace syncap::world {
namespace {

namespace ccg {
constexpr const char* kDet = "NP/N";
constexpr const char* kAdj = "N/N";
constexpr const char* kNoun = "N";
constexpr const char* kVerbIntrans = "S[ng]\\NP";
constexpr const char* kVerbTrans = "(S[ng]\\NP)/NP";
constexpr const char* kAux = "(S[dcl]\\NP)/(S[ng]\\NP)";
constexpr const char* kCopula = "(S[dcl]\\NP)/(S[adj]\\NP)";
constexpr const char* kPredAdj = "S[adj]\\NP";
constexpr const char* kRel = "(NP\\NP)/(S[dcl]\\NP)";
constexpr const char* kPrepNominal = "(NP\\NP)/NP";
constexpr const char* kPrepVerbal = "((S\\NP)\\(S\\NP))/NP";
constexpr const char* kConj = "conj";
constexpr const char* kUnknown = "X";
}  // namespace ccg

class Builder {
 public:
  int add(const std::string& token, const char* pos, const char* chunk,
          const char* ccg_tag) {
    ref_.tokens.push_back(token);
    ref_.tags.pos.emplace_back(pos);
    ref_.tags.chunk.emplace_back(chunk);
    ref_.tags.ccg.emplace_back(ccg_tag);
    heads_.push_back(-2);
    labels_.emplace_back();
    return static_cast<int>(ref_.tokens.size()) - 1;
  }

  void attach(int dependent, int head, const char* label) {
    heads_[dependent] = head;
    labels_[dependent] = label;
  }

  void mention(const std::string& dep, const std::string& noun, const char* rel) {
    ref_.mentions.push_back({dep, noun, rel});
  }

  /// "a [size] [color] noun"; returns the noun index.
  int noun_phrase(const std::string& noun, const std::string* size,
                  const std::string* color) {
    const int det = add("a", "DET", "B-NP", ccg::kDet);
    int s = -1, c = -1;
    if (size) s = add(*size, "ADJ", "I-NP", ccg::kAdj);
    if (color) c = add(*color, "ADJ", "I-NP", ccg::kAdj);
    const int n = add(noun, "NOUN", "I-NP", ccg::kNoun);
    attach(det, n, "det");
    if (s >= 0) {
      attach(s, n, "amod");
      mention(*size, noun, "amod");
    }
    if (c >= 0) {
      attach(c, n, "amod");
      mention(*color, noun, "amod");
    }
    return n;
  }

  int verb(const VerbEntry& v, const Action& a, const char* chunk) {
    return add(v.participle, "VERB", chunk, a.object ? ccg::kVerbTrans : ccg::kVerbIntrans);
  }

  void object(const Action& a, int verb_index) {
    if (!a.object) return;
    const int o = noun_phrase(*a.object, nullptr, nullptr);
    attach(o, verb_index, "obj");
  }

  Reference finish(int root, std::string source_template) {
    attach(root, -1, "root");
    ref_.arcs.reserve(heads_.size());
    ref_.tags.dep.reserve(heads_.size());
    for (std::size_t i = 0; i < heads_.size(); ++i) {
      ref_.arcs.push_back({heads_[i], static_cast<int>(i), labels_[i]});
      ref_.tags.dep.push_back(labels_[i]);
    }
    ref_.source_template = std::move(source_template);
    return std::move(ref_);
  }

 private:
  Reference ref_;
  std::vector<int> heads_;
  std::vector<std::string> labels_;
};

struct MentionPlan {
  const std::string* color = nullptr;
  const std::string* size = nullptr;
  bool action = false;
};

}  // namespace

std::vector<Reference> render_references(const Scene& scene, Rng& rng, int n_refs,
                                         const Lexicon& lexicon,
                                         const WorldConfig& config) {
  if (n_refs < 1) throw ConfigError("render_references: n_refs must be >= 1");
  if (scene.entities.empty()) throw ConfigError("render_references: empty scene");

  std::bernoulli_distribution mention(config.mention_prob);
  std::bernoulli_distribution copular(config.copular_prob);
  std::uniform_int_distribution<int> pick_clause(0, 2);
  std::uniform_int_distribution<std::size_t> pick_prep(0, lexicon.prepositions.size() - 1);

  std::vector<Reference> refs;
  refs.reserve(static_cast<std::size_t>(n_refs));
  for (int r = 0; r < n_refs; ++r) {
    std::vector<std::size_t> order(scene.entities.size());
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);

    std::vector<MentionPlan> plan(order.size());
    for (std::size_t k = 0; k < order.size(); ++k) {
      const Entity& e = scene.entities[order[k]];
      // Draw all three decisions unconditionally so the stream consumed per
      // entity does not depend on which attributes exist.
      const bool mc = mention(rng), ms = mention(rng), ma = mention(rng);
      if (e.color && mc) plan[k].color = &*e.color;
      if (e.size && ms) plan[k].size = &*e.size;
      plan[k].action = e.action.has_value() && ma;
    }

    Builder b;
    std::string tmpl;
    const Entity& main = scene.entities[order[0]];
    int root = -1;
    bool anchor_is_predicate = false;

    if (plan[0].action) {
      const VerbEntry& v = lexicon.verb(main.action->verb);
      const int shape = pick_clause(rng);
      const int n = b.noun_phrase(main.category, plan[0].size, plan[0].color);
      if (shape == 0) {
        tmpl = "participial";
        const int vi = b.verb(v, *main.action, "B-VP");
        b.attach(vi, n, "acl");
        b.mention(v.lemma, main.category, "acl");
        b.object(*main.action, vi);
        root = n;
      } else if (shape == 1) {
        tmpl = "relative";
        const int that = b.add(lexicon.relativizers.front(), "PRON", "B-NP", ccg::kRel);
        const int is = b.add(lexicon.copulas.front(), "AUX", "B-VP", ccg::kAux);
        const int vi = b.verb(v, *main.action, "I-VP");
        b.attach(that, vi, "nsubj");
        b.attach(is, vi, "aux");
        b.attach(vi, n, "acl");
        b.mention(v.lemma, main.category, "acl");
        b.object(*main.action, vi);
        root = n;
      } else {
        tmpl = "finite";
        const int is = b.add(lexicon.copulas.front(), "AUX", "B-VP", ccg::kAux);
        const int vi = b.verb(v, *main.action, "I-VP");
        b.attach(n, vi, "nsubj");
        b.attach(is, vi, "aux");
        b.mention(v.lemma, main.category, "nsubj");
        b.object(*main.action, vi);
        root = vi;
        anchor_is_predicate = true;
      }
    } else if (plan[0].color && copular(rng)) {
      tmpl = "copular";
      const int n = b.noun_phrase(main.category, plan[0].size, nullptr);
      const int is = b.add(lexicon.copulas.front(), "AUX", "B-VP", ccg::kCopula);
      const int adj = b.add(*plan[0].color, "ADJ", "I-VP", ccg::kPredAdj);
      b.attach(n, adj, "nsubj");
      b.attach(is, adj, "cop");
      b.mention(*plan[0].color, main.category, "predicate");
      root = adj;
      anchor_is_predicate = true;
    } else {
      tmpl = "np";
      root = b.noun_phrase(main.category, plan[0].size, plan[0].color);
    }

    auto secondary = [&](std::size_t k) {
      const Entity& e = scene.entities[order[k]];
      const int n = b.noun_phrase(e.category, plan[k].size, plan[k].color);
      if (plan[k].action) {
        const VerbEntry& v = lexicon.verb(e.action->verb);
        const int vi = b.verb(v, *e.action, "B-VP");
        b.attach(vi, n, "acl");
        b.mention(v.lemma, e.category, "acl");
        b.object(*e.action, vi);
      }
      return n;
    };

    if (order.size() >= 2) {
      tmpl += "+adjunct";
      const std::string& prep = lexicon.prepositions[pick_prep(rng)];
      const int p = b.add(prep, "ADP", "B-PP",
                          anchor_is_predicate ? ccg::kPrepVerbal : ccg::kPrepNominal);
      const int n = secondary(1);
      b.attach(p, n, "case");
      b.attach(n, root, anchor_is_predicate ? "obl" : "nmod");
    }
    for (std::size_t k = 2; k < order.size(); ++k) {
      tmpl += "+conj";
      const int c = b.add(lexicon.conjunctions.front(), "CCONJ", "O", ccg::kConj);
      const int n = secondary(k);
      b.attach(c, n, "cc");
      b.attach(n, root, "conj");
    }
    refs.push_back(b.finish(root, std::move(tmpl)));
  }
  return refs;
}

Reference annotate(const std::vector<std::string>& tokens, const Lexicon& lexicon) {
  const int n = static_cast<int>(tokens.size());
  Reference ref;
  ref.tokens = tokens;
  ref.source_template = "annotated";
  if (n == 0) return ref;

  std::vector<WordClass> cls(n);
  for (int i = 0; i < n; ++i) cls[i] = lexicon.classify(tokens[i]);

  auto& pos = ref.tags.pos;
  auto& chunk = ref.tags.chunk;
  auto& cc = ref.tags.ccg;
  pos.resize(n);
  chunk.assign(n, "O");
  cc.resize(n);
  for (int i = 0; i < n; ++i) {
    switch (cls[i]) {
      case WordClass::determiner: pos[i] = "DET"; cc[i] = ccg::kDet; break;
      case WordClass::color:
      case WordClass::size: pos[i] = "ADJ"; cc[i] = ccg::kAdj; break;
      case WordClass::noun: pos[i] = "NOUN"; cc[i] = ccg::kNoun; break;
      case WordClass::participle: pos[i] = "VERB"; cc[i] = ccg::kVerbIntrans; break;
      case WordClass::copula: pos[i] = "AUX"; cc[i] = ccg::kAux; break;
      case WordClass::relativizer: pos[i] = "PRON"; cc[i] = ccg::kRel; break;
      case WordClass::preposition: pos[i] = "ADP"; cc[i] = ccg::kPrepNominal; break;
      case WordClass::conjunction: pos[i] = "CCONJ"; cc[i] = ccg::kConj; break;
      case WordClass::unknown: pos[i] = "X"; cc[i] = ccg::kUnknown; break;
    }
  }

  std::vector<int> head(n, -2);
  std::vector<std::string> label(n);
  auto attach = [&](int dep, int h, const char* l) {
    if (head[dep] != -2) return false;
    head[dep] = h;
    label[dep] = l;
    return true;
  };
  auto is_adj = [&](int i) {
    return cls[i] == WordClass::color || cls[i] == WordClass::size;
  };

  // Noun phrases: "a"? ADJ* NOUN.
  std::vector<int> np_head(n, -1);
  std::vector<bool> np_start(n, false);
  int first_np = -1;
  for (int i = 0; i < n;) {
    if (cls[i] == WordClass::determiner || is_adj(i) || cls[i] == WordClass::noun) {
      int j = i;
      if (cls[j] == WordClass::determiner) ++j;
      while (j < n && is_adj(j)) ++j;
      if (j < n && cls[j] == WordClass::noun) {
        np_start[i] = true;
        for (int k = i; k <= j; ++k) {
          np_head[k] = j;
          chunk[k] = k == i ? "B-NP" : "I-NP";
          if (cls[k] == WordClass::determiner) attach(k, j, "det");
          else if (is_adj(k)) attach(k, j, "amod");
        }
        if (first_np < 0) first_np = j;
        i = j + 1;
        continue;
      }
    }
    ++i;
  }
  auto is_np_head = [&](int i) { return i >= 0 && i < n && np_head[i] == i; };

  // Verbs and their subjects / objects. predicate_subject[v] marks clause
  // predicates (finite verbs and copular adjectives).
  std::vector<int> predicate_subject(n, -1);
  for (int v = 0; v < n; ++v) {
    if (cls[v] != WordClass::participle) continue;
    if (v >= 3 && cls[v - 1] == WordClass::copula &&
        cls[v - 2] == WordClass::relativizer && is_np_head(v - 3)) {
      attach(v - 2, v, "nsubj");
      attach(v - 1, v, "aux");
      attach(v, v - 3, "acl");
      chunk[v - 2] = "B-NP";
      chunk[v - 1] = "B-VP";
      chunk[v] = "I-VP";
    } else if (v >= 2 && cls[v - 1] == WordClass::copula && is_np_head(v - 2)) {
      attach(v - 2, v, "nsubj");
      attach(v - 1, v, "aux");
      chunk[v - 1] = "B-VP";
      chunk[v] = "I-VP";
      predicate_subject[v] = v - 2;
    } else if (is_np_head(v - 1)) {
      attach(v, v - 1, "acl");
      chunk[v] = "B-VP";
    }
    if (v + 1 < n && np_start[v + 1]) {
      attach(np_head[v + 1], v, "obj");
      cc[v] = ccg::kVerbTrans;
    }
  }

  // Copular predication: NOUN "is" ADJ, with the adjective outside any NP.
  for (int i = 1; i + 1 < n; ++i) {
    if (cls[i] != WordClass::copula || head[i] != -2) continue;
    if (is_np_head(i - 1) && is_adj(i + 1) && np_head[i + 1] < 0) {
      attach(i - 1, i + 1, "nsubj");
      attach(i, i + 1, "cop");
      chunk[i] = "B-VP";
      chunk[i + 1] = "I-VP";
      cc[i] = ccg::kCopula;
      cc[i + 1] = ccg::kPredAdj;
      predicate_subject[i + 1] = i - 1;
    }
  }

  int root = first_np >= 0 ? first_np : 0;
  bool anchor_is_predicate = false;
  if (first_np >= 0) {
    for (int i = 0; i < n; ++i) {
      if (predicate_subject[i] == first_np) {
        root = i;
        anchor_is_predicate = true;
        break;
      }
    }
  }

  for (int p = 0; p + 1 < n; ++p) {
    if (cls[p] != WordClass::preposition || !np_start[p + 1]) continue;
    const int h = np_head[p + 1];
    attach(p, h, "case");
    chunk[p] = "B-PP";
    cc[p] = anchor_is_predicate ? ccg::kPrepVerbal : ccg::kPrepNominal;
    if (h != root) attach(h, root, anchor_is_predicate ? "obl" : "nmod");
  }
  for (int c = 0; c + 1 < n; ++c) {
    if (cls[c] != WordClass::conjunction || !np_start[c + 1]) continue;
    const int h = np_head[c + 1];
    attach(c, h, "cc");
    if (h != root) attach(h, root, "conj");
  }

  head[root] = -1;
  label[root] = "root";
  for (int i = 0; i < n; ++i)
    if (head[i] == -2) {
      head[i] = root;
      label[i] = "dep";
    }

  ref.arcs.reserve(n);
  for (int i = 0; i < n; ++i) ref.arcs.push_back({head[i], i, label[i]});
  if (!is_dependency_tree(ref.arcs, static_cast<std::size_t>(n))) {
    for (int i = 0; i < n; ++i)
      if (i != root) ref.arcs[i] = {root, i, "dep"};
    for (int i = 0; i < n; ++i) label[i] = ref.arcs[i].label;
  }
  ref.tags.dep = label;
  return ref;
}

}  // namespace syncap::world
