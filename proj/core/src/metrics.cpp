#include "syncap/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <unordered_set>

namespace syncap::eval {

GeneratedCaption make_caption(Tokens tokens, Tokens tags, bool wellformed,
                              const world::Lexicon& lexicon) {
  GeneratedCaption c;
  c.annotation = world::annotate(tokens, lexicon);
  c.tokens = std::move(tokens);
  c.tags = std::move(tags);
  c.wellformed = wellformed;
  return c;
}

double recall_at_k(const GenerationSet& gens, const splits::ConceptPair& pair, int k,
                   const world::Lexicon& lexicon) {
  if (gens.empty()) throw EmptyInputError("recall@k over zero scenes is undefined");
  if (k < 1) throw ConfigError("recall@k needs k >= 1");
  int hits = 0;
  for (const auto& scene : gens) {
    const auto n = std::min(scene.captions.size(), static_cast<std::size_t>(k));
    for (std::size_t i = 0; i < n; ++i)
      if (splits::pair_occurs(scene.captions[i].annotation, pair, lexicon)) {
        ++hits;
        break;
      }
  }
  return static_cast<double>(hits) / static_cast<double>(gens.size());
}

int pair_importance(const std::vector<world::Reference>& refs, const splits::ConceptPair& pair,
                    const world::Lexicon& lexicon) {
  int n = 0;
  for (const auto& r : refs) n += splits::pair_occurs(r, pair, lexicon) ? 1 : 0;
  return n;
}

std::vector<std::int64_t> evaluation_subset(const std::vector<world::CorpusEntry>& corpus,
                                            const std::vector<std::int64_t>& scene_ids,
                                            const splits::ConceptPair& pair,
                                            const world::Lexicon& lexicon) {
  std::map<std::int64_t, const world::CorpusEntry*> by_id;
  for (const auto& e : corpus) by_id[e.scene.id] = &e;
  std::vector<std::int64_t> out;
  for (auto id : scene_ids) {
    auto it = by_id.find(id);
    if (it == by_id.end()) throw IndexError("scene " + std::to_string(id) + " not in corpus");
    if (pair_importance(it->second->references, pair, lexicon) > 0) out.push_back(id);
  }
  return out;
}

std::map<splits::PairCategory, double> category_breakdown(const std::vector<PairRecall>& recalls) {
  std::map<splits::PairCategory, std::pair<double, int>> acc;
  for (const auto& r : recalls) {
    auto& a = acc[r.pair.category];
    a.first += r.recall;
    a.second += 1;
  }
  std::map<splits::PairCategory, double> out;
  for (const auto& [cat, a] : acc) out[cat] = a.first / a.second;
  return out;
}

std::vector<std::pair<int, double>> min_importance_curve(
    const GenerationSet& gens, const std::map<std::int64_t, const world::CorpusEntry*>& scenes,
    const splits::ConceptPair& pair, int k, int n_refs, const world::Lexicon& lexicon) {
  std::vector<int> importance;
  std::vector<bool> hit;
  for (const auto& g : gens) {
    auto it = scenes.find(g.scene);
    if (it == scenes.end()) throw IndexError("scene " + std::to_string(g.scene) + " not in corpus");
    importance.push_back(pair_importance(it->second->references, pair, lexicon));
    hit.push_back(recall_at_k({g}, pair, k, lexicon) > 0.0);
  }
  std::vector<std::pair<int, double>> curve;
  for (int j = 1; j <= n_refs; ++j) {
    int m = 0, h = 0;
    for (std::size_t i = 0; i < importance.size(); ++i)
      if (importance[i] >= j) {
        ++m;
        h += hit[i] ? 1 : 0;
      }
    if (m > 0) curve.emplace_back(j, static_cast<double>(h) / m);
  }
  return curve;
}

double tag_accuracy(const std::vector<const GeneratedCaption*>& captions,
                    planner::Approach approach, world::Tagset tagset) {
  if (approach == planner::Approach::standard)
    throw NotApplicableError("tag accuracy needs an approach that generates tags");
  if (captions.empty()) throw EmptyInputError("tag accuracy over zero captions");
  int ok = 0;
  for (const auto* c : captions) {
    if (tagset == world::Tagset::idle) {
      ok += c->tags.size() == c->tokens.size() &&
                    std::all_of(c->tags.begin(), c->tags.end(),
                                [](const std::string& t) { return t == "<idle>"; })
                ? 1
                : 0;
    } else {
      ok += c->tags == c->annotation.tags.get(tagset) ? 1 : 0;
    }
  }
  return static_cast<double>(ok) / static_cast<double>(captions.size());
}

namespace {

using Ngram = std::vector<std::string>;

std::map<Ngram, int> ngram_counts(const Tokens& t, int n) {
  std::map<Ngram, int> out;
  for (std::size_t i = 0; i + static_cast<std::size_t>(n) <= t.size(); ++i)
    ++out[Ngram(t.begin() + static_cast<std::ptrdiff_t>(i),
                t.begin() + static_cast<std::ptrdiff_t>(i) + n)];
  return out;
}

}  // namespace

double bleu(const std::vector<Tokens>& hypotheses, const std::vector<std::vector<Tokens>>& refs,
            int max_n) {
  if (hypotheses.size() != refs.size()) throw AlignmentError("bleu: hypotheses and references differ in count");
  if (max_n < 1) throw ConfigError("bleu: max_n must be at least 1");
  std::vector<double> matched(static_cast<std::size_t>(max_n)), total(static_cast<std::size_t>(max_n));
  double hyp_len = 0, ref_len = 0;
  for (std::size_t s = 0; s < hypotheses.size(); ++s) {
    const auto& h = hypotheses[s];
    if (refs[s].empty()) throw EmptyInputError("bleu: scene without references");
    hyp_len += static_cast<double>(h.size());
    std::size_t best = refs[s][0].size();
    for (const auto& r : refs[s]) {
      const auto d = [&](std::size_t len) {
        return len > h.size() ? len - h.size() : h.size() - len;
      };
      if (d(r.size()) < d(best) || (d(r.size()) == d(best) && r.size() < best)) best = r.size();
    }
    ref_len += static_cast<double>(best);
    for (int n = 1; n <= max_n; ++n) {
      const auto hc = ngram_counts(h, n);
      std::map<Ngram, int> max_ref;
      for (const auto& r : refs[s])
        for (const auto& [g, c] : ngram_counts(r, n)) max_ref[g] = std::max(max_ref[g], c);
      for (const auto& [g, c] : hc) {
        auto it = max_ref.find(g);
        matched[static_cast<std::size_t>(n - 1)] += std::min(c, it == max_ref.end() ? 0 : it->second);
        total[static_cast<std::size_t>(n - 1)] += c;
      }
    }
  }
  if (hyp_len == 0) return 0.0;
  double log_p = 0;
  for (int n = 1; n <= max_n; ++n) {
    double m = matched[static_cast<std::size_t>(n - 1)], t = total[static_cast<std::size_t>(n - 1)];
    if (n > 1) {
      m += 1;
      t += 1;
    }
    if (m == 0) return 0.0;
    log_p += std::log(m / t) / max_n;
  }
  const double bp = hyp_len >= ref_len ? 1.0 : std::exp(1.0 - ref_len / hyp_len);
  return 100.0 * bp * std::exp(log_p);
}

std::vector<std::string> content_words(const world::Reference& annotated) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < annotated.tokens.size(); ++i) {
    const auto& p = annotated.tags.pos[i];
    if (p == "NOUN" || p == "VERB" || p == "ADJ") out.push_back(annotated.tokens[i]);
  }
  return out;
}

namespace {

std::string join(const Tokens& t) {
  std::string s;
  for (const auto& w : t) {
    if (!s.empty()) s += ' ';
    s += w;
  }
  return s;
}

double segment_ttr(const Tokens& seg, int n) {
  if (static_cast<int>(seg.size()) < n) return 0.0;
  std::set<Ngram> types;
  const std::size_t count = seg.size() - static_cast<std::size_t>(n) + 1;
  for (std::size_t i = 0; i < count; ++i)
    types.insert(Ngram(seg.begin() + static_cast<std::ptrdiff_t>(i),
                       seg.begin() + static_cast<std::ptrdiff_t>(i) + n));
  return static_cast<double>(types.size()) / static_cast<double>(count);
}

}  // namespace

Diversity diversity_metrics(const std::vector<Tokens>& top1,
                            const std::vector<std::vector<Tokens>>& topk,
                            const std::vector<Tokens>& train_captions,
                            const std::vector<std::vector<world::Reference>>& references,
                            const world::Lexicon& lexicon) {
  if (topk.size() != references.size())
    throw AlignmentError("diversity: beam outputs and references differ in scene count");
  Diversity d;
  if (top1.empty()) return d;

  Tokens stream;
  std::set<std::string> types;
  for (const auto& c : top1) {
    stream.insert(stream.end(), c.begin(), c.end());
    types.insert(c.begin(), c.end());
  }
  d.asl = static_cast<double>(stream.size()) / static_cast<double>(top1.size());
  d.types = static_cast<int>(types.size());

  std::vector<Tokens> segments;
  for (std::size_t i = 0; i + kTtrSegment <= stream.size(); i += kTtrSegment)
    segments.emplace_back(stream.begin() + static_cast<std::ptrdiff_t>(i),
                          stream.begin() + static_cast<std::ptrdiff_t>(i + kTtrSegment));
  if (segments.empty() && !stream.empty()) segments.push_back(stream);
  for (const auto& s : segments) {
    d.ttr1 += segment_ttr(s, 1);
    d.ttr2 += segment_ttr(s, 2);
  }
  if (!segments.empty()) {
    d.ttr1 /= static_cast<double>(segments.size());
    d.ttr2 /= static_cast<double>(segments.size());
  }

  std::unordered_set<std::string> train_strings;
  std::set<std::string> train_types;
  for (const auto& c : train_captions) {
    train_strings.insert(join(c));
    train_types.insert(c.begin(), c.end());
  }
  int novel = 0;
  for (const auto& c : top1) novel += train_strings.count(join(c)) ? 0 : 1;
  d.novel = static_cast<double>(novel) / static_cast<double>(top1.size());
  if (!train_types.empty()) {
    int shared = 0;
    for (const auto& t : types) shared += train_types.count(t) ? 1 : 0;
    d.coverage = static_cast<double>(shared) / static_cast<double>(train_types.size());
  }

  double local = 0;
  int scenes = 0;
  for (std::size_t s = 0; s < topk.size(); ++s) {
    std::set<std::string> gold, generated;
    for (const auto& r : references[s])
      for (auto& w : content_words(r)) gold.insert(std::move(w));
    if (gold.empty()) continue;
    for (std::size_t k = 0; k < topk[s].size() && k < 5; ++k)
      for (auto& w : content_words(world::annotate(topk[s][k], lexicon))) generated.insert(std::move(w));
    int hit = 0;
    for (const auto& w : gold) hit += generated.count(w) ? 1 : 0;
    local += static_cast<double>(hit) / static_cast<double>(gold.size());
    ++scenes;
  }
  if (scenes > 0) d.local5 = local / scenes;
  return d;
}

}  // namespace syncap::eval
