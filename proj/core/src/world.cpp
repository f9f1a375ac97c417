#include "syncap/world.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "syncap/errors.hpp"

namespace syncap::world {

std::string_view to_string(Tagset t) {
  switch (t) {
    case Tagset::pos: return "pos";
    case Tagset::dep: return "dep";
    case Tagset::chunk: return "chunk";
    case Tagset::ccg: return "ccg";
    case Tagset::idle: return "idle";
    case Tagset::none: return "none";
  }
  return "none";
}

Tagset tagset_from_string(std::string_view s) {
  for (Tagset t : {Tagset::pos, Tagset::dep, Tagset::chunk, Tagset::ccg,
                   Tagset::idle, Tagset::none})
    if (to_string(t) == s) return t;
  throw ConfigError("unknown tag set: " + std::string(s));
}

const std::vector<std::string>& TagLists::get(Tagset t) const {
  switch (t) {
    case Tagset::pos: return pos;
    case Tagset::dep: return dep;
    case Tagset::chunk: return chunk;
    case Tagset::ccg: return ccg;
    default: break;
  }
  throw ConfigError("tag set has no gold annotation: " + std::string(to_string(t)));
}

std::vector<std::string>& TagLists::get(Tagset t) {
  return const_cast<std::vector<std::string>&>(std::as_const(*this).get(t));
}

FeatureLayout FeatureLayout::of(const Lexicon& lex) {
  FeatureLayout l;
  l.category = 0;
  l.color = l.category + lex.nouns.size();
  l.size = l.color + lex.colors.size();
  l.verb = l.size + lex.sizes.size();
  l.object = l.verb + lex.verbs.size();
  l.width = l.object + lex.nouns.size();
  return l;
}

void WorldConfig::validate() const {
  auto prob = [](double p, const char* name) {
    if (!(p >= 0.0 && p <= 1.0))
      throw ConfigError(std::string("world config: ") + name + " must be in [0,1]");
  };
  prob(color_prob, "color_prob");
  prob(size_prob, "size_prob");
  prob(action_prob, "action_prob");
  prob(mention_prob, "mention_prob");
  prob(copular_prob, "copular_prob");
  if (max_entities < 1) throw ConfigError("world config: max_entities must be >= 1");
  if (n_refs < 1) throw ConfigError("world config: n_refs must be >= 1");
  if (regions < max_entities)
    throw ConfigError("world config: regions must be >= max_entities");
  if (!(noise_sigma >= 0.0) || !std::isfinite(noise_sigma))
    throw ConfigError("world config: noise_sigma must be finite and >= 0");
  double total = 0.0;
  for (int k = 0; k < max_entities && k < static_cast<int>(entity_count_weights.size()); ++k) {
    if (entity_count_weights[k] < 0.0)
      throw ConfigError("world config: negative entity count weight");
    total += entity_count_weights[k];
  }
  if (!(total > 0.0)) throw ConfigError("world config: entity count weights sum to zero");
}

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  std::uint64_t z = a + 0x9e3779b97f4a7c15ULL * (b + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

Scene generate_scene(Rng& rng, const Lexicon& lexicon, const WorldConfig& config,
                     std::int64_t id) {
  config.validate();
  Scene scene;
  scene.id = id;

  std::vector<double> weights(config.entity_count_weights.begin(),
                              config.entity_count_weights.end());
  weights.resize(static_cast<std::size_t>(config.max_entities), 0.0);
  std::discrete_distribution<int> count_dist(weights.begin(), weights.end());
  const int n = count_dist(rng) + 1;

  std::bernoulli_distribution has_color(config.color_prob);
  std::bernoulli_distribution has_size(config.size_prob);
  std::bernoulli_distribution has_action(config.action_prob);
  std::uniform_int_distribution<std::size_t> pick_noun(0, lexicon.nouns.size() - 1);
  std::uniform_int_distribution<std::size_t> pick_color(0, lexicon.colors.size() - 1);
  std::uniform_int_distribution<std::size_t> pick_size(0, lexicon.sizes.size() - 1);
  std::uniform_int_distribution<std::size_t> pick_verb(0, lexicon.verbs.size() - 1);

  std::vector<std::size_t> used;
  for (int k = 0; k < n; ++k) {
    std::size_t noun;
    do {
      noun = pick_noun(rng);
    } while (std::find(used.begin(), used.end(), noun) != used.end());
    used.push_back(noun);

    Entity e;
    e.category = lexicon.nouns[noun].lemma;
    e.animacy = lexicon.nouns[noun].animacy;
    if (has_color(rng)) e.color = lexicon.colors[pick_color(rng)];
    if (has_size(rng)) e.size = lexicon.sizes[pick_size(rng)];
    if (e.animacy == Animacy::animate && has_action(rng)) {
      const auto& verb = lexicon.verbs[pick_verb(rng)];
      Action a{verb.lemma, std::nullopt};
      if (verb.transitivity == Transitivity::transitive) {
        std::size_t obj;
        do {
          obj = pick_noun(rng);
        } while (obj == noun);
        a.object = lexicon.nouns[obj].lemma;
      }
      e.action = std::move(a);
    }
    scene.entities.push_back(std::move(e));
  }
  return scene;
}

FeatureMatrix scene_features(const Scene& scene, const WorldConfig& config,
                             Rng& rng, const Lexicon& lexicon) {
  const FeatureLayout layout = FeatureLayout::of(lexicon);
  FeatureMatrix f;
  f.rows = static_cast<std::size_t>(config.regions);
  f.cols = layout.width;
  f.data.assign(f.rows * f.cols, 0.0);
  for (std::size_t r = 0; r < scene.entities.size() && r < f.rows; ++r) {
    const Entity& e = scene.entities[r];
    f.at(r, layout.category + *lexicon.noun_index(e.category)) = 1.0;
    if (e.color) f.at(r, layout.color + *lexicon.color_index(*e.color)) = 1.0;
    if (e.size) f.at(r, layout.size + *lexicon.size_index(*e.size)) = 1.0;
    if (e.action) {
      f.at(r, layout.verb + *lexicon.verb_index(e.action->verb)) = 1.0;
      if (e.action->object)
        f.at(r, layout.object + *lexicon.noun_index(*e.action->object)) = 1.0;
    }
  }
  if (config.noise_sigma > 0.0) {
    std::normal_distribution<double> noise(0.0, config.noise_sigma);
    for (double& v : f.data) v += noise(rng);
  }
  return f;
}

std::vector<CorpusEntry> generate_corpus(std::size_t n_scenes, std::uint64_t seed,
                                         const Lexicon& lexicon,
                                         const WorldConfig& config,
                                         std::int64_t first_id) {
  config.validate();
  std::vector<CorpusEntry> corpus;
  corpus.reserve(n_scenes);
  for (std::size_t i = 0; i < n_scenes; ++i) {
    const std::int64_t id = first_id + static_cast<std::int64_t>(i);
    const std::uint64_t scene_seed = mix_seed(seed, static_cast<std::uint64_t>(id));
    Rng scene_rng(scene_seed);
    Rng ref_rng(mix_seed(scene_seed, 1));
    Rng feat_rng(mix_seed(scene_seed, 2));
    CorpusEntry entry;
    entry.scene = generate_scene(scene_rng, lexicon, config, id);
    entry.scene.rng_seed = scene_seed;
    entry.references =
        render_references(entry.scene, ref_rng, config.n_refs, lexicon, config);
    entry.features = scene_features(entry.scene, config, feat_rng, lexicon);
    corpus.push_back(std::move(entry));
  }
  return corpus;
}

bool is_dependency_tree(const std::vector<DepArc>& arcs, std::size_t n_tokens) {
  if (arcs.size() != n_tokens || n_tokens == 0) return false;
  std::vector<int> head(n_tokens, -2);
  int roots = 0;
  for (const auto& a : arcs) {
    if (a.dependent < 0 || static_cast<std::size_t>(a.dependent) >= n_tokens) return false;
    if (head[a.dependent] != -2) return false;  // two heads
    if (a.head < -1 || a.head >= static_cast<int>(n_tokens) || a.head == a.dependent)
      return false;
    head[a.dependent] = a.head;
    if (a.head == -1) ++roots;
  }
  if (roots != 1) return false;
  for (std::size_t i = 0; i < n_tokens; ++i) {
    int cur = static_cast<int>(i);
    for (std::size_t steps = 0; cur != -1; ++steps) {
      if (steps > n_tokens) return false;  // cycle
      cur = head[cur];
    }
  }
  return true;
}

}  // namespace syncap::world
