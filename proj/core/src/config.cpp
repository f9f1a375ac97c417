#include "syncap/config.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

namespace syncap::harness {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, ',')) {
    auto t = trim(item);
    if (!t.empty()) out.push_back(t);
  }
  return out;
}

std::string fmt(double v) {
  char buf[64];
  auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

template <class T, class F>
std::string join(const std::vector<T>& xs, F f) {
  std::string s;
  for (const auto& x : xs) {
    if (!s.empty()) s += ",";
    s += f(x);
  }
  return s;
}

}  // namespace

KeyValues KeyValues::parse(const std::string& text) {
  KeyValues kv;
  std::istringstream in(text);
  std::string line;
  int n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (auto h = line.find('#'); h != std::string::npos) line.resize(h);
    const auto t = trim(line);
    if (t.empty()) continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(n) + ": expected key = value");
    auto key = trim(std::string_view(t).substr(0, eq));
    auto value = trim(std::string_view(t).substr(eq + 1));
    if (key.empty()) throw ConfigError("line " + std::to_string(n) + ": empty key");
    if (kv.has(key)) throw ConfigError("line " + std::to_string(n) + ": duplicate key " + key);
    kv.values_[key] = value;
  }
  return kv;
}

KeyValues KeyValues::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

const std::string& KeyValues::get(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("missing key " + key);
  return it->second;
}

std::string KeyValues::dump() const {
  std::string s;
  for (const auto& [k, v] : values_) s += k + " = " + v + "\n";
  return s;
}

std::string_view to_string(EvalPartition p) {
  switch (p) {
    case EvalPartition::val: return "val";
    case EvalPartition::test: return "test";
    case EvalPartition::heldout: return "heldout";
  }
  return "?";
}

EvalPartition eval_partition_from_string(std::string_view s) {
  if (s == "val") return EvalPartition::val;
  if (s == "test") return EvalPartition::test;
  if (s == "heldout") return EvalPartition::heldout;
  throw ConfigError("unknown evaluation partition: " + std::string(s));
}

std::string Cell::label() const {
  return std::string(planner::to_string(approach)) + "-" + std::string(world::to_string(tagset));
}

namespace {

// Typed accessors that name the key in errors.
struct Reader {
  const KeyValues& kv;
  std::set<std::string> used;

  bool take(const std::string& key) {
    if (!kv.has(key)) return false;
    used.insert(key);
    return true;
  }
  template <class T>
  T number(const std::string& key, const std::string& s) {
    T v{};
    const auto* end = s.data() + s.size();
    auto r = std::from_chars(s.data(), end, v);
    if (r.ec != std::errc() || r.ptr != end) throw ConfigError(key + ": not a number: " + s);
    return v;
  }
  void get(const std::string& key, int& v) {
    if (take(key)) v = number<int>(key, kv.get(key));
  }
  void get(const std::string& key, std::uint64_t& v) {
    if (take(key)) v = number<std::uint64_t>(key, kv.get(key));
  }
  void get(const std::string& key, double& v) {
    if (take(key)) v = number<double>(key, kv.get(key));
  }
  void get(const std::string& key, bool& v) {
    if (!take(key)) return;
    const auto& s = kv.get(key);
    if (s == "true" || s == "1") v = true;
    else if (s == "false" || s == "0") v = false;
    else throw ConfigError(key + ": expected true or false, got " + s);
  }
  template <class T, class F>
  void list(const std::string& key, std::vector<T>& v, F parse) {
    if (!take(key)) return;
    v.clear();
    try {
      for (const auto& item : split_list(kv.get(key))) v.push_back(parse(item));
    } catch (const ConfigError& e) {
      const std::string what = e.what();
      throw ConfigError(what.rfind(key, 0) == 0 ? what : key + ": " + what);
    }
  }
  template <class F>
  void with(const std::string& key, F f) {
    if (!take(key)) return;
    try {
      f(kv.get(key));
    } catch (const ConfigError& e) {
      throw ConfigError(key + ": " + e.what());
    }
  }
};

}  // namespace

ExperimentConfig ExperimentConfig::from_kv(const KeyValues& kv) {
  ExperimentConfig c;
  Reader r{kv, {}};
  r.get("scenes", c.scenes);
  r.get("world_seed", c.world_seed);
  r.get("world.max_entities", c.world.max_entities);
  r.list("world.entity_count_weights", c.world.entity_count_weights,
         [&](const std::string& s) { return r.number<double>("world.entity_count_weights", s); });
  r.get("world.color_prob", c.world.color_prob);
  r.get("world.size_prob", c.world.size_prob);
  r.get("world.action_prob", c.world.action_prob);
  r.get("world.mention_prob", c.world.mention_prob);
  r.get("world.copular_prob", c.world.copular_prob);
  r.get("world.n_refs", c.world.n_refs);
  r.get("world.regions", c.world.regions);
  r.get("world.noise_sigma", c.world.noise_sigma);

  r.list("heldout_sets", c.heldout_sets,
         [&](const std::string& s) { return r.number<int>("heldout_sets", s); });
  r.get("split_seed", c.split_seed);
  r.get("split.train", c.ratios.train);
  r.get("split.val", c.ratios.val);
  r.get("split.test", c.ratios.test);

  r.list("approaches", c.approaches, [](const std::string& s) { return planner::approach_from_string(s); });
  r.list("tagsets", c.tagsets, [](const std::string& s) { return world::tagset_from_string(s); });
  r.list("seeds", c.seeds, [&](const std::string& s) { return r.number<std::uint64_t>("seeds", s); });

  r.with("model.backend", [&](const std::string& s) { c.model.backend = cap::backend_from_string(s); });
  r.get("model.embed", c.model.embed);
  r.get("model.hidden", c.model.hidden);
  r.get("model.attention", c.model.attention);
  r.get("model.layers", c.model.layers);
  r.get("model.heads", c.model.heads);
  r.get("model.d_model", c.model.d_model);
  r.get("model.ff", c.model.ff);
  r.get("model.ranker", c.model.ranker);
  r.get("model.rank_dim", c.model.rank_dim);

  r.get("train.batch_size", c.train.batch_size);
  r.get("train.max_epochs", c.train.max_epochs);
  r.get("train.patience", c.train.patience);
  r.get("train.lr", c.train.adam.lr);
  r.get("train.beta1", c.train.adam.beta1);
  r.get("train.beta2", c.train.adam.beta2);
  r.get("train.eps", c.train.adam.eps);
  r.get("train.clip_norm", c.train.adam.clip_norm);
  r.get("train.warmup_steps", c.train.warmup_steps);
  r.get("train.rank_weight", c.train.rank_weight);
  r.get("train.margin", c.train.margin);
  r.with("train.pooling", [&](const std::string& s) {
    c.train.pooling = ranker::pooling_from_string(s);
    c.decode.pooling = c.train.pooling;
  });
  r.get("train.val_max_len", c.train.val_max_len);
  r.get("train.early_stopping", c.train.early_stopping);

  r.get("beam.size", c.decode.beam.beam);
  r.get("beam.top_k", c.decode.beam.top_k);
  r.get("beam.max_len", c.max_len);
  r.get("beam.length_norm", c.decode.beam.length_norm);
  r.get("rerank", c.decode.rerank);
  r.get("rerank.lambda", c.decode.rerank_lambda);

  r.with("eval.partition", [&](const std::string& s) { c.eval_partition = eval_partition_from_string(s); });
  r.list("eval.recall_ks", c.recall_ks, [&](const std::string& s) { return r.number<int>("eval.recall_ks", s); });
  r.get("retrieval.gallery", c.retrieval_gallery);
  r.list("retrieval.ks", c.retrieval_ks, [&](const std::string& s) { return r.number<int>("retrieval.ks", s); });

  for (const auto& [k, v] : kv.entries())
    if (!r.used.count(k)) throw ConfigError("unknown config key " + k);
  c.validate();
  return c;
}

ExperimentConfig ExperimentConfig::load(const std::filesystem::path& path) {
  return from_kv(KeyValues::load(path));
}

KeyValues ExperimentConfig::to_kv() const {
  KeyValues kv;
  auto b = [](bool x) { return std::string(x ? "true" : "false"); };
  auto i = [](auto x) { return std::to_string(x); };
  kv.set("scenes", i(scenes));
  kv.set("world_seed", i(world_seed));
  kv.set("world.max_entities", i(world.max_entities));
  kv.set("world.entity_count_weights", join(world.entity_count_weights, fmt));
  kv.set("world.color_prob", fmt(world.color_prob));
  kv.set("world.size_prob", fmt(world.size_prob));
  kv.set("world.action_prob", fmt(world.action_prob));
  kv.set("world.mention_prob", fmt(world.mention_prob));
  kv.set("world.copular_prob", fmt(world.copular_prob));
  kv.set("world.n_refs", i(world.n_refs));
  kv.set("world.regions", i(world.regions));
  kv.set("world.noise_sigma", fmt(world.noise_sigma));
  kv.set("heldout_sets", join(heldout_sets, i));
  kv.set("split_seed", i(split_seed));
  kv.set("split.train", fmt(ratios.train));
  kv.set("split.val", fmt(ratios.val));
  kv.set("split.test", fmt(ratios.test));
  kv.set("approaches", join(approaches, [](auto a) { return std::string(planner::to_string(a)); }));
  kv.set("tagsets", join(tagsets, [](auto t) { return std::string(world::to_string(t)); }));
  kv.set("seeds", join(seeds, i));
  kv.set("model.backend", std::string(cap::to_string(model.backend)));
  kv.set("model.embed", i(model.embed));
  kv.set("model.hidden", i(model.hidden));
  kv.set("model.attention", i(model.attention));
  kv.set("model.layers", i(model.layers));
  kv.set("model.heads", i(model.heads));
  kv.set("model.d_model", i(model.d_model));
  kv.set("model.ff", i(model.ff));
  kv.set("model.ranker", b(model.ranker));
  kv.set("model.rank_dim", i(model.rank_dim));
  kv.set("train.batch_size", i(train.batch_size));
  kv.set("train.max_epochs", i(train.max_epochs));
  kv.set("train.patience", i(train.patience));
  kv.set("train.lr", fmt(train.adam.lr));
  kv.set("train.beta1", fmt(train.adam.beta1));
  kv.set("train.beta2", fmt(train.adam.beta2));
  kv.set("train.eps", fmt(train.adam.eps));
  kv.set("train.clip_norm", fmt(train.adam.clip_norm));
  kv.set("train.warmup_steps", i(train.warmup_steps));
  kv.set("train.rank_weight", fmt(train.rank_weight));
  kv.set("train.margin", fmt(train.margin));
  kv.set("train.pooling", std::string(ranker::to_string(train.pooling)));
  kv.set("train.val_max_len", i(train.val_max_len));
  kv.set("train.early_stopping", b(train.early_stopping));
  kv.set("beam.size", i(decode.beam.beam));
  kv.set("beam.top_k", i(decode.beam.top_k));
  kv.set("beam.max_len", i(max_len));
  kv.set("beam.length_norm", b(decode.beam.length_norm));
  kv.set("rerank", b(decode.rerank));
  kv.set("rerank.lambda", fmt(decode.rerank_lambda));
  kv.set("eval.partition", std::string(to_string(eval_partition)));
  kv.set("eval.recall_ks", join(recall_ks, i));
  kv.set("retrieval.gallery", i(retrieval_gallery));
  kv.set("retrieval.ks", join(retrieval_ks, i));
  return kv;
}

void ExperimentConfig::validate() const {
  auto fail = [](const std::string& key, const std::string& why) {
    throw ConfigError(key + ": " + why);
  };
  if (scenes < 1) fail("scenes", "must be positive");
  try {
    world.validate();
  } catch (const ConfigError& e) {
    fail("world", e.what());
  }
  if (heldout_sets.empty()) fail("heldout_sets", "needs at least one set");
  for (int s : heldout_sets)
    if (s < 0 || s > 3) fail("heldout_sets", "set index " + std::to_string(s) + " outside 0..3");
  if (std::set<int>(heldout_sets.begin(), heldout_sets.end()).size() != heldout_sets.size())
    fail("heldout_sets", "duplicate set");
  try {
    ratios.validate();
  } catch (const ConfigError& e) {
    fail("split", e.what());
  }
  if (approaches.empty()) fail("approaches", "needs at least one approach");
  if (tagsets.empty()) fail("tagsets", "needs at least one tag set");
  for (auto a : approaches)
    if (a != planner::Approach::standard)
      for (auto t : tagsets)
        if (t == world::Tagset::none) fail("tagsets", "none is only valid for the standard approach");
  if (seeds.empty()) fail("seeds", "needs at least one seed");
  if (std::set<std::uint64_t>(seeds.begin(), seeds.end()).size() != seeds.size())
    fail("seeds", "duplicate seed");
  if (model.embed < 1 || model.hidden < 1 || model.attention < 0 || model.layers < 1 ||
      model.heads < 1 || model.d_model < 1 || model.ff < 1 || model.rank_dim < 1)
    fail("model", "sizes must be positive");
  if (model.backend == cap::Backend::transformer && model.d_model % model.heads != 0)
    fail("model.heads", "must divide model.d_model");
  if (model.ranker && model.backend != cap::Backend::recurrent)
    fail("model.ranker", "only the recurrent backend has sentence states");
  if (model.ranker)
    for (auto a : approaches)
      if (a == planner::Approach::multitask) fail("model.ranker", "not supported with multitask");
  try {
    train.validate();
    decode.beam.validate();
  } catch (const ConfigError& e) {
    fail("train/beam", e.what());
  }
  if (max_len < 0) fail("beam.max_len", "must be non-negative");
  if (decode.rerank && !model.ranker) fail("rerank", "needs model.ranker = true");
  if (recall_ks.empty()) fail("eval.recall_ks", "needs at least one K");
  for (int k : recall_ks)
    if (k < 1 || k > decode.beam.top_k) fail("eval.recall_ks", "K must lie in 1..beam.top_k");
  if (retrieval_gallery < 0) fail("retrieval.gallery", "must be non-negative");
  if (retrieval_gallery > 0 && !model.ranker) fail("retrieval.gallery", "needs model.ranker = true");
  for (int k : retrieval_ks)
    if (k < 1) fail("retrieval.ks", "K must be positive");
}

std::string content_hash(const std::string& text) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string ExperimentConfig::hash() const { return content_hash(to_kv().dump()); }

std::vector<Cell> ExperimentConfig::cells() const {
  std::vector<Cell> out;
  for (auto a : approaches)
    for (auto t : tagsets) {
      Cell c{a, a == planner::Approach::standard ? world::Tagset::none : t};
      if (std::find(out.begin(), out.end(), c) == out.end()) out.push_back(c);
    }
  return out;
}

}  // namespace syncap::harness
