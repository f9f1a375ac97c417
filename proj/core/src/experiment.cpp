#include "syncap/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "syncap/checkpoint.hpp"
#include "syncap/corpus_io.hpp"
#include "syncap/metrics.hpp"

#ifndef SYNCAP_VERSION
#define SYNCAP_VERSION "unknown"
#endif

namespace syncap::harness {

using nlohmann::json;
namespace fs = std::filesystem;

std::string version_string() { return SYNCAP_VERSION; }

void write_atomic(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    out << text;
    if (!out.flush()) throw IoError("write failed: " + tmp.string());
  }
  fs::rename(tmp, path);
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string run_id(const Cell& cell, std::uint64_t seed, int heldout_set) {
  return cell.label() + "/seed" + std::to_string(seed) + "/set" + std::to_string(heldout_set);
}

const RunRecord* RunManifest::find(const std::string& id) const {
  for (const auto& r : runs)
    if (r.id == id) return &r;
  return nullptr;
}

std::string RunManifest::to_json() const {
  json runs_j = json::array();
  for (const auto& r : runs) {
    runs_j.push_back({{"id", r.id},
                      {"approach", planner::to_string(r.cell.approach)},
                      {"tagset", world::to_string(r.cell.tagset)},
                      {"seed", r.seed},
                      {"heldout_set", r.heldout_set},
                      {"status", r.status},
                      {"failed_stage", r.failed_stage},
                      {"error", r.error},
                      {"checkpoint", r.checkpoint},
                      {"decode", r.decode},
                      {"metrics", r.metrics},
                      {"timings", r.timings}});
  }
  json j{{"config_hash", config_hash},
         {"version", version},
         {"timings", timings},
         {"runs", runs_j},
         {"warnings", warnings}};
  return j.dump(2) + "\n";
}

RunManifest RunManifest::from_json(const std::string& text) {
  RunManifest m;
  try {
    const auto j = json::parse(text);
    m.config_hash = j.at("config_hash").get<std::string>();
    m.version = j.at("version").get<std::string>();
    m.timings = j.at("timings").get<std::map<std::string, double>>();
    m.warnings = j.at("warnings").get<std::vector<std::string>>();
    for (const auto& r : j.at("runs")) {
      RunRecord rec;
      rec.id = r.at("id").get<std::string>();
      rec.cell.approach = planner::approach_from_string(r.at("approach").get<std::string>());
      rec.cell.tagset = world::tagset_from_string(r.at("tagset").get<std::string>());
      rec.seed = r.at("seed").get<std::uint64_t>();
      rec.heldout_set = r.at("heldout_set").get<int>();
      rec.status = r.at("status").get<std::string>();
      rec.failed_stage = r.at("failed_stage").get<std::string>();
      rec.error = r.at("error").get<std::string>();
      rec.checkpoint = r.at("checkpoint").get<std::string>();
      rec.decode = r.at("decode").get<std::string>();
      rec.metrics = r.at("metrics").get<std::string>();
      rec.timings = r.at("timings").get<std::map<std::string, double>>();
      m.runs.push_back(std::move(rec));
    }
  } catch (const json::exception& e) {
    throw IoError(std::string("malformed manifest: ") + e.what());
  }
  return m;
}

RunManifest RunManifest::load(const fs::path& dir) {
  return from_json(read_text(dir / "manifest.json"));
}

void RunManifest::save(const fs::path& dir) const { write_atomic(dir / "manifest.json", to_json()); }

std::vector<std::int64_t> partition_scenes(const splits::DatasetSplit& split, EvalPartition p) {
  switch (p) {
    case EvalPartition::val: return split.val;
    case EvalPartition::test: return split.test;
    case EvalPartition::heldout: {
      auto ids = split.val;
      ids.insert(ids.end(), split.test.begin(), split.test.end());
      return ids;
    }
  }
  return {};
}

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

const std::vector<world::Tagset> kAllTagsets = {world::Tagset::pos, world::Tagset::dep,
                                                 world::Tagset::chunk, world::Tagset::ccg,
                                                 world::Tagset::idle};

json evaluate_json(const std::vector<cap::DecodedCaption>& decoded,
                   const std::vector<world::CorpusEntry>& corpus,
                   const splits::DatasetSplit& split, planner::Approach approach,
                   world::Tagset tagset, const std::vector<int>& recall_ks,
                   const world::Lexicon& lex) {
  if (decoded.empty()) throw EmptyInputError("no decoded captions to evaluate");
  if (recall_ks.empty()) throw ConfigError("no recall K given");
  std::map<std::int64_t, const world::CorpusEntry*> by_id;
  for (const auto& e : corpus) by_id[e.scene.id] = &e;

  // Group by scene in first-appearance order, ranks ascending.
  eval::GenerationSet gens;
  std::map<std::int64_t, std::size_t> slot;
  std::vector<std::vector<const cap::DecodedCaption*>> rows;
  for (const auto& d : decoded) {
    auto [it, fresh] = slot.emplace(d.scene, rows.size());
    if (fresh) rows.emplace_back();
    rows[it->second].push_back(&d);
  }
  std::vector<std::int64_t> scenes;
  for (auto& r : rows) {
    std::stable_sort(r.begin(), r.end(), [](auto* a, auto* b) { return a->rank < b->rank; });
    const auto id = r.front()->scene;
    if (!by_id.count(id)) throw IndexError("decoded scene " + std::to_string(id) + " not in corpus");
    eval::SceneGenerations sg;
    sg.scene = id;
    for (const auto* d : r) sg.captions.push_back(eval::make_caption(d->tokens, d->tags, d->wellformed, lex));
    gens.push_back(std::move(sg));
    scenes.push_back(id);
  }
  const int k_curve = *std::max_element(recall_ks.begin(), recall_ks.end());

  json out;
  out["scenes"] = scenes.size();
  json recall = json::object(), mean_recall = json::object(), categories = json::object();
  json pair_scenes = json::object(), curves = json::object();
  std::vector<std::string> warnings;
  std::map<int, std::vector<eval::PairRecall>> per_k;
  for (const auto& pair : split.spec.active()) {
    const auto subset = eval::evaluation_subset(corpus, scenes, pair, lex);
    const std::set<std::int64_t> members(subset.begin(), subset.end());
    eval::GenerationSet g;
    for (const auto& s : gens)
      if (members.count(s.scene)) g.push_back(s);
    pair_scenes[pair.label()] = g.size();
    if (g.empty()) {
      warnings.push_back("pair '" + pair.label() + "' has no evaluation scenes");
      continue;
    }
    for (int k : recall_ks) {
      const double r = eval::recall_at_k(g, pair, k, lex);
      recall[std::to_string(k)][pair.label()] = r;
      per_k[k].push_back({pair, r});
    }
    const int n_refs = static_cast<int>(by_id.at(g.front().scene)->references.size());
    json pts = json::array();
    for (auto [j, r] : eval::min_importance_curve(g, by_id, pair, k_curve, n_refs, lex))
      pts.push_back({j, r});
    curves[pair.label()] = pts;
  }
  for (const auto& [k, recalls] : per_k) {
    double sum = 0;
    for (const auto& pr : recalls) sum += pr.recall;
    mean_recall[std::to_string(k)] = sum / static_cast<double>(recalls.size());
    json cats = json::object();
    for (const auto& [c, v] : eval::category_breakdown(recalls)) cats[std::string(splits::to_string(c))] = v;
    categories[std::to_string(k)] = cats;
  }
  out["recall"] = recall;
  out["mean_recall"] = mean_recall;
  out["categories"] = categories;
  out["pair_scenes"] = pair_scenes;
  out["curves"] = curves;
  out["curve_k"] = k_curve;

  std::vector<eval::Tokens> top1;
  std::vector<std::vector<eval::Tokens>> topk, refs_tokens;
  std::vector<std::vector<world::Reference>> refs;
  std::vector<const eval::GeneratedCaption*> firsts;
  int wellformed = 0;
  for (const auto& s : gens) {
    top1.push_back(s.captions.front().tokens);
    firsts.push_back(&s.captions.front());
    wellformed += s.captions.front().wellformed ? 1 : 0;
    std::vector<eval::Tokens> k5;
    for (std::size_t i = 0; i < s.captions.size() && i < 5; ++i) k5.push_back(s.captions[i].tokens);
    topk.push_back(std::move(k5));
    const auto& entry = *by_id.at(s.scene);
    refs.push_back(entry.references);
    std::vector<eval::Tokens> rt;
    for (const auto& r : entry.references) rt.push_back(r.tokens);
    refs_tokens.push_back(std::move(rt));
  }
  out["bleu"] = eval::bleu(top1, refs_tokens);
  out["wellformed"] = static_cast<double>(wellformed) / static_cast<double>(gens.size());
  try {
    out["tag_accuracy"] = eval::tag_accuracy(firsts, approach, planner::effective_tagset(approach, tagset));
  } catch (const NotApplicableError&) {
    out["tag_accuracy"] = nullptr;
  }
  std::vector<eval::Tokens> train_caps;
  for (auto id : split.train) {
    auto it = by_id.find(id);
    if (it == by_id.end()) continue;
    for (const auto& r : it->second->references) train_caps.push_back(r.tokens);
  }
  const auto d = eval::diversity_metrics(top1, topk, train_caps, refs, lex);
  out["diversity"] = {{"asl", d.asl},     {"types", d.types},       {"ttr1", d.ttr1},
                      {"ttr2", d.ttr2},   {"novel", d.novel},       {"coverage", d.coverage},
                      {"local5", d.local5}};
  out["warnings"] = warnings;
  return out;
}

json retrieval_json(cap::Captioner<float>& model, const std::vector<world::CorpusEntry>& gallery,
                    planner::Approach approach, world::Tagset tagset,
                    const planner::Vocabulary& vocab, ranker::Pooling pooling,
                    const std::vector<int>& ks) {
  const auto& rp = model.ranker_params();
  std::vector<std::vector<float>> images, sentences;
  std::vector<int> owner;
  for (std::size_t i = 0; i < gallery.size(); ++i) {
    images.push_back(cap::image_embedding<float>(gallery[i].features, rp));
    for (const auto& ref : gallery[i].references) {
      auto planned = planner::encode(ref, approach, tagset, vocab);
      auto ids = planned.front().ids;
      ids.pop_back();  // states are read up to the last symbol before </s>
      num::Tape<float> tape(false);
      auto states = model.sentence_states(tape, ids);
      const auto& v = ranker::embed_sentence(states, pooling, rp).value();
      sentences.emplace_back(v.data.begin(), v.data.end());
      owner.push_back(static_cast<int>(i));
    }
  }
  const auto r = ranker::retrieval_recall(images, sentences, owner, ks);
  json text = json::object(), image = json::object();
  for (std::size_t i = 0; i < r.ks.size(); ++i) {
    text[std::to_string(r.ks[i])] = r.text[i];
    image[std::to_string(r.ks[i])] = r.image[i];
  }
  return {{"text", text}, {"image", image}, {"gallery", gallery.size()}};
}

struct Shared {
  world::Lexicon lexicon = world::Lexicon::default_lexicon();
  std::vector<world::CorpusEntry> corpus;
  std::vector<world::CorpusEntry> gallery;
  std::map<int, splits::DatasetSplit> splits;
  std::map<int, planner::Vocabulary> vocabs;
};

}  // namespace

std::string evaluate_decodes(const std::vector<cap::DecodedCaption>& decoded,
                             const std::vector<world::CorpusEntry>& corpus,
                             const splits::DatasetSplit& split, planner::Approach approach,
                             world::Tagset tagset, const std::vector<int>& recall_ks,
                             const world::Lexicon& lexicon) {
  return evaluate_json(decoded, corpus, split, approach, tagset, recall_ks, lexicon).dump(2) + "\n";
}

RunManifest run_experiment(const ExperimentConfig& config, const fs::path& dir,
                           const Progress& progress) {
  config.validate();
  auto say = [&](const std::string& s) {
    if (progress) progress(s);
  };
  fs::create_directories(dir);
  const auto hash = config.hash();

  RunManifest manifest;
  if (fs::exists(dir / "manifest.json")) {
    manifest = RunManifest::load(dir);
    if (manifest.config_hash != hash)
      throw ConfigError("directory " + dir.string() + " holds an experiment with config " +
                        manifest.config_hash + ", not " + hash);
    // Failed runs are retried.
    std::erase_if(manifest.runs, [](const RunRecord& r) { return r.status != "done"; });
  }
  manifest.config_hash = hash;
  manifest.version = version_string();
  write_atomic(dir / "config.kv", config.to_kv().dump());
  write_atomic(dir / "config.hash", hash + "\n");
  manifest.save(dir);

  Shared sh;
  sh.lexicon.validate();
  auto t0 = Clock::now();
  sh.corpus = world::generate_corpus(static_cast<std::size_t>(config.scenes), config.world_seed,
                                     sh.lexicon, config.world);
  if (!fs::exists(dir / "corpus.jsonl")) world::write_corpus(dir / "corpus.jsonl", sh.corpus);
  manifest.timings["world"] = seconds_since(t0);

  t0 = Clock::now();
  for (int set : config.heldout_sets) {
    auto spec = splits::SplitSpec::default_spec(sh.lexicon);
    spec.active_set = set;
    auto split = splits::build_splits(sh.corpus, spec, config.ratios, config.split_seed, sh.lexicon);
    for (const auto& w : split.warnings) {
      const auto msg = "set" + std::to_string(set) + ": " + w;
      if (std::find(manifest.warnings.begin(), manifest.warnings.end(), msg) == manifest.warnings.end())
        manifest.warnings.push_back(msg);
    }
    const auto tag = "set" + std::to_string(set);
    fs::create_directories(dir / "splits");
    write_split_manifest(dir / "splits" / (tag + ".jsonl"), split);
    auto vocab = planner::Vocabulary::build(sh.corpus, split.train, kAllTagsets);
    vocab.save(dir / "splits" / (tag + ".vocab"));
    sh.vocabs.emplace(set, std::move(vocab));
    sh.splits.emplace(set, std::move(split));
  }
  manifest.timings["splits"] = seconds_since(t0);

  if (config.retrieval_gallery > 0) {
    t0 = Clock::now();
    sh.gallery = world::generate_corpus(static_cast<std::size_t>(config.retrieval_gallery),
                                        world::mix_seed(config.world_seed, 0x9a11e7),
                                        sh.lexicon, config.world, config.scenes);
    if (!fs::exists(dir / "gallery.jsonl")) world::write_corpus(dir / "gallery.jsonl", sh.gallery);
    manifest.timings["gallery"] = seconds_since(t0);
  }
  manifest.save(dir);

  std::map<std::int64_t, const world::CorpusEntry*> by_id;
  for (const auto& e : sh.corpus) by_id[e.scene.id] = &e;

  for (const auto& cell : config.cells()) {
    for (auto seed : config.seeds) {
      for (int set : config.heldout_sets) {
        const auto id = run_id(cell, seed, set);
        if (const auto* done = manifest.find(id);
            done && fs::exists(dir / done->metrics) && fs::exists(dir / done->decode)) {
          say(id + ": already done");
          continue;
        }
        std::erase_if(manifest.runs, [&](const RunRecord& r) { return r.id == id; });
        RunRecord rec;
        rec.id = id;
        rec.cell = cell;
        rec.seed = seed;
        rec.heldout_set = set;
        const fs::path rel = fs::path("runs") / cell.label() / ("seed" + std::to_string(seed)) /
                             ("set" + std::to_string(set));
        fs::create_directories(dir / rel);
        std::string stage = "setup";
        try {
          const auto& split = sh.splits.at(set);
          const auto& vocab = sh.vocabs.at(set);
          const auto tagset = planner::effective_tagset(cell.approach, cell.tagset);

          stage = "train";
          t0 = Clock::now();
          auto mc = config.model;
          mc.vocab = static_cast<int>(vocab.size());
          mc.feature_dim = static_cast<int>(sh.corpus.front().features.cols);
          mc.regions = config.world.regions;
          mc.init_seed = seed;
          auto model = cap::make_captioner<float>(mc);
          auto tc = config.train;
          tc.seed = seed;
          const auto data = train::make_training_data(sh.corpus, split.train, cell.approach, tagset, vocab);
          const auto val = train::make_validation_data(sh.corpus, split.val);
          const auto result = train::train(*model, data, val, vocab, tc);
          json history = json::array();
          for (const auto& e : result.history)
            history.push_back({{"epoch", e.epoch}, {"loss", e.loss}, {"rank_loss", e.rank_loss},
                               {"val_bleu", e.val_bleu}});
          const json meta{{"model", json::parse(mc.to_json())},
                          {"run", id},
                          {"vocab", "splits/set" + std::to_string(set) + ".vocab"},
                          {"approach", planner::to_string(cell.approach)},
                          {"tagset", world::to_string(tagset)},
                          {"best_epoch", result.best_epoch}};
          rec.checkpoint = (rel / "model.ckpt").string();
          num::save_checkpoint(dir / rec.checkpoint, model->params(), meta.dump());
          rec.timings["train"] = seconds_since(t0);

          stage = "decode";
          t0 = Clock::now();
          auto opts = config.decode;
          const auto kind = planner::decode_stream(cell.approach);
          opts.beam.max_len = config.max_len > 0
                                  ? config.max_len
                                  : cap::default_max_len(kind == planner::StreamKind::sequential ||
                                                         kind == planner::StreamKind::interleave);
          std::vector<cap::DecodedCaption> decoded;
          std::string lines;
          for (auto scene : partition_scenes(split, config.eval_partition)) {
            for (auto& c : cap::decode_scene(*model, by_id.at(scene)->features, vocab, kind, tagset, opts)) {
              c.scene = scene;
              lines += cap::to_json(c) + "\n";
              decoded.push_back(std::move(c));
            }
          }
          rec.decode = (rel / "decode.jsonl").string();
          write_atomic(dir / rec.decode, lines);
          rec.timings["decode"] = seconds_since(t0);

          stage = "evaluate";
          t0 = Clock::now();
          auto metrics = evaluate_json(decoded, sh.corpus, split, cell.approach, tagset,
                                       config.recall_ks, sh.lexicon);
          metrics["run"] = id;
          metrics["approach"] = planner::to_string(cell.approach);
          metrics["tagset"] = world::to_string(tagset);
          metrics["seed"] = seed;
          metrics["heldout_set"] = set;
          metrics["partition"] = to_string(config.eval_partition);
          metrics["config_hash"] = hash;
          metrics["training"] = {{"best_epoch", result.best_epoch},
                                 {"best_bleu", result.best_bleu},
                                 {"epochs", result.history.size()},
                                 {"stopped_early", result.stopped_early},
                                 {"history", history}};
          if (config.retrieval_gallery > 0) {
            stage = "retrieval";
            metrics["retrieval"] = retrieval_json(*model, sh.gallery, cell.approach, tagset, vocab,
                                                  config.train.pooling, config.retrieval_ks);
          }
          rec.metrics = (rel / "metrics.json").string();
          write_atomic(dir / rec.metrics, metrics.dump(2) + "\n");
          rec.timings["evaluate"] = seconds_since(t0);
          rec.status = "done";
          say(id + ": done (best epoch " + std::to_string(result.best_epoch) + ")");
        } catch (const std::exception& e) {
          rec.status = "failed";
          rec.failed_stage = stage;
          rec.error = e.what();
          say(id + ": failed in " + stage + ": " + e.what());
        }
        manifest.runs.push_back(std::move(rec));
        manifest.save(dir);
      }
    }
  }
  // Manifest order follows the configured matrix, not completion order.
  std::vector<RunRecord> ordered;
  for (const auto& cell : config.cells())
    for (auto seed : config.seeds)
      for (int set : config.heldout_sets)
        if (const auto* r = manifest.find(run_id(cell, seed, set))) ordered.push_back(*r);
  manifest.runs = std::move(ordered);
  manifest.save(dir);
  return manifest;
}

}  // namespace syncap::harness
