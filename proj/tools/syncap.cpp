// syncap: command-line driver for data generation, training, decoding,
// evaluation and experiment matrices.
#include <iostream>
#include <map>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "syncap/checkpoint.hpp"
#include "syncap/config.hpp"
#include "syncap/corpus_io.hpp"
#include "syncap/experiment.hpp"
#include "syncap/report.hpp"

using namespace syncap;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Common {
  std::string config;
  std::vector<std::string> overrides;
};

harness::ExperimentConfig resolve(const Common& c) {
  harness::KeyValues kv = c.config.empty() ? harness::KeyValues{} : harness::KeyValues::load(c.config);
  for (const auto& o : c.overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got " + o);
    kv.set(o.substr(0, eq), o.substr(eq + 1));
  }
  return harness::ExperimentConfig::from_kv(kv);
}

void add_common(CLI::App* app, Common& c) {
  app->add_option("-c,--config", c.config, "key = value config file")->check(CLI::ExistingFile);
  app->add_option("--set", c.overrides, "override a config key (key=value), repeatable");
}

world::Lexicon lexicon() {
  auto lex = world::Lexicon::default_lexicon();
  lex.validate();
  return lex;
}

std::vector<cap::DecodedCaption> read_decodes(const fs::path& path) {
  std::vector<cap::DecodedCaption> out;
  std::istringstream in(harness::read_text(path));
  std::string line;
  while (std::getline(in, line))
    if (!line.empty()) out.push_back(cap::decoded_from_json(line));
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Syntactically planned caption generation on a synthetic world"};
  app.require_subcommand(1);
  std::string stage = "arguments";

  Common gen_c;
  std::string gen_out;
  auto* gen = app.add_subcommand("gen-data", "generate the synthetic corpus");
  add_common(gen, gen_c);
  gen->add_option("-o,--out", gen_out, "corpus JSONL")->required();

  Common split_c;
  std::string split_corpus, split_out;
  int split_set = 0;
  auto* bsplit = app.add_subcommand("build-splits", "held-out pair split and vocabulary");
  add_common(bsplit, split_c);
  bsplit->add_option("--corpus", split_corpus)->required()->check(CLI::ExistingFile);
  bsplit->add_option("--heldout-set", split_set, "held-out pair set 0..3");
  bsplit->add_option("-o,--out", split_out, "output prefix (writes <out>.jsonl and <out>.vocab)")->required();

  Common train_c;
  std::string train_corpus, train_split, train_vocab, train_out, train_approach = "standard",
                                                                 train_tagset = "none";
  std::uint64_t train_seed = 1;
  auto* tr = app.add_subcommand("train", "train one captioner with early stopping");
  add_common(tr, train_c);
  tr->add_option("--corpus", train_corpus)->required()->check(CLI::ExistingFile);
  tr->add_option("--split", train_split)->required()->check(CLI::ExistingFile);
  tr->add_option("--vocab", train_vocab)->required()->check(CLI::ExistingFile);
  tr->add_option("--approach", train_approach);
  tr->add_option("--tagset", train_tagset);
  tr->add_option("--seed", train_seed);
  tr->add_option("-o,--out", train_out, "checkpoint path")->required();

  Common dec_c;
  std::string dec_ckpt, dec_corpus, dec_split, dec_vocab, dec_out, dec_partition;
  auto* dec = app.add_subcommand("decode", "beam-decode a partition (JSONL output)");
  add_common(dec, dec_c);
  dec->add_option("--checkpoint", dec_ckpt)->required()->check(CLI::ExistingFile);
  dec->add_option("--corpus", dec_corpus)->required()->check(CLI::ExistingFile);
  dec->add_option("--split", dec_split)->required()->check(CLI::ExistingFile);
  dec->add_option("--vocab", dec_vocab)->required()->check(CLI::ExistingFile);
  dec->add_option("--partition", dec_partition, "val, test or heldout (default from config)");
  dec->add_option("-o,--out", dec_out)->required();

  Common ev_c;
  std::string ev_decode, ev_corpus, ev_split, ev_out, ev_approach = "standard", ev_tagset = "none";
  auto* ev = app.add_subcommand("evaluate", "metrics for a decode file");
  add_common(ev, ev_c);
  ev->add_option("--decode", ev_decode)->required()->check(CLI::ExistingFile);
  ev->add_option("--corpus", ev_corpus)->required()->check(CLI::ExistingFile);
  ev->add_option("--split", ev_split)->required()->check(CLI::ExistingFile);
  ev->add_option("--approach", ev_approach);
  ev->add_option("--tagset", ev_tagset);
  ev->add_option("-o,--out", ev_out, "metrics JSON (stdout when omitted)");

  Common ex_c;
  std::string ex_out;
  bool ex_quiet = false;
  auto* ex = app.add_subcommand("experiment", "run the full matrix (resumable)");
  add_common(ex, ex_c);
  ex->add_option("-o,--out", ex_out, "experiment directory")->required();
  ex->add_flag("-q,--quiet", ex_quiet);

  std::vector<std::string> rep_dirs;
  std::string rep_out;
  auto* rep = app.add_subcommand("report", "aggregate experiment directories");
  rep->add_option("dirs", rep_dirs, "experiment directories")->required();
  rep->add_option("-o,--out", rep_out, "write report.txt, curves.csv, summary.json here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*gen) {
      stage = "config";
      const auto cfg = resolve(gen_c);
      stage = "gen-data";
      const auto corpus = world::generate_corpus(static_cast<std::size_t>(cfg.scenes), cfg.world_seed,
                                                 lexicon(), cfg.world);
      world::write_corpus(gen_out, corpus);
    } else if (*bsplit) {
      stage = "config";
      const auto cfg = resolve(split_c);
      stage = "build-splits";
      const auto lex = lexicon();
      const auto corpus = world::read_corpus(split_corpus);
      auto spec = splits::SplitSpec::default_spec(lex);
      spec.active_set = split_set;
      const auto split = splits::build_splits(corpus, spec, cfg.ratios, cfg.split_seed, lex);
      for (const auto& w : split.warnings) std::cerr << "warning: " << w << "\n";
      splits::write_split_manifest(split_out + ".jsonl", split);
      planner::Vocabulary::build(corpus, split.train,
                                 {world::Tagset::pos, world::Tagset::dep, world::Tagset::chunk,
                                  world::Tagset::ccg, world::Tagset::idle})
          .save(split_out + ".vocab");
    } else if (*tr) {
      stage = "config";
      const auto cfg = resolve(train_c);
      const auto approach = planner::approach_from_string(train_approach);
      const auto tagset = planner::effective_tagset(approach, world::tagset_from_string(train_tagset));
      stage = "train";
      const auto lex = lexicon();
      const auto corpus = world::read_corpus(train_corpus);
      const auto split = splits::read_split_manifest(train_split, lex);
      const auto vocab = planner::Vocabulary::load(train_vocab);
      auto mc = cfg.model;
      mc.vocab = static_cast<int>(vocab.size());
      mc.feature_dim = static_cast<int>(corpus.front().features.cols);
      mc.regions = cfg.world.regions;
      mc.init_seed = train_seed;
      auto model = cap::make_captioner<float>(mc);
      auto tc = cfg.train;
      tc.seed = train_seed;
      const auto result = train::train(
          *model, train::make_training_data(corpus, split.train, approach, tagset, vocab),
          train::make_validation_data(corpus, split.val), vocab, tc,
          [](const train::EpochRecord& e) {
            std::cerr << "epoch " << e.epoch << " loss " << e.loss << " val BLEU " << e.val_bleu << "\n";
          });
      const json meta{{"model", json::parse(mc.to_json())},
                      {"approach", planner::to_string(approach)},
                      {"tagset", world::to_string(tagset)},
                      {"best_epoch", result.best_epoch}};
      num::save_checkpoint(train_out, model->params(), meta.dump());
    } else if (*dec) {
      stage = "config";
      const auto cfg = resolve(dec_c);
      stage = "decode";
      const auto lex = lexicon();
      const auto meta = json::parse(num::read_checkpoint_metadata(dec_ckpt));
      auto model = cap::make_captioner<float>(cap::ModelConfig::from_json(meta.at("model").dump()));
      num::load_checkpoint(dec_ckpt, model->params());
      const auto approach = planner::approach_from_string(meta.at("approach").get<std::string>());
      const auto tagset = world::tagset_from_string(meta.at("tagset").get<std::string>());
      const auto corpus = world::read_corpus(dec_corpus);
      const auto split = splits::read_split_manifest(dec_split, lex);
      const auto vocab = planner::Vocabulary::load(dec_vocab);
      const auto partition =
          dec_partition.empty() ? cfg.eval_partition : harness::eval_partition_from_string(dec_partition);
      std::map<std::int64_t, const world::CorpusEntry*> by_id;
      for (const auto& e : corpus) by_id[e.scene.id] = &e;
      auto opts = cfg.decode;
      const auto kind = planner::decode_stream(approach);
      opts.beam.max_len = cfg.max_len > 0 ? cfg.max_len
                                          : cap::default_max_len(kind == planner::StreamKind::sequential ||
                                                                 kind == planner::StreamKind::interleave);
      std::string lines;
      for (auto id : harness::partition_scenes(split, partition)) {
        auto it = by_id.find(id);
        if (it == by_id.end()) throw IndexError("scene " + std::to_string(id) + " not in corpus");
        for (auto& c : cap::decode_scene(*model, it->second->features, vocab, kind, tagset, opts)) {
          c.scene = id;
          lines += cap::to_json(c) + "\n";
        }
      }
      harness::write_atomic(dec_out, lines);
    } else if (*ev) {
      stage = "config";
      const auto cfg = resolve(ev_c);
      stage = "evaluate";
      const auto lex = lexicon();
      const auto approach = planner::approach_from_string(ev_approach);
      const auto text = harness::evaluate_decodes(
          read_decodes(ev_decode), world::read_corpus(ev_corpus), splits::read_split_manifest(ev_split, lex),
          approach, world::tagset_from_string(ev_tagset), cfg.recall_ks, lex);
      if (ev_out.empty()) std::cout << text;
      else harness::write_atomic(ev_out, text);
    } else if (*ex) {
      stage = "config";
      const auto cfg = resolve(ex_c);
      stage = "experiment";
      const auto manifest = harness::run_experiment(cfg, ex_out, [&](const std::string& s) {
        if (!ex_quiet) std::cerr << s << "\n";
      });
      int failed = 0;
      for (const auto& r : manifest.runs)
        if (r.status != "done") {
          ++failed;
          std::cerr << "syncap: run " << r.id << " failed in stage " << r.failed_stage << ": " << r.error
                    << "\n";
        }
      if (failed) return 1;
    } else if (*rep) {
      stage = "report";
      std::vector<fs::path> dirs(rep_dirs.begin(), rep_dirs.end());
      const auto r = harness::aggregate(dirs);
      if (rep_out.empty()) std::cout << harness::render_table(r);
      else harness::write_report(r, rep_out);
    }
  } catch (const std::exception& e) {
    std::cerr << "syncap: " << stage << " failed: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
