// Acceptance suite. Prints one PASS/FAIL line per criterion; arguments select
// criteria by number (all when none are given). Training criteria keep their
// experiment directories under $SYNCAP_ACCEPTANCE_DIR (default
// ./acceptance_work), so an interrupted run resumes.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "../support/fixtures.hpp"
#include "../support/oracles.hpp"
#include "syncap/beam_search.hpp"
#include "syncap/config.hpp"
#include "syncap/experiment.hpp"
#include "syncap/metrics.hpp"
#include "syncap/planner.hpp"
#include "syncap/ranker.hpp"
#include "syncap/report.hpp"
#include "syncap/splits.hpp"

using namespace syncap;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

#ifndef SYNCAP_UNIT_BINARY
#define SYNCAP_UNIT_BINARY ""
#endif

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(double v, int digits = 3) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

fs::path work_dir() {
  const char* env = std::getenv("SYNCAP_ACCEPTANCE_DIR");
  return env ? fs::path(env) : fs::current_path() / "acceptance_work";
}

const std::vector<world::Tagset> kTagsets = {world::Tagset::pos, world::Tagset::dep, world::Tagset::chunk,
                                             world::Tagset::ccg, world::Tagset::idle};

// ---------------------------------------------------------------- 1: codec

// Expected surface stream, built from the layout rules directly.
std::vector<std::vector<std::string>> expected_streams(const std::vector<std::string>& toks,
                                                       const std::vector<std::string>& tags,
                                                       planner::Approach a) {
  using S = std::vector<std::string>;
  switch (a) {
    case planner::Approach::standard: {
      S s{"<s>"};
      s.insert(s.end(), toks.begin(), toks.end());
      s.push_back("</s>");
      return {s};
    }
    case planner::Approach::sequential: {
      S s{"<s>"};
      s.insert(s.end(), tags.begin(), tags.end());
      s.insert(s.end(), toks.begin(), toks.end());
      s.push_back("</s>");
      return {s};
    }
    case planner::Approach::interleave: {
      S s{"<s>"};
      for (std::size_t i = 0; i < toks.size(); ++i) {
        s.push_back(tags[i]);
        s.push_back(toks[i]);
      }
      s.push_back("</s>");
      return {s};
    }
    case planner::Approach::multitask: {
      S t{"<T>"}, w{"<S>"};
      t.insert(t.end(), tags.begin(), tags.end());
      w.insert(w.end(), toks.begin(), toks.end());
      t.push_back("</s>");
      w.push_back("</s>");
      return {t, w};
    }
  }
  return {};
}

Outcome codec_suite() {
  const auto t0 = Clock::now();
  const auto lex = world::Lexicon::default_lexicon();
  world::WorldConfig wc;
  const auto corpus = world::generate_corpus(2000, 101, lex, wc);
  const auto vocab = planner::Vocabulary::build(corpus, kTagsets);
  long captions = 0, checks = 0, failures = 0;
  for (const auto& e : corpus)
    for (const auto& r : e.references) {
      ++captions;
      const auto T = r.tokens.size();
      for (auto a : {planner::Approach::standard, planner::Approach::sequential, planner::Approach::interleave,
                     planner::Approach::multitask})
        for (auto ts : kTagsets) {
          const auto tags = ts == world::Tagset::idle ? std::vector<std::string>(T, "<idle>") : r.tags.get(ts);
          const auto want = expected_streams(r.tokens, tags, a);
          const auto got = planner::encode(r, a, ts, vocab);
          bool ok = got.size() == want.size();
          for (std::size_t s = 0; ok && s < got.size(); ++s) {
            std::vector<std::string> surf;
            for (int id : got[s].ids) surf.push_back(vocab.surface(id));
            ok = surf == want[s];
            const bool word_stream = !(a == planner::Approach::multitask && s == 0);
            const auto len = a == planner::Approach::standard || a == planner::Approach::multitask ? T + 2 : 2 * T + 2;
            ok = ok && got[s].ids.size() == len;
            if (word_stream) ok = ok && planner::strip(got[s].ids, vocab) == r.tokens;
            else ok = ok && planner::strip(got[s].ids, vocab).empty();
            const auto parsed = planner::parse_generated(got[s].ids, got[s].kind, ts, vocab);
            ok = ok && parsed.wellformed;
            if (word_stream) ok = ok && parsed.tokens == r.tokens;
            if (!word_stream) ok = ok && parsed.tags == tags;
            if (a == planner::Approach::sequential || a == planner::Approach::interleave)
              ok = ok && parsed.tags == tags;
          }
          ++checks;
          failures += ok ? 0 : 1;
        }
    }
  const double secs = seconds_since(t0);
  return {failures == 0 && captions == 10000 && secs < 10.0,
          std::to_string(captions) + " captions, " + std::to_string(checks) + " (approach, tag set) encodings, " +
              std::to_string(failures) + " failures, " + fmt(secs, 2) + " s (limit 10 s)"};
}

// ---------------------------------------------------------------- 2: gap

Outcome gap_suite() {
  const auto t0 = Clock::now();
  const auto lex = world::Lexicon::default_lexicon();
  const auto corpus = world::generate_corpus(5000, 202, lex, world::WorldConfig{});
  std::map<std::int64_t, const world::CorpusEntry*> by_id;
  for (const auto& e : corpus) by_id[e.scene.id] = &e;
  long violations = 0, scanned = 0;
  bool partition_ok = true;
  for (int set = 0; set < 4; ++set) {
    auto spec = splits::SplitSpec::default_spec(lex);
    spec.active_set = set;
    const auto split = splits::build_splits(corpus, spec, splits::SplitRatios{}, 7, lex);
    std::set<std::int64_t> seen;
    for (const auto* part : {&split.train, &split.val, &split.test})
      for (auto id : *part) partition_ok = partition_ok && seen.insert(id).second;
    partition_ok = partition_ok && seen.size() == corpus.size();
    for (auto id : split.train)
      for (const auto& r : by_id.at(id)->references)
        for (const auto& p : spec.active()) {
          ++scanned;
          violations += splits::pair_occurs(r, p, lex) ? 1 : 0;
        }
  }
  const double secs = seconds_since(t0);
  return {violations == 0 && partition_ok && secs < 30.0,
          std::to_string(violations) + " violations over " + std::to_string(scanned) +
              " (reference, pair) checks on 4 sets, partition " + (partition_ok ? "ok" : "BROKEN") + ", " +
              fmt(secs, 2) + " s (limit 30 s)"};
}

// ---------------------------------------------------------------- 3: gradients

Outcome gradient_suite() {
  const auto t0 = Clock::now();
  fixture::TinyWorld w;
  const std::vector<std::pair<std::string, num::GradCheckReport>> reports{
      {"recurrent", fixture::decoder_gradcheck(w, cap::Backend::recurrent, 0)},
      {"transformer", fixture::decoder_gradcheck(w, cap::Backend::transformer, 0)},
      {"weight pooling", fixture::pooling_gradcheck(w, ranker::Pooling::weight, 0)},
      {"contrastive", fixture::contrastive_gradcheck(0)},
  };
  bool pass = true;
  std::string detail;
  for (const auto& [name, r] : reports) {
    pass = pass && r.passed && r.max_rel_error < 1e-4;
    detail += name + " " + fmt(r.max_rel_error * 1e6, 3) + "e-6, ";
  }
  const double secs = seconds_since(t0);
  pass = pass && secs < 120.0;
  return {pass, "max relative error: " + detail + fmt(secs, 2) + " s (limit 1e-4, 120 s)"};
}

// ---------------------------------------------------------------- 4: oracles

Outcome oracle_suite() {
  const auto t0 = Clock::now();
  const auto lex = world::Lexicon::default_lexicon();
  const auto corpus = world::generate_corpus(400, 303, lex, world::WorldConfig{});
  std::vector<splits::ConceptPair> pairs;
  for (const auto& set : splits::SplitSpec::default_spec(lex).heldout_sets)
    pairs.insert(pairs.end(), set.begin(), set.end());
  std::mt19937_64 g(404);

  int recall_ok = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const auto& pair = pairs[g() % pairs.size()];
    eval::GenerationSet gens;
    for (int s = 0; s < 10 + trial % 30; ++s) {
      eval::SceneGenerations sg;
      sg.scene = s;
      for (int c = 0; c < 1 + static_cast<int>(g() % 8); ++c) {
        const auto& e = corpus[g() % corpus.size()];
        sg.captions.push_back(eval::make_caption(e.references[g() % e.references.size()].tokens, {}, true, lex));
      }
      gens.push_back(std::move(sg));
    }
    bool ok = true;
    for (int k = 1; k <= 8; ++k) ok = ok && eval::recall_at_k(gens, pair, k, lex) == oracle::recall(gens, pair, k, lex);
    recall_ok += ok;
  }

  int rerank_ok = 0;
  std::normal_distribution<float> n(0.f, 1.f);
  std::uniform_real_distribution<double> lp(-15.0, -0.5);
  for (int trial = 0; trial < 200; ++trial) {
    auto vec = [&] {
      std::vector<float> v(6);
      for (auto& x : v) x = n(g);
      return v;
    };
    const auto image = vec();
    std::vector<ranker::RerankCandidate> cands;
    for (int i = 0; i < 2 + trial % 19; ++i) cands.push_back({i, lp(g), 1 + static_cast<int>(g() % 12), vec()});
    const double lambda = (trial % 5) / 4.0;
    const auto got = ranker::rerank(cands, image, lambda);
    const auto want = oracle::rerank_order(cands, image, lambda);
    bool ok = got.size() == want.size();
    for (std::size_t i = 0; ok && i < got.size(); ++i) ok = got[i].index == want[i];
    rerank_ok += ok;
  }

  int beam_ok = 0;
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const int vocab = 4, eos = 1, max_len = 4, top_k = 10;
    oracle::ToySession model(vocab, 1000 + seed);
    const auto want = oracle::enumerate(model, 0, eos, max_len);
    oracle::ToySession session(vocab, 1000 + seed);
    cap::BeamConfig bc;
    bc.beam = 81;
    bc.top_k = top_k;
    bc.max_len = max_len;
    const auto got = cap::beam_search(session, 0, eos, bc);
    bool ok = got.size() == static_cast<std::size_t>(top_k);
    for (std::size_t i = 0; ok && i < got.size(); ++i)
      ok = got[i].ids == want[i].ids && std::abs(got[i].logprob - want[i].logprob) < 1e-12 &&
           got[i].finished == want[i].finished;
    beam_ok += ok;
  }
  const double secs = seconds_since(t0);
  return {recall_ok == 200 && rerank_ok == 200 && beam_ok == 200 && secs < 60.0,
          "exact matches: recall " + std::to_string(recall_ok) + "/200, rerank " + std::to_string(rerank_ok) +
              "/200, beam " + std::to_string(beam_ok) + "/200, " + fmt(secs, 2) + " s (limit 60 s)"};
}

// ---------------------------------------------------------------- 9: metric sanity

Outcome metric_sanity() {
  const std::string bin = SYNCAP_UNIT_BINARY;
  if (bin.empty() || !fs::exists(bin)) return {false, "unit test binary not found"};
  const auto t0 = Clock::now();
  const int rc = std::system(("\"" + bin + "\" --test-suite=eval --minimal").c_str());
  const double secs = seconds_since(t0);
  return {rc == 0 && secs < 10.0, "eval unit suite exit " + std::to_string(rc) + ", " + fmt(secs, 2) + " s (limit 10 s)"};
}

// ---------------------------------------------------------------- 10: determinism

std::string slurp(const fs::path& p) { return harness::read_text(p); }

Outcome determinism() {
  auto kv = harness::KeyValues::parse(
      "scenes = 400\n"
      "approaches = standard, interleave\n"
      "tagsets = pos\n"
      "seeds = 1, 2\n"
      "model.embed = 16\nmodel.hidden = 16\n"
      "train.max_epochs = 3\ntrain.batch_size = 16\n"
      "beam.size = 8\n");
  const auto cfg = harness::ExperimentConfig::from_kv(kv);
  const auto root = work_dir() / "determinism";
  fs::remove_all(root);
  for (const char* run : {"a", "b"}) {
    const auto m = harness::run_experiment(cfg, root / run);
    for (const auto& r : m.runs)
      if (r.status != "done") return {false, "run " + r.id + " failed: " + r.error};
    harness::write_report(harness::aggregate({root / run}), root / (std::string(run) + "_report"));
  }
  int identical = 0;
  for (const char* f : {"report.txt", "curves.csv", "summary.json"})
    identical += slurp(root / "a_report" / f) == slurp(root / "b_report" / f);
  return {identical == 3, std::to_string(identical) + "/3 report files byte-identical across two experiment runs"};
}

// ---------------------------------------------------------------- 5, 6, 8: tagging experiment

harness::ExperimentConfig tagging_config() {
  return harness::ExperimentConfig::from_kv(harness::KeyValues::parse(
      "scenes = 3000\n"
      "heldout_sets = 0, 1\n"
      "seeds = 1, 2, 3, 4, 5\n"
      "approaches = standard, interleave\n"
      "tagsets = pos, idle\n"
      "model.backend = recurrent\n"
      "model.embed = 32\nmodel.hidden = 64\n"
      "train.lr = 0.01\ntrain.max_epochs = 30\ntrain.patience = 5\n"
      "eval.partition = heldout\n"));
}

struct Experiment {
  harness::Report report;
  harness::RunManifest manifest;
  std::string error;
};

Experiment run_and_aggregate(const harness::ExperimentConfig& cfg, const fs::path& dir) {
  Experiment e;
  try {
    e.manifest = harness::run_experiment(cfg, dir, [](const std::string& s) { std::cerr << s << "\n"; });
    e.report = harness::aggregate({dir});
    if (!e.report.failed.empty()) e.error = std::to_string(e.report.failed.size()) + " runs failed";
  } catch (const std::exception& ex) {
    e.error = ex.what();
  }
  return e;
}

const Experiment& tagging_experiment() {
  static const Experiment e = run_and_aggregate(tagging_config(), work_dir() / "tagging");
  return e;
}

Outcome headline_gain() {
  const auto& e = tagging_experiment();
  if (!e.error.empty()) return {false, e.error};
  const auto& d = e.report.deltas.at("interleave-pos").at("R@5");
  // Budget: shared stages plus the runs of the two compared cells.
  double budget = 0;
  for (const auto& [k, v] : e.manifest.timings) budget += v;
  for (const auto& r : e.manifest.runs)
    if (r.cell.label() == "standard-none" || r.cell.label() == "interleave-pos")
      for (const auto& [k, v] : r.timings) budget += v;
  const bool pass = d.n >= 10 && d.mean > 0 && d.ci_lo > -0.5 && budget <= 45 * 60;
  return {pass, "delta R@5 (interleave-pos - standard) = " + fmt(d.mean, 2) + " points over " +
                    std::to_string(d.n) + " paired runs, 95% CI [" + fmt(d.ci_lo, 2) + ", " + fmt(d.ci_hi, 2) +
                    "] (need mean > 0, lower > -0.5; +1 expected" + (d.mean >= 1 ? ", met" : ", not met") +
                    "), compute " + fmt(budget / 60, 1) + " min (limit 45)"};
}

Outcome idle_noninferior() {
  const auto& e = tagging_experiment();
  if (!e.error.empty()) return {false, e.error};
  const double idle = e.report.stats.at("interleave-idle").at("R@5").mean;
  const double standard = e.report.stats.at("standard-none").at("R@5").mean;
  return {idle >= standard - 0.5, "R@5 interleave-idle " + fmt(idle, 2) + " vs standard " + fmt(standard, 2) +
                                      " (need >= standard - 0.5)"};
}

Outcome tag_validity() {
  const auto& e = tagging_experiment();
  if (!e.error.empty()) return {false, e.error};
  bool pass = true;
  std::string detail;
  for (const char* cell : {"interleave-pos", "interleave-idle"}) {
    const auto& s = e.report.stats.at(cell);
    const double wf = s.at("wellformed").mean, acc = s.at("tag_acc").mean;
    double wf_min = 100, acc_min = 100;
    for (const auto& r : e.manifest.runs) {
      if (r.cell.label() != cell) continue;
      const auto m = harness::run_metrics(harness::read_text(work_dir() / "tagging" / r.metrics));
      wf_min = std::min(wf_min, m.at("wellformed"));
      acc_min = std::min(acc_min, m.at("tag_acc"));
    }
    pass = pass && wf >= 99.0 && acc >= 95.0;
    detail += std::string(cell) + ": wellformed " + fmt(wf, 2) + "% (min " + fmt(wf_min, 2) + "), tag accuracy " +
              fmt(acc / 100, 4) + " (min " + fmt(acc_min / 100, 4) + "); ";
  }
  return {pass, detail + "need >= 99% and >= 0.95"};
}

// ---------------------------------------------------------------- 7: pooling

harness::ExperimentConfig pooling_config(const std::string& pooling) {
  auto kv = harness::KeyValues::parse(
      "scenes = 3000\n"
      "heldout_sets = 0\n"
      "seeds = 1, 2, 3, 4, 5\n"
      "approaches = standard\n"
      "model.backend = recurrent\n"
      "model.embed = 32\nmodel.hidden = 64\n"
      "model.ranker = true\nmodel.rank_dim = 32\n"
      "train.lr = 0.01\ntrain.max_epochs = 30\ntrain.patience = 5\n"
      "retrieval.gallery = 500\n");
  kv.set("train.pooling", pooling);
  return harness::ExperimentConfig::from_kv(kv);
}

Outcome pooling_retrieval() {
  std::map<std::string, harness::Stat> r1;
  for (const char* mode : {"final", "weight"}) {
    const auto e = run_and_aggregate(pooling_config(mode), work_dir() / (std::string("pooling_") + mode));
    if (!e.error.empty()) return {false, std::string(mode) + ": " + e.error};
    r1[mode] = e.report.stats.at("standard-none").at("text_R@1");
  }
  const auto& w = r1.at("weight");
  const auto& f = r1.at("final");
  return {w.n >= 5 && f.n >= 5 && w.mean >= f.mean,
          "text R@1 on a 500-scene gallery: weight " + fmt(w.mean, 2) + " (sd " + fmt(w.sd, 2) + ") vs final " +
              fmt(f.mean, 2) + " (sd " + fmt(f.sd, 2) + "), " + std::to_string(w.n) + " seeds each"};
}

}  // namespace

int main(int argc, char** argv) {
  const std::map<int, std::pair<std::string, std::function<Outcome()>>> criteria{
      {1, {"codec suite", codec_suite}},
      {2, {"gap suite", gap_suite}},
      {3, {"gradient suite", gradient_suite}},
      {4, {"oracle suites", oracle_suite}},
      {5, {"interleave+pos R@5 gain over standard", headline_gain}},
      {6, {"interleave+idle R@5 non-inferiority", idle_noninferior}},
      {7, {"weight pooling text retrieval", pooling_retrieval}},
      {8, {"tag validity after training", tag_validity}},
      {9, {"metric sanity unit tests", metric_sanity}},
      {10, {"determinism of reports", determinism}},
  };
  std::vector<int> selected;
  for (int i = 1; i < argc; ++i) selected.push_back(std::atoi(argv[i]));
  if (selected.empty())
    for (const auto& [k, v] : criteria) selected.push_back(k);

  int failed = 0;
  for (int id : selected) {
    const auto it = criteria.find(id);
    if (it == criteria.end()) {
      std::cout << "FAIL " << id << " unknown criterion\n";
      ++failed;
      continue;
    }
    Outcome o;
    try {
      o = it->second.second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += o.pass ? 0 : 1;
    std::cout << (o.pass ? "PASS " : "FAIL ") << id << " " << it->second.first << ": " << o.detail << std::endl;
  }
  return failed == 0 ? 0 : 1;
}
