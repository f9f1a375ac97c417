#include "doctest.h"

#include <cmath>
#include <filesystem>

#include "syncap/config.hpp"
#include "syncap/experiment.hpp"
#include "syncap/report.hpp"

using namespace syncap;
using namespace syncap::harness;
namespace fs = std::filesystem;

namespace {

ExperimentConfig tiny(const std::string& seeds) {
  auto kv = KeyValues::parse(
      "scenes = 150\n"
      "approaches = standard, interleave\n"
      "tagsets = pos\n"
      "model.embed = 12\nmodel.hidden = 12\n"
      "train.max_epochs = 2\ntrain.batch_size = 16\n"
      "beam.size = 5\n");
  kv.set("seeds", seeds);
  return ExperimentConfig::from_kv(kv);
}

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("syncap_harness_" + name);
  fs::remove_all(p);
  return p;
}

}  // namespace

TEST_SUITE("harness") {

TEST_CASE("config text round-trips and rejects unknown keys") {
  auto c = tiny("3, 4");
  c.train.pooling = ranker::Pooling::mean;
  const auto back = ExperimentConfig::from_kv(KeyValues::parse(c.to_kv().dump()));
  CHECK(back.to_kv().dump() == c.to_kv().dump());
  CHECK(back.hash() == c.hash());
  CHECK(back.seeds == std::vector<std::uint64_t>{3, 4});
  CHECK(back.train.pooling == ranker::Pooling::mean);
  CHECK_THROWS_AS(ExperimentConfig::from_kv(KeyValues::parse("model.hiden = 3\n")), ConfigError);
  CHECK_THROWS_AS(ExperimentConfig::from_kv(KeyValues::parse("heldout_sets = 4\n")), ConfigError);
  CHECK_THROWS_AS(ExperimentConfig::from_kv(KeyValues::parse("rerank = true\n")), ConfigError);
  CHECK(content_hash("") == "cbf29ce484222325");
}

TEST_CASE("matrix cells collapse the standard approach") {
  auto kv = KeyValues::parse("approaches = standard, sequential, interleave, multitask\n"
                             "tagsets = pos, dep, chunk, ccg, idle\n");
  const auto cells = ExperimentConfig::from_kv(kv).cells();
  CHECK(cells.size() == 1 + 3 * 5);
  CHECK(cells.front().label() == "standard-none");
  CHECK(run_id(cells[1], 2, 3) == "sequential-pos/seed2/set3");
}

TEST_CASE("summaries use the sample deviation and a Student-t interval") {
  const auto s = summarize({1.0, 2.0, 3.0});
  CHECK(s.n == 3);
  CHECK(s.mean == doctest::Approx(2.0));
  CHECK(s.sd == doctest::Approx(1.0));
  const double t = 4.302652729749464;  // 97.5% quantile, 2 degrees of freedom
  CHECK(s.ci_lo == doctest::Approx(2.0 - t / std::sqrt(3.0)));
  CHECK(s.ci_hi == doctest::Approx(2.0 + t / std::sqrt(3.0)));
  const auto one = summarize({4.0});
  CHECK(one.mean == 4.0);
  CHECK(std::isnan(one.sd));
  CHECK(std::isnan(one.ci_lo));
}

TEST_CASE("experiments resume, aggregate across directories and refuse mixed configs") {
  const auto d1 = scratch("a"), d2 = scratch("b"), d3 = scratch("c");
  const auto m1 = run_experiment(tiny("1"), d1);
  REQUIRE(m1.runs.size() == 2);
  for (const auto& r : m1.runs) CHECK(r.status == "done");

  const auto metrics = d1 / m1.runs[1].metrics;
  const auto before = read_text(metrics);
  fs::remove(metrics);
  std::vector<std::string> log;
  run_experiment(tiny("1"), d1, [&](const std::string& s) { log.push_back(s); });
  CHECK(read_text(metrics) == before);
  CHECK_THROWS_AS(run_experiment(tiny("2"), d1), ConfigError);

  run_experiment(tiny("2"), d2);
  const auto r = aggregate({d1, d2});
  CHECK(r.runs == 4);
  CHECK(r.cells == std::vector<std::string>{"standard-none", "interleave-pos"});
  CHECK(r.stats.at("interleave-pos").at("R@5").n == 2);
  CHECK(r.deltas.at("interleave-pos").at("R@5").n == 2);
  CHECK_THROWS_AS(aggregate({d1, d1}), ConfigError);

  auto other = tiny("3");
  other.train.max_epochs = 1;
  run_experiment(other, d3);
  CHECK_THROWS_AS(aggregate({d1, d3}), ConfigError);

  const auto single = aggregate({d1});
  CHECK(std::isnan(single.stats.at("standard-none").at("BLEU").sd));
  CHECK(render_table(single).find("config " + tiny("1").hash()) != std::string::npos);
  for (const auto& d : {d1, d2, d3}) fs::remove_all(d);
}

}
