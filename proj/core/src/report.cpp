#include "syncap/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <set>
#include <boost/math/distributions/students_t.hpp>

#include "json.hpp"
#include "syncap/config.hpp"
#include "syncap/experiment.hpp"

namespace syncap::harness {

using nlohmann::json;
namespace fs = std::filesystem;

Stat summarize(const std::vector<double>& values, double level) {
  if (values.empty()) throw EmptyInputError("no values to summarize");
  Stat s;
  s.n = static_cast<int>(values.size());
  double sum = 0;
  for (double v : values) sum += v;
  s.mean = sum / s.n;
  if (s.n < 2) {
    s.sd = s.ci_lo = s.ci_hi = std::numeric_limits<double>::quiet_NaN();
    return s;
  }
  double ss = 0;
  for (double v : values) ss += (v - s.mean) * (v - s.mean);
  s.sd = std::sqrt(ss / (s.n - 1));
  boost::math::students_t dist(s.n - 1);
  const double q = boost::math::quantile(boost::math::complement(dist, (1.0 - level) / 2.0));
  const double half = q * s.sd / std::sqrt(static_cast<double>(s.n));
  s.ci_lo = s.mean - half;
  s.ci_hi = s.mean + half;
  return s;
}

std::map<std::string, double> run_metrics(const std::string& metrics_json) {
  std::map<std::string, double> m;
  const auto j = json::parse(metrics_json);
  for (const auto& [k, v] : j.at("mean_recall").items()) m["R@" + k] = 100.0 * v.get<double>();
  for (const auto& [k, cats] : j.at("categories").items())
    for (const auto& [c, v] : cats.items()) m["R@" + k + ":" + c] = 100.0 * v.get<double>();
  m["BLEU"] = j.at("bleu").get<double>();
  if (!j.at("tag_accuracy").is_null()) m["tag_acc"] = 100.0 * j["tag_accuracy"].get<double>();
  m["wellformed"] = 100.0 * j.at("wellformed").get<double>();
  const auto& d = j.at("diversity");
  m["ASL"] = d.at("asl").get<double>();
  m["Types"] = d.at("types").get<double>();
  m["TTR1"] = d.at("ttr1").get<double>();
  m["TTR2"] = d.at("ttr2").get<double>();
  m["Novel"] = 100.0 * d.at("novel").get<double>();
  m["Coverage"] = 100.0 * d.at("coverage").get<double>();
  m["Local5"] = 100.0 * d.at("local5").get<double>();
  if (j.contains("training")) m["best_epoch"] = j["training"].at("best_epoch").get<double>();
  if (j.contains("retrieval")) {
    for (const auto& [k, v] : j["retrieval"].at("text").items()) m["text_R@" + k] = 100.0 * v.get<double>();
    for (const auto& [k, v] : j["retrieval"].at("image").items()) m["image_R@" + k] = 100.0 * v.get<double>();
  }
  return m;
}

namespace {

// Config text with the aggregation axes removed.
std::string comparable(const KeyValues& kv) {
  KeyValues c;
  for (const auto& [k, v] : kv.entries())
    if (k != "seeds" && k != "heldout_sets") c.set(k, v);
  return c.dump();
}

struct RunData {
  std::string cell;
  std::pair<std::uint64_t, int> key;  // (seed, set)
  std::map<std::string, double> metrics;
  // pair -> j -> recall, and the per-run mean over pairs
  std::map<std::string, std::map<int, double>> curves;
};

std::string cell_label(const std::string& approach, const std::string& tagset) {
  return approach + "-" + tagset;
}

}  // namespace

Report aggregate(const std::vector<fs::path>& dirs) {
  if (dirs.empty()) throw EmptyInputError("no experiment directories given");
  Report r;
  std::string reference;
  fs::path reference_dir;
  std::vector<RunData> data;
  std::set<std::string> seen;
  std::vector<int> recall_ks;
  for (const auto& dir : dirs) {
    const auto kv = KeyValues::load(dir / "config.kv");
    const auto cfg = ExperimentConfig::from_kv(kv);
    const auto text = comparable(kv);
    if (reference.empty()) {
      reference = text;
      reference_dir = dir;
      r.config_hash = cfg.hash();
      r.recall_ks = cfg.recall_ks;
      for (const auto& c : cfg.cells()) r.cells.push_back(c.label());
    } else if (text != reference) {
      std::string diff;
      const auto a = KeyValues::parse(reference), b = KeyValues::parse(text);
      for (const auto& [k, v] : b.entries())
        if (!a.has(k) || a.get(k) != v) diff += " " + k;
      throw ConfigError("refusing to aggregate " + dir.string() + " with " + reference_dir.string() +
                        ": configs differ in" + diff);
    }
    const auto manifest = RunManifest::load(dir);
    if (manifest.config_hash != cfg.hash())
      throw ConfigError("manifest in " + dir.string() + " does not match its config.kv");
    for (const auto& run : manifest.runs) {
      if (run.status != "done") {
        r.failed.push_back(run.id);
        continue;
      }
      if (!seen.insert(run.id).second)
        throw ConfigError("run " + run.id + " appears in more than one experiment");
      const auto text_m = read_text(dir / run.metrics);
      RunData d;
      d.cell = cell_label(std::string(planner::to_string(run.cell.approach)),
                          std::string(world::to_string(run.cell.tagset)));
      d.key = {run.seed, run.heldout_set};
      d.metrics = run_metrics(text_m);
      const auto j = json::parse(text_m);
      std::map<int, std::vector<double>> level;
      for (const auto& [pair, pts] : j.at("curves").items())
        for (const auto& p : pts) {
          const int lv = p.at(0).get<int>();
          const double v = 100.0 * p.at(1).get<double>();
          d.curves[pair][lv] = v;
          level[lv].push_back(v);
        }
      for (const auto& [lv, vs] : level) {
        double s = 0;
        for (double v : vs) s += v;
        d.curves["mean"][lv] = s / static_cast<double>(vs.size());
      }
      data.push_back(std::move(d));
    }
  }
  r.runs = static_cast<int>(data.size());
  if (data.empty()) throw EmptyInputError("no completed runs to report");

  // Column order: recall first, then the rest in a fixed order when present.
  std::vector<std::string> order;
  for (int k : r.recall_ks) order.push_back("R@" + std::to_string(k));
  for (const char* m : {"BLEU", "tag_acc", "wellformed", "ASL", "Types", "TTR1", "TTR2", "Novel",
                        "Coverage", "Local5"})
    order.push_back(m);
  for (const char* dir : {"text_R@", "image_R@"})
    for (int k : {1, 5, 10}) order.push_back(dir + std::to_string(k));
  order.push_back("best_epoch");
  std::set<std::string> present;
  for (const auto& d : data)
    for (const auto& [m, v] : d.metrics) present.insert(m);
  for (const auto& m : order)
    if (present.count(m)) r.metrics.push_back(m);
  for (const auto& m : present)  // category columns and any other K
    if (std::find(r.metrics.begin(), r.metrics.end(), m) == r.metrics.end()) r.metrics.push_back(m);

  for (const auto& cell : r.cells) {
    for (const auto& m : r.metrics) {
      std::vector<double> vs;
      for (const auto& d : data)
        if (d.cell == cell && d.metrics.count(m)) vs.push_back(d.metrics.at(m));
      if (!vs.empty()) r.stats[cell][m] = summarize(vs);
    }
    std::map<std::string, std::map<int, std::vector<double>>> cv;
    for (const auto& d : data)
      if (d.cell == cell)
        for (const auto& [pair, pts] : d.curves)
          for (const auto& [lv, v] : pts) cv[pair][lv].push_back(v);
    for (const auto& [pair, lvs] : cv)
      for (const auto& [lv, vs] : lvs) r.curves[cell][pair][lv] = summarize(vs);
  }

  const std::string base = "standard-none";
  if (std::find(r.cells.begin(), r.cells.end(), base) != r.cells.end()) {
    for (const auto& cell : r.cells) {
      if (cell == base) continue;
      for (const auto& m : r.metrics) {
        std::vector<double> deltas;
        for (const auto& d : data) {
          if (d.cell != cell || !d.metrics.count(m)) continue;
          for (const auto& b : data)
            if (b.cell == base && b.key == d.key && b.metrics.count(m))
              deltas.push_back(d.metrics.at(m) - b.metrics.at(m));
        }
        if (!deltas.empty()) r.deltas[cell][m] = summarize(deltas);
      }
    }
  }
  return r;
}

namespace {

std::string num(double v, int prec = 2) {
  if (std::isnan(v)) return "";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", prec, v);
  return buf;
}

std::string pad(const std::string& s, std::size_t w, bool left = false) {
  if (s.size() >= w) return s;
  return left ? s + std::string(w - s.size(), ' ') : std::string(w - s.size(), ' ') + s;
}

// One aligned block: rows are cells, each metric gets mean and sd columns.
std::string block(const std::string& title, const std::vector<std::string>& cells,
                  const std::vector<std::string>& metrics,
                  const std::map<std::string, std::map<std::string, Stat>>& stats, bool with_ci) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> head{"cell", "n"};
  for (const auto& m : metrics) {
    head.push_back(m);
    head.push_back("sd");
    if (with_ci) {
      head.push_back("ci_lo");
      head.push_back("ci_hi");
    }
  }
  rows.push_back(head);
  for (const auto& c : cells) {
    auto it = stats.find(c);
    if (it == stats.end()) continue;
    std::vector<std::string> row{c, ""};
    int n = 0;
    for (const auto& m : metrics) {
      auto s = it->second.find(m);
      if (s == it->second.end()) {
        row.insert(row.end(), with_ci ? 4 : 2, "-");
        continue;
      }
      n = std::max(n, s->second.n);
      row.push_back(num(s->second.mean));
      row.push_back(num(s->second.sd));
      if (with_ci) {
        row.push_back(num(s->second.ci_lo));
        row.push_back(num(s->second.ci_hi));
      }
    }
    row[1] = std::to_string(n);
    rows.push_back(row);
  }
  std::vector<std::size_t> width(head.size(), 0);
  for (const auto& row : rows)
    for (std::size_t i = 0; i < row.size(); ++i) width[i] = std::max(width[i], row[i].size());
  std::string out = title + "\n";
  for (const auto& row : rows) {
    std::string line;
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) line += "  ";
      line += pad(row[i], width[i], i == 0);
    }
    while (!line.empty() && line.back() == ' ') line.pop_back();
    out += line + "\n";
  }
  return out + "\n";
}

json stat_json(const Stat& s) {
  auto opt = [](double v) { return std::isnan(v) ? json(nullptr) : json(v); };
  return {{"n", s.n}, {"mean", s.mean}, {"sd", opt(s.sd)}, {"ci_lo", opt(s.ci_lo)}, {"ci_hi", opt(s.ci_hi)}};
}

}  // namespace

std::string render_table(const Report& r) {
  std::vector<std::string> main, cats, diversity, retrieval;
  for (const auto& m : r.metrics) {
    if (m.find(':') != std::string::npos) cats.push_back(m);
    else if (m.rfind("text_", 0) == 0 || m.rfind("image_", 0) == 0) retrieval.push_back(m);
    else if (m == "ASL" || m == "Types" || m == "TTR1" || m == "TTR2" || m == "Novel" ||
             m == "Coverage" || m == "Local5")
      diversity.push_back(m);
    else main.push_back(m);
  }
  std::string out = "config " + r.config_hash + ", " + std::to_string(r.runs) + " completed runs\n\n";
  out += block("Held-out pair recall and caption quality (mean over seeds and sets)", r.cells, main,
               r.stats, false);
  if (!r.deltas.empty()) {
    std::vector<std::string> dm;
    for (const auto& m : main)
      if (m != "tag_acc" && m != "best_epoch") dm.push_back(m);
    out += block("Paired difference to standard-none (95% t-interval)", r.cells, dm, r.deltas, true);
  }
  if (!cats.empty()) {
    // One block per K, columns named by category.
    for (int k : r.recall_ks) {
      std::vector<std::string> ck;
      const auto prefix = "R@" + std::to_string(k) + ":";
      for (const auto& m : cats)
        if (m.rfind(prefix, 0) == 0) ck.push_back(m);
      if (!ck.empty()) out += block("Recall@" + std::to_string(k) + " by pair category", r.cells, ck, r.stats, false);
    }
  }
  if (!diversity.empty()) out += block("Diversity", r.cells, diversity, r.stats, false);
  if (!retrieval.empty()) out += block("Image-sentence retrieval", r.cells, retrieval, r.stats, false);
  if (!r.failed.empty()) {
    out += "Failed runs:\n";
    for (const auto& f : r.failed) out += "  " + f + "\n";
  }
  return out;
}

std::string render_curves_csv(const Report& r) {
  std::string out = "cell,pair,min_importance,n,mean,sd,ci_lo,ci_hi\n";
  for (const auto& cell : r.cells) {
    auto it = r.curves.find(cell);
    if (it == r.curves.end()) continue;
    for (const auto& [pair, lvs] : it->second)
      for (const auto& [lv, s] : lvs)
        out += cell + "," + pair + "," + std::to_string(lv) + "," + std::to_string(s.n) + "," +
               num(s.mean, 4) + "," + num(s.sd, 4) + "," + num(s.ci_lo, 4) + "," + num(s.ci_hi, 4) + "\n";
  }
  return out;
}

std::string render_summary_json(const Report& r) {
  json cells = json::object(), deltas = json::object();
  for (const auto& [c, ms] : r.stats)
    for (const auto& [m, s] : ms) cells[c][m] = stat_json(s);
  for (const auto& [c, ms] : r.deltas)
    for (const auto& [m, s] : ms) deltas[c][m] = stat_json(s);
  json j{{"config_hash", r.config_hash},
         {"runs", r.runs},
         {"cells", r.cells},
         {"metrics", r.metrics},
         {"stats", cells},
         {"deltas_vs_standard", deltas},
         {"failed", r.failed}};
  return j.dump(2) + "\n";
}

void write_report(const Report& r, const fs::path& out_dir) {
  fs::create_directories(out_dir);
  write_atomic(out_dir / "report.txt", render_table(r));
  write_atomic(out_dir / "curves.csv", render_curves_csv(r));
  write_atomic(out_dir / "summary.json", render_summary_json(r));
}

}  // namespace syncap::harness
