#include "syncap/beam_search.hpp"

#include <algorithm>
#include <numeric>
#include <string>

namespace syncap::cap {

void BeamConfig::validate() const {
  if (top_k < 1) throw ConfigError("beam: top_k must be at least 1");
  if (beam < top_k)
    throw ConfigError("beam: beam size " + std::to_string(beam) + " is smaller than top_k " +
                      std::to_string(top_k));
  if (max_len < 1) throw ConfigError("beam: max_len must be at least 1");
}

int default_max_len(bool with_tags) { return with_tags ? 40 : 20; }

namespace {

struct Candidate {
  double score;
  int parent;
  int token;
};

bool before(const Candidate& a, const Candidate& b) {
  if (a.score != b.score) return a.score > b.score;
  if (a.parent != b.parent) return a.parent < b.parent;
  return a.token < b.token;
}

double rank_score(const Hypothesis& h, bool length_norm) {
  return length_norm ? h.logprob / std::max(1, h.generated()) : h.logprob;
}

void sort_pool(std::vector<Hypothesis>& pool, bool length_norm) {
  std::sort(pool.begin(), pool.end(), [&](const Hypothesis& a, const Hypothesis& b) {
    const double sa = rank_score(a, length_norm), sb = rank_score(b, length_norm);
    if (sa != sb) return sa > sb;
    return a.ids < b.ids;
  });
}

}  // namespace

std::vector<Hypothesis> beam_search(DecodeSession& session, int start, int eos,
                                    const BeamConfig& config) {
  config.validate();
  const int V = session.vocab_size();
  if (eos < 0 || eos >= V || start < 0 || start >= V)
    throw IndexError("beam: start or end symbol outside the vocabulary");

  std::vector<Hypothesis> live(1);
  live[0].ids = {start};
  std::vector<std::vector<double>> rows{session.begin(start)};
  if (config.keep_states) live[0].states.push_back(session.state(0));

  std::vector<Hypothesis> pool;
  std::vector<Candidate> cands;
  std::vector<int> order(static_cast<std::size_t>(V));
  for (int step = 1; step <= config.max_len && !live.empty(); ++step) {
    // Each hypothesis contributes at most `beam` extensions to the merge.
    cands.clear();
    const int per = std::min(config.beam, V);
    for (std::size_t i = 0; i < live.size(); ++i) {
      const auto& lp = rows[i];
      std::iota(order.begin(), order.end(), 0);
      std::partial_sort(order.begin(), order.begin() + per, order.end(), [&](int a, int b) {
        return lp[static_cast<std::size_t>(a)] != lp[static_cast<std::size_t>(b)]
                   ? lp[static_cast<std::size_t>(a)] > lp[static_cast<std::size_t>(b)]
                   : a < b;
      });
      for (int j = 0; j < per; ++j) {
        const int v = order[static_cast<std::size_t>(j)];
        cands.push_back({live[i].logprob + lp[static_cast<std::size_t>(v)], static_cast<int>(i), v});
      }
    }
    std::sort(cands.begin(), cands.end(), before);

    std::vector<Hypothesis> next;
    std::vector<int> parents, tokens;
    for (const auto& c : cands) {
      if (static_cast<int>(next.size()) == config.beam) break;
      Hypothesis h;
      h.ids = live[static_cast<std::size_t>(c.parent)].ids;
      h.ids.push_back(c.token);
      h.logprob = c.score;
      if (config.keep_states) h.states = live[static_cast<std::size_t>(c.parent)].states;
      if (c.token == eos) {
        h.finished = true;
        pool.push_back(std::move(h));
      } else {
        parents.push_back(c.parent);
        tokens.push_back(c.token);
        next.push_back(std::move(h));
      }
    }
    live = std::move(next);
    if (live.empty()) break;

    const bool at_cap = step == config.max_len;
    if (!at_cap || config.keep_states) {
      rows = session.advance(parents, tokens);
      if (config.keep_states)
        for (std::size_t i = 0; i < live.size(); ++i)
          live[i].states.push_back(session.state(static_cast<int>(i)));
    }
    if (at_cap) break;

    if (!config.length_norm && static_cast<int>(pool.size()) >= config.top_k) {
      sort_pool(pool, false);
      double best_live = live[0].logprob;
      for (const auto& h : live) best_live = std::max(best_live, h.logprob);
      if (pool[static_cast<std::size_t>(config.top_k - 1)].logprob > best_live) {
        live.clear();
        break;
      }
    }
  }
  for (auto& h : live) pool.push_back(std::move(h));
  sort_pool(pool, config.length_norm);
  if (static_cast<int>(pool.size()) > config.top_k) pool.resize(static_cast<std::size_t>(config.top_k));
  return pool;
}

Hypothesis greedy_decode(DecodeSession& session, int start, int eos, int max_len,
                         bool keep_states) {
  BeamConfig cfg;
  cfg.beam = 1;
  cfg.top_k = 1;
  cfg.max_len = max_len;
  cfg.keep_states = keep_states;
  return beam_search(session, start, eos, cfg).front();
}

}  // namespace syncap::cap
