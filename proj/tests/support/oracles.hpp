// Brute-force reference implementations shared by the unit and acceptance
// tests. Each one recomputes a quantity from its definition without calling
// the code under test.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "syncap/beam_search.hpp"
#include "syncap/captioner.hpp"
#include "syncap/metrics.hpp"
#include "syncap/ranker.hpp"
#include "syncap/splits.hpp"

namespace oracle {

using namespace syncap;

// Recall by double loop over (scene, rank).
inline double recall(const eval::GenerationSet& gens, const splits::ConceptPair& pair, int k,
                     const world::Lexicon& lex) {
  int hit = 0;
  for (const auto& s : gens) {
    bool found = false;
    for (int i = 0; i < k && i < static_cast<int>(s.captions.size()); ++i)
      if (splits::pair_occurs(s.captions[static_cast<std::size_t>(i)].annotation, pair, lex)) found = true;
    hit += found ? 1 : 0;
  }
  return static_cast<double>(hit) / static_cast<double>(gens.size());
}

inline double cosine(const std::vector<float>& a, const std::vector<float>& b) {
  double ab = 0, aa = 0, bb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ab += double(a[i]) * b[i];
    aa += double(a[i]) * a[i];
    bb += double(b[i]) * b[i];
  }
  return ab / std::sqrt(aa * bb);
}

// Candidate order under score = lambda * logprob / length + (1 - lambda) * cos,
// found by repeatedly extracting the best remaining candidate.
inline std::vector<int> rerank_order(const std::vector<ranker::RerankCandidate>& cands,
                                     const std::vector<float>& image, double lambda) {
  std::vector<double> score;
  for (const auto& c : cands)
    score.push_back(lambda * c.logprob / c.length + (1 - lambda) * cosine(c.embedding, image));
  std::vector<bool> used(cands.size(), false);
  std::vector<int> order;
  for (std::size_t r = 0; r < cands.size(); ++r) {
    int best = -1;
    for (std::size_t i = 0; i < cands.size(); ++i)
      if (!used[i] && (best < 0 || score[i] > score[static_cast<std::size_t>(best)])) best = static_cast<int>(i);
    used[static_cast<std::size_t>(best)] = true;
    order.push_back(cands[static_cast<std::size_t>(best)].index);
  }
  return order;
}

// Decoder whose next-symbol distribution is a fixed pseudo-random function of
// the whole prefix.
class ToySession : public cap::DecodeSession {
 public:
  ToySession(int vocab, std::uint64_t seed) : vocab_(vocab), seed_(seed) {}
  int vocab_size() const override { return vocab_; }
  std::vector<double> begin(int start) override {
    live_ = {{start}};
    return row(live_[0]);
  }
  std::vector<std::vector<double>> advance(const std::vector<int>& parents,
                                           const std::vector<int>& tokens) override {
    std::vector<std::vector<int>> next;
    std::vector<std::vector<double>> out;
    for (std::size_t i = 0; i < parents.size(); ++i) {
      auto p = live_.at(static_cast<std::size_t>(parents[i]));
      p.push_back(tokens[i]);
      out.push_back(row(p));
      next.push_back(std::move(p));
    }
    live_ = std::move(next);
    return out;
  }
  std::vector<double> row(const std::vector<int>& prefix) const {
    std::uint64_t h = seed_;
    for (int t : prefix) h = h * 1000003u + static_cast<std::uint64_t>(t) + 17;
    std::mt19937_64 g(h);
    std::normal_distribution<double> n(0.0, 1.5);
    std::vector<double> logits(static_cast<std::size_t>(vocab_));
    double mx = -1e300;
    for (auto& l : logits) mx = std::max(mx, l = n(g));
    double z = 0;
    for (double l : logits) z += std::exp(l - mx);
    for (auto& l : logits) l = l - mx - std::log(z);
    return logits;
  }

 private:
  int vocab_;
  std::uint64_t seed_;
  std::vector<std::vector<int>> live_;
};

struct Path {
  std::vector<int> ids;
  double logprob;
  bool finished;
};

// Every sequence the search space contains: ended by eos within max_len
// generated symbols, or cut at max_len. Sorted by (score desc, ids asc).
inline std::vector<Path> enumerate(const ToySession& m, int start, int eos, int max_len) {
  std::vector<Path> all;
  std::vector<Path> frontier{{{start}, 0.0, false}};
  for (int step = 0; step < max_len; ++step) {
    std::vector<Path> next;
    for (const auto& p : frontier) {
      const auto lp = m.row(p.ids);
      for (int v = 0; v < static_cast<int>(lp.size()); ++v) {
        Path q{p.ids, p.logprob + lp[static_cast<std::size_t>(v)], v == eos};
        q.ids.push_back(v);
        (q.finished ? all : next).push_back(q);
      }
    }
    frontier = std::move(next);
  }
  all.insert(all.end(), frontier.begin(), frontier.end());
  std::sort(all.begin(), all.end(), [](const Path& a, const Path& b) {
    if (a.logprob != b.logprob) return a.logprob > b.logprob;
    return a.ids < b.ids;
  });
  return all;
}

}  // namespace oracle
