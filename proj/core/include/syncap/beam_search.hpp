#pragma once

#include <vector>

#include "syncap/captioner.hpp"

namespace syncap::cap {

struct Hypothesis {
  std::vector<int> ids;  // start symbol first; ends with </s> when finished
  double logprob = 0.0;
  bool finished = false;
  /// Sentence state after each symbol except a final </s> (only with keep_states).
  std::vector<std::vector<float>> states;

  int generated() const { return static_cast<int>(ids.size()) - 1; }
};

struct BeamConfig {
  int beam = 20;
  int top_k = 5;
  /// Cap on generated symbols, </s> included.
  int max_len = 20;
  bool length_norm = false;
  bool keep_states = false;

  void validate() const;  // ConfigError unless beam >= top_k >= 1 and max_len >= 1
};

/// Default length cap: 20 for word-only streams, 40 when tags are generated.
int default_max_len(bool with_tags);

/// Length-capped beam search. Finished hypotheses retire to a pool; the
/// search stops early once the K-th pooled score beats every live one.
/// Returns the K best of the pool, unfinished survivors at the cap included.
std::vector<Hypothesis> beam_search(DecodeSession& session, int start, int eos,
                                    const BeamConfig& config);

/// Argmax decoding; the same result as beam_search with beam = top_k = 1.
Hypothesis greedy_decode(DecodeSession& session, int start, int eos, int max_len,
                         bool keep_states = false);

}  // namespace syncap::cap
