#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "syncap/ops.hpp"
#include "syncap/ranker.hpp"
#include "syncap/world.hpp"

namespace syncap::cap {

using num::ParamStore;
using num::Tape;
using num::Tensor;
using num::Var;

enum class Backend { recurrent, transformer };

std::string_view to_string(Backend b);
Backend backend_from_string(std::string_view s);

struct ModelConfig {
  Backend backend = Backend::recurrent;
  int vocab = 0;
  int feature_dim = 0;
  int regions = 6;
  // recurrent
  int embed = 64;
  int hidden = 128;
  int attention = 0;  // 0: same as hidden
  // transformer
  int layers = 2;
  int heads = 4;
  int d_model = 64;
  int ff = 256;
  // joint-embedding ranker (recurrent only)
  bool ranker = false;
  int rank_dim = 64;
  std::uint64_t init_seed = 1;

  void validate() const;
  std::string to_json() const;
  static ModelConfig from_json(const std::string& text);
};

/// One planned sequence (start control ... </s>) with its image.
struct Example {
  std::vector<int> ids;
  const world::FeatureMatrix* features = nullptr;
};

template <class T>
struct ForwardResult {
  Var<T> nll;      // summed over target tokens
  int tokens = 0;  // number of target tokens
  /// Per example, the layer-1 states after each input symbol (all symbols
  /// except the final </s>); filled only when requested.
  std::vector<Var<T>> states;
};

/// Incremental decoding over one image. The live set is a list of
/// hypotheses that share the image.
class DecodeSession {
 public:
  virtual ~DecodeSession() = default;
  virtual int vocab_size() const = 0;
  /// Single live hypothesis that has consumed `start`; returns its
  /// next-symbol log-probabilities.
  virtual std::vector<double> begin(int start) = 0;
  /// New live set: hypothesis i extends old hypothesis parents[i] by
  /// tokens[i]. Returns one log-probability row per new hypothesis.
  virtual std::vector<std::vector<double>> advance(const std::vector<int>& parents,
                                                   const std::vector<int>& tokens) = 0;
  /// Sentence state of live hypothesis i after its last symbol; empty when
  /// the model has none.
  virtual std::vector<float> state(int) const { return {}; }
};

template <class T>
class Captioner {
 public:
  virtual ~Captioner() = default;
  const ModelConfig& config() const { return cfg_; }
  ParamStore<T>& params() { return params_; }
  const ParamStore<T>& params() const { return params_; }

  /// Teacher-forced negative log-likelihood of a batch.
  virtual ForwardResult<T> forward(Tape<T>& tape, const std::vector<const Example*>& batch,
                                   bool want_states) = 0;
  /// Layer-1 states for a symbol sequence, image-independent. Throws
  /// NotApplicableError for backends without sentence states.
  virtual Var<T> sentence_states(Tape<T>& tape, const std::vector<int>& ids) = 0;
  virtual std::unique_ptr<DecodeSession> open(const world::FeatureMatrix& features) const = 0;

  bool has_ranker() const { return ranker_.has_value(); }
  const ranker::RankerParams<T>& ranker_params() const;

 protected:
  explicit Captioner(const ModelConfig& cfg) : cfg_(cfg) {}
  void attach_ranker(std::mt19937_64& rng, int hidden);

  ModelConfig cfg_;
  ParamStore<T> params_;
  std::optional<ranker::RankerParams<T>> ranker_;
};

template <class T>
std::unique_ptr<Captioner<T>> make_captioner(const ModelConfig& cfg);

/// Region matrix as a tensor (R x feature).
template <class T>
Tensor<T> feature_tensor(const world::FeatureMatrix& f);

/// Log-softmax of each row.
template <class T>
std::vector<std::vector<double>> log_softmax_rows(const Tensor<T>& logits);

/// Sum of next-symbol log-probabilities of `ids` (excluding the start)
/// obtained by stepping a decode session; used to check that training and
/// decoding agree.
double score_sequence(DecodeSession& session, const std::vector<int>& ids);

}  // namespace syncap::cap
