#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "syncap/captioner.hpp"
#include "syncap/optim.hpp"
#include "syncap/planner.hpp"
#include "syncap/ranker.hpp"

namespace syncap::train {

struct TrainConfig {
  int batch_size = 32;
  int max_epochs = 30;
  int patience = 5;
  num::AdamConfig adam;
  int warmup_steps = 200;  // transformer backend only
  double rank_weight = 1.0;
  double margin = 0.2;
  ranker::Pooling pooling = ranker::Pooling::weight;
  std::uint64_t seed = 1;
  /// Greedy length cap for validation decoding; 0 picks the stream default.
  int val_max_len = 0;
  /// Skip validation decoding and keep the last epoch.
  bool early_stopping = true;

  void validate() const;
};

/// Patience counter over a score that should go up.
class EarlyStopper {
 public:
  explicit EarlyStopper(int patience);
  /// Records the next epoch's score; true once the run of epochs without a
  /// new best exceeds the patience.
  bool update(double score);
  int best_epoch() const { return best_epoch_; }  // 1-based, 0 before any update
  double best_score() const { return best_; }
  int epochs() const { return epochs_; }

 private:
  int patience_;
  int epochs_ = 0;
  int best_epoch_ = 0;
  int stale_ = 0;
  double best_ = 0.0;
};

/// Planned training sequences grouped by scene and reference.
struct TrainingData {
  struct Scene {
    std::int64_t id = 0;
    const world::FeatureMatrix* features = nullptr;
    /// sequences[r] holds the planned sequences of reference r (two for multitask).
    std::vector<std::vector<std::vector<int>>> sequences;
  };
  std::vector<Scene> scenes;
  planner::Approach approach = planner::Approach::standard;
  world::Tagset tagset = world::Tagset::none;
};

TrainingData make_training_data(const std::vector<world::CorpusEntry>& corpus,
                                const std::vector<std::int64_t>& scene_ids,
                                planner::Approach approach, world::Tagset tagset,
                                const planner::Vocabulary& vocab);

/// Validation scenes for early stopping: features and tokenized references.
struct ValidationData {
  std::vector<const world::FeatureMatrix*> features;
  std::vector<std::vector<std::vector<std::string>>> references;
};

ValidationData make_validation_data(const std::vector<world::CorpusEntry>& corpus,
                                    const std::vector<std::int64_t>& scene_ids);

struct EpochRecord {
  int epoch = 0;
  double loss = 0.0;       // mean NLL per target token
  double rank_loss = 0.0;  // mean contrastive loss per batch, 0 without ranker
  double val_bleu = 0.0;
};

struct TrainResult {
  std::vector<EpochRecord> history;
  int best_epoch = 0;
  double best_bleu = 0.0;
  bool stopped_early = false;
};

/// Mutable state carried across epochs.
template <class T>
struct TrainState {
  num::Adam<T> optimizer;
  std::mt19937_64 rng;
  long step = 0;
  int epoch = 0;
};

/// One pass over the data: each scene contributes one sampled reference, the
/// stream is shuffled and cut into batches. Returns the epoch record without
/// validation BLEU. Throws TrainingError on a non-finite loss.
template <class T>
EpochRecord train_epoch(cap::Captioner<T>& model, const TrainingData& data,
                        const TrainConfig& config, TrainState<T>& state);

/// Greedy-decodes the validation scenes and scores the stripped words.
template <class T>
double validation_bleu(const cap::Captioner<T>& model, const ValidationData& val,
                       const planner::Vocabulary& vocab, planner::Approach approach,
                       world::Tagset tagset, int max_len);

/// Epoch loop with early stopping on validation BLEU; the model ends up with
/// the parameters of the best epoch. `on_epoch` is called after every epoch.
template <class T>
TrainResult train(cap::Captioner<T>& model, const TrainingData& data, const ValidationData& val,
                  const planner::Vocabulary& vocab, const TrainConfig& config,
                  const std::function<void(const EpochRecord&)>& on_epoch = {});

}  // namespace syncap::train
