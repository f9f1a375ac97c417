#include "syncap/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <string>

#include "syncap/beam_search.hpp"
#include "syncap/metrics.hpp"

namespace syncap::train {

void TrainConfig::validate() const {
  if (batch_size < 1) throw ConfigError("train: batch_size must be at least 1");
  if (max_epochs < 1) throw ConfigError("train: max_epochs must be at least 1");
  if (patience < 0) throw ConfigError("train: patience must be non-negative");
  if (!(adam.lr > 0)) throw ConfigError("train: learning rate must be positive");
  if (rank_weight < 0) throw ConfigError("train: rank_weight must be non-negative");
  if (val_max_len < 0) throw ConfigError("train: val_max_len must be non-negative");
}

EarlyStopper::EarlyStopper(int patience) : patience_(patience) {
  if (patience < 0) throw ConfigError("patience must be non-negative");
}

bool EarlyStopper::update(double score) {
  ++epochs_;
  if (epochs_ == 1 || score > best_) {
    best_ = score;
    best_epoch_ = epochs_;
    stale_ = 0;
  } else {
    ++stale_;
  }
  return stale_ > patience_;
}

TrainingData make_training_data(const std::vector<world::CorpusEntry>& corpus,
                                const std::vector<std::int64_t>& scene_ids,
                                planner::Approach approach, world::Tagset tagset,
                                const planner::Vocabulary& vocab) {
  std::map<std::int64_t, const world::CorpusEntry*> by_id;
  for (const auto& e : corpus) by_id[e.scene.id] = &e;
  TrainingData data;
  data.approach = approach;
  data.tagset = planner::effective_tagset(approach, tagset);
  for (auto id : scene_ids) {
    auto it = by_id.find(id);
    if (it == by_id.end()) throw IndexError("scene " + std::to_string(id) + " not in corpus");
    TrainingData::Scene s;
    s.id = id;
    s.features = &it->second->features;
    for (const auto& ref : it->second->references) {
      std::vector<std::vector<int>> seqs;
      for (auto& p : planner::encode(ref, approach, data.tagset, vocab)) seqs.push_back(std::move(p.ids));
      s.sequences.push_back(std::move(seqs));
    }
    if (s.sequences.empty()) continue;
    data.scenes.push_back(std::move(s));
  }
  if (data.scenes.empty()) throw EmptyInputError("training set is empty");
  return data;
}

ValidationData make_validation_data(const std::vector<world::CorpusEntry>& corpus,
                                    const std::vector<std::int64_t>& scene_ids) {
  std::map<std::int64_t, const world::CorpusEntry*> by_id;
  for (const auto& e : corpus) by_id[e.scene.id] = &e;
  ValidationData val;
  for (auto id : scene_ids) {
    auto it = by_id.find(id);
    if (it == by_id.end()) throw IndexError("scene " + std::to_string(id) + " not in corpus");
    val.features.push_back(&it->second->features);
    std::vector<std::vector<std::string>> refs;
    for (const auto& r : it->second->references) refs.push_back(r.tokens);
    val.references.push_back(std::move(refs));
  }
  return val;
}

template <class T>
EpochRecord train_epoch(cap::Captioner<T>& model, const TrainingData& data,
                        const TrainConfig& config, TrainState<T>& state) {
  config.validate();
  if (data.scenes.empty()) throw EmptyInputError("training set is empty");
  const bool rank = model.has_ranker() && config.rank_weight > 0;
  if (rank && data.approach == planner::Approach::multitask)
    throw ConfigError("the ranker cannot be trained on multitask streams");
  ++state.epoch;

  std::vector<cap::Example> stream;
  for (const auto& s : data.scenes) {
    std::uniform_int_distribution<std::size_t> pick(0, s.sequences.size() - 1);
    for (const auto& ids : s.sequences[pick(state.rng)]) stream.push_back({ids, s.features});
  }
  std::shuffle(stream.begin(), stream.end(), state.rng);

  const bool transformer = model.config().backend == cap::Backend::transformer;
  double nll = 0, rank_total = 0;
  long tokens = 0;
  int batches = 0;
  const auto B = static_cast<std::size_t>(config.batch_size);
  for (std::size_t first = 0; first < stream.size(); first += B, ++batches) {
    std::vector<const cap::Example*> batch;
    for (std::size_t i = first; i < std::min(stream.size(), first + B); ++i) batch.push_back(&stream[i]);

    num::Tape<T> tape(true);
    auto fwd = model.forward(tape, batch, rank);
    auto loss = num::scale(fwd.nll, T(1) / static_cast<T>(fwd.tokens));
    double batch_rank = 0;
    if (rank && batch.size() >= 2) {
      const auto& rp = model.ranker_params();
      std::vector<num::Var<T>> imgs, sens;
      for (std::size_t i = 0; i < batch.size(); ++i) {
        imgs.push_back(ranker::embed_image(tape.constant(cap::feature_tensor<T>(*batch[i]->features)), rp));
        sens.push_back(ranker::embed_sentence(fwd.states[i], config.pooling, rp));
      }
      auto l = ranker::contrastive_loss(num::concat_rows(imgs), num::concat_rows(sens),
                                        static_cast<T>(config.margin));
      l = num::scale(l, static_cast<T>(config.rank_weight / static_cast<double>(batch.size())));
      batch_rank = static_cast<double>(l.value()(0, 0));
      loss = num::add(loss, l);
    }
    const double value = static_cast<double>(fwd.nll.value()(0, 0));
    if (!std::isfinite(value) || !std::isfinite(batch_rank))
      throw TrainingError("non-finite loss at epoch " + std::to_string(state.epoch) + ", batch " +
                          std::to_string(batches + 1));
    nll += value;
    tokens += fwd.tokens;
    rank_total += batch_rank;

    model.params().zero_grad();
    tape.backward(loss);
    ++state.step;
    const double lr = transformer
                          ? num::warmup_inverse_sqrt(config.adam.lr, state.step, config.warmup_steps)
                          : config.adam.lr;
    try {
      state.optimizer.step(model.params(), lr);
    } catch (const TrainingError& e) {
      throw TrainingError(std::string(e.what()) + " at epoch " + std::to_string(state.epoch) +
                          ", batch " + std::to_string(batches + 1));
    }
  }
  EpochRecord rec;
  rec.epoch = state.epoch;
  rec.loss = nll / static_cast<double>(std::max(1L, tokens));
  rec.rank_loss = rank ? rank_total / std::max(1, batches) : 0.0;
  return rec;
}

template <class T>
double validation_bleu(const cap::Captioner<T>& model, const ValidationData& val,
                       const planner::Vocabulary& vocab, planner::Approach approach,
                       world::Tagset tagset, int max_len) {
  const auto kind = planner::decode_stream(approach);
  const auto ts = planner::effective_tagset(approach, tagset);
  if (max_len <= 0)
    max_len = cap::default_max_len(kind == planner::StreamKind::sequential ||
                                   kind == planner::StreamKind::interleave);
  std::vector<std::vector<std::string>> hyps;
  for (const auto* f : val.features) {
    auto session = model.open(*f);
    const auto h = cap::greedy_decode(*session, planner::start_symbol(kind, vocab), vocab.eos(), max_len);
    hyps.push_back(planner::parse_generated(h.ids, kind, ts, vocab).tokens);
  }
  return eval::bleu(hyps, val.references);
}

template <class T>
TrainResult train(cap::Captioner<T>& model, const TrainingData& data, const ValidationData& val,
                  const planner::Vocabulary& vocab, const TrainConfig& config,
                  const std::function<void(const EpochRecord&)>& on_epoch) {
  config.validate();
  if (config.early_stopping && val.features.empty())
    throw EmptyInputError("early stopping needs validation scenes");
  TrainState<T> state{num::Adam<T>(config.adam), std::mt19937_64(config.seed), 0, 0};
  EarlyStopper stopper(config.patience);
  std::vector<num::Tensor<T>> best;
  TrainResult result;
  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    auto rec = train_epoch(model, data, config, state);
    bool halt = false;
    if (config.early_stopping) {
      rec.val_bleu = validation_bleu(model, val, vocab, data.approach, data.tagset, config.val_max_len);
      halt = stopper.update(rec.val_bleu);
      if (stopper.best_epoch() == epoch) {
        best.clear();
        for (const auto& p : model.params()) best.push_back(p.value);
      }
    }
    result.history.push_back(rec);
    if (on_epoch) on_epoch(rec);
    if (halt) {
      result.stopped_early = true;
      break;
    }
  }
  if (config.early_stopping) {
    std::size_t i = 0;
    for (auto& p : model.params()) p.value = best[i++];
    result.best_epoch = stopper.best_epoch();
    result.best_bleu = stopper.best_score();
  } else {
    result.best_epoch = static_cast<int>(result.history.size());
  }
  return result;
}

#define SYNCAP_TRAIN(T)                                                                          \
  template EpochRecord train_epoch(cap::Captioner<T>&, const TrainingData&, const TrainConfig&,  \
                                   TrainState<T>&);                                              \
  template double validation_bleu(const cap::Captioner<T>&, const ValidationData&,               \
                                   const planner::Vocabulary&, planner::Approach, world::Tagset, \
                                   int);                                                         \
  template TrainResult train(cap::Captioner<T>&, const TrainingData&, const ValidationData&,     \
                             const planner::Vocabulary&, const TrainConfig&,                     \
                             const std::function<void(const EpochRecord&)>&);
SYNCAP_TRAIN(float)
SYNCAP_TRAIN(double)
#undef SYNCAP_TRAIN

}  // namespace syncap::train
