#include "syncap/decode.hpp"

#include "json.hpp"

namespace syncap::cap {

template <class T>
std::vector<float> sentence_embedding(const std::vector<std::vector<float>>& states,
                                      ranker::Pooling mode, const ranker::RankerParams<T>& p) {
  if (states.empty()) throw EmptyInputError("sentence embedding of an empty state list");
  Tensor<T> s(static_cast<int>(states.size()), static_cast<int>(states[0].size()));
  for (std::size_t i = 0; i < states.size(); ++i)
    for (std::size_t j = 0; j < states[i].size(); ++j)
      s(static_cast<int>(i), static_cast<int>(j)) = static_cast<T>(states[i][j]);
  Tape<T> tape(false);
  const auto& v = ranker::embed_sentence(tape.constant(std::move(s)), mode, p).value();
  return std::vector<float>(v.data.begin(), v.data.end());
}

template <class T>
std::vector<float> image_embedding(const world::FeatureMatrix& features,
                                   const ranker::RankerParams<T>& p) {
  Tape<T> tape(false);
  const auto& v = ranker::embed_image(tape.constant(feature_tensor<T>(features)), p).value();
  return std::vector<float>(v.data.begin(), v.data.end());
}

template <class T>
std::vector<DecodedCaption> decode_scene(const Captioner<T>& model,
                                         const world::FeatureMatrix& features,
                                         const planner::Vocabulary& vocab,
                                         planner::StreamKind kind, world::Tagset tagset,
                                         const DecodeOptions& options) {
  options.beam.validate();
  auto beam = options.beam;
  if (options.rerank) {
    if (!model.has_ranker()) throw ConfigError("re-ranking needs a model trained with the ranker");
    beam.top_k = beam.beam;
    beam.keep_states = true;
  }
  auto session = model.open(features);
  auto hyps = beam_search(*session, planner::start_symbol(kind, vocab), vocab.eos(), beam);

  std::vector<std::optional<double>> scores(hyps.size());
  if (options.rerank) {
    const auto& rp = model.ranker_params();
    const auto img = image_embedding<T>(features, rp);
    std::vector<ranker::RerankCandidate> cands;
    for (std::size_t i = 0; i < hyps.size(); ++i)
      cands.push_back({static_cast<int>(i), hyps[i].logprob, std::max(1, hyps[i].generated()),
                       sentence_embedding<T>(hyps[i].states, options.pooling, rp)});
    const auto ranked = ranker::rerank(cands, img, options.rerank_lambda);
    std::vector<Hypothesis> reordered;
    std::vector<std::optional<double>> reordered_scores;
    for (std::size_t i = 0; i < ranked.size() && static_cast<int>(i) < options.beam.top_k; ++i) {
      reordered.push_back(std::move(hyps[static_cast<std::size_t>(ranked[i].index)]));
      reordered_scores.push_back(ranked[i].score);
    }
    hyps = std::move(reordered);
    scores = std::move(reordered_scores);
  }

  std::vector<DecodedCaption> out;
  for (std::size_t i = 0; i < hyps.size(); ++i) {
    const auto parsed = planner::parse_generated(hyps[i].ids, kind, tagset, vocab);
    DecodedCaption c;
    c.rank = static_cast<int>(i);
    c.ids = hyps[i].ids;
    c.tokens = parsed.tokens;
    c.tags = parsed.tags;
    c.logprob = hyps[i].logprob;
    c.finished = hyps[i].finished;
    c.wellformed = parsed.wellformed;
    c.rerank_score = scores[i];
    out.push_back(std::move(c));
  }
  return out;
}

std::string to_json(const DecodedCaption& c) {
  nlohmann::ordered_json j;
  j["scene"] = c.scene;
  j["rank"] = c.rank;
  j["ids"] = c.ids;
  j["tokens"] = c.tokens;
  j["tags"] = c.tags;
  j["logprob"] = c.logprob;
  j["finished"] = c.finished;
  j["wellformed"] = c.wellformed;
  if (c.rerank_score) j["rerank_score"] = *c.rerank_score;
  return j.dump();
}

DecodedCaption decoded_from_json(const std::string& line) {
  const auto j = nlohmann::json::parse(line);
  DecodedCaption c;
  c.scene = j.at("scene").get<std::int64_t>();
  c.rank = j.at("rank").get<int>();
  c.ids = j.at("ids").get<std::vector<int>>();
  c.tokens = j.at("tokens").get<std::vector<std::string>>();
  c.tags = j.at("tags").get<std::vector<std::string>>();
  c.logprob = j.at("logprob").get<double>();
  c.finished = j.at("finished").get<bool>();
  c.wellformed = j.at("wellformed").get<bool>();
  if (j.contains("rerank_score")) c.rerank_score = j.at("rerank_score").get<double>();
  return c;
}

#define SYNCAP_DECODE(T)                                                                        \
  template std::vector<DecodedCaption> decode_scene(const Captioner<T>&,                        \
                                                    const world::FeatureMatrix&,                \
                                                    const planner::Vocabulary&,                 \
                                                    planner::StreamKind, world::Tagset,         \
                                                    const DecodeOptions&);                      \
  template std::vector<float> sentence_embedding(const std::vector<std::vector<float>>&,        \
                                                 ranker::Pooling, const ranker::RankerParams<T>&); \
  template std::vector<float> image_embedding(const world::FeatureMatrix&,                      \
                                              const ranker::RankerParams<T>&);
SYNCAP_DECODE(float)
SYNCAP_DECODE(double)
#undef SYNCAP_DECODE

}  // namespace syncap::cap
