#include <cmath>

#include "backends.hpp"
#include "json.hpp"
#include "syncap/captioner.hpp"

namespace syncap::cap {

std::string_view to_string(Backend b) {
  return b == Backend::recurrent ? "recurrent" : "transformer";
}

Backend backend_from_string(std::string_view s) {
  if (s == "recurrent") return Backend::recurrent;
  if (s == "transformer") return Backend::transformer;
  throw ConfigError("unknown backend: " + std::string(s));
}

void ModelConfig::validate() const {
  if (vocab < 2) throw ConfigError("model: vocabulary needs at least two symbols");
  if (feature_dim <= 0 || regions <= 0) throw ConfigError("model: empty feature layout");
  if (backend == Backend::recurrent && (embed <= 0 || hidden <= 0 || attention < 0))
    throw ConfigError("model: recurrent sizes must be positive");
  if (backend == Backend::transformer) {
    if (layers <= 0 || heads <= 0 || d_model <= 0 || ff <= 0)
      throw ConfigError("model: transformer sizes must be positive");
    if (d_model % heads != 0) throw ConfigError("model: d_model must be divisible by heads");
    if (ranker) throw ConfigError("model: the ranker needs the recurrent backend");
  }
  if (ranker && rank_dim <= 0) throw ConfigError("model: rank_dim must be positive");
}

std::string ModelConfig::to_json() const {
  nlohmann::json j = {{"backend", std::string(to_string(backend))},
                      {"vocab", vocab},
                      {"feature_dim", feature_dim},
                      {"regions", regions},
                      {"embed", embed},
                      {"hidden", hidden},
                      {"attention", attention},
                      {"layers", layers},
                      {"heads", heads},
                      {"d_model", d_model},
                      {"ff", ff},
                      {"ranker", ranker},
                      {"rank_dim", rank_dim},
                      {"init_seed", init_seed}};
  return j.dump();
}

ModelConfig ModelConfig::from_json(const std::string& text) {
  ModelConfig c;
  try {
    const auto j = nlohmann::json::parse(text);
    c.backend = backend_from_string(j.at("backend").get<std::string>());
    c.vocab = j.at("vocab");
    c.feature_dim = j.at("feature_dim");
    c.regions = j.at("regions");
    c.embed = j.at("embed");
    c.hidden = j.at("hidden");
    c.attention = j.at("attention");
    c.layers = j.at("layers");
    c.heads = j.at("heads");
    c.d_model = j.at("d_model");
    c.ff = j.at("ff");
    c.ranker = j.at("ranker");
    c.rank_dim = j.at("rank_dim");
    c.init_seed = j.at("init_seed");
  } catch (const nlohmann::json::exception& ex) {
    throw IoError(std::string("malformed model config: ") + ex.what());
  }
  return c;
}

template <class T>
void Captioner<T>::attach_ranker(std::mt19937_64& rng, int hidden) {
  ranker_ = ranker::RankerParams<T>::attach(params_, hidden, cfg_.feature_dim, cfg_.rank_dim, rng);
}

template <class T>
const ranker::RankerParams<T>& Captioner<T>::ranker_params() const {
  if (!ranker_) throw NotApplicableError("model was built without a ranker");
  return *ranker_;
}

template <class T>
std::unique_ptr<Captioner<T>> make_captioner(const ModelConfig& cfg) {
  cfg.validate();
  if (cfg.backend == Backend::recurrent) return detail::make_recurrent<T>(cfg);
  return detail::make_transformer<T>(cfg);
}

template <class T>
Tensor<T> feature_tensor(const world::FeatureMatrix& f) {
  Tensor<T> t(static_cast<int>(f.rows), static_cast<int>(f.cols));
  for (std::size_t i = 0; i < f.data.size(); ++i) t.data[i] = static_cast<T>(f.data[i]);
  return t;
}

template <class T>
std::vector<std::vector<double>> log_softmax_rows(const Tensor<T>& logits) {
  std::vector<std::vector<double>> out(static_cast<std::size_t>(logits.rows));
  for (int r = 0; r < logits.rows; ++r) {
    const T* x = logits.row(r);
    double mx = x[0];
    for (int j = 1; j < logits.cols; ++j) mx = std::max(mx, static_cast<double>(x[j]));
    double s = 0;
    for (int j = 0; j < logits.cols; ++j) s += std::exp(static_cast<double>(x[j]) - mx);
    const double lz = mx + std::log(s);
    auto& row = out[static_cast<std::size_t>(r)];
    row.resize(static_cast<std::size_t>(logits.cols));
    for (int j = 0; j < logits.cols; ++j) row[static_cast<std::size_t>(j)] = x[j] - lz;
  }
  return out;
}

double score_sequence(DecodeSession& session, const std::vector<int>& ids) {
  if (ids.size() < 2) throw EmptyInputError("score_sequence: need a start symbol and a target");
  auto lp = session.begin(ids[0]);
  double total = 0;
  for (std::size_t i = 1; i < ids.size(); ++i) {
    total += lp[static_cast<std::size_t>(ids[i])];
    if (i + 1 < ids.size()) lp = session.advance({0}, {ids[i]})[0];
  }
  return total;
}

template class Captioner<float>;
template class Captioner<double>;
template std::unique_ptr<Captioner<float>> make_captioner(const ModelConfig&);
template std::unique_ptr<Captioner<double>> make_captioner(const ModelConfig&);
template Tensor<float> feature_tensor(const world::FeatureMatrix&);
template Tensor<double> feature_tensor(const world::FeatureMatrix&);
template std::vector<std::vector<double>> log_softmax_rows(const Tensor<float>&);
template std::vector<std::vector<double>> log_softmax_rows(const Tensor<double>&);

}  // namespace syncap::cap
