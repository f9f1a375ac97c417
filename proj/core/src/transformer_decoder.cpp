// Pre-norm transformer decoder with cross-attention over projected regions.

#include <cmath>
#include <string>

#include "backends.hpp"

namespace syncap::cap::detail {

namespace {

using num::Param;

template <class T>
struct Layer {
  Param<T>*ln1_g, *ln1_b, *wq, *wk, *wv, *wo;
  Param<T>*ln2_g, *ln2_b, *cq, *ck, *cv, *co;
  Param<T>*ln3_g, *ln3_b, *ff1, *ff1_b, *ff2, *ff2_b;
};

template <class T>
struct BoundLayer {
  Var<T> ln1_g, ln1_b, wq, wk, wv, wo, ln2_g, ln2_b, cq, ck, cv, co, ln3_g, ln3_b, ff1, ff1_b, ff2,
      ff2_b;
};

template <class T>
struct Bound {
  Var<T> emb, mem_w, mem_b, lnf_g, lnf_b, out_w, out_b;
  std::vector<BoundLayer<T>> layers;
};

template <class T>
Tensor<T> positions(const std::vector<int>& pos, int d) {
  Tensor<T> out(static_cast<int>(pos.size()), d);
  for (std::size_t i = 0; i < pos.size(); ++i)
    for (int j = 0; j < d; j += 2) {
      const double angle = pos[i] / std::pow(10000.0, static_cast<double>(j) / d);
      out(static_cast<int>(i), j) = static_cast<T>(std::sin(angle));
      if (j + 1 < d) out(static_cast<int>(i), j + 1) = static_cast<T>(std::cos(angle));
    }
  return out;
}

template <class T>
class Transformer;

template <class T>
class TransformerSession final : public DecodeSession {
 public:
  TransformerSession(const Transformer<T>& m, const world::FeatureMatrix& f);
  int vocab_size() const override;
  std::vector<double> begin(int start) override;
  std::vector<std::vector<double>> advance(const std::vector<int>& parents,
                                           const std::vector<int>& tokens) override;

 private:
  std::vector<std::vector<double>> feed(const std::vector<int>& tokens);

  const Transformer<T>& m_;
  std::vector<Tensor<T>> mem_k_, mem_v_;  // per layer, R x D
  std::vector<Tensor<T>> cache_k_, cache_v_;  // per layer, n*len x D
  int n_ = 0;
  int len_ = 0;
};

template <class T>
class Transformer final : public Captioner<T> {
 public:
  explicit Transformer(const ModelConfig& cfg) : Captioner<T>(cfg) {
    std::mt19937_64 rng(cfg.init_seed);
    const int V = cfg.vocab, D = cfg.d_model, F = cfg.feature_dim, FF = cfg.ff;
    auto& ps = this->params_;
    using num::Init;
    emb_ = &ps.add("emb", V, D, Init::embedding, rng);
    mem_w_ = &ps.add("mem.w", F, D, Init::fan_in, rng);
    mem_b_ = &ps.add("mem.b", 1, D, Init::zero, rng);
    for (int l = 0; l < cfg.layers; ++l) {
      const std::string p = "layer" + std::to_string(l) + ".";
      Layer<T> L{};
      L.ln1_g = &ps.add(p + "ln1.g", 1, D, Init::one, rng);
      L.ln1_b = &ps.add(p + "ln1.b", 1, D, Init::zero, rng);
      L.wq = &ps.add(p + "self.wq", D, D, Init::fan_in, rng);
      L.wk = &ps.add(p + "self.wk", D, D, Init::fan_in, rng);
      L.wv = &ps.add(p + "self.wv", D, D, Init::fan_in, rng);
      L.wo = &ps.add(p + "self.wo", D, D, Init::fan_in, rng);
      L.ln2_g = &ps.add(p + "ln2.g", 1, D, Init::one, rng);
      L.ln2_b = &ps.add(p + "ln2.b", 1, D, Init::zero, rng);
      L.cq = &ps.add(p + "cross.wq", D, D, Init::fan_in, rng);
      L.ck = &ps.add(p + "cross.wk", D, D, Init::fan_in, rng);
      L.cv = &ps.add(p + "cross.wv", D, D, Init::fan_in, rng);
      L.co = &ps.add(p + "cross.wo", D, D, Init::fan_in, rng);
      L.ln3_g = &ps.add(p + "ln3.g", 1, D, Init::one, rng);
      L.ln3_b = &ps.add(p + "ln3.b", 1, D, Init::zero, rng);
      L.ff1 = &ps.add(p + "ff.w1", D, FF, Init::fan_in, rng);
      L.ff1_b = &ps.add(p + "ff.b1", 1, FF, Init::zero, rng);
      L.ff2 = &ps.add(p + "ff.w2", FF, D, Init::fan_in, rng);
      L.ff2_b = &ps.add(p + "ff.b2", 1, D, Init::zero, rng);
      layers_.push_back(L);
    }
    lnf_g_ = &ps.add("lnf.g", 1, D, Init::one, rng);
    lnf_b_ = &ps.add("lnf.b", 1, D, Init::zero, rng);
    out_w_ = &ps.add("out.w", D, V, Init::fan_in, rng);
    out_b_ = &ps.add("out.b", 1, V, Init::zero, rng);
  }

  Bound<T> bind(Tape<T>& t) const {
    Bound<T> b{t.param(*emb_),   t.param(*mem_w_), t.param(*mem_b_), t.param(*lnf_g_),
               t.param(*lnf_b_), t.param(*out_w_), t.param(*out_b_), {}};
    for (const auto& L : layers_)
      b.layers.push_back({t.param(*L.ln1_g), t.param(*L.ln1_b), t.param(*L.wq), t.param(*L.wk),
                          t.param(*L.wv), t.param(*L.wo), t.param(*L.ln2_g), t.param(*L.ln2_b),
                          t.param(*L.cq), t.param(*L.ck), t.param(*L.cv), t.param(*L.co),
                          t.param(*L.ln3_g), t.param(*L.ln3_b), t.param(*L.ff1), t.param(*L.ff1_b),
                          t.param(*L.ff2), t.param(*L.ff2_b)});
    return b;
  }

  int heads() const { return this->cfg_.heads; }

  Var<T> memory(const Bound<T>& b, Var<T> x) const {
    return num::add(num::matmul(x, b.mem_w), b.mem_b);
  }

  Var<T> input(const Bound<T>& b, const std::vector<int>& ids, const std::vector<int>& pos) const {
    const int D = this->cfg_.d_model;
    auto e = num::scale(num::gather_rows(b.emb, ids), static_cast<T>(std::sqrt(double(D))));
    return num::add(e, b.emb.tape->constant(positions<T>(pos, D)));
  }

  Var<T> cross(const BoundLayer<T>& L, Var<T> h, Var<T> mk, Var<T> mv, int batch, int tq) const {
    auto q = num::matmul(num::layer_norm(h, L.ln2_g, L.ln2_b), L.cq);
    auto a = num::multihead_attention(q, mk, mv, batch, tq, this->cfg_.regions, heads(), false);
    return num::add(h, num::matmul(a, L.co));
  }

  Var<T> feed_forward(const BoundLayer<T>& L, Var<T> h) const {
    auto z = num::layer_norm(h, L.ln3_g, L.ln3_b);
    z = num::gelu(num::add(num::matmul(z, L.ff1), L.ff1_b));
    return num::add(h, num::add(num::matmul(z, L.ff2), L.ff2_b));
  }

  Var<T> logits(const Bound<T>& b, Var<T> h) const {
    return num::add(num::matmul(num::layer_norm(h, b.lnf_g, b.lnf_b), b.out_w), b.out_b);
  }

  ForwardResult<T> forward(Tape<T>& tape, const std::vector<const Example*>& batch,
                           bool want_states) override {
    if (want_states) throw NotApplicableError("transformer backend has no sentence states");
    const int B = static_cast<int>(batch.size());
    if (B == 0) throw EmptyInputError("forward: empty batch");
    const int R = this->cfg_.regions, F = this->cfg_.feature_dim;
    int steps = 0;
    Tensor<T> feats(B * R, F);
    for (int i = 0; i < B; ++i) {
      const auto& ex = *batch[static_cast<std::size_t>(i)];
      if (ex.ids.size() < 2) throw EmptyInputError("forward: sequence shorter than two symbols");
      if (!ex.features || static_cast<int>(ex.features->rows) != R ||
          static_cast<int>(ex.features->cols) != F)
        throw ShapeError("forward: feature matrix does not match the model");
      steps = std::max(steps, static_cast<int>(ex.ids.size()) - 1);
      for (std::size_t k = 0; k < ex.features->data.size(); ++k)
        feats.data[static_cast<std::size_t>(i) * R * F + k] = static_cast<T>(ex.features->data[k]);
    }
    ForwardResult<T> out;
    std::vector<int> ids, pos, targets;
    for (int i = 0; i < B; ++i) {
      const auto& seq = batch[static_cast<std::size_t>(i)]->ids;
      for (int t = 0; t < steps; ++t) {
        const bool live = t + 1 < static_cast<int>(seq.size());
        ids.push_back(live ? seq[static_cast<std::size_t>(t)] : 0);
        pos.push_back(t);
        targets.push_back(live ? seq[static_cast<std::size_t>(t) + 1] : -1);
        if (live) ++out.tokens;
      }
    }
    const auto b = bind(tape);
    auto mem = memory(b, tape.constant(std::move(feats)));
    auto h = input(b, ids, pos);
    for (const auto& L : b.layers) {
      auto z = num::layer_norm(h, L.ln1_g, L.ln1_b);
      auto a = num::multihead_attention(num::matmul(z, L.wq), num::matmul(z, L.wk),
                                        num::matmul(z, L.wv), B, steps, steps, heads(), true);
      h = num::add(h, num::matmul(a, L.wo));
      h = cross(L, h, num::matmul(mem, L.ck), num::matmul(mem, L.cv), B, steps);
      h = feed_forward(L, h);
    }
    out.nll = num::softmax_xent(logits(b, h), targets);
    return out;
  }

  Var<T> sentence_states(Tape<T>&, const std::vector<int>&) override {
    throw NotApplicableError("transformer backend has no sentence states");
  }

  std::unique_ptr<DecodeSession> open(const world::FeatureMatrix& f) const override {
    return std::make_unique<TransformerSession<T>>(*this, f);
  }

 private:
  Param<T>*emb_, *mem_w_, *mem_b_, *lnf_g_, *lnf_b_, *out_w_, *out_b_;
  std::vector<Layer<T>> layers_;
};

template <class T>
TransformerSession<T>::TransformerSession(const Transformer<T>& m, const world::FeatureMatrix& f)
    : m_(m) {
  const auto& cfg = m.config();
  if (static_cast<int>(f.rows) != cfg.regions || static_cast<int>(f.cols) != cfg.feature_dim)
    throw ShapeError("decode: feature matrix does not match the model");
  Tape<T> tape(false);
  const auto b = m.bind(tape);
  auto mem = m.memory(b, tape.constant(feature_tensor<T>(f)));
  for (const auto& L : b.layers) {
    mem_k_.push_back(num::matmul(mem, L.ck).value());
    mem_v_.push_back(num::matmul(mem, L.cv).value());
  }
}

template <class T>
int TransformerSession<T>::vocab_size() const {
  return m_.config().vocab;
}

template <class T>
std::vector<std::vector<double>> TransformerSession<T>::feed(const std::vector<int>& tokens) {
  const int n = static_cast<int>(tokens.size());
  const int D = m_.config().d_model;
  Tape<T> tape(false);
  const auto b = m_.bind(tape);
  auto h = m_.input(b, tokens, std::vector<int>(tokens.size(), len_));
  for (std::size_t l = 0; l < b.layers.size(); ++l) {
    const auto& L = b.layers[l];
    auto z = num::layer_norm(h, L.ln1_g, L.ln1_b);
    const auto& k_new = num::matmul(z, L.wk).value();
    const auto& v_new = num::matmul(z, L.wv).value();
    // Append one row per hypothesis to its block of the cache.
    Tensor<T> k(n * (len_ + 1), D), v(n * (len_ + 1), D);
    for (int i = 0; i < n; ++i) {
      for (int t = 0; t < len_; ++t) {
        std::copy(cache_k_[l].row(i * len_ + t), cache_k_[l].row(i * len_ + t) + D,
                  k.row(i * (len_ + 1) + t));
        std::copy(cache_v_[l].row(i * len_ + t), cache_v_[l].row(i * len_ + t) + D,
                  v.row(i * (len_ + 1) + t));
      }
      std::copy(k_new.row(i), k_new.row(i) + D, k.row(i * (len_ + 1) + len_));
      std::copy(v_new.row(i), v_new.row(i) + D, v.row(i * (len_ + 1) + len_));
    }
    cache_k_[l] = std::move(k);
    cache_v_[l] = std::move(v);
    auto a = num::multihead_attention(num::matmul(z, L.wq), tape.borrow(cache_k_[l]),
                                      tape.borrow(cache_v_[l]), n, 1, len_ + 1, m_.heads(), false);
    h = num::add(h, num::matmul(a, L.wo));
    h = m_.cross(L, h, tape.borrow(mem_k_[l]), tape.borrow(mem_v_[l]), n, 1);
    h = m_.feed_forward(L, h);
  }
  ++len_;
  n_ = n;
  return log_softmax_rows(m_.logits(b, h).value());
}

template <class T>
std::vector<double> TransformerSession<T>::begin(int start) {
  const int D = m_.config().d_model;
  len_ = 0;
  n_ = 1;
  cache_k_.assign(mem_k_.size(), Tensor<T>(0, D));
  cache_v_.assign(mem_k_.size(), Tensor<T>(0, D));
  return feed({start})[0];
}

template <class T>
std::vector<std::vector<double>> TransformerSession<T>::advance(const std::vector<int>& parents,
                                                                const std::vector<int>& tokens) {
  if (parents.size() != tokens.size()) throw ShapeError("advance: parents and tokens differ");
  const int D = m_.config().d_model;
  const int n = static_cast<int>(parents.size());
  for (int p : parents)
    if (p < 0 || p >= n_) throw IndexError("advance: bad parent index");
  for (std::size_t l = 0; l < cache_k_.size(); ++l) {
    Tensor<T> k(n * len_, D), v(n * len_, D);
    for (int i = 0; i < n; ++i) {
      const int src = parents[static_cast<std::size_t>(i)] * len_;
      std::copy(cache_k_[l].row(src), cache_k_[l].row(src) + len_ * D, k.row(i * len_));
      std::copy(cache_v_[l].row(src), cache_v_[l].row(src) + len_ * D, v.row(i * len_));
    }
    cache_k_[l] = std::move(k);
    cache_v_[l] = std::move(v);
  }
  n_ = n;
  return feed(tokens);
}

}  // namespace

template <class T>
std::unique_ptr<Captioner<T>> make_transformer(const ModelConfig& cfg) {
  return std::make_unique<Transformer<T>>(cfg);
}

template std::unique_ptr<Captioner<float>> make_transformer(const ModelConfig&);
template std::unique_ptr<Captioner<double>> make_transformer(const ModelConfig&);

}  // namespace syncap::cap::detail
