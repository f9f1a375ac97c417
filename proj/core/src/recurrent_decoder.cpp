// Two-layer recurrent decoder. Layer 1 reads only the symbol embeddings, so
// its states describe the text alone and can feed the ranker. Layer 2 reads
// [layer-1 state | attention context over regions | mean region encoding].

#include <utility>

#include "backends.hpp"

namespace syncap::cap::detail {

namespace {

using num::Param;

template <class T>
struct Weights {
  Param<T>*emb, *enc_w, *enc_b;
  Param<T>*l1_wx, *l1_wh, *l1_b;
  Param<T>*att_q, *att_k, *att_v;
  Param<T>*l2_wx, *l2_wm, *l2_wh, *l2_b;
  Param<T>*out_w, *out_b;
};

template <class T>
struct Bound {
  Var<T> emb, enc_w, enc_b, l1_wx, l1_wh, l1_b, att_q, att_k, att_v, l2_wx, l2_wm, l2_wh, l2_b,
      out_w, out_b;
};

template <class T>
struct State {
  Var<T> h1, c1, h2, c2;
};

template <class T>
struct Image {
  Var<T> regions;  // encoded regions, n_images*R x H
  Var<T> keys;     // n_images*R x A
  Var<T> mean_in;  // layer-2 input term of the mean region encoding, n_images x 4H
};

/// `in` is the precomputed input term (input projection plus bias).
template <class T>
std::pair<Var<T>, Var<T>> lstm(Var<T> in, Var<T> h, Var<T> c, Var<T> wh) {
  const int H = c.cols();
  auto hc = num::lstm_gates(num::add(in, num::matmul(h, wh)), c);
  return {num::slice_cols(hc, 0, H), num::slice_cols(hc, H, H)};
}

template <class T>
class Recurrent;

template <class T>
class RecurrentSession final : public DecodeSession {
 public:
  RecurrentSession(const Recurrent<T>& m, const world::FeatureMatrix& f);
  int vocab_size() const override;
  std::vector<double> begin(int start) override;
  std::vector<std::vector<double>> advance(const std::vector<int>& parents,
                                           const std::vector<int>& tokens) override;
  std::vector<float> state(int i) const override;

 private:
  std::vector<std::vector<double>> feed(const std::vector<int>& tokens);

  const Recurrent<T>& m_;
  Tensor<T> regions_, keys_, mean_in_;
  Tensor<T> h1_, c1_, h2_, c2_;
};

template <class T>
class Recurrent final : public Captioner<T> {
 public:
  explicit Recurrent(const ModelConfig& cfg) : Captioner<T>(cfg) {
    std::mt19937_64 rng(cfg.init_seed);
    const int V = cfg.vocab, E = cfg.embed, H = cfg.hidden, F = cfg.feature_dim;
    const int A = cfg.attention > 0 ? cfg.attention : H;
    auto& ps = this->params_;
    using num::Init;
    w_.emb = &ps.add("emb", V, E, Init::embedding, rng);
    w_.enc_w = &ps.add("enc.w", F, H, Init::fan_in, rng);
    w_.enc_b = &ps.add("enc.b", 1, H, Init::zero, rng);
    w_.l1_wx = &ps.add("l1.wx", E, 4 * H, Init::fan_in, rng);
    w_.l1_wh = &ps.add("l1.wh", H, 4 * H, Init::fan_in, rng);
    w_.l1_b = &ps.add("l1.b", 1, 4 * H, Init::zero, rng);
    w_.att_q = &ps.add("att.wq", H, A, Init::fan_in, rng);
    w_.att_k = &ps.add("att.wk", H, A, Init::fan_in, rng);
    w_.att_v = &ps.add("att.v", 1, A, Init::fan_in, rng, A);
    w_.l2_wx = &ps.add("l2.wx", 2 * H, 4 * H, Init::fan_in, rng, 3 * H);
    w_.l2_wm = &ps.add("l2.wm", H, 4 * H, Init::fan_in, rng, 3 * H);
    w_.l2_wh = &ps.add("l2.wh", H, 4 * H, Init::fan_in, rng);
    w_.l2_b = &ps.add("l2.b", 1, 4 * H, Init::zero, rng);
    w_.out_w = &ps.add("out.w", H, V, Init::fan_in, rng);
    w_.out_b = &ps.add("out.b", 1, V, Init::zero, rng);
    if (cfg.ranker) this->attach_ranker(rng, H);
  }

  Bound<T> bind(Tape<T>& t) const {
    return {t.param(*w_.emb),   t.param(*w_.enc_w), t.param(*w_.enc_b), t.param(*w_.l1_wx),
            t.param(*w_.l1_wh), t.param(*w_.l1_b),  t.param(*w_.att_q), t.param(*w_.att_k),
            t.param(*w_.att_v), t.param(*w_.l2_wx), t.param(*w_.l2_wm), t.param(*w_.l2_wh),
            t.param(*w_.l2_b),  t.param(*w_.out_w), t.param(*w_.out_b)};
  }

  /// Encodes n_images stacked region blocks.
  Image<T> encode(const Bound<T>& b, Var<T> x, int n_images) const {
    const int R = this->cfg_.regions;
    auto& t = *x.tape;
    Image<T> img;
    img.regions = num::add(num::matmul(x, b.enc_w), b.enc_b);
    img.keys = num::matmul(img.regions, b.att_k);
    Tensor<T> avg(n_images, n_images * R);
    for (int i = 0; i < n_images; ++i)
      for (int r = 0; r < R; ++r) avg(i, i * R + r) = T(1) / T(R);
    auto mean = num::matmul(t.constant(std::move(avg)), img.regions);
    img.mean_in = num::add(num::matmul(mean, b.l2_wm), b.l2_b);
    return img;
  }

  /// Layer-1 input terms for a list of symbols, one row each.
  Var<T> layer1_inputs(const Bound<T>& b, const std::vector<int>& tokens) const {
    return num::add(num::matmul(num::gather_rows(b.emb, tokens), b.l1_wx), b.l1_b);
  }

  /// `x` holds layer-1 input terms and `mean_in` the layer-2 mean term per row.
  State<T> step(const Bound<T>& b, const Image<T>& img, Var<T> mean_in, Var<T> x,
                const State<T>& s) const {
    State<T> n;
    std::tie(n.h1, n.c1) = lstm(x, s.h1, s.c1, b.l1_wh);
    auto att = num::attention(num::matmul(n.h1, b.att_q), img.keys, img.regions, b.att_v,
                              this->cfg_.regions);
    auto in2 = num::add(num::matmul(num::concat_cols<T>({n.h1, att.context}), b.l2_wx), mean_in);
    std::tie(n.h2, n.c2) = lstm(in2, s.h2, s.c2, b.l2_wh);
    return n;
  }

  Var<T> logits(const Bound<T>& b, Var<T> h2) const {
    return num::add(num::matmul(h2, b.out_w), b.out_b);
  }

  ForwardResult<T> forward(Tape<T>& tape, const std::vector<const Example*>& batch,
                           bool want_states) override {
    const int B = static_cast<int>(batch.size());
    if (B == 0) throw EmptyInputError("forward: empty batch");
    const int R = this->cfg_.regions, F = this->cfg_.feature_dim, H = this->cfg_.hidden;
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
    const auto b = bind(tape);
    const auto img = encode(b, tape.constant(std::move(feats)), B);
    State<T> s;
    s.h1 = s.c1 = s.h2 = s.c2 = tape.constant(Tensor<T>(B, H));

    std::vector<Var<T>> top, low;
    std::vector<int> inputs, targets;
    ForwardResult<T> out;
    for (int t = 0; t < steps; ++t)
      for (int i = 0; i < B; ++i) {
        const auto& ids = batch[static_cast<std::size_t>(i)]->ids;
        const bool live = t + 1 < static_cast<int>(ids.size());
        inputs.push_back(live ? ids[static_cast<std::size_t>(t)] : 0);
        targets.push_back(live ? ids[static_cast<std::size_t>(t) + 1] : -1);
        if (live) ++out.tokens;
      }
    const auto x = layer1_inputs(b, inputs);
    for (int t = 0; t < steps; ++t) {
      s = step(b, img, img.mean_in, num::slice_rows(x, t * B, B), s);
      top.push_back(s.h2);
      if (want_states) low.push_back(s.h1);
    }
    out.nll = num::softmax_xent(logits(b, num::concat_rows(top)), targets);
    if (want_states) {
      auto all = num::concat_rows(low);
      for (int i = 0; i < B; ++i) {
        const int n = static_cast<int>(batch[static_cast<std::size_t>(i)]->ids.size()) - 1;
        std::vector<int> rows;
        for (int t = 0; t < n; ++t) rows.push_back(t * B + i);
        out.states.push_back(num::gather_rows(all, rows));
      }
    }
    return out;
  }

  Var<T> sentence_states(Tape<T>& tape, const std::vector<int>& ids) override {
    if (ids.empty()) throw EmptyInputError("sentence_states: empty sequence");
    const auto b = bind(tape);
    const int H = this->cfg_.hidden;
    Var<T> h = tape.constant(Tensor<T>(1, H)), c = h;
    const auto x = layer1_inputs(b, ids);
    std::vector<Var<T>> rows;
    for (int t = 0; t < static_cast<int>(ids.size()); ++t) {
      std::tie(h, c) = lstm(num::slice_rows(x, t, 1), h, c, b.l1_wh);
      rows.push_back(h);
    }
    return num::concat_rows(rows);
  }

  std::unique_ptr<DecodeSession> open(const world::FeatureMatrix& f) const override {
    return std::make_unique<RecurrentSession<T>>(*this, f);
  }

 private:
  Weights<T> w_{};
};

template <class T>
RecurrentSession<T>::RecurrentSession(const Recurrent<T>& m, const world::FeatureMatrix& f)
    : m_(m) {
  const auto& cfg = m.config();
  if (static_cast<int>(f.rows) != cfg.regions || static_cast<int>(f.cols) != cfg.feature_dim)
    throw ShapeError("decode: feature matrix does not match the model");
  Tape<T> tape(false);
  const auto b = m.bind(tape);
  const auto img = m.encode(b, tape.constant(feature_tensor<T>(f)), 1);
  regions_ = img.regions.value();
  keys_ = img.keys.value();
  mean_in_ = img.mean_in.value();
}

template <class T>
int RecurrentSession<T>::vocab_size() const {
  return m_.config().vocab;
}

template <class T>
std::vector<std::vector<double>> RecurrentSession<T>::feed(const std::vector<int>& tokens) {
  Tape<T> tape(false);
  const auto b = m_.bind(tape);
  Image<T> img{tape.borrow(regions_), tape.borrow(keys_), tape.borrow(mean_in_)};
  const std::vector<int> zeros(tokens.size(), 0);
  auto mean_in = num::gather_rows(img.mean_in, zeros);
  State<T> s{tape.borrow(h1_), tape.borrow(c1_), tape.borrow(h2_), tape.borrow(c2_)};
  auto n = m_.step(b, img, mean_in, m_.layer1_inputs(b, tokens), s);
  auto lp = log_softmax_rows(m_.logits(b, n.h2).value());
  h1_ = n.h1.value();
  c1_ = n.c1.value();
  h2_ = n.h2.value();
  c2_ = n.c2.value();
  return lp;
}

template <class T>
std::vector<double> RecurrentSession<T>::begin(int start) {
  const int H = m_.config().hidden;
  h1_ = c1_ = h2_ = c2_ = Tensor<T>(1, H);
  return feed({start})[0];
}

template <class T>
std::vector<std::vector<double>> RecurrentSession<T>::advance(const std::vector<int>& parents,
                                                              const std::vector<int>& tokens) {
  if (parents.size() != tokens.size()) throw ShapeError("advance: parents and tokens differ");
  auto pick = [&](const Tensor<T>& src) {
    Tensor<T> out(static_cast<int>(parents.size()), src.cols);
    for (std::size_t i = 0; i < parents.size(); ++i) {
      if (parents[i] < 0 || parents[i] >= src.rows) throw IndexError("advance: bad parent index");
      std::copy(src.row(parents[i]), src.row(parents[i]) + src.cols, out.row(static_cast<int>(i)));
    }
    return out;
  };
  h1_ = pick(h1_);
  c1_ = pick(c1_);
  h2_ = pick(h2_);
  c2_ = pick(c2_);
  return feed(tokens);
}

template <class T>
std::vector<float> RecurrentSession<T>::state(int i) const {
  std::vector<float> out(static_cast<std::size_t>(h1_.cols));
  for (int j = 0; j < h1_.cols; ++j) out[static_cast<std::size_t>(j)] = static_cast<float>(h1_(i, j));
  return out;
}

}  // namespace

template <class T>
std::unique_ptr<Captioner<T>> make_recurrent(const ModelConfig& cfg) {
  return std::make_unique<Recurrent<T>>(cfg);
}

template std::unique_ptr<Captioner<float>> make_recurrent(const ModelConfig&);
template std::unique_ptr<Captioner<double>> make_recurrent(const ModelConfig&);

}  // namespace syncap::cap::detail
