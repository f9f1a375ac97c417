#pragma once

#include <utility>
#include <vector>

#include "syncap/tape.hpp"

namespace syncap::num {

// Every op records a backward closure on the tape of its first argument when
// any input needs a gradient. Shapes are checked; mismatches throw ShapeError.

template <class T> Var<T> matmul(Var<T> a, Var<T> b);
/// Same-shape sum, or broadcast of a 1 x n `b` over the rows of `a`.
template <class T> Var<T> add(Var<T> a, Var<T> b);
template <class T> Var<T> sub(Var<T> a, Var<T> b);
template <class T> Var<T> mul(Var<T> a, Var<T> b);
template <class T> Var<T> scale(Var<T> a, T s);

template <class T> Var<T> sigmoid(Var<T> a);
template <class T> Var<T> tanh(Var<T> a);
/// tanh approximation of GELU.
template <class T> Var<T> gelu(Var<T> a);

template <class T> Var<T> concat_cols(const std::vector<Var<T>>& parts);
template <class T> Var<T> concat_rows(const std::vector<Var<T>>& parts);
template <class T> Var<T> slice_cols(Var<T> a, int start, int len);
template <class T> Var<T> slice_rows(Var<T> a, int start, int len);
/// out[i] = a[idx[i]]; the backward pass scatters-adds.
template <class T> Var<T> gather_rows(Var<T> a, const std::vector<int>& idx);
template <class T> Var<T> transpose(Var<T> a);

template <class T> Var<T> softmax_rows(Var<T> a);
/// Column means: m x n -> 1 x n.
template <class T> Var<T> mean_rows(Var<T> a);
template <class T> Var<T> sum_all(Var<T> a);
template <class T> Var<T> l2_normalize_rows(Var<T> a);
template <class T> Var<T> layer_norm(Var<T> x, Var<T> gamma, Var<T> beta, T eps = T(1e-5));

/// Nonlinear part of an LSTM cell. `pre` holds the input, forget, candidate
/// and output pre-activations side by side (B x 4H); returns [h' | c'] (B x 2H).
template <class T> Var<T> lstm_gates(Var<T> pre, Var<T> c);

/// Additive attention weights: softmax_r(w . tanh(q_b + k_{b,r})) for `regions`
/// keys per query row. `k` holds B*regions rows, or `regions` rows shared by
/// every query. Returns B x regions.
template <class T> Var<T> additive_scores(Var<T> q, Var<T> k, Var<T> w, int regions);
/// ctx_b = sum_r weights_{b,r} * values_{b,r}, same row layout as above.
template <class T> Var<T> pool_regions(Var<T> weights, Var<T> values);

template <class T>
struct Attention {
  Var<T> context;
  Var<T> weights;
};
/// Additive attention over region rows (see additive_scores).
template <class T>
Attention<T> attention(Var<T> q, Var<T> keys, Var<T> values, Var<T> w, int regions);

/// Scaled dot-product attention with `heads` heads for `batch` independent
/// blocks: q is batch*tq x d, k and v are batch*tk x d (or tk x d shared by all
/// blocks). With `causal`, query i sees keys j <= i + (tk - tq).
template <class T>
Var<T> multihead_attention(Var<T> q, Var<T> k, Var<T> v, int batch, int tq, int tk,
                           int heads, bool causal);

/// Sum over rows of -log softmax(logits)[target]; target -1 skips the row.
/// Throws IndexError for targets outside [0, V).
template <class T> Var<T> softmax_xent(Var<T> logits, const std::vector<int>& targets);

/// Max-margin loss with the hardest in-batch negative in both directions,
/// summed over the N matched rows of `img` and `sen` (row-normalized inputs
/// give cosine similarities). N >= 2.
template <class T> Var<T> vse_hardest_loss(Var<T> img, Var<T> sen, T margin);

}  // namespace syncap::num
