#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <functional>
#include <random>

#include "syncap/checkpoint.hpp"
#include "syncap/gradcheck.hpp"
#include "syncap/ops.hpp"
#include "syncap/optim.hpp"

using namespace syncap;
using namespace syncap::num;

namespace {

Tensor<double> random_tensor(int r, int c, std::mt19937_64& g, double scale = 1.0) {
  std::uniform_real_distribution<double> u(-scale, scale);
  Tensor<double> t(r, c);
  for (auto& x : t.data) x = u(g);
  return t;
}

// Gradient check of `f` applied to fresh parameters of the given shapes; the
// output is contracted with a fixed random tensor so every entry matters.
GradCheckReport check_op(const std::vector<std::pair<int, int>>& shapes,
                         const std::function<Var<double>(Tape<double>&, std::vector<Var<double>>&)>& f,
                         std::uint64_t seed = 3) {
  std::mt19937_64 g(seed);
  ParamStore<double> store;
  for (std::size_t i = 0; i < shapes.size(); ++i) {
    auto& p = store.add("p" + std::to_string(i), shapes[i].first, shapes[i].second, Init::zero, g);
    p.value = random_tensor(shapes[i].first, shapes[i].second, g);
  }
  Tensor<double> probe;
  auto loss = [&](bool grad) {
    Tape<double> tape(grad);
    std::vector<Var<double>> in;
    for (auto& p : store) in.push_back(tape.param(p));
    auto out = f(tape, in);
    if (probe.empty()) probe = random_tensor(out.rows(), out.cols(), g);
    auto l = sum_all(mul(out, tape.constant(probe)));
    if (grad) tape.backward(l);
    return l.value()(0, 0);
  };
  return finite_diff_check(loss, store);
}

}  // namespace

TEST_SUITE("numerics") {

TEST_CASE("gemm kernels agree with the triple loop") {
  std::mt19937_64 g(1);
  for (auto [m, k, n] : {std::tuple{1, 1, 1}, {3, 5, 7}, {4, 4, 4}, {9, 6, 2}, {13, 17, 5}}) {
    auto a = random_tensor(m, k, g), b = random_tensor(k, n, g), d = random_tensor(m, n, g);
    Tensor<double> c(m, n), ct(k, n), cnt(m, k);
    kernels::gemm_nn(m, k, n, a.data.data(), b.data.data(), c.data.data());
    kernels::gemm_tn(m, k, n, a.data.data(), d.data.data(), ct.data.data());
    std::vector<double> scratch;
    kernels::gemm_nt(m, n, k, d.data.data(), b.data.data(), cnt.data.data(), scratch);
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < n; ++j) {
        double s = 0;
        for (int p = 0; p < k; ++p) s += a(i, p) * b(p, j);
        CHECK(c(i, j) == doctest::Approx(s).epsilon(1e-12));
      }
    for (int p = 0; p < k; ++p)
      for (int j = 0; j < n; ++j) {
        double s = 0;
        for (int i = 0; i < m; ++i) s += a(i, p) * d(i, j);
        CHECK(ct(p, j) == doctest::Approx(s).epsilon(1e-12));
      }
    for (int i = 0; i < m; ++i)
      for (int p = 0; p < k; ++p) {
        double s = 0;
        for (int j = 0; j < n; ++j) s += d(i, j) * b(p, j);
        CHECK(cnt(i, p) == doctest::Approx(s).epsilon(1e-12));
      }
  }
}

TEST_CASE("elementwise and shape ops pass the gradient check") {
  using V = std::vector<Var<double>>;
  CHECK(check_op({{3, 4}, {4, 5}}, [](auto&, V& x) { return matmul(x[0], x[1]); }).passed);
  CHECK(check_op({{3, 4}, {1, 4}}, [](auto&, V& x) { return add(x[0], x[1]); }).passed);
  CHECK(check_op({{3, 4}, {3, 4}}, [](auto&, V& x) { return mul(sub(x[0], x[1]), x[0]); }).passed);
  CHECK(check_op({{2, 5}}, [](auto&, V& x) { return sigmoid(x[0]); }).passed);
  CHECK(check_op({{2, 5}}, [](auto&, V& x) { return tanh(x[0]); }).passed);
  CHECK(check_op({{2, 5}}, [](auto&, V& x) { return gelu(x[0]); }).passed);
  CHECK(check_op({{2, 3}, {2, 2}}, [](auto&, V& x) { return concat_cols(V{x[0], x[1]}); }).passed);
  CHECK(check_op({{2, 3}, {1, 3}}, [](auto&, V& x) { return concat_rows(V{x[0], x[1]}); }).passed);
  CHECK(check_op({{4, 6}}, [](auto&, V& x) { return slice_rows(slice_cols(x[0], 1, 3), 1, 2); }).passed);
  CHECK(check_op({{4, 3}}, [](auto&, V& x) { return gather_rows(x[0], {3, 0, 3, 1}); }).passed);
  CHECK(check_op({{3, 5}}, [](auto&, V& x) { return transpose(x[0]); }).passed);
  CHECK(check_op({{3, 5}}, [](auto&, V& x) { return softmax_rows(x[0]); }).passed);
  CHECK(check_op({{3, 5}}, [](auto&, V& x) { return mean_rows(x[0]); }).passed);
  CHECK(check_op({{3, 5}}, [](auto&, V& x) { return l2_normalize_rows(x[0]); }).passed);
  CHECK(check_op({{3, 6}, {1, 6}, {1, 6}}, [](auto&, V& x) { return layer_norm(x[0], x[1], x[2]); }).passed);
  CHECK(check_op({{2, 12}, {2, 3}}, [](auto&, V& x) { return lstm_gates(x[0], x[1]); }).passed);
}

TEST_CASE("attention ops pass the gradient check") {
  using V = std::vector<Var<double>>;
  // 2 queries, 3 regions each.
  CHECK(check_op({{2, 4}, {6, 4}, {6, 5}, {1, 4}}, [](auto&, V& x) {
          return attention(x[0], x[1], x[2], x[3], 3).context;
        }).passed);
  // shared keys
  CHECK(check_op({{2, 4}, {3, 4}, {3, 5}, {1, 4}}, [](auto&, V& x) {
          return attention(x[0], x[1], x[2], x[3], 3).context;
        }).passed);
  CHECK(check_op({{6, 4}, {6, 4}, {6, 4}}, [](auto&, V& x) {
          return multihead_attention(x[0], x[1], x[2], 2, 3, 3, 2, true);
        }).passed);
  CHECK(check_op({{4, 4}, {3, 4}, {3, 4}}, [](auto&, V& x) {
          return multihead_attention(x[0], x[1], x[2], 2, 2, 3, 2, false);
        }).passed);
}

TEST_CASE("softmax cross-entropy: value and gradient") {
  Tape<double> tape(false);
  auto logits = tape.constant(Tensor<double>(2, 3, std::vector<double>{0, 0, 0, 1, 2, 3}));
  const double v = softmax_xent(logits, {1, -1}).value()(0, 0);
  CHECK(v == doctest::Approx(std::log(3.0)));
  CHECK_THROWS_AS(softmax_xent(logits, {3, 0}), IndexError);
  using V = std::vector<Var<double>>;
  CHECK(check_op({{3, 5}}, [](auto&, V& x) { return softmax_xent(x[0], {4, -1, 0}); }).passed);
  CHECK(check_op({{3, 4}, {3, 4}}, [](auto&, V& x) {
          return vse_hardest_loss(l2_normalize_rows(x[0]), l2_normalize_rows(x[1]), 0.2);
        }).passed);
}

TEST_CASE("shape mismatches throw") {
  Tape<double> tape(false);
  auto a = tape.constant(Tensor<double>(2, 3)), b = tape.constant(Tensor<double>(2, 3));
  CHECK_THROWS_AS(matmul(a, b), ShapeError);
  CHECK_THROWS_AS(add(a, tape.constant(Tensor<double>(3, 3))), ShapeError);
}

TEST_CASE("gradient check catches a wrong gradient") {
  std::mt19937_64 g(2);
  ParamStore<double> store;
  auto& p = store.add("w", 2, 3, Init::zero, g);
  p.value = random_tensor(2, 3, g);
  auto loss = [&](bool grad) {
    double s = 0;
    for (std::size_t i = 0; i < p.value.data.size(); ++i) {
      const double x = p.value.data[i];
      s += x * x * x;
      if (grad) p.grad.data[i] += 3 * x * x * (i == 4 ? 1.01 : 1.0);
    }
    return s;
  };
  const auto r = finite_diff_check(loss, store);
  CHECK_FALSE(r.passed);
  CHECK(r.max_rel_error > 1e-3);
}

TEST_CASE("Adam: first step moves each weight by lr against its gradient sign") {
  std::mt19937_64 g(0);
  ParamStore<double> store;
  auto& p = store.add("w", 1, 3, Init::zero, g);
  p.value = Tensor<double>(1, 3, std::vector<double>{1.0, -2.0, 0.5});
  p.grad = Tensor<double>(1, 3, std::vector<double>{0.3, -0.1, 0.0});
  AdamConfig cfg;
  cfg.lr = 0.01;
  Adam<double> opt(cfg);
  opt.step(store);
  // Bias-corrected m/sqrt(v) is exactly sign(g) after one step (up to eps).
  CHECK(p.value.data[0] == doctest::Approx(1.0 - 0.01).epsilon(1e-6));
  CHECK(p.value.data[1] == doctest::Approx(-2.0 + 0.01).epsilon(1e-6));
  CHECK(p.value.data[2] == 0.5);
}

TEST_CASE("Adam clips the global norm and refuses non-finite gradients") {
  std::mt19937_64 g(0);
  ParamStore<double> store;
  auto& p = store.add("w", 1, 2, Init::zero, g);
  p.grad = Tensor<double>(1, 2, std::vector<double>{30.0, 40.0});
  AdamConfig cfg;
  cfg.clip_norm = 5.0;
  Adam<double> opt(cfg);
  CHECK(opt.step(store) == doctest::Approx(50.0));
  const auto before = p.value.data;
  p.grad.data[0] = std::nan("");
  CHECK_THROWS_AS(opt.step(store), TrainingError);
  CHECK(p.value.data == before);
}

TEST_CASE("warm-up schedule") {
  CHECK(warmup_inverse_sqrt(1.0, 50, 100) == doctest::Approx(0.5));
  CHECK(warmup_inverse_sqrt(1.0, 100, 100) == doctest::Approx(1.0));
  CHECK(warmup_inverse_sqrt(1.0, 400, 100) == doctest::Approx(0.5));
}

TEST_CASE("checkpoints round-trip and convert precision") {
  std::mt19937_64 g(4);
  ParamStore<float> a;
  a.add("x", 3, 2, Init::embedding, g);
  a.add("y", 1, 4, Init::fan_in, g);
  const auto path = std::filesystem::temp_directory_path() / "syncap_ckpt_test.bin";
  save_checkpoint(path, a, R"({"k":1})");
  ParamStore<double> b;
  b.add("x", 3, 2, Init::zero, g);
  b.add("y", 1, 4, Init::zero, g);
  CHECK(load_checkpoint(path, b) == R"({"k":1})");
  CHECK(read_checkpoint_metadata(path) == R"({"k":1})");
  auto ia = a.begin();
  for (auto& p : b) {
    for (std::size_t i = 0; i < p.value.data.size(); ++i) CHECK(p.value.data[i] == double(ia->value.data[i]));
    ++ia;
  }
  ParamStore<double> wrong;
  wrong.add("x", 2, 3, Init::zero, g);
  wrong.add("y", 1, 4, Init::zero, g);
  CHECK_THROWS(load_checkpoint(path, wrong));
  std::filesystem::remove(path);
  CHECK_THROWS_AS(read_checkpoint_metadata(path), IoError);
}

}
