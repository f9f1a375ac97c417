#include <benchmark/benchmark.h>

#include <random>

#include "syncap/beam_search.hpp"
#include "syncap/captioner.hpp"
#include "syncap/ops.hpp"
#include "syncap/planner.hpp"
#include "syncap/world.hpp"

using namespace syncap;

namespace {

void BM_Gemm(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  std::mt19937_64 g(1);
  std::uniform_real_distribution<float> u(-1.f, 1.f);
  std::vector<float> a(static_cast<std::size_t>(n) * n), b(a.size()), c(a.size());
  for (auto& x : a) x = u(g);
  for (auto& x : b) x = u(g);
  for (auto _ : state) {
    std::fill(c.begin(), c.end(), 0.f);
    num::kernels::gemm_nn(n, n, n, a.data(), b.data(), c.data());
    benchmark::DoNotOptimize(c.data());
  }
  state.SetItemsProcessed(state.iterations() * 2LL * n * n * n);
}
BENCHMARK(BM_Gemm)->Arg(32)->Arg(64)->Arg(128)->Arg(256);

struct Model {
  world::Lexicon lex = world::Lexicon::default_lexicon();
  std::vector<world::CorpusEntry> corpus = world::generate_corpus(64, 1, lex, world::WorldConfig{});
  planner::Vocabulary vocab = planner::Vocabulary::build(corpus, {world::Tagset::pos});
  std::unique_ptr<cap::Captioner<float>> model;

  explicit Model(cap::Backend backend) {
    cap::ModelConfig mc;
    mc.backend = backend;
    mc.vocab = static_cast<int>(vocab.size());
    mc.feature_dim = static_cast<int>(corpus[0].features.cols);
    mc.regions = static_cast<int>(corpus[0].features.rows);
    model = cap::make_captioner<float>(mc);
  }
};

void BM_TrainStep(benchmark::State& state) {
  Model m(static_cast<cap::Backend>(state.range(0)));
  std::vector<cap::Example> examples;
  for (const auto& e : m.corpus) {
    auto s = planner::encode(e.references[0], planner::Approach::interleave, world::Tagset::pos, m.vocab);
    examples.push_back({s[0].ids, &e.features});
  }
  std::vector<const cap::Example*> batch;
  for (std::size_t i = 0; i < 32; ++i) batch.push_back(&examples[i]);
  for (auto _ : state) {
    num::Tape<float> tape(true);
    auto r = m.model->forward(tape, batch, false);
    tape.backward(r.nll);
    m.model->params().zero_grad();
  }
  state.SetItemsProcessed(state.iterations() * 32);
}
BENCHMARK(BM_TrainStep)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_Beam(benchmark::State& state) {
  Model m(static_cast<cap::Backend>(state.range(0)));
  cap::BeamConfig bc;
  bc.beam = static_cast<int>(state.range(1));
  bc.max_len = 40;
  for (auto _ : state) {
    auto session = m.model->open(m.corpus[0].features);
    benchmark::DoNotOptimize(cap::beam_search(*session, m.vocab.bos(), m.vocab.eos(), bc));
  }
}
BENCHMARK(BM_Beam)->Args({0, 5})->Args({0, 20})->Args({1, 20})->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
