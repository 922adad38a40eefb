#include <benchmark/benchmark.h>

#include "generators.hpp"
#include "layermix/crf.hpp"
#include "layermix/embedstore.hpp"
#include "layermix/harness.hpp"
#include "layermix/mixer.hpp"
#include "layermix/neuralnet.hpp"
#include "layermix/tagger.hpp"

using namespace layermix;

namespace {

CrfParams random_crf(Eigen::Index T, Rng& rng) {
  return {testing::random_matrix(T, T, rng), testing::random_vector(T, rng),
          testing::random_vector(T, rng)};
}

// args: sentence length, tag count
void BM_CrfLogPartition(benchmark::State& state) {
  Rng rng(1);
  const auto e = testing::random_matrix(state.range(0), state.range(1), rng);
  const auto crf = random_crf(state.range(1), rng);
  for (auto _ : state) benchmark::DoNotOptimize(log_partition(e, crf));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_CrfLogPartition)->Args({10, 3})->Args({30, 9})->Args({50, 17});

void BM_CrfNllAndGrad(benchmark::State& state) {
  Rng rng(2);
  const auto e = testing::random_matrix(state.range(0), state.range(1), rng);
  const auto crf = random_crf(state.range(1), rng);
  std::vector<int> gold(static_cast<std::size_t>(state.range(0)), 0);
  for (auto _ : state) benchmark::DoNotOptimize(nll_and_grad(e, crf, gold));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_CrfNllAndGrad)->Args({10, 3})->Args({30, 9})->Args({50, 17});

void BM_Viterbi(benchmark::State& state) {
  Rng rng(3);
  const auto e = testing::random_matrix(state.range(0), state.range(1), rng);
  const auto crf = random_crf(state.range(1), rng);
  for (auto _ : state) benchmark::DoNotOptimize(viterbi_decode(e, crf));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Viterbi)->Args({10, 3})->Args({30, 9})->Args({50, 17});

// args: input dim, hidden, length
void BM_BiLstmForwardBackward(benchmark::State& state) {
  Rng rng(4);
  const auto in = state.range(0), h = state.range(1), n = state.range(2);
  const auto p = BiLstmParams<float>::random(in, h, rng);
  const Matrix<float> x = testing::random_matrix(in, n, rng).cast<float>();
  const Matrix<float> g = testing::random_matrix(2 * h, n, rng).cast<float>();
  auto grad = BiLstmParams<float>::zeros(in, h);
  for (auto _ : state) {
    const auto cache = bilstm_forward<float>(x, p);
    benchmark::DoNotOptimize(bilstm_backward<float>(cache, p, g, grad));
  }
  state.SetItemsProcessed(state.iterations() * n);
}
BENCHMARK(BM_BiLstmForwardBackward)->Args({16, 100, 10})->Args({48, 100, 10})->Args({1024, 100, 25});

void BM_MixSentence(benchmark::State& state) {
  Rng rng(5);
  const auto s = testing::random_sentence(3, static_cast<std::size_t>(state.range(0)), 25, rng);
  const auto scheme = MixScheme::learned_weighted({0, 1, 2});
  const auto p = MixParams<float>::initial(scheme);
  for (auto _ : state) benchmark::DoNotOptimize(mix_sentence<float>(s, scheme, p));
}
BENCHMARK(BM_MixSentence)->Arg(16)->Arg(1024);

// One training epoch on the standard synthetic fixture; arg: hidden size.
void BM_TrainEpoch(benchmark::State& state) {
  static const auto data = prepare_experiment_data(generate(SynthSpec{}));
  ExperimentConfig c;
  c.scheme = "wavg:0,1,2";
  c.hidden_size = static_cast<int>(state.range(0));
  c.max_epochs = 1;
  for (auto _ : state) benchmark::DoNotOptimize(train_one(c, data, 1));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(data.train.num_tokens()));
}
BENCHMARK(BM_TrainEpoch)->Arg(16)->Arg(100)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
