#include <benchmark/benchmark.h>

#include <random>

#include "longtrack/features.hpp"
#include "longtrack/numerics.hpp"
#include "longtrack/selfeval.hpp"
#include "longtrack/synthetic.hpp"
#include "longtrack/tracker.hpp"

namespace {

using namespace longtrack;

Tensor3 random_tensor(std::size_t h, std::size_t w, std::size_t c,
                      unsigned seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist;
  Tensor3 t(h, w, c);
  for (double& v : t.data()) {
    v = dist(rng);
  }
  return t;
}

// Args: query side (cells), probe height, probe width (cells).
void xcorr_args(benchmark::internal::Benchmark* b) {
  b->Args({4, 8, 8})->Args({8, 16, 16})->Args({4, 15, 20});
}

void BM_XcorrDirect(benchmark::State& state) {
  const auto q = static_cast<std::size_t>(state.range(0));
  const Tensor3 query = random_tensor(q, q, 8, 1);
  const Tensor3 probe = random_tensor(static_cast<std::size_t>(state.range(1)),
                                      static_cast<std::size_t>(state.range(2)),
                                      8, 2);
  for (auto _ : state) {
    benchmark::DoNotOptimize(xcorr_valid(query, probe));
  }
}
BENCHMARK(BM_XcorrDirect)->Apply(xcorr_args);

void BM_XcorrFft(benchmark::State& state) {
  const auto q = static_cast<std::size_t>(state.range(0));
  const Tensor3 query = random_tensor(q, q, 8, 1);
  const Tensor3 probe = random_tensor(static_cast<std::size_t>(state.range(1)),
                                      static_cast<std::size_t>(state.range(2)),
                                      8, 2);
  for (auto _ : state) {
    benchmark::DoNotOptimize(xcorr_valid_fft(query, probe));
  }
}
BENCHMARK(BM_XcorrFft)->Apply(xcorr_args);

void BM_Extract(benchmark::State& state) {
  const auto side = static_cast<std::size_t>(state.range(0));
  std::mt19937 rng(3);
  ImagePatch patch(side, side);
  for (auto& px : patch.data()) {
    px = static_cast<std::uint8_t>(rng() & 0xFF);
  }
  const auto extractor = default_extractor();
  for (auto _ : state) {
    benchmark::DoNotOptimize(extractor->extract(patch));
  }
}
BENCHMARK(BM_Extract)->Arg(32)->Arg(64)->Arg(128);

void tracker_step(benchmark::State& state, std::size_t period) {
  const Sequence seq = generate_synthetic(disappearance_spec(11, 200), 11);
  TrackerConfig config;
  config.period = period;
  config.update.mode = UpdateMode::none;
  Tracker tracker(config);
  tracker.init(*seq.frames[0], seq.init_box);
  std::size_t f = 1;
  for (auto _ : state) {
    benchmark::DoNotOptimize(tracker.step(*seq.frames[f]));
    f = f + 1 < seq.frames.size() ? f + 1 : 1;
  }
}

void BM_StepGlobal(benchmark::State& state) { tracker_step(state, 1); }
BENCHMARK(BM_StepGlobal)->Unit(benchmark::kMillisecond);

void BM_StepLocal(benchmark::State& state) {
  tracker_step(state, static_cast<std::size_t>(-1));
}
BENCHMARK(BM_StepLocal)->Unit(benchmark::kMillisecond);

std::vector<Grid2> random_maps(const SelfEvalDims& d) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> dist;
  std::vector<Grid2> maps;
  for (std::size_t k = 0; k < d.sequence_length; ++k) {
    Grid2 m(d.map_side, d.map_side);
    for (double& v : m.data()) {
      v = dist(rng);
    }
    maps.push_back(std::move(m));
  }
  return maps;
}

void BM_SelfEvalForward(benchmark::State& state) {
  const SelfEvalNet net = SelfEvalNet::initialized({}, 1);
  const auto maps = random_maps(net.dims());
  for (auto _ : state) {
    benchmark::DoNotOptimize(net.forward(maps));
  }
}
BENCHMARK(BM_SelfEvalForward);

void BM_SelfEvalBackward(benchmark::State& state) {
  const SelfEvalNet net = SelfEvalNet::initialized({}, 1);
  std::vector<EvalSample> batch;
  for (int i = 0; i < 16; ++i) {
    batch.push_back(EvalSample::make(random_maps(net.dims()), 0.1 * i));
  }
  for (auto _ : state) {
    benchmark::DoNotOptimize(backward(net, batch));
  }
}
BENCHMARK(BM_SelfEvalBackward)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
