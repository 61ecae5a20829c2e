#include <benchmark/benchmark.h>

#include <random>

#include "neuracodec/assignment.hpp"
#include "neuracodec/encoder.hpp"

using namespace neuracodec;

namespace {

MasterKey bench_key() { return MasterKey::parse(std::string(64, '7')); }

ImageTensor noise_image(const EncoderConfig& cfg) {
  ImageTensor img(cfg.channels, cfg.height, cfg.width);
  std::mt19937 rng(1);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  for (std::size_t c = 0; c < cfg.channels; ++c)
    for (std::size_t y = 0; y < cfg.height; ++y)
      for (std::size_t x = 0; x < cfg.width; ++x) img.at(c, y, x) = u(rng);
  return img;
}

void forward(benchmark::State& state, EncoderConfig cfg) {
  const auto weights = build_weights(bench_key(), cfg);
  const auto patches = extract_patches(noise_image(cfg), cfg.patch_size);
  for (auto _ : state) benchmark::DoNotOptimize(forward_tokens(patches, weights));
}

void BM_ForwardToy(benchmark::State& state) { forward(state, EncoderConfig::toy(Scheme::neuracrypt)); }
void BM_ForwardDefault(benchmark::State& state) { forward(state, EncoderConfig::defaults(Scheme::neuracrypt)); }

void BM_BuildWeightsToy(benchmark::State& state) {
  const auto cfg = EncoderConfig::toy(Scheme::color);
  for (auto _ : state) benchmark::DoNotOptimize(build_weights(bench_key(), cfg));
}

void BM_KeyStream(benchmark::State& state) {
  std::vector<std::uint8_t> buf(static_cast<std::size_t>(state.range(0)));
  KeyStream ks(bench_key(), "bench");
  for (auto _ : state) {
    ks.read(buf);
    benchmark::DoNotOptimize(buf.data());
  }
  state.SetBytesProcessed(state.iterations() * state.range(0));
}

void BM_Hungarian(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  CostMatrix c(n);
  std::mt19937 rng(3);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) c(i, j) = static_cast<double>(rng() % 1000);
  for (auto _ : state) benchmark::DoNotOptimize(hungarian_assign(c));
}

}  // namespace

BENCHMARK(BM_ForwardToy)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_ForwardDefault)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_BuildWeightsToy)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_KeyStream)->Arg(1 << 16);
BENCHMARK(BM_Hungarian)->Arg(8)->Arg(64)->Arg(256)->Unit(benchmark::kMicrosecond);
BENCHMARK_MAIN();
