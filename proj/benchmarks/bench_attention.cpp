// Wall-clock timings of the attention variants and of one model forward.
// Flop counts are attached as counters so rates can be read off directly.

#include <benchmark/benchmark.h>

#include "smpler/bench.hpp"
#include "smpler/model.hpp"

namespace {

using smpler::Variant;

void attention_variant(benchmark::State& state, Variant v) {
  smpler::BenchDims dims;
  dims.l_f = static_cast<std::size_t>(state.range(0));
  std::uint64_t flops = 0;
  for (auto _ : state) {
    const smpler::CostReport r = smpler::measure_attention(v, dims);
    flops = r.flops;
    benchmark::DoNotOptimize(r.core_flops);
  }
  state.counters["flops"] = static_cast<double>(flops);
  state.counters["flop_rate"] = benchmark::Counter(static_cast<double>(flops), benchmark::Counter::kIsIterationInvariantRate);
}

void forward(benchmark::State& state, const char* preset) {
  const smpler::SmplerModel m = smpler::SmplerModel::create(smpler::SmplerConfig::preset(preset), 0);
  const smpler::Tensor image = m.make_input(1);
  for (auto _ : state) {
    const smpler::ForwardResult r = m.forward(image);
    benchmark::DoNotOptimize(r.estimates.back().rotations[0]);
  }
}

}  // namespace

BENCHMARK_CAPTURE(attention_variant, full, Variant::kFull)->RangeMultiplier(2)->Range(256, 2048)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(attention_variant, decoupled, Variant::kDecoupled)
    ->RangeMultiplier(2)
    ->Range(256, 4096)
    ->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(attention_variant, multiscale, Variant::kMultiscale)
    ->RangeMultiplier(2)
    ->Range(256, 4096)
    ->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(attention_variant, concat, Variant::kConcat)->RangeMultiplier(2)->Range(256, 4096)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(forward, toy, "toy")->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(forward, default, "default")->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
