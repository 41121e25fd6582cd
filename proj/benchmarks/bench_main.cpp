#include <benchmark/benchmark.h>

#include "qus/estimators.hpp"
#include "qus/parametric_imaging.hpp"
#include "qus/speckle_models.hpp"

namespace {

void BM_SampleHk(benchmark::State& state) {
  qus::Rng rng(1);
  const qus::HKParams p(0.0, 1.0, static_cast<double>(state.range(0)) / 10.0);
  for (auto _ : state) benchmark::DoNotOptimize(qus::sample_hk(p, 65536, rng));
  state.SetItemsProcessed(state.iterations() * 65536);
}
BENCHMARK(BM_SampleHk)->Arg(5)->Arg(20)->Arg(100);

void BM_PatchMap(benchmark::State& state) {
  qus::Rng rng(2);
  const auto a = qus::sample_hk(qus::HKParams(0.0, 1.0, 2.0), 256 * 128, rng);
  const qus::EnvelopeField field(256, 128, std::vector<float>(a.begin(), a.end()));
  qus::PatchMapOptions opt;
  opt.stride = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(qus::patch_map(field, opt));
  state.SetItemsProcessed(state.iterations() * 256 * 128);
}
BENCHMARK(BM_PatchMap)->Arg(1)->Arg(4)->Unit(benchmark::kMillisecond);

void BM_NakagamiMle(benchmark::State& state) {
  qus::Rng rng(3);
  const auto a = qus::sample_nakagami(qus::NakagamiParams(0.8, 1.0), 512, rng);
  for (auto _ : state) benchmark::DoNotOptimize(qus::nakagami_mle(a));
}
BENCHMARK(BM_NakagamiMle);

void BM_PdfHk(benchmark::State& state) {
  const qus::HKParams p(static_cast<double>(state.range(0)) / 10.0, 1.0, 2.0);
  double x = 0.1;
  for (auto _ : state) {
    benchmark::DoNotOptimize(qus::pdf_hk(p, x));
    x = x > 4.0 ? 0.1 : x + 0.37;
  }
}
BENCHMARK(BM_PdfHk)->Arg(0)->Arg(10)->Unit(benchmark::kMicrosecond);

}  // namespace
BENCHMARK_MAIN();
