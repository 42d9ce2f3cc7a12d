#include <benchmark/benchmark.h>

#include "w2s/losses.hpp"
#include "w2s/optim.hpp"
#include "w2s/pipeline.hpp"
#include "w2s/rng.hpp"
#include "w2s/synthetic.hpp"

namespace {

using namespace w2s;

Matrix gaussian(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  Philox rng(seed, "bench");
  Matrix m(rows, cols);
  for (double& v : m.values()) v = rng.normal();
  return m;
}

void BM_CosineLogits(benchmark::State& state) {
  const auto k = static_cast<std::size_t>(state.range(0));
  const PrototypeMatrix c(gaussian(k, 64, 1));
  const EmbeddingMatrix x(gaussian(512, 64, 2));
  for (auto _ : state) benchmark::DoNotOptimize(cosine_logits(c, x));
  state.SetItemsProcessed(state.iterations() * 512);
}
BENCHMARK(BM_CosineLogits)->Arg(20)->Arg(345);

void BM_CplGrad(benchmark::State& state) {
  const auto batch = static_cast<std::size_t>(state.range(0));
  const PrototypeMatrix c(gaussian(20, 64, 1));
  const EmbeddingMatrix x(gaussian(batch, 64, 2));
  const LogitMatrix zw{gaussian(batch, 20, 3), LogitSource::kWeak};
  for (auto _ : state) benchmark::DoNotOptimize(cpl_grad(c, x, zw, Temperature(2.0)));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(batch));
}
BENCHMARK(BM_CplGrad)->Arg(32)->Arg(512);

void BM_AdamStep(benchmark::State& state) {
  Matrix p = gaussian(345, 512, 1);
  const Matrix g = gaussian(345, 512, 2);
  AdamState s;
  for (auto _ : state) {
    adam_step(p, g, s, 1e-6);
    benchmark::ClobberMemory();
  }
  state.SetBytesProcessed(state.iterations() * static_cast<std::int64_t>(p.size() * sizeof(double)));
}
BENCHMARK(BM_AdamStep);

void BM_PipelineDefaultDomain(benchmark::State& state) {
  const SyntheticSpec spec = SyntheticSpec::desk_default();
  const DomainData data = generate_domain(spec, spec.domains.back());
  const std::vector<Method> methods{Method::kCpl, Method::kCe, Method::kKd, Method::kAuxConf,
                                    Method::kAdaptConf};
  const PipelineConfig cfg;
  for (auto _ : state) benchmark::DoNotOptimize(run_pipeline(data, methods, cfg, 0));
}
BENCHMARK(BM_PipelineDefaultDomain)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
