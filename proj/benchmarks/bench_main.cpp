#include <benchmark/benchmark.h>

#include <random>

#include "bintest/attacks.hpp"
#include "bintest/harness.hpp"
#include "bintest/readout.hpp"
#include "bintest/sampler.hpp"
#include "bintest/zoo.hpp"

using namespace bintest;

namespace {

const ZooEntry& entry() {
  static const ZooEntry e = build_clean_mlp(0);
  return e;
}

void BM_Forward(benchmark::State& state) {
  const Network net = entry().model.full_network();
  const Vector x = entry().held_out.inputs.front();
  for (auto _ : state) benchmark::DoNotOptimize(net.forward(x));
}
BENCHMARK(BM_Forward);

void BM_Vjp(benchmark::State& state) {
  const Network net = entry().model.full_network();
  const Vector x = entry().held_out.inputs.front();
  const Vector cot(net.output_dim(), 1.0);
  for (auto _ : state) benchmark::DoNotOptimize(net.vjp(x, cot));
}
BENCHMARK(BM_Vjp);

// Max-margin fit on the feature sets of one construction, by inner count.
void BM_FitMaxMargin(benchmark::State& state) {
  const ZooEntry& e = entry();
  SamplingParams p;
  p.n_inner = static_cast<std::size_t>(state.range(0));
  const SampleBundle b = build_bundle(e.held_out.inputs.front(), e.config.threat, p, 7);
  std::vector<Vector> inner, boundary;
  for (const Vector& x : b.inner) inner.push_back(e.model.features.forward(x));
  for (const Vector& x : b.boundary) boundary.push_back(e.model.features.forward(x));
  for (auto _ : state) benchmark::DoNotOptimize(fit_max_margin(inner, boundary));
}
BENCHMARK(BM_FitMaxMargin)->Arg(99)->Arg(999);

void BM_Pgd(benchmark::State& state) {
  const ZooEntry& e = entry();
  const Vector x = e.held_out.inputs.front();
  const AttackTarget t = AttackTarget::classifier(e.model, e.model.predict(x));
  AttackBudget budget;
  budget.steps = static_cast<std::size_t>(state.range(0));
  budget.step_size = 0.25 * e.config.threat.epsilon;
  for (auto _ : state) benchmark::DoNotOptimize(pgd_attack(t, x, e.config.threat, budget));
}
BENCHMARK(BM_Pgd)->Arg(20)->Arg(75);

// Whole per-sample pipeline: bundle, readout, certificate, attack and baseline.
void BM_Construction(benchmark::State& state) {
  const ZooEntry& e = entry();
  const std::vector<Vector> samples = e.samples(1);
  TestConfig cfg = e.config;
  cfg.n_samples = 1;
  AttackSpec none;
  none.kind = AttackKind::random;
  for (auto _ : state) benchmark::DoNotOptimize(run_binarization_test(e.model, none, samples, cfg));
}
BENCHMARK(BM_Construction)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
