#include <benchmark/benchmark.h>

#include "noir/memory.hpp"
#include "noir/param.hpp"
#include "noir/random.hpp"
#include "noir/sim.hpp"
#include "noir/ssvep.hpp"
#include "noir/synth.hpp"

using namespace noir;

namespace {

param::FeatureMap random_map(int c, int h, int w, std::uint64_t seed) {
  param::FeatureMap m(c, h, w, 360, 240);
  Rng rng(seed);
  std::normal_distribution<float> n;
  for (auto& v : m.data) v = n(rng);
  return m;
}

void BM_MatchPoint(benchmark::State& state) {
  const auto a = random_map(64, 75, 100, 1), b = random_map(64, 75, 100, 2);
  for (auto _ : state) benchmark::DoNotOptimize(param::match_point(a, {180, 120}, b));
}
BENCHMARK(BM_MatchPoint)->Unit(benchmark::kMillisecond);

void BM_MatchPointNaive(benchmark::State& state) {
  const auto a = random_map(64, 75, 100, 1), b = random_map(64, 75, 100, 2);
  for (auto _ : state) benchmark::DoNotOptimize(param::match_point_naive(a, {180, 120}, b));
}
BENCHMARK(BM_MatchPointNaive)->Unit(benchmark::kMillisecond);

void BM_SsvepDecode(benchmark::State& state) {
  synth::SynthContext ctx;
  synth::SsvepStimulus stim;
  const auto e = synth::gen_ssvep(ctx, stim, 1, 3);
  const ssvep::SsvepDecoder d(stim.frequencies, ctx.montage);
  for (auto _ : state) benchmark::DoNotOptimize(d.decode(e));
}
BENCHMARK(BM_SsvepDecode)->Unit(benchmark::kMillisecond);

void BM_EmbeddingForward(benchmark::State& state) {
  memory::TrainConfig cfg;
  const memory::EmbeddingNet net(cfg.layer_dims(), 1);
  const auto batch = static_cast<Eigen::Index>(state.range(0));
  const memory::EmbeddingNet::Mat x = memory::EmbeddingNet::Mat::Random(cfg.input_dim, batch);
  for (auto _ : state) benchmark::DoNotOptimize(net.forward(x));
  state.SetItemsProcessed(state.iterations() * batch);
}
BENCHMARK(BM_EmbeddingForward)->Arg(1)->Arg(40)->Unit(benchmark::kMillisecond);

void BM_ApplySkill(benchmark::State& state) {
  const auto task = sim::load_task("MakePasta");
  const auto call = sim::plan_call(task.spec, task.initial, task.spec.plan.front());
  for (auto _ : state) benchmark::DoNotOptimize(sim::apply_skill(task.initial, call));
}
BENCHMARK(BM_ApplySkill);

}  // namespace

BENCHMARK_MAIN();
