#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include <benchmark/benchmark.h>

#include "bowlsim/anova.hpp"
#include "bowlsim/config.hpp"
#include "bowlsim/dynamics.hpp"
#include "bowlsim/players.hpp"
#include "bowlsim/simulation.hpp"
#include "bowlsim/spectral.hpp"

namespace {

using namespace bowlsim;

void BM_StepBall(benchmark::State& state) {
  const SimParams p;
  BallState b;
  b.angle = {0.2, -0.1};
  for (auto _ : state) {
    b = step_ball(b, {0.3, -0.2}, p, p.physics_dt);
    benchmark::DoNotOptimize(b);
  }
}
BENCHMARK(BM_StepBall);

void BM_SyntheticTrial(benchmark::State& state) {
  const SessionConfig config;
  TrialSpec spec;
  spec.load = LoadLevel::Twenty;
  for (auto _ : state) {
    SyntheticPlayer player(config.profile("control"));
    benchmark::DoNotOptimize(run_trial({"bench", "control"}, spec, player, config.sim, config.task, config.workspace));
  }
  state.SetLabel("20 s trial at 1 kHz");
}
BENCHMARK(BM_SyntheticTrial)->Unit(benchmark::kMillisecond);

void BM_FftSpectrum(benchmark::State& state) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> g;
  std::vector<double> x(static_cast<std::size_t>(state.range(0)));
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = std::sin(2.0 * std::numbers::pi * 1.88 * i / 100.0) + g(rng);
  for (auto _ : state) benchmark::DoNotOptimize(fft_spectrum(x, Axis::X, 100.0));
}
BENCHMARK(BM_FftSpectrum)->Arg(520)->Arg(2000)->Arg(2001);

std::vector<CellData> dataset(int per_group) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g;
  std::vector<CellData> cells;
  for (const char* group : {"control", "stroke"})
    for (int s = 0; s < per_group; ++s) {
      const std::string id = std::string(group) + "_" + std::to_string(s);
      const double offset = g(rng);
      for (LoadLevel load : {LoadLevel::Zero, LoadLevel::Twenty, LoadLevel::Fifty})
        for (DistributionId d : {DistributionId::B, DistributionId::C, DistributionId::D, DistributionId::E,
                                 DistributionId::F})
          cells.push_back({id, group, load, d, offset + g(rng)});
    }
  return cells;
}

void BM_MixedAnova(benchmark::State& state) {
  const auto cells = dataset(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(mixed_anova(cells));
}
BENCHMARK(BM_MixedAnova)->Arg(6)->Arg(30);

}  // namespace

BENCHMARK_MAIN();
