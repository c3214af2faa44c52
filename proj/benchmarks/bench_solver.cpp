#include <benchmark/benchmark.h>

#include <random>

#include "gccd/data.hpp"
#include "gccd/graph.hpp"
#include "gccd/learn.hpp"
#include "gccd/pwq.hpp"
#include "gccd/solver.hpp"

namespace {

gccd::LabeledRecord ecg(std::size_t samples) {
  gccd::SynthConfig cfg;
  cfg.n_cycles = samples / 300 + 1;
  cfg.noise_sigma = 0.2;
  cfg.baseline_wander_amp = 3.0;
  cfg.seed = 1;
  auto r = gccd::generate_synthetic(cfg);
  r.signal.samples.resize(samples);
  return r;
}

void BM_Solve(benchmark::State& state) {
  const auto r = ecg(static_cast<std::size_t>(state.range(0)));
  const auto g = gccd::initial_graph(3.0, 3.0, 20.0);
  for (auto _ : state) {
    auto seg = gccd::solve(r.signal, g);
    benchmark::DoNotOptimize(seg.total_cost);
  }
  state.SetComplexityN(state.range(0));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Solve)->RangeMultiplier(10)->Range(1000, 100000)->Unit(benchmark::kMillisecond)->Complexity();

void BM_SolveStates(benchmark::State& state) {
  const auto r = ecg(20000);
  // ring of `states` states alternating up and down
  gccd::ConstraintGraph g = gccd::initial_graph(1.5, 1.5, 20.0);
  const auto n = static_cast<std::size_t>(state.range(0));
  if (n > 2) {
    g.edges.clear();
    for (std::size_t k = 2; k < n; ++k) g.states.push_back({static_cast<gccd::StateId>(k), "S" + std::to_string(k)});
    std::vector<gccd::StateId> ring{0, 1};
    for (std::size_t k = 2; k < n; ++k) ring.push_back(static_cast<gccd::StateId>(k));
    for (std::size_t k = 0; k < n; ++k) {
      const auto dir = k % 2 == 0 ? gccd::Direction::up : gccd::Direction::down;
      g.edges.push_back({ring[k], ring[(k + 1) % n], dir, 1.5, 20.0});
    }
  }
  for (auto _ : state) {
    auto seg = gccd::solve(r.signal, g);
    benchmark::DoNotOptimize(seg.total_cost);
  }
}
BENCHMARK(BM_SolveStates)->Arg(2)->Arg(4)->Arg(8)->Unit(benchmark::kMillisecond);

gccd::pwq::PiecewiseQuad random_function(std::mt19937_64& rng, std::size_t pieces) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<gccd::pwq::QuadPiece> out;
  for (std::size_t k = 0; k < pieces; ++k) {
    gccd::pwq::QuadPiece p;
    p.lo = -5.0 + 10.0 * static_cast<double>(k) / static_cast<double>(pieces);
    p.hi = -5.0 + 10.0 * static_cast<double>(k + 1) / static_cast<double>(pieces);
    const double v = -5.0 + 10.0 * u(rng);
    p.a = 2.0 * u(rng);
    p.b = -2.0 * p.a * v;
    p.c = p.a * v * v + 5.0 * u(rng);
    out.push_back(p);
  }
  out.back().hi = 5.0;
  return gccd::pwq::PiecewiseQuad::from_pieces(std::move(out));
}

void BM_PointwiseMin(benchmark::State& state) {
  std::mt19937_64 rng(3);
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto f = random_function(rng, n);
  const auto g = random_function(rng, n);
  gccd::pwq::PiecewiseQuad out;
  for (auto _ : state) {
    gccd::pwq::pointwise_min_into(f, g, out);
    benchmark::DoNotOptimize(out.size());
  }
}
BENCHMARK(BM_PointwiseMin)->Arg(4)->Arg(32)->Arg(256);

void BM_Envelope(benchmark::State& state) {
  std::mt19937_64 rng(4);
  const auto f = random_function(rng, static_cast<std::size_t>(state.range(0)));
  gccd::pwq::PiecewiseQuad out;
  for (auto _ : state) {
    gccd::pwq::min_leq_envelope_into(f, 0.7, out);
    benchmark::DoNotOptimize(out.size());
  }
}
BENCHMARK(BM_Envelope)->Arg(4)->Arg(32)->Arg(256);

void BM_EnumerateCandidates(benchmark::State& state) {
  const auto g = gccd::initial_graph(3.0, 3.0, 20.0);
  for (auto _ : state) {
    auto c = gccd::enumerate_candidates(g, gccd::LearnConfig{}, 0.5);
    benchmark::DoNotOptimize(c.candidates.size());
  }
}
BENCHMARK(BM_EnumerateCandidates);

}  // namespace

BENCHMARK_MAIN();
