#include <benchmark/benchmark.h>

#include "qgraph/classical_pf.hpp"
#include "qgraph/rmt.hpp"
#include "qgraph/scattering.hpp"
#include "qgraph/spectral.hpp"
#include "qgraph/stats.hpp"

using namespace qgraph;

namespace {

Graph neumann_graph(int vertices) {
  GraphParams p;
  p.vertices = vertices;
  p.seed = 11;
  return Graph::complete(p);
}

void BM_EvolutionMap(benchmark::State& state) {
  const Graph g = neumann_graph(static_cast<int>(state.range(0)));
  const CMatrix factor = scattering_factor(g);
  CMatrix u;
  double k = 10.0;
  for (auto _ : state) {
    assemble_evolution_map(g, factor, k, u);
    benchmark::DoNotOptimize(u.data());
    k += 1e-3;
  }
}
BENCHMARK(BM_EvolutionMap)->Arg(6)->Arg(12)->Arg(15);

void BM_Eigenphases(benchmark::State& state) {
  const Graph g = neumann_graph(static_cast<int>(state.range(0)));
  const EvolutionMap u = assemble_evolution_map(g, 10.3);
  for (auto _ : state) benchmark::DoNotOptimize(eigenphases(u));
}
BENCHMARK(BM_Eigenphases)->Arg(6)->Arg(12)->Arg(15)->Unit(benchmark::kMillisecond);

// Throughput in levels per second.
void BM_FindLevels(benchmark::State& state) {
  const Graph g = neumann_graph(static_cast<int>(state.range(0)));
  SolverOptions o;
  o.levels_per_step = 10.0;
  const double width = 100.0 / g.mean_density();
  std::size_t levels = 0;
  for (auto _ : state) {
    const auto s = find_levels(g, 50.0, 50.0 + width, o);
    levels += s.levels.size();
  }
  state.counters["levels/s"] = benchmark::Counter(static_cast<double>(levels), benchmark::Counter::kIsRate);
}
BENCHMARK(BM_FindLevels)->Arg(6)->Arg(12)->Unit(benchmark::kMillisecond);

void BM_SMatrix(benchmark::State& state) {
  GraphParams p;
  p.vertices = 12;
  p.seed = 21;
  p.condition = VertexCondition::random_symmetric_unitary;
  const OpenGraph og(Graph::complete(p), 4, std::vector<double>(4, 1.0));
  const ScatteringSolver solver(og);
  double k = 50.0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(solver.evaluate(k).matrix.data());
    k += 1e-3;
  }
}
BENCHMARK(BM_SMatrix)->Unit(benchmark::kMicrosecond);

void BM_GoeSample(benchmark::State& state) {
  GoeConfig cfg;
  cfg.dimension = static_cast<int>(state.range(0));
  int r = 0;
  for (auto _ : state) benchmark::DoNotOptimize(sample_goe(cfg, r++).data());
}
BENCHMARK(BM_GoeSample)->Arg(200)->Arg(500)->Unit(benchmark::kMillisecond);

void BM_PfSpectrum(benchmark::State& state) {
  const PfOperator f = pf_operator(neumann_graph(static_cast<int>(state.range(0))));
  for (auto _ : state) benchmark::DoNotOptimize(pf_spectrum(f).gap);
}
BENCHMARK(BM_PfSpectrum)->Arg(8)->Arg(15)->Unit(benchmark::kMillisecond);

void BM_FormFactor(benchmark::State& state) {
  Rng rng(3);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  LevelSequences seqs(40);
  for (auto& s : seqs) {
    double x = 0.0;
    for (int i = 0; i < 250; ++i) s.push_back(x += -std::log(1.0 - unit(rng)));
  }
  std::vector<double> tau;
  for (int i = 1; i <= 150; ++i) tau.push_back(0.02 * i);
  for (auto _ : state) benchmark::DoNotOptimize(form_factor(seqs, tau, 0.05).values.data());
}
BENCHMARK(BM_FormFactor)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
