#include <benchmark/benchmark.h>

#include <omp.h>

#include "molstyle/data.hpp"

using namespace molstyle;

namespace {

struct Fixture {
  metrics::Scorers scorers;
  std::vector<std::string> smiles;
  std::vector<chem::PropertyVector> x, y;
  metrics::PssScales scales;

  Fixture() {
    data::ScorerOptions o;
    o.sa_extra = 2000;
    o.tox_extra = 1000;
    scorers = data::default_scorers(o);
    smiles = make_desk_corpus(data::desk_generator(21), 2000);
    for (const auto& s : data::score_batch_serial(smiles, scorers)) x.push_back(s.props);
    y.assign(x.rbegin(), x.rend());
    scales = metrics::PssScales::fit(x);
  }
};

const Fixture& fixture() {
  static const Fixture f;
  return f;
}

void BM_ScoreSerial(benchmark::State& state) {
  const auto& f = fixture();
  for (auto _ : state) benchmark::DoNotOptimize(data::score_batch_serial(f.smiles, f.scorers));
  state.SetItemsProcessed(state.iterations() * static_cast<long>(f.smiles.size()));
}

void BM_ScoreOpenMP(benchmark::State& state) {
  const auto& f = fixture();
  omp_set_num_threads(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(data::score_batch(f.smiles, f.scorers));
  state.SetItemsProcessed(state.iterations() * static_cast<long>(f.smiles.size()));
}

void BM_PssSerial(benchmark::State& state) {
  const auto& f = fixture();
  for (auto _ : state) benchmark::DoNotOptimize(data::pss_batch_serial(f.x, f.y, f.scales));
  state.SetItemsProcessed(state.iterations() * static_cast<long>(f.x.size()));
}

void BM_PssOpenMP(benchmark::State& state) {
  const auto& f = fixture();
  omp_set_num_threads(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(data::pss_batch(f.x, f.y, f.scales));
  state.SetItemsProcessed(state.iterations() * static_cast<long>(f.x.size()));
}

}  // namespace

BENCHMARK(BM_ScoreSerial)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_ScoreOpenMP)->Arg(1)->Arg(2)->Arg(4)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_PssSerial)->Unit(benchmark::kMicrosecond)->UseRealTime();
BENCHMARK(BM_PssOpenMP)->Arg(1)->Arg(2)->Arg(4)->Unit(benchmark::kMicrosecond)->UseRealTime();

BENCHMARK_MAIN();
