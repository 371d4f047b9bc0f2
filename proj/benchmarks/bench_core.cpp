#include <benchmark/benchmark.h>

#include <numeric>
#include <vector>

#include "ctphase/features.hpp"
#include "ctphase/gbdt.hpp"
#include "ctphase/metrics.hpp"
#include "ctphase/phantom.hpp"
#include "ctphase/rng.hpp"

using namespace ctphase;

namespace {

FeatureTable synthetic_table(int n_rows, std::uint64_t seed) {
  FeatureTable table;
  RandomStream stream(seed);
  for (int i = 0; i < n_rows; ++i) {
    FeatureRow row;
    row.scan_id = "s" + std::to_string(i);
    row.patient_id = "p" + std::to_string(i / 4);
    row.phase = static_cast<PhaseLabel>(i % kNumPhases);
    for (int f = 0; f < kNumOrgans; ++f) {
      row.features[f] = stream.next_unit() < 0.15
                            ? FeatureVector::missing()
                            : 30.0 + 50.0 * phase_code(row.phase) * ((f % 2) ? 1.0 : 0.4) +
                                  stream.gaussian() * 10.0;
    }
    table.rows.push_back(std::move(row));
  }
  return table;
}

void BM_MaskedMedian(benchmark::State& state) {
  PhantomSpec spec = PhantomSpec::with_defaults();
  const Phantom p = generate_phantom(spec, PhaseLabel::venous, 0);
  for (auto _ : state) {
    benchmark::DoNotOptimize(masked_median(p.volume, p.mask, 1));
  }
}
BENCHMARK(BM_MaskedMedian);

void BM_ExtractFeatures(benchmark::State& state) {
  PhantomSpec spec = PhantomSpec::with_defaults();
  const Phantom p = generate_phantom(spec, PhaseLabel::venous, 0);
  const OrganCoding coding = OrganCoding::canonical();
  for (auto _ : state) {
    benchmark::DoNotOptimize(extract_features(p.volume, p.mask, coding));
  }
}
BENCHMARK(BM_ExtractFeatures);

void BM_GeneratePhantom(benchmark::State& state) {
  PhantomSpec spec = PhantomSpec::with_defaults();
  std::uint64_t index = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(generate_phantom(spec, PhaseLabel::arterial, index++));
  }
}
BENCHMARK(BM_GeneratePhantom);

void BM_Train(benchmark::State& state) {
  const FeatureTable table = synthetic_table(static_cast<int>(state.range(0)), 1);
  Hyperparams hp;
  hp.n_rounds = 50;
  for (auto _ : state) {
    benchmark::DoNotOptimize(train(table, hp));
  }
}
BENCHMARK(BM_Train)->Arg(100)->Arg(400)->Unit(benchmark::kMillisecond);

void BM_PredictMargins(benchmark::State& state) {
  const FeatureTable table = synthetic_table(200, 2);
  Hyperparams hp;
  hp.n_rounds = 200;
  const BoostedModel model = train(table, hp);
  std::size_t i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(predict_margins(model, table.rows[i % 200].features));
    ++i;
  }
}
BENCHMARK(BM_PredictMargins);

void BM_RocAuc(benchmark::State& state) {
  RandomStream stream(3);
  const std::size_t n = static_cast<std::size_t>(state.range(0));
  std::vector<double> scores(n);
  std::vector<int> truth(n);
  for (std::size_t i = 0; i < n; ++i) {
    scores[i] = stream.next_unit();
    truth[i] = static_cast<int>(stream.next_u64() % 2);
  }
  for (auto _ : state) {
    benchmark::DoNotOptimize(roc_auc_ovr(scores, truth));
  }
}
BENCHMARK(BM_RocAuc)->Arg(1000)->Arg(10000);

}  // namespace

BENCHMARK_MAIN();
