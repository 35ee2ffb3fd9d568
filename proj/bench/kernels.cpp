// Serial vs OpenMP kernels on a small simulated corpus.
#include <benchmark/benchmark.h>

#include "homeauth/features.hpp"
#include "homeauth/models.hpp"
#include "homeauth/simulate.hpp"

using namespace homeauth;

namespace {

struct Fixture {
    std::vector<ObservationWindow> windows;
    SchemaPtr schema;
    TrainingSet train;

    Fixture() {
        CorpusSpec spec;
        spec.profiles = preset_profiles(6, Separation::Medium, 7);
        spec.devices = catalog_devices();
        spec.sessions_per_user = 4;
        spec.seed = 7;
        const auto corpus = generate_corpus(spec);
        for (const auto& s : corpus.sessions) {
            auto w = generate_windows(s, corpus.records, 10 * 60.0, 60.0);
            windows.insert(windows.end(), w.begin(), w.end());
        }
        schema = std::make_shared<const FeatureSchema>(Representation::DeviceOnly, corpus.registry.device_order(),
                                                       build_domain_vocab(windows));
        train = make_training_set(extract(windows, schema, Exec::Parallel));
    }
};

const Fixture& fixture() {
    static const Fixture f;
    return f;
}

void BM_Extract(benchmark::State& state) {
    const auto& f = fixture();
    const auto exec = state.range(0) ? Exec::Parallel : Exec::Serial;
    for (auto _ : state) benchmark::DoNotOptimize(extract(f.windows, f.schema, exec));
}

void BM_RandomForest(benchmark::State& state) {
    const auto& f = fixture();
    const auto exec = state.range(0) ? Exec::Parallel : Exec::Serial;
    for (auto _ : state) benchmark::DoNotOptimize(fit_random_forest(f.train, ForestParams{64, 1}, exec));
}

void BM_GradBoost(benchmark::State& state) {
    const auto& f = fixture();
    const auto exec = state.range(0) ? Exec::Parallel : Exec::Serial;
    for (auto _ : state) benchmark::DoNotOptimize(fit_grad_boost(f.train, BoostParams{20, 0.1, 3, 1}, exec));
}

}  // namespace

BENCHMARK(BM_Extract)->Arg(0)->Arg(1)->ArgName("parallel")->Unit(benchmark::kMillisecond);
BENCHMARK(BM_RandomForest)->Arg(0)->Arg(1)->ArgName("parallel")->Unit(benchmark::kMillisecond);
BENCHMARK(BM_GradBoost)->Arg(0)->Arg(1)->ArgName("parallel")->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
