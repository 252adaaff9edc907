#include <benchmark/benchmark.h>

#include "modbe/base_algorithm.hpp"
#include "modbe/instances.hpp"
#include "modbe/selection.hpp"

using namespace modbe;

namespace {

void BM_AbstractionErm(benchmark::State& state) {
    const auto inst = chain4_instance();
    const auto data = generate_from_mu(inst.mdp, inst.mu, static_cast<std::size_t>(state.range(0)), 1);
    const auto slot = data.slot(0);
    std::vector<Sample> samples;
    for (const auto& t : slot) samples.push_back({{t.x, t.a}, t.r});
    const auto& cls = inst.classes[1];
    for (auto _ : state) benchmark::DoNotOptimize(erm(cls, samples));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_AbstractionErm)->Range(1 << 8, 1 << 16);

void BM_LinearErm(benchmark::State& state) {
    const CBInstance cb;
    const auto rows = cb.sample(2000, 3);
    const auto classes = cb.classes();
    const auto& cls = classes[static_cast<std::size_t>(state.range(0))];
    for (auto _ : state) benchmark::DoNotOptimize(fitted_q_discounted(rows, cls, 0.0, 1));
}
BENCHMARK(BM_LinearErm)->DenseRange(0, 9, 3)->Unit(benchmark::kMillisecond);

void BM_Fqi(benchmark::State& state) {
    const auto inst = chain4_instance();
    const auto data = generate_from_mu(inst.mdp, inst.mu, static_cast<std::size_t>(state.range(0)), 2);
    const auto& cls = inst.classes[inst.classes.size() - 1];
    for (auto _ : state) benchmark::DoNotOptimize(fqi(data, cls));
    state.SetItemsProcessed(state.iterations() * state.range(0) * 3);
}
BENCHMARK(BM_Fqi)->Range(1 << 8, 1 << 14);

void BM_ModBE(benchmark::State& state) {
    const auto inst = chain4_instance();
    const auto data = generate_from_mu(inst.mdp, inst.mu, static_cast<std::size_t>(state.range(0)), 3);
    SelectionOptions opt;
    opt.seed = 3;
    for (auto _ : state) benchmark::DoNotOptimize(modbe::modbe(data, FittedQIteration{}, inst.classes, opt));
}
BENCHMARK(BM_ModBE)->Range(1 << 8, 1 << 14);

void BM_Concentrability(benchmark::State& state) {
    const auto S = static_cast<std::size_t>(state.range(0));
    const std::size_t A = 4, H = 10;
    std::vector<double> rho(S, 1.0 / static_cast<double>(S));
    std::vector<std::vector<double>> transitions(H, std::vector<double>(S * A * S, 1.0 / static_cast<double>(S)));
    std::vector<double> rewards(S * A, 0.5);
    const TabularMdp mdp(S, A, H, rho, transitions, rewards);
    const auto mu = DataDistribution::uniform(mdp);
    for (auto _ : state) benchmark::DoNotOptimize(concentrability(mdp, mu));
}
BENCHMARK(BM_Concentrability)->RangeMultiplier(4)->Range(4, 256);

}  // namespace

BENCHMARK_MAIN();
