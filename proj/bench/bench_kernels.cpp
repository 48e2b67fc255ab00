// Serial reference kernels against their OpenMP counterparts.

#include <benchmark/benchmark.h>

#include <numeric>
#include <random>

#include "masn/kernels.hpp"
#include "masn/training.hpp"

using namespace masn;

namespace {

std::vector<Real> random_values(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> dist;
    std::vector<Real> v(n);
    for (auto& x : v) x = dist(rng);
    return v;
}

template <void (*Kernel)(const Real*, const Real*, Real*, std::size_t, std::size_t, std::size_t)>
void matmul(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const auto a = random_values(n * n, 1), b = random_values(n * n, 2);
    std::vector<Real> c(n * n);
    for (auto _ : state) {
        Kernel(a.data(), b.data(), c.data(), n, n, n);
        benchmark::DoNotOptimize(c.data());
    }
    state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * n * n * n));
}

void batch(benchmark::State& state, bool parallel) {
    GeneratorConfig g;
    const Dataset ds{g, generate_episodes(g, 32, 1)};
    ModelConfig m;
    m.d = 32;
    adapt_to_dataset(m, g);
    const Model model(m);
    const ParamStore params = init_params(m, 0);
    std::vector<std::size_t> idx(ds.episodes.size());
    std::iota(idx.begin(), idx.end(), 0);
    for (auto _ : state) {
        GradBuffer grads = params.make_grad_buffer();
        benchmark::DoNotOptimize(batch_gradients(model, params, ds.episodes, idx, grads, parallel));
    }
    state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * idx.size()));
}

void batch_serial(benchmark::State& state) { batch(state, false); }
void batch_parallel(benchmark::State& state) { batch(state, true); }

}  // namespace

BENCHMARK(matmul<kernels::reference::matmul>)->Name("matmul/reference")->Arg(64)->Arg(128)->Arg(256);
BENCHMARK(matmul<kernels::parallel::matmul>)->Name("matmul/parallel")->Arg(64)->Arg(128)->Arg(256)->UseRealTime();
BENCHMARK(batch_serial)->Name("batch_gradients/serial")->Unit(benchmark::kMillisecond);
BENCHMARK(batch_parallel)->Name("batch_gradients/parallel")->Unit(benchmark::kMillisecond)->UseRealTime();

BENCHMARK_MAIN();
