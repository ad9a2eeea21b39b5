#include <benchmark/benchmark.h>

#include <algorithm>
#include <map>
#include <random>

#include "mudecode/config.hpp"
#include "mudecode/kernels.hpp"
#include "mudecode/signal.hpp"
#include "mudecode/synth.hpp"

using namespace mudecode;
using namespace mudecode::substrate;

namespace {

struct Workload {
    Network net;
    std::vector<AddressEvent> events;
    SimOptions opts;
    synth::FingerTask task;
};

// Four cores fed by one synthetic trial through random sparse weights.
const Workload& workload(int neurons_per_core) {
    static std::map<int, Workload> cache;
    auto [it, fresh] = cache.try_emplace(neurons_per_core);
    if (!fresh) return it->second;
    Workload& w = it->second;
    synth::TaskSpec spec;
    spec.n_trials = 1;
    spec.trial.duration = 5.0;
    spec.trial.n_ramps = 1;
    w.task = synth::make_task(spec);
    const auto& trains = w.task.trains[0];
    w.events = merge_event_streams(trains);
    std::mt19937_64 eng(11);
    std::uniform_int_distribution<int> pick(-3, 3);
    for (int c = 0; c < 4; ++c) {
        auto core = default_core(c);
        core.n_neurons = neurons_per_core;
        w.net.cores.push_back(core);
        Connectivity conn(trains.size(), static_cast<std::size_t>(neurons_per_core));
        for (std::size_t j = 0; j < conn.n_outputs; ++j) {
            int budget = conn.fan_in_limit;
            for (std::size_t i = 0; i < conn.n_inputs; ++i) {
                const int v = std::clamp(pick(eng), -budget, budget);
                conn.at(i, j) = v;
                budget -= std::abs(v);
            }
        }
        w.net.add_input_projection(compile_connectivity(conn), static_cast<std::size_t>(c), 0);
    }
    w.opts.duration = spec.trial.duration;
    return w;
}

void BM_Serial(benchmark::State& state) {
    const auto& w = workload(static_cast<int>(state.range(0)));
    const auto p = kernels::prepare(w.net, w.events, w.opts);
    for (auto _ : state) benchmark::DoNotOptimize(kernels::run_serial(p));
    state.SetItemsProcessed(state.iterations() * p.n_steps * static_cast<std::int64_t>(p.neurons.size()));
}

void BM_Parallel(benchmark::State& state) {
    const auto& w = workload(static_cast<int>(state.range(0)));
    const auto p = kernels::prepare(w.net, w.events, w.opts);
    for (auto _ : state) benchmark::DoNotOptimize(kernels::run_parallel(p));
    state.SetItemsProcessed(state.iterations() * p.n_steps * static_cast<std::int64_t>(p.neurons.size()));
}

void BM_WindowCounts(benchmark::State& state) {
    const auto& w = workload(16);
    for (auto _ : state) benchmark::DoNotOptimize(window_counts(w.task.trains[0], 0.1, 0.05, 5.0));
}

}  // namespace

BENCHMARK(BM_Serial)->Arg(16)->Arg(64)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Parallel)->Arg(16)->Arg(64)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_WindowCounts)->Unit(benchmark::kMicrosecond);
BENCHMARK_MAIN();
