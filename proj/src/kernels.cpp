#include "mudecode/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <string>

#include "mudecode/rng.hpp"

namespace mudecode::substrate::kernels {

namespace {

using Increments = std::array<int, kNumSynapseTypes>;

// One exponential-Euler step. Leak, adaptation and synaptic decays are exact
// for a step; the exponential spike-initiation current is frozen at the
// start-of-step voltage. Returns true when the neuron fires.
inline bool advance(NeuronState& st, const NeuronConsts& c, const Increments& inc, double noise) {
    double current = noise;
    for (std::size_t k = 0; k < kNumSynapseTypes; ++k) {
        st.s[k] += inc[k];
        current += c.signed_gain[k] * st.s[k];
    }
    if (st.refractory_left > 0) {
        st.v = c.V_reset;
        --st.refractory_left;
    } else {
        const double v = std::min(st.v, c.V_peak);
        const double spike_current = c.g_L * c.Delta_T * (std::exp((v - c.V_T) / c.Delta_T) - c.exp_rest);
        const double v_inf = c.E_L + (spike_current - st.w + current) / c.g_L;
        st.v = v_inf + (st.v - v_inf) * c.membrane_decay;
    }
    const double w_inf = c.a * (st.v - c.E_L);
    st.w = w_inf + (st.w - w_inf) * c.adapt_decay;
    for (std::size_t k = 0; k < kNumSynapseTypes; ++k) st.s[k] *= c.syn_decay[k];

    if (st.v >= c.V_peak) {
        st.v = c.V_reset;
        st.w += c.b;
        st.refractory_left = c.refractory_steps;
        return true;
    }
    return false;
}

inline double noise_sample(const NeuronConsts& c, std::int64_t step) {
    if (c.noise_sigma == 0.0) return 0.0;
    return c.noise_sigma * rng::counter_normal(c.noise_key, {static_cast<std::uint64_t>(c.local_index),
                                                             static_cast<std::uint64_t>(step)});
}

inline NeuronState initial_state(const NeuronConsts& c) {
    NeuronState st;
    st.v = c.E_L;
    return st;
}

[[noreturn]] void diverged(int neuron, std::int64_t step, double dt) {
    throw RuntimeFailure("simulate: non-finite state in neuron " + std::to_string(neuron) + " at t = " +
                         std::to_string(static_cast<double>(step + 1) * dt) + " s");
}

inline bool finite(const NeuronState& st) { return std::isfinite(st.v) && std::isfinite(st.w); }

struct Increment {
    std::int64_t step;
    std::uint8_t type;
    int count;
};

}  // namespace

Prepared prepare(const Network& net, std::span<const AddressEvent> events, const SimOptions& opts) {
    net.validate();
    if (!(opts.dt > 0.0 && opts.dt <= kMaxDt)) throw ValidationError("simulate: dt must lie in (0, 0.5 ms]");
    if (!(opts.duration > 0.0)) throw ValidationError("simulate: duration must be positive");

    Prepared p;
    p.dt = opts.dt;
    p.n_steps = std::llround(opts.duration / opts.dt);

    for (const auto& core : net.cores) {
        const auto instances = apply_mismatch(core);
        const std::uint64_t key = rng::derive(opts.noise_seed, {static_cast<std::uint64_t>(core.core_id)});
        for (std::size_t j = 0; j < instances.size(); ++j) {
            const auto& np = instances[j].params;
            NeuronConsts c{};
            c.E_L = np.E_L;
            c.V_T = np.V_T;
            c.Delta_T = np.Delta_T;
            c.V_peak = np.V_peak;
            c.V_reset = np.V_reset;
            c.g_L = np.g_L;
            c.a = np.a;
            c.b = np.b;
            c.membrane_decay = std::exp(-opts.dt / (np.C / np.g_L * kMembraneTimeUnit));
            c.adapt_decay = std::exp(-opts.dt / np.tau_w);
            c.exp_rest = std::exp((np.E_L - np.V_T) / np.Delta_T);
            c.refractory_steps = static_cast<int>(std::llround(np.refractory / opts.dt));
            for (std::size_t k = 0; k < kNumSynapseTypes; ++k) {
                const auto& st = core.synapse.types[k];
                c.signed_gain[k] = st.sign * instances[j].gains[k];
                c.syn_decay[k] = std::exp(-opts.dt / st.tau);
            }
            c.noise_sigma = core.noise_current_sigma;
            c.noise_key = key;
            c.local_index = static_cast<int>(j);
            p.neurons.push_back(c);
        }
    }

    const int n = static_cast<int>(p.neurons.size());
    int n_inputs = 0;
    for (const auto& s : net.synapses) {
        if (s.kind == SourceKind::input) n_inputs = std::max(n_inputs, s.source + 1);
    }
    p.input_fanout.resize(static_cast<std::size_t>(n_inputs));
    p.neuron_fanout.resize(static_cast<std::size_t>(n));
    for (const auto& s : net.synapses) {
        if (s.count == 0) continue;
        const Target t{s.target, static_cast<std::uint8_t>(s.type), s.count};
        auto& fan = s.kind == SourceKind::input ? p.input_fanout : p.neuron_fanout;
        fan[static_cast<std::size_t>(s.source)].push_back(t);
    }

    double last = 0.0;
    for (std::size_t e = 0; e < events.size(); ++e) {
        const auto& ev = events[e];
        if (!(ev.time >= 0.0)) throw ValidationError("simulate: event at negative or NaN time");
        if (ev.source < 0) throw ValidationError("simulate: negative event source");
        if (ev.time < last) {
            throw ValidationError("simulate: events not time-sorted at index " + std::to_string(e));
        }
        last = ev.time;
        // Snap to the step grid; the epsilon absorbs t / dt landing a hair
        // below an integer.
        const auto step = static_cast<std::int64_t>(std::floor(ev.time / opts.dt + 1e-6));
        if (step >= p.n_steps) continue;
        if (ev.source >= n_inputs) continue;  // channel without synapses
        p.event_step.push_back(step);
        p.event_source.push_back(ev.source);
    }
    return p;
}

SpikeSteps run_serial(const Prepared& p, std::vector<double>* probe, std::size_t probe_neuron) {
    const std::size_t n = p.neurons.size();
    if (probe) {
        if (probe_neuron >= n) throw ValidationError("simulate: probe neuron out of range");
        probe->clear();
        probe->reserve(static_cast<std::size_t>(p.n_steps));
    }
    SpikeSteps spikes(n);
    std::vector<NeuronState> state(n);
    for (std::size_t j = 0; j < n; ++j) state[j] = initial_state(p.neurons[j]);
    std::vector<Increments> pending(n, Increments{});
    std::vector<int> fired_prev, fired_now;

    std::size_t e = 0;
    for (std::int64_t step = 0; step < p.n_steps; ++step) {
        for (; e < p.event_step.size() && p.event_step[e] == step; ++e) {
            for (const auto& t : p.input_fanout[static_cast<std::size_t>(p.event_source[e])]) {
                pending[static_cast<std::size_t>(t.neuron)][t.type] += t.count;
            }
        }
        for (int src : fired_prev) {
            for (const auto& t : p.neuron_fanout[static_cast<std::size_t>(src)]) {
                pending[static_cast<std::size_t>(t.neuron)][t.type] += t.count;
            }
        }
        fired_now.clear();
        for (std::size_t j = 0; j < n; ++j) {
            const auto& c = p.neurons[j];
            if (advance(state[j], c, pending[j], noise_sample(c, step))) {
                spikes[j].push_back(step);
                fired_now.push_back(static_cast<int>(j));
            }
            if (!finite(state[j])) diverged(static_cast<int>(j), step, p.dt);
            pending[j] = Increments{};
        }
        if (probe) probe->push_back(state[probe_neuron].v);
        std::swap(fired_prev, fired_now);
    }
    return spikes;
}

std::vector<int> stage_of(const Prepared& p) {
    const std::size_t n = p.neurons.size();
    std::vector<int> indegree(n, 0);
    for (const auto& fan : p.neuron_fanout) {
        for (const auto& t : fan) ++indegree[static_cast<std::size_t>(t.neuron)];
    }
    std::vector<int> stage(n, 0);
    std::vector<int> ready;
    for (std::size_t j = 0; j < n; ++j) {
        if (indegree[j] == 0) ready.push_back(static_cast<int>(j));
    }
    std::size_t visited = 0;
    while (!ready.empty()) {
        const int j = ready.back();
        ready.pop_back();
        ++visited;
        for (const auto& t : p.neuron_fanout[static_cast<std::size_t>(j)]) {
            const auto tj = static_cast<std::size_t>(t.neuron);
            stage[tj] = std::max(stage[tj], stage[static_cast<std::size_t>(j)] + 1);
            if (--indegree[tj] == 0) ready.push_back(t.neuron);
        }
    }
    if (visited != n) return {};
    return stage;
}

SpikeSteps run_parallel(const Prepared& p) {
    const auto stage = stage_of(p);
    const std::size_t n = p.neurons.size();
    if (stage.size() != n) throw ValidationError("simulate: parallel kernel requires an acyclic neuron graph");

    std::vector<std::vector<Increment>> incoming(n);
    for (std::size_t e = 0; e < p.event_step.size(); ++e) {
        for (const auto& t : p.input_fanout[static_cast<std::size_t>(p.event_source[e])]) {
            incoming[static_cast<std::size_t>(t.neuron)].push_back({p.event_step[e], t.type, t.count});
        }
    }

    const int n_stages = n == 0 ? 0 : *std::max_element(stage.begin(), stage.end()) + 1;
    SpikeSteps spikes(n);
    for (int s = 0; s < n_stages; ++s) {
        std::vector<int> members;
        for (std::size_t j = 0; j < n; ++j) {
            if (stage[j] == s) members.push_back(static_cast<int>(j));
        }
        std::vector<std::int64_t> failed_step(members.size(), -1);
        const auto n_members = static_cast<std::ptrdiff_t>(members.size());

#pragma omp parallel for schedule(dynamic, 1)
        for (std::ptrdiff_t m = 0; m < n_members; ++m) {
            const auto j = static_cast<std::size_t>(members[static_cast<std::size_t>(m)]);
            auto& inc = incoming[j];
            if (s > 0) {
                std::stable_sort(inc.begin(), inc.end(),
                                 [](const Increment& x, const Increment& y) { return x.step < y.step; });
            }
            const auto& c = p.neurons[j];
            NeuronState st = initial_state(c);
            std::size_t next = 0;
            for (std::int64_t step = 0; step < p.n_steps; ++step) {
                Increments acc{};
                for (; next < inc.size() && inc[next].step == step; ++next) acc[inc[next].type] += inc[next].count;
                if (advance(st, c, acc, noise_sample(c, step))) spikes[j].push_back(step);
                if (!finite(st)) {
                    failed_step[static_cast<std::size_t>(m)] = step;
                    break;
                }
            }
        }

        for (std::size_t m = 0; m < members.size(); ++m) {
            if (failed_step[m] >= 0) diverged(members[m], failed_step[m], p.dt);
        }
        // Deliver this stage's spikes one step later to downstream neurons.
        for (int j : members) {
            for (const auto& t : p.neuron_fanout[static_cast<std::size_t>(j)]) {
                auto& dst = incoming[static_cast<std::size_t>(t.neuron)];
                for (auto step : spikes[static_cast<std::size_t>(j)]) {
                    if (step + 1 < p.n_steps) dst.push_back({step + 1, t.type, t.count});
                }
            }
        }
    }
    return spikes;
}

}  // namespace mudecode::substrate::kernels
