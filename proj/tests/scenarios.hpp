#pragma once

#include <cmath>
#include <vector>

#include "mudecode/signal.hpp"
#include "mudecode/substrate.hpp"

namespace scenario {

using namespace mudecode;
using namespace mudecode::substrate;

inline std::vector<MuSpikeTrain> regular_inputs(int n, double rate, double duration) {
    std::vector<MuSpikeTrain> out(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        const double phase = (static_cast<double>(i) + 0.5) / (static_cast<double>(n) * rate);
        for (double t = phase; t < duration; t += 1.0 / rate) out[static_cast<std::size_t>(i)].spike_times.push_back(t);
    }
    return out;
}

// One default core (noise off) of 20 neurons; neuron j receives one AMPA
// synapse from each of the first 20 + j of 40 regular 30 Hz inputs.
struct Standard {
    Network net;
    std::vector<AddressEvent> events;
    double duration = 5.0;
};

inline Standard standard(double duration = 5.0, double mismatch = 0.1) {
    Standard s;
    s.duration = duration;
    CoreConfig core;
    core.core_id = 0;
    core.n_neurons = 20;
    core.mismatch_sigma = mismatch;
    core.seed = 17;
    Connectivity w(40, 20, 3, 64);
    for (std::size_t j = 0; j < 20; ++j)
        for (std::size_t i = 0; i < 20 + j; ++i) w.at(i, j) = 1;
    s.net.cores = {core};
    s.net.add_input_projection(compile_connectivity(w), 0);
    const auto inputs = regular_inputs(40, 30.0, duration);
    s.events = merge_event_streams(inputs);
    return s;
}

// A single neuron driven by `n_syn` AMPA synapses per input from n_inputs
// regular inputs at `rate`.
inline SimResult drive_single(int n_syn, double rate, double duration, double dt = kDefaultDt, int n_inputs = 10,
                              double mismatch = 0.0) {
    CoreConfig core;
    core.n_neurons = 1;
    core.mismatch_sigma = mismatch;
    Network net;
    net.cores = {core};
    net.synapses.push_back({SourceKind::input, 0, 0, SynapseType::ampa, n_syn});
    for (int i = 1; i < n_inputs; ++i) net.synapses.push_back({SourceKind::input, i, 0, SynapseType::ampa, n_syn});
    const auto inputs = regular_inputs(n_inputs, rate, duration);
    const auto events = merge_event_streams(inputs);
    SimOptions opts;
    opts.duration = duration;
    opts.dt = dt;
    return simulate(net, events, opts);
}

}  // namespace scenario
