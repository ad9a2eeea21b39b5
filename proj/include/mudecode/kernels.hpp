#pragma once

// Integration kernels behind substrate::simulate.
//
//   run_serial    time-major reference: every step advances all neurons.
//                 Handles any topology, including recurrent projections.
//   run_parallel  neuron-major OpenMP kernel: neurons are grouped into
//                 stages by their neuron-to-neuron dependencies and each
//                 neuron of a stage integrates the whole trial on its own
//                 thread. Requires an acyclic neuron graph.
//
// Synaptic increments are accumulated as integer counts per step before they
// touch floating-point state, and noise is a counter-based function of
// (seed, core, neuron, step), so both kernels produce bit-identical spikes.

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "mudecode/substrate.hpp"

namespace mudecode::substrate::kernels {

struct NeuronConsts {
    double E_L, V_T, Delta_T, V_peak, V_reset, g_L, a, b;
    double membrane_decay;  // exp(-dt / tau_m)
    double adapt_decay;     // exp(-dt / tau_w)
    double exp_rest;        // exp((E_L - V_T) / Delta_T)
    int refractory_steps;
    std::array<double, kNumSynapseTypes> signed_gain;
    std::array<double, kNumSynapseTypes> syn_decay;
    double noise_sigma;
    std::uint64_t noise_key;  // derived from (noise seed, core id)
    int local_index;
};

struct NeuronState {
    double v = 0.0;
    double w = 0.0;
    std::array<double, kNumSynapseTypes> s{};
    int refractory_left = 0;
};

struct Target {
    int neuron;
    std::uint8_t type;
    int count;
};

struct Prepared {
    double dt = kDefaultDt;
    std::int64_t n_steps = 0;
    std::vector<NeuronConsts> neurons;
    std::vector<std::vector<Target>> input_fanout;   // per input channel
    std::vector<std::vector<Target>> neuron_fanout;  // per source neuron
    std::vector<std::int64_t> event_step;            // per event
    std::vector<int> event_source;                   // per event
};

Prepared prepare(const Network& net, std::span<const AddressEvent> events, const SimOptions& opts);

using SpikeSteps = std::vector<std::vector<std::int64_t>>;

/// `probe`, when given, receives the end-of-step membrane value of
/// `probe_neuron` for every step.
SpikeSteps run_serial(const Prepared& p, std::vector<double>* probe = nullptr, std::size_t probe_neuron = 0);

/// Throws ValidationError when the neuron graph has a cycle.
SpikeSteps run_parallel(const Prepared& p);

/// Stage index per neuron (longest path from external inputs), or an empty
/// vector when the neuron graph is cyclic.
std::vector<int> stage_of(const Prepared& p);

}  // namespace mudecode::substrate::kernels
