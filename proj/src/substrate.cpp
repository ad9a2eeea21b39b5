#include "mudecode/substrate.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <set>

#include "mudecode/kernels.hpp"
#include "mudecode/rng.hpp"

namespace mudecode::substrate {

namespace {

constexpr std::string_view kSynapseNames[] = {"ampa", "nmda", "gaba_a", "gaba_b"};

constexpr std::string_view kMismatchNames[] = {"C",          "g_L",       "V_T",         "Delta_T",
                                               "a",          "b",         "tau_w",       "refractory",
                                               "gain.ampa",  "gain.nmda", "gain.gaba_a", "gain.gaba_b"};
constexpr std::size_t kNumNeuronMismatch = 8;

template <typename P>
auto* neuron_field(P& p, std::size_t index) {
    using Ptr = decltype(&p.C);
    switch (index) {
        case 0: return &p.C;
        case 1: return &p.g_L;
        case 2: return &p.V_T;
        case 3: return &p.Delta_T;
        case 4: return &p.a;
        case 5: return &p.b;
        case 6: return &p.tau_w;
        case 7: return &p.refractory;
    }
    return Ptr{nullptr};
}

// Truncated normal by rejection; the retry counter is part of the key so the
// draw stays a pure function of its indices.
double mismatch_factor(const CoreConfig& core, std::size_t neuron, std::size_t param) {
    if (core.mismatch_sigma == 0.0) return 1.0;
    for (std::uint64_t attempt = 0;; ++attempt) {
        const double eps = core.mismatch_sigma *
                           rng::counter_normal(core.seed, {static_cast<std::uint64_t>(core.core_id), neuron, param, attempt});
        if (eps > -0.5 && eps < 0.5) return 1.0 + eps;
    }
}

}  // namespace

std::string_view to_string(SynapseType t) { return kSynapseNames[static_cast<std::size_t>(t)]; }

SynapseType parse_synapse_type(std::string_view name) {
    for (std::size_t i = 0; i < kNumSynapseTypes; ++i) {
        if (kSynapseNames[i] == name) return static_cast<SynapseType>(i);
    }
    throw ValidationError("unknown synapse type '" + std::string(name) + "'");
}

void NeuronParams::validate() const {
    if (!(Delta_T > 0.0)) throw ValidationError("neuron: Delta_T must be positive");
    if (!(V_reset < V_peak)) throw ValidationError("neuron: V_reset must be below V_peak");
    if (!(tau_w > 0.0)) throw ValidationError("neuron: tau_w must be positive");
    if (!(refractory >= 0.0)) throw ValidationError("neuron: refractory must be >= 0");
    if (!(C > 0.0) || !(g_L > 0.0)) throw ValidationError("neuron: C and g_L must be positive");
}

std::array<SynapseTypeParams, kNumSynapseTypes> SynapseParams::default_types() {
    return {{
        // Equal charge per event within each sign: gain * tau = 4e-4.
        {0.010, 0.040, +1},  // AMPA
        {0.100, 0.004, +1},  // NMDA
        {0.010, 0.040, -1},  // GABA_A
        {0.050, 0.008, -1},  // GABA_B
    }};
}

void SynapseParams::validate() const {
    for (std::size_t k = 0; k < kNumSynapseTypes; ++k) {
        const auto& t = types[k];
        const int expected = is_excitatory(static_cast<SynapseType>(k)) ? +1 : -1;
        if (!(t.tau > 0.0)) throw ValidationError("synapse " + std::string(kSynapseNames[k]) + ": tau must be positive");
        if (!(t.gain > 0.0)) throw ValidationError("synapse " + std::string(kSynapseNames[k]) + ": gain must be positive");
        if (t.sign != expected) throw ValidationError("synapse " + std::string(kSynapseNames[k]) + ": wrong sign");
    }
}

void CoreConfig::validate() const {
    if (core_id < 0 || core_id >= kMaxCores) throw ValidationError("core: core_id must lie in 0..3");
    if (n_neurons < 1 || n_neurons > kMaxNeuronsPerCore) throw ValidationError("core: n_neurons must lie in 1..256");
    if (!(mismatch_sigma >= 0.0)) throw ValidationError("core: mismatch_sigma must be >= 0");
    if (!(noise_current_sigma >= 0.0)) throw ValidationError("core: noise_current_sigma must be >= 0");
    neuron.validate();
    synapse.validate();
}

std::span<const std::string_view> mismatch_parameter_names() { return kMismatchNames; }

double mismatch_parameter(const NeuronInstance& n, std::size_t index) {
    if (index < kNumNeuronMismatch) return *neuron_field(n.params, index);
    return n.gains.at(index - kNumNeuronMismatch);
}

double mismatch_parameter(const CoreConfig& nominal, std::size_t index) {
    if (index < kNumNeuronMismatch) return *neuron_field(nominal.neuron, index);
    return nominal.synapse.types.at(index - kNumNeuronMismatch).gain;
}

std::vector<NeuronInstance> apply_mismatch(const CoreConfig& core) {
    if (!(core.mismatch_sigma >= 0.0)) throw ValidationError("apply_mismatch: sigma must be >= 0");
    std::vector<NeuronInstance> out(static_cast<std::size_t>(core.n_neurons));
    for (std::size_t j = 0; j < out.size(); ++j) {
        auto& inst = out[j];
        inst.params = core.neuron;
        for (std::size_t p = 0; p < kNumNeuronMismatch; ++p) *neuron_field(inst.params, p) *= mismatch_factor(core, j, p);
        for (std::size_t k = 0; k < kNumSynapseTypes; ++k) {
            inst.gains[k] = core.synapse.types[k].gain * mismatch_factor(core, j, kNumNeuronMismatch + k);
        }
    }
    return out;
}

int Connectivity::fan_in(std::size_t j) const {
    int total = 0;
    for (std::size_t i = 0; i < n_inputs; ++i) total += std::abs(at(i, j));
    return total;
}

void check_connectivity(const Connectivity& w) {
    if (w.weights.size() != w.n_inputs * w.n_outputs) {
        throw ConnectivityError(ConnectivityFault::shape, -1, "connectivity: weight count does not match shape");
    }
    for (std::size_t i = 0; i < w.n_inputs; ++i) {
        for (std::size_t j = 0; j < w.n_outputs; ++j) {
            if (std::abs(w.at(i, j)) > w.k) {
                throw ConnectivityError(ConnectivityFault::k_exceeded, static_cast<int>(j),
                                        "k_exceeded: |W[" + std::to_string(i) + "][" + std::to_string(j) +
                                            "]| > " + std::to_string(w.k));
            }
        }
    }
    for (std::size_t j = 0; j < w.n_outputs; ++j) {
        const int f = w.fan_in(j);
        if (f > w.fan_in_limit) {
            throw ConnectivityError(ConnectivityFault::fan_in_exceeded, static_cast<int>(j),
                                    "fan_in_exceeded: neuron " + std::to_string(j) + " has " + std::to_string(f) +
                                        " synapses, limit " + std::to_string(w.fan_in_limit));
        }
    }
}

SynapseTable compile_connectivity(const Connectivity& w, SynapseType exc_type, SynapseType inh_type) {
    if (!is_excitatory(exc_type) || is_excitatory(inh_type)) {
        throw ValidationError("compile_connectivity: exc_type must be AMPA/NMDA and inh_type GABA_A/GABA_B");
    }
    check_connectivity(w);
    SynapseTable table;
    for (std::size_t i = 0; i < w.n_inputs; ++i) {
        for (std::size_t j = 0; j < w.n_outputs; ++j) {
            const int v = w.at(i, j);
            if (v == 0) continue;
            table.push_back({SourceKind::input, static_cast<int>(i), static_cast<int>(j), v > 0 ? exc_type : inh_type,
                             std::abs(v)});
        }
    }
    return table;
}

std::vector<AddressEvent> merge_event_streams(std::span<const MuSpikeTrain> trains) {
    std::vector<AddressEvent> out;
    std::size_t total = 0;
    for (const auto& t : trains) total += t.spike_times.size();
    out.reserve(total);
    for (std::size_t i = 0; i < trains.size(); ++i) {
        for (double t : trains[i].spike_times) out.push_back({t, static_cast<int>(i)});
    }
    std::stable_sort(out.begin(), out.end(), [](const AddressEvent& a, const AddressEvent& b) {
        return a.time < b.time || (a.time == b.time && a.source < b.source);
    });
    return out;
}

int Network::n_neurons() const {
    int n = 0;
    for (const auto& c : cores) n += c.n_neurons;
    return n;
}

int Network::core_offset(std::size_t core_index) const {
    int off = 0;
    for (std::size_t c = 0; c < core_index; ++c) off += cores.at(c).n_neurons;
    return off;
}

void Network::add_input_projection(const SynapseTable& local, std::size_t core_index, int input_offset) {
    const int off = core_offset(core_index);
    for (auto s : local) {
        if (s.kind != SourceKind::input) throw ValidationError("add_input_projection: expected input sources");
        if (s.target >= cores.at(core_index).n_neurons) throw ValidationError("add_input_projection: target out of range");
        s.source += input_offset;
        s.target += off;
        synapses.push_back(s);
    }
}

void Network::add_all_to_all(std::size_t from, std::size_t to, SynapseType type, int count) {
    if (count <= 0) return;
    const int from_off = core_offset(from);
    const int to_off = core_offset(to);
    for (int i = 0; i < cores.at(from).n_neurons; ++i) {
        for (int j = 0; j < cores.at(to).n_neurons; ++j) {
            synapses.push_back({SourceKind::neuron, from_off + i, to_off + j, type, count});
        }
    }
}

void Network::validate() const {
    if (cores.size() > static_cast<std::size_t>(kMaxCores)) throw ValidationError("network: at most 4 cores");
    std::set<int> ids;
    for (const auto& c : cores) {
        c.validate();
        if (!ids.insert(c.core_id).second) throw ValidationError("network: duplicate core_id " + std::to_string(c.core_id));
    }
    const int n = n_neurons();
    for (const auto& s : synapses) {
        if (s.target < 0 || s.target >= n) throw ValidationError("network: synapse target out of range");
        if (s.source < 0) throw ValidationError("network: negative synapse source");
        if (s.kind == SourceKind::neuron && s.source >= n) throw ValidationError("network: neuron source out of range");
        if (s.count < 0) throw ValidationError("network: negative synapse count");
    }
}

SimResult simulate(const Network& net, std::span<const AddressEvent> events, const SimOptions& opts) {
    const auto prepared = kernels::prepare(net, events, opts);
    kernels::SpikeSteps steps;
    switch (opts.kernel) {
        case Kernel::serial: steps = kernels::run_serial(prepared); break;
        case Kernel::parallel: steps = kernels::run_parallel(prepared); break;
        case Kernel::automatic:
            steps = kernels::stage_of(prepared).size() == prepared.neurons.size() ? kernels::run_parallel(prepared)
                                                                                   : kernels::run_serial(prepared);
            break;
    }
    SimResult result;
    result.dt = opts.dt;
    result.spikes.resize(steps.size());
    for (std::size_t j = 0; j < steps.size(); ++j) {
        result.spikes[j].reserve(steps[j].size());
        for (auto s : steps[j]) result.spikes[j].push_back(static_cast<double>(s + 1) * opts.dt);
    }
    return result;
}

void write_spikes_csv(std::ostream& os, const SimResult& result) {
    os << "neuron_id,time_s\n";
    char buf[64];
    for (std::size_t j = 0; j < result.spikes.size(); ++j) {
        for (double t : result.spikes[j]) {
            std::snprintf(buf, sizeof buf, "%zu,%.9f\n", j, t);
            os << buf;
        }
    }
}

}  // namespace mudecode::substrate
