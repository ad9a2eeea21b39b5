#pragma once

// Discrete-time emulation of a mixed-signal neuromorphic substrate: AdExp
// neurons grouped in cores that share one parameter set, per-neuron device
// mismatch, four current-based exponential synapse types and integer
// synapse-count connectivity driven by address events.
//
// Units are normalized. Time is in seconds except for the membrane equation,
// where C and g_L are given per millisecond: the membrane time constant is
// C / g_L milliseconds.

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mudecode/errors.hpp"
#include "mudecode/signal.hpp"

namespace mudecode::substrate {

inline constexpr int kMaxNeuronsPerCore = 256;
inline constexpr int kMaxCores = 4;
inline constexpr double kMembraneTimeUnit = 1e-3;  // s
inline constexpr double kDefaultDt = 1e-4;         // s
inline constexpr double kMaxDt = 5e-4;             // s

enum class SynapseType : std::uint8_t { ampa = 0, nmda = 1, gaba_a = 2, gaba_b = 3 };
inline constexpr std::size_t kNumSynapseTypes = 4;

std::string_view to_string(SynapseType t);
SynapseType parse_synapse_type(std::string_view name);
inline constexpr bool is_excitatory(SynapseType t) { return t == SynapseType::ampa || t == SynapseType::nmda; }

struct NeuronParams {
    double C = 1.0;
    double g_L = 0.05;
    double E_L = 0.0;
    double V_T = 1.0;
    double Delta_T = 0.2;
    double V_peak = 2.0;
    double V_reset = 0.0;
    double a = 0.0;
    double b = 0.1;
    double tau_w = 0.1;        // s
    double refractory = 2e-3;  // s

    void validate() const;
};

struct SynapseTypeParams {
    double tau = 0.01;  // s
    double gain = 1.0;  // current per unit synaptic state
    int sign = +1;
};

struct SynapseParams {
    std::array<SynapseTypeParams, kNumSynapseTypes> types = default_types();

    SynapseTypeParams& operator[](SynapseType t) { return types[static_cast<std::size_t>(t)]; }
    const SynapseTypeParams& operator[](SynapseType t) const { return types[static_cast<std::size_t>(t)]; }

    static std::array<SynapseTypeParams, kNumSynapseTypes> default_types();
    void validate() const;
};

struct CoreConfig {
    int core_id = 0;
    int n_neurons = 20;
    NeuronParams neuron{};
    SynapseParams synapse{};
    double mismatch_sigma = 0.1;
    double noise_current_sigma = 0.0;
    std::uint64_t seed = 0;

    void validate() const;
};

/// One physical neuron after mismatch: its own parameters and per-type gains.
struct NeuronInstance {
    NeuronParams params;
    std::array<double, kNumSynapseTypes> gains{};
};

/// p_j = p * (1 + eps), eps ~ N(0, sigma^2) truncated to (-0.5, 0.5) and a
/// pure function of (seed, core_id, neuron, parameter index). E_L, V_reset,
/// V_peak and the synaptic time constants stay nominal.
std::vector<NeuronInstance> apply_mismatch(const CoreConfig& core);

/// Names of the mismatch-eligible quantities in parameter-index order.
std::span<const std::string_view> mismatch_parameter_names();
double mismatch_parameter(const NeuronInstance& n, std::size_t index);
double mismatch_parameter(const CoreConfig& nominal, std::size_t index);

/// Signed synapse counts from inputs (rows) to output neurons (columns).
struct Connectivity {
    std::size_t n_inputs = 0;
    std::size_t n_outputs = 0;
    int k = 3;
    int fan_in_limit = 64;
    std::vector<int> weights;  // row-major [n_inputs x n_outputs]

    Connectivity() = default;
    Connectivity(std::size_t inputs, std::size_t outputs, int k_max = 3, int fan_in = 64)
        : n_inputs(inputs), n_outputs(outputs), k(k_max), fan_in_limit(fan_in), weights(inputs * outputs, 0) {}

    int at(std::size_t i, std::size_t j) const { return weights[i * n_outputs + j]; }
    int& at(std::size_t i, std::size_t j) { return weights[i * n_outputs + j]; }
    int fan_in(std::size_t j) const;
};

enum class ConnectivityFault { k_exceeded, fan_in_exceeded, shape };

class ConnectivityError : public ValidationError {
public:
    ConnectivityError(ConnectivityFault fault, int neuron, const std::string& what)
        : ValidationError(what), fault_(fault), neuron_(neuron) {}
    ConnectivityFault fault() const { return fault_; }
    int neuron() const { return neuron_; }

private:
    ConnectivityFault fault_;
    int neuron_;
};

/// Throws ConnectivityError on |W_ij| > k or fan-in above the limit.
void check_connectivity(const Connectivity& w);

enum class SourceKind : std::uint8_t { input, neuron };

/// `count` synapses of `type` from a source to a target neuron.
struct Synapse {
    SourceKind kind = SourceKind::input;
    int source = 0;
    int target = 0;
    SynapseType type = SynapseType::ampa;
    int count = 0;

    friend bool operator==(const Synapse&, const Synapse&) = default;
};

using SynapseTable = std::vector<Synapse>;

/// W_ij = +n gives n synapses of exc_type, -n gives n of inh_type; zero
/// entries produce nothing. Sources are input channels, targets local neuron
/// indices.
SynapseTable compile_connectivity(const Connectivity& w, SynapseType exc_type = SynapseType::ampa,
                                  SynapseType inh_type = SynapseType::gaba_b);

struct AddressEvent {
    double time = 0.0;
    int source = 0;

    friend bool operator==(const AddressEvent&, const AddressEvent&) = default;
};

/// Merges per-MU trains into one stream; train i becomes source i. Equal
/// times are ordered by ascending source.
std::vector<AddressEvent> merge_event_streams(std::span<const MuSpikeTrain> trains);

/// Cores plus a synapse table whose targets (and neuron sources) are global
/// neuron ids: the neurons of cores[0] come first, then cores[1], ...
struct Network {
    std::vector<CoreConfig> cores;
    SynapseTable synapses;

    int n_neurons() const;
    int core_offset(std::size_t core_index) const;

    /// Adds a compiled input table targeting the neurons of one core.
    void add_input_projection(const SynapseTable& local, std::size_t core_index, int input_offset = 0);
    /// `count` synapses of `type` from every neuron of `from` to every neuron of `to`.
    void add_all_to_all(std::size_t from, std::size_t to, SynapseType type, int count);

    void validate() const;
};

enum class Kernel { automatic, serial, parallel };

struct SimOptions {
    double duration = 25.0;
    double dt = kDefaultDt;
    std::uint64_t noise_seed = 0;
    Kernel kernel = Kernel::automatic;
};

struct SimResult {
    double dt = kDefaultDt;
    std::vector<std::vector<double>> spikes;  // per global neuron, sorted
};

/// Fixed-step exponential-Euler integration of every neuron. Deterministic
/// per (network, events, options); both kernels give identical output.
SimResult simulate(const Network& net, std::span<const AddressEvent> events, const SimOptions& opts);

/// Output spikes as `neuron_id,time_s` rows ordered by neuron then time.
void write_spikes_csv(std::ostream& os, const SimResult& result);

}  // namespace mudecode::substrate
