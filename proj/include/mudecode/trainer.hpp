#pragma once

// Computer-in-the-loop training of integer synapse counts. Each epoch streams
// the MU spikes through the emulated substrate, turns the recorded output
// spikes into population rates, scores them against the rectified force
// target and takes a gradient step on real-valued shadow weights under a
// rate-linear surrogate. The shadow weights are then stochastically rounded
// to the integer synapse counts applied in the next epoch.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mudecode/rng.hpp"
#include "mudecode/signal.hpp"
#include "mudecode/substrate.hpp"

namespace mudecode::trainer {

inline constexpr double kRateTau = 0.2;          // s
inline constexpr double kReadoutRate = 100.0;    // Hz

/// floor(w') + 1 with probability w' - floor(w'), else floor(w'); then
/// clamped to [-k, k].
int stochastic_round(double w_prime, int k, rng::Engine& eng);

enum class Direction { flexion, extension };

std::string_view to_string(Direction d);

struct PopulationSpec {
    Direction direction = Direction::flexion;
    int core_id = 0;
    int m_out = 20;
    std::vector<int> input_grids;

    static PopulationSpec flexion(int core_id = 0, int m_out = 20) { return {Direction::flexion, core_id, m_out, {1, 2}}; }
    static PopulationSpec extension(int core_id = 1, int m_out = 20) { return {Direction::extension, core_id, m_out, {3, 4}}; }

    void validate() const;
    bool accepts(int grid) const;
};

struct LossPoint {
    int epoch = 0;
    double mse = 0.0;

    friend bool operator==(const LossPoint&, const LossPoint&) = default;
};

struct TrainerState {
    std::size_t n_mu = 0;
    std::size_t m_out = 0;
    std::vector<double> shadow;        // row-major [n_mu x m_out], within [-k, k]
    substrate::Connectivity weights;   // integer counts currently on the substrate
    double learning_rate = 0.05;
    int epoch = 0;
    std::vector<LossPoint> loss_history;
    int k = 3;
    std::uint64_t rng_seed = 0;

    double& w(std::size_t i, std::size_t j) { return shadow[i * m_out + j]; }
    double w(std::size_t i, std::size_t j) const { return shadow[i * m_out + j]; }

    friend bool operator==(const TrainerState&, const TrainerState&);
};

/// shadow ~ U(0, 1) and a first integer sample drawn from it.
TrainerState initial_state(std::size_t n_mu, std::size_t m_out, int k, int fan_in_limit, double learning_rate,
                           std::uint64_t seed);

struct LossAndGradient {
    double mse = 0.0;
    std::vector<double> gradient;  // row-major [n_mu x m_out]
};

/// mse = mean_t (ybar - target)^2 with ybar the population mean of `recorded`;
/// d mse / d w'_ij = mean_t 2 (ybar - target) (alpha / m_out) x_i.
LossAndGradient surrogate_loss_and_grad(std::span<const RateTrace> recorded, std::span<const RateTrace> inputs,
                                        const ForceTrace& target, std::size_t m_out, double gain_alpha);

/// Population mean rate over neurons, on the shared sample grid.
std::vector<double> population_rate(std::span<const RateTrace> rates);

/// Exponential-kernel rates of every spike train, sampled at kReadoutRate.
std::vector<RateTrace> kernel_rates(std::span<const std::vector<double>> spikes, double duration);
std::vector<RateTrace> kernel_rates(std::span<const MuSpikeTrain> trains, double duration);

/// What the trainer needs from the substrate for one population.
struct Chip {
    substrate::CoreConfig core;
    double dt = substrate::kDefaultDt;
    std::uint64_t noise_seed = 0;
};

/// Output rate gained per (synapse x input Hz), probed on the chip's own
/// core: the mean slope between 20 and 40 synapses of regular 30 Hz input.
double calibrate_alpha(const Chip& chip);

struct EpochInputs {
    std::span<const MuSpikeTrain> trains;
    const ForceTrace& target;  // nonnegative, sampled at kReadoutRate
    double alpha = 0.0;
};

/// Record, score, step, round, apply. Returns the successor state; the input
/// state is never modified, so a throwing epoch leaves it intact.
TrainerState train_epoch(const TrainerState& state, const PopulationSpec& population, const EpochInputs& in,
                         const Chip& chip);

/// Records the population's output for a given integer connectivity.
substrate::SimResult run_population(const substrate::Connectivity& w, std::span<const MuSpikeTrain> trains,
                                    double duration, const Chip& chip, std::uint64_t noise_seed);

struct TrainConfig {
    int epochs = 30;
    double learning_rate = 1.0;
    int k = 3;
    int fan_in_limit = 64;
    double alpha = 0.0;  // <= 0: calibrate on the chip
    std::uint64_t seed = 1;
    std::filesystem::path checkpoint_dir;  // non-empty: <direction>_epoch<N>.ckpt after every epoch
};

struct PopulationResult {
    PopulationSpec spec;
    std::vector<int> mu_ids;   // rows of the connectivity, in input order
    TrainerState state;
    double alpha = 0.0;
};

struct DecoderResult {
    PopulationResult flexion;
    PopulationResult extension;
};

/// Inputs of a population: the trains whose grid it accepts, in input order.
std::vector<MuSpikeTrain> select_inputs(std::span<const MuSpikeTrain> trains, const PopulationSpec& spec);

/// Trains each population against its rectified target from one trial.
DecoderResult train_decoder(std::span<const MuSpikeTrain> trains, const ForceTrace& force,
                            const PopulationSpec& flexion, const PopulationSpec& extension, const TrainConfig& cfg,
                            const Chip& flexion_chip, const Chip& extension_chip);

/// Trains a single population; used by train_decoder and by resumable runs.
PopulationResult train_population(std::span<const MuSpikeTrain> inputs, const ForceTrace& target,
                                  const PopulationSpec& spec, const TrainConfig& cfg, const Chip& chip,
                                  const TrainerState* resume = nullptr);

// Checkpoint bundle (text, versioned):
//   mudecode-checkpoint 1
//   n_mu <n> / m_out <m> / k / fan_in_limit / epoch / learning_rate / rng_seed
//   shadow    n_mu rows of m_out values (%.17g, exact round trip)
//   weights   n_mu rows of m_out integers
//   loss      one "epoch mse" pair per line
void write_checkpoint(std::ostream& os, const TrainerState& state);
void write_checkpoint(const std::filesystem::path& path, const TrainerState& state);
TrainerState read_checkpoint(std::istream& is);
TrainerState read_checkpoint(const std::filesystem::path& path);

}  // namespace mudecode::trainer
