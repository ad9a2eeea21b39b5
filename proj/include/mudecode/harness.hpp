#pragma once

// Experiment orchestration: data acquisition (synthetic or ingested CSV),
// training, the inference topology with extension-to-flexion inhibition,
// repeated noisy inference, the OLS baseline on the same trials, and the
// result tables and plot bundles written to disk.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mudecode/baseline.hpp"
#include "mudecode/config.hpp"
#include "mudecode/signal.hpp"
#include "mudecode/substrate.hpp"
#include "mudecode/synth.hpp"
#include "mudecode/trainer.hpp"

namespace mudecode::harness {

struct TrialData {
    int trial = 1;
    ForceTrace force;
    std::vector<MuSpikeTrain> trains;
};

struct FingerData {
    Finger finger = Finger::index;
    std::vector<TrialData> trials;

    const TrialData& trial(int id) const;
};

struct ExperimentConfig {
    std::vector<Finger> fingers{Finger::index};
    int train_trial = 1;
    std::vector<int> test_trials{2, 3};
    trainer::PopulationSpec flexion = trainer::PopulationSpec::flexion(0);
    trainer::PopulationSpec extension = trainer::PopulationSpec::extension(1);
    substrate::SubstrateConfig substrate = substrate::load_substrate_config(ConfigMap{});
    trainer::TrainConfig train{};
    int n_repetitions = 5;
    int inhibition_count = 1;
    double window_len = 0.1;
    double hop = 0.05;
    bool drop_invalid = false;
    std::uint64_t seed = 1;
    std::filesystem::path data_dir;  // empty: synthetic data
    synth::TaskSpec synth{};         // finger and seed are filled per finger
    bool synth_seed_set = false;
    bool train_seed_set = false;
    std::filesystem::path output_dir = "out";

    void validate() const;

    /// Keys: fingers, train_trial, test_trials, n_repetitions,
    /// inhibition_count, seed, output_dir, data_dir, substrate_config,
    /// drop_invalid, baseline.window_len, baseline.hop, train.*, synth.*,
    /// population.{flexion,extension}.{m_out,core,grids}; substrate keys
    /// (dt, core.N.*) may also appear inline.
    static ExperimentConfig from(const ConfigMap& cfg);
};

FingerData synthetic_finger(const ExperimentConfig& cfg, Finger finger);

/// Reads <dir>/spikes.csv and <dir>/force_<finger>_trial<N>.csv.
FingerData load_finger(const std::filesystem::path& dir, Finger finger, std::span<const int> trials);

/// Writes the layout load_finger reads.
void save_finger(const std::filesystem::path& dir, const FingerData& data, bool append_spikes = false);

/// Validates every train. Invalid MUs are either an error or, with
/// drop_invalid, removed from every trial. Returns warnings.
std::vector<std::string> screen_trains(FingerData& data, bool drop_invalid);

struct InferenceNetwork {
    substrate::Network net;
    std::size_t n_flex_inputs = 0;
    std::size_t n_ext_inputs = 0;
    int n_flex = 0;
    int n_ext = 0;
};

/// Flexion population on core index 0 and extension on core index 1, each
/// with its trained feedforward connectivity; input channels 0..n_flex-1 feed
/// flexion, the rest extension. Adds inhibition_count GABA_B synapses from
/// every extension neuron to every flexion neuron and nothing the other way.
/// Feedforward plus inhibitory synapses per neuron must fit fan_in_limit.
InferenceNetwork build_inference_topology(const substrate::Connectivity& w_flex, const substrate::Connectivity& w_ext,
                                          int inhibition_count, const substrate::CoreConfig& flex_core,
                                          const substrate::CoreConfig& ext_core, int fan_in_limit);

struct InferenceOutput {
    ForceTrace decoded;              // r_flex - r_ext at 100 Hz
    std::vector<double> rate_flex;   // population means, Hz
    std::vector<double> rate_ext;
    substrate::SimResult spikes;
};

InferenceOutput run_inference(const InferenceNetwork& topo, std::span<const MuSpikeTrain> flex_inputs,
                              std::span<const MuSpikeTrain> ext_inputs, double duration, double dt,
                              std::uint64_t noise_seed);

/// Trains in the order of `mu_ids`; throws if one is missing.
std::vector<MuSpikeTrain> pick_trains(std::span<const MuSpikeTrain> trains, std::span<const int> mu_ids);

struct RunRecord {
    Finger finger = Finger::index;
    std::string decoder;  // "neuromorphic" | "baseline"
    int trial = 0;
    int repetition = 0;
    bool ok = false;
    double rmse = 0.0;
    double mean_rate_flex = 0.0;
    double mean_rate_ext = 0.0;
    std::string error;
};

struct Summary {
    int n = 0;
    double mean = 0.0;
    double std = 0.0;  // sample standard deviation, 0 for n < 2
};

Summary summarize(std::span<const double> values);

struct TableRow {
    Finger finger = Finger::index;
    std::string decoder;
    int trial = 0;            // 0 for rows aggregated over test trials
    std::string aggregation;  // "repetitions" | "pooled" | "trial_means"
    Summary rmse;
    double mean_rate_flex = 0.0;
    double mean_rate_ext = 0.0;
};

struct ResultTable {
    std::vector<TableRow> rows;

    const TableRow* find(Finger f, std::string_view decoder, int trial, std::string_view aggregation) const;
};

/// One decoded test run, on the 100 Hz readout grid (baseline on its own grid).
struct TraceBundle {
    Finger finger = Finger::index;
    int trial = 0;
    int repetition = 0;
    ForceTrace truth;
    ForceTrace neuromorphic;
    ForceTrace baseline;
    std::vector<double> rate_flex;
    std::vector<double> rate_ext;
};

struct FingerModels {
    Finger finger = Finger::index;
    trainer::DecoderResult decoder;
    baseline::LinearModel baseline;
    std::vector<int> baseline_mu_ids;
};

struct ExperimentResult {
    ResultTable table;
    std::vector<RunRecord> runs;
    std::vector<TraceBundle> traces;
    std::vector<FingerModels> models;
};

/// Preloaded data, else data_dir, else synthetic; screened for invalid trains.
FingerData acquire_finger(const ExperimentConfig& cfg, Finger finger,
                          const std::map<Finger, FingerData>* data = nullptr);

/// Flexion and extension chips with per-finger noise seeds.
std::pair<trainer::Chip, trainer::Chip> training_chips(const ExperimentConfig& cfg, Finger finger);

/// Trains both populations on the training trial. The flexion fan-in limit
/// is reduced by the inhibitory synapses added at inference.
/// With `resume_dir`, training continues from <finger>_<direction>.ckpt there.
trainer::DecoderResult train_models(const ExperimentConfig& cfg, const FingerData& fd,
                                    const std::filesystem::path& resume_dir = {},
                                    const std::filesystem::path& checkpoint_dir = {});

/// OLS on the training trial, columns ordered by mu_id.
baseline::LinearModel fit_baseline(const ExperimentConfig& cfg, const FingerData& fd);
ForceTrace baseline_predict(const baseline::LinearModel& model, const TrialData& trial);

std::uint64_t inference_seed(const ExperimentConfig& cfg, Finger finger, int trial, int repetition);

/// `data` supplies preloaded fingers; missing fingers come from data_dir or
/// the synthetic generator.
ExperimentResult run_experiment(const ExperimentConfig& cfg, const std::map<Finger, FingerData>* data = nullptr);

ResultTable build_table(std::span<const RunRecord> runs, std::span<const Finger> fingers,
                        std::span<const int> test_trials);

void write_table(std::ostream& os, const ResultTable& table);
void write_runs(std::ostream& os, std::span<const RunRecord> runs);

/// result_table.csv, runs.csv, runs/*.csv traces, models and loss curves.
void write_outputs(const std::filesystem::path& dir, const ExperimentResult& result);

/// Columns of the per-finger plot CSV.
inline constexpr std::string_view kPlotHeader =
    "time_s,truth,neuromorphic_pred,baseline_pred,rate_flex,rate_ext,rate_ext_inverted";

/// One plot_<finger>.csv per finger from its first trace bundle (lowest test
/// trial, lowest repetition). Baseline predictions are interpolated onto the
/// 100 Hz grid. Returns the written paths.
std::vector<std::filesystem::path> export_plot_data(std::span<const TraceBundle> traces,
                                                    const std::filesystem::path& dir);

void write_trace(std::ostream& os, const TraceBundle& t);
/// Reads a runs/<finger>_trial<T>_rep<R>.csv written by write_outputs.
TraceBundle read_trace(const std::filesystem::path& path);

// Connectivity with row labels: header mu_id,n0,n1,...
void write_weights(std::ostream& os, const substrate::Connectivity& w, std::span<const int> mu_ids);
std::pair<substrate::Connectivity, std::vector<int>> read_weights(const std::filesystem::path& path, int k,
                                                                  int fan_in_limit);

}  // namespace mudecode::harness
