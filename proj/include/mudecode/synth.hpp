#pragma once

// Synthetic single-finger trials: triangular force profiles and motor-unit
// spike trains generated from a threshold-linear rate code driving a jittered
// renewal process.

#include <cstdint>
#include <span>
#include <vector>

#include "mudecode/signal.hpp"

namespace mudecode::synth {

struct TrialSpec {
    double duration = 25.0;     // s
    double peak = 30.0;         // %MVC
    double sample_rate = 100.0; // Hz
    int n_ramps = 2;            // flexion+extension triangle pairs per trial
    std::uint64_t seed = 0;
};

struct MuProfile {
    int mu_id = 0;
    int grid = 1;
    double recruitment_threshold = 0.0;  // %MVC
    double min_rate = 8.0;               // Hz at recruitment
    double peak_rate = 35.0;             // Hz at the profile peak
    double direction_bias = 0.0;         // weight of opposite-direction force in the drive
    double jitter_cv = 0.15;             // CV of the inter-spike intervals

    bool flexor() const { return grid <= 2; }
};

/// Value of the triangular profile at time t (seconds). Segment s of length
/// duration / (2 n_ramps) is a flexion triangle for even s, extension for odd.
double triangular_value(const TrialSpec& spec, double t);

ForceTrace triangular_profile(const TrialSpec& spec);

/// Directional drive d(t) seen by a unit: own-direction |force| plus
/// direction_bias times the opposite-direction |force|.
double directional_drive(const MuProfile& mu, double force);

/// Threshold-linear rate code, clamped to the physiological ceiling.
double instantaneous_rate(const MuProfile& mu, double drive, double drive_peak);

/// Mean of instantaneous_rate over the samples of `force`.
double expected_mean_rate(const MuProfile& mu, const ForceTrace& force, double drive_peak);

struct PopulationOptions {
    double threshold_max = 25.0;
    double flexor_bias_lo = 0.1, flexor_bias_hi = 0.3;
    double extensor_bias_lo = 0.0, extensor_bias_hi = 0.1;
    double min_rate = 8.0;
    double peak_rate = 35.0;
    double jitter_cv = 0.15;
    // Profiles whose expected mean rate on the reference trial falls below
    // this are redrawn, so generated trains pass validate_train.
    double min_expected_rate = 2.5;
    TrialSpec reference{};
};

/// n_flexion units on grids 1-2 followed by n_extension units on grids 3-4;
/// mu_id runs 0..n-1 in that order.
std::vector<MuProfile> synth_mu_population(int n_flexion, int n_extension, std::uint64_t seed,
                                           const PopulationOptions& opts = {});

struct TrainLabel {
    Finger finger = Finger::index;
    int trial = 1;
};

/// One train per profile; force must be sampled at >= 50 Hz. drive_peak is
/// the drive at which a unit reaches peak_rate.
std::vector<MuSpikeTrain> synth_spike_trains(std::span<const MuProfile> profiles, const ForceTrace& force,
                                             std::uint64_t seed, TrainLabel label = {},
                                             double drive_peak = 30.0);

struct TaskSpec {
    Finger finger = Finger::index;
    int n_flexion = 20;
    int n_extension = 6;
    int n_trials = 3;
    TrialSpec trial{};
    PopulationOptions population{};
    std::uint64_t seed = 1;
};

struct FingerTask {
    Finger finger = Finger::index;
    std::vector<MuProfile> profiles;
    std::vector<ForceTrace> force;                   // index = trial - 1
    std::vector<std::vector<MuSpikeTrain>> trains;   // index = trial - 1

    int n_trials() const { return static_cast<int>(force.size()); }
};

/// All trials reuse the same profiles and force profile with fresh spike noise.
FingerTask make_task(const TaskSpec& spec);

}  // namespace mudecode::synth
