#pragma once

// Spike-train and force-signal types shared by every stage, plus the common
// numerics: causal exponential-kernel rate estimation, windowed spike
// counting, rectified per-direction targets and RMSE.

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace mudecode {

enum class Finger { thumb, index, middle, ring, little };

std::string_view to_string(Finger f);
Finger parse_finger(std::string_view name);

inline constexpr double kMinPhysiologicalRateHz = 2.0;
inline constexpr double kMaxPhysiologicalRateHz = 50.0;
inline constexpr double kMaxAbsForcePct = 100.0;

/// Discharge times of one motor unit in one trial. Grids 1-2 sit over the
/// flexors, grids 3-4 over the extensors.
struct MuSpikeTrain {
    int mu_id = 0;
    int grid = 1;
    Finger finger = Finger::index;
    int trial = 1;
    std::vector<double> spike_times;  // seconds, strictly increasing
};

/// Uniformly sampled signed force in %MVC, flexion positive. Sample i sits at
/// start_time + i / sample_rate.
struct ForceTrace {
    double sample_rate = 100.0;
    std::vector<double> samples;
    double start_time = 0.0;

    double duration() const { return static_cast<double>(samples.size()) / sample_rate; }
    double time_at(std::size_t i) const { return start_time + static_cast<double>(i) / sample_rate; }
    std::size_t size() const { return samples.size(); }
};

/// Instantaneous rate in Hz, sampled like a ForceTrace starting at t = 0.
struct RateTrace {
    double sample_rate = 100.0;
    double tau = 0.2;
    std::vector<double> values;

    std::size_t size() const { return values.size(); }
};

/// counts(w, i): spikes of MU i inside [w*hop, w*hop + window_len).
struct WindowedCounts {
    double window_len = 0.1;
    double hop = 0.05;
    std::size_t n_windows = 0;
    std::size_t n_mu = 0;
    std::vector<int> counts;  // row-major [n_windows x n_mu]

    int at(std::size_t w, std::size_t i) const { return counts[w * n_mu + i]; }
    int& at(std::size_t w, std::size_t i) { return counts[w * n_mu + i]; }
    double window_start(std::size_t w) const { return static_cast<double>(w) * hop; }
};

enum class RejectReason { none, out_of_range, non_monotonic, rate_too_low, rate_too_high };

std::string_view to_string(RejectReason r);

struct ValidationResult {
    bool accepted = false;
    RejectReason reason = RejectReason::none;
    double mean_rate = 0.0;  // Hz, count / duration
};

ValidationResult validate_train(const MuSpikeTrain& train, double duration);

/// r(t) = sum_{t_s <= t} exp(-(t - t_s)/tau) / tau, evaluated at
/// t_n = n / sample_rate for n < round(sample_rate * duration).
RateTrace exp_kernel_rate(std::span<const double> spike_times, double tau, double sample_rate,
                          double duration);

/// Number of windows of length window_len with stride hop that fit in duration.
std::size_t window_count(double duration, double window_len, double hop);

WindowedCounts window_counts(std::span<const MuSpikeTrain> trains, double window_len, double hop,
                             double duration);

/// Root-mean-square difference. Both traces must share sample rate and length.
double rmse(const ForceTrace& pred, const ForceTrace& truth);

/// Linear interpolation of `trace` onto n samples at start_time + i / sample_rate.
/// Instants outside the source support take the nearest end value.
ForceTrace resample_linear(const ForceTrace& trace, double sample_rate, double start_time, std::size_t n);

/// Splits a signed force into nonnegative flexion and extension targets with
/// flexion - extension == force.
std::pair<ForceTrace, ForceTrace> rectified_targets(const ForceTrace& force);

}  // namespace mudecode
