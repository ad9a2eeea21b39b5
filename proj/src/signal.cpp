#include "mudecode/signal.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "mudecode/errors.hpp"

namespace mudecode {

namespace {

constexpr std::string_view kFingerNames[] = {"thumb", "index", "middle", "ring", "little"};

std::size_t sample_count(double sample_rate, double duration) {
    return static_cast<std::size_t>(std::llround(sample_rate * duration));
}

}  // namespace

std::string_view to_string(Finger f) { return kFingerNames[static_cast<int>(f)]; }

Finger parse_finger(std::string_view name) {
    for (int i = 0; i < 5; ++i) {
        if (kFingerNames[i] == name) return static_cast<Finger>(i);
    }
    throw ValidationError("unknown finger '" + std::string(name) + "'");
}

std::string_view to_string(RejectReason r) {
    switch (r) {
        case RejectReason::none: return "none";
        case RejectReason::out_of_range: return "out_of_range";
        case RejectReason::non_monotonic: return "non_monotonic";
        case RejectReason::rate_too_low: return "rate_too_low";
        case RejectReason::rate_too_high: return "rate_too_high";
    }
    return "unknown";
}

ValidationResult validate_train(const MuSpikeTrain& train, double duration) {
    if (!(duration > 0.0)) throw ValidationError("validate_train: duration must be positive");
    ValidationResult result;
    const auto& t = train.spike_times;
    result.mean_rate = static_cast<double>(t.size()) / duration;
    for (std::size_t i = 0; i < t.size(); ++i) {
        if (!(t[i] >= 0.0 && t[i] <= duration)) {
            result.reason = RejectReason::out_of_range;
            return result;
        }
        if (i > 0 && !(t[i] > t[i - 1])) {
            result.reason = RejectReason::non_monotonic;
            return result;
        }
    }
    if (result.mean_rate < kMinPhysiologicalRateHz) {
        result.reason = RejectReason::rate_too_low;
    } else if (result.mean_rate > kMaxPhysiologicalRateHz) {
        result.reason = RejectReason::rate_too_high;
    } else {
        result.accepted = true;
    }
    return result;
}

RateTrace exp_kernel_rate(std::span<const double> spike_times, double tau, double sample_rate,
                          double duration) {
    if (!(tau > 0.0)) throw ValidationError("exp_kernel_rate: tau must be positive");
    if (!(sample_rate > 0.0)) throw ValidationError("exp_kernel_rate: sample_rate must be positive");

    RateTrace out;
    out.sample_rate = sample_rate;
    out.tau = tau;
    const std::size_t n = sample_count(sample_rate, duration);
    out.values.resize(n, 0.0);

    // The kernel sum is held as amplitude * exp(-(t - ref)/tau) anchored at
    // the most recent spike, so each sample costs one exp().
    double amplitude = 0.0;
    double ref = 0.0;
    std::size_t next = 0;
    const double inv_tau = 1.0 / tau;
    for (std::size_t i = 0; i < n; ++i) {
        const double t = static_cast<double>(i) / sample_rate;
        while (next < spike_times.size() && spike_times[next] <= t) {
            const double ts = spike_times[next];
            amplitude = amplitude * std::exp(-(ts - ref) * inv_tau) + inv_tau;
            ref = ts;
            ++next;
        }
        out.values[i] = amplitude == 0.0 ? 0.0 : amplitude * std::exp(-(t - ref) * inv_tau);
    }
    return out;
}

std::size_t window_count(double duration, double window_len, double hop) {
    if (!(hop > 0.0)) throw ValidationError("window_counts: hop must be positive");
    if (!(window_len > 0.0) || hop > window_len) {
        throw ValidationError("window_counts: need 0 < hop <= window_len");
    }
    if (window_len > duration) throw ValidationError("window_counts: window longer than duration");
    // Guard against (25 - 0.1) / 0.05 evaluating to 497.999...
    const double steps = (duration - window_len) / hop;
    return static_cast<std::size_t>(std::floor(steps + 1e-9)) + 1;
}

WindowedCounts window_counts(std::span<const MuSpikeTrain> trains, double window_len, double hop,
                             double duration) {
    WindowedCounts wc;
    wc.window_len = window_len;
    wc.hop = hop;
    wc.n_windows = window_count(duration, window_len, hop);
    wc.n_mu = trains.size();
    wc.counts.assign(wc.n_windows * wc.n_mu, 0);

    const auto n_mu = static_cast<std::ptrdiff_t>(wc.n_mu);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < n_mu; ++i) {
        const auto& t = trains[static_cast<std::size_t>(i)].spike_times;
        for (std::size_t w = 0; w < wc.n_windows; ++w) {
            const double lo = wc.window_start(w);
            const double hi = lo + window_len;
            const auto first = std::lower_bound(t.begin(), t.end(), lo);
            const auto last = std::lower_bound(first, t.end(), hi);
            wc.at(w, static_cast<std::size_t>(i)) = static_cast<int>(last - first);
        }
    }
    return wc;
}

double rmse(const ForceTrace& pred, const ForceTrace& truth) {
    if (pred.size() != truth.size()) {
        throw ValidationError("rmse: length mismatch (" + std::to_string(pred.size()) + " vs " +
                              std::to_string(truth.size()) + ")");
    }
    if (pred.sample_rate != truth.sample_rate) throw ValidationError("rmse: sample rate mismatch");
    if (pred.size() == 0) throw ValidationError("rmse: empty traces");
    double acc = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double d = pred.samples[i] - truth.samples[i];
        acc += d * d;
    }
    return std::sqrt(acc / static_cast<double>(pred.size()));
}

ForceTrace resample_linear(const ForceTrace& trace, double sample_rate, double start_time, std::size_t n) {
    if (trace.size() == 0) throw ValidationError("resample_linear: empty source trace");
    ForceTrace out;
    out.sample_rate = sample_rate;
    out.start_time = start_time;
    out.samples.resize(n);
    const std::size_t last = trace.size() - 1;
    for (std::size_t i = 0; i < n; ++i) {
        const double t = start_time + static_cast<double>(i) / sample_rate;
        const double pos = (t - trace.start_time) * trace.sample_rate;
        if (pos <= 0.0) {
            out.samples[i] = trace.samples.front();
        } else if (pos >= static_cast<double>(last)) {
            out.samples[i] = trace.samples.back();
        } else {
            const auto k = static_cast<std::size_t>(pos);
            const double frac = pos - static_cast<double>(k);
            out.samples[i] = trace.samples[k] + frac * (trace.samples[k + 1] - trace.samples[k]);
        }
    }
    return out;
}

std::pair<ForceTrace, ForceTrace> rectified_targets(const ForceTrace& force) {
    ForceTrace flex = force;
    ForceTrace ext = force;
    for (std::size_t i = 0; i < force.size(); ++i) {
        const double v = force.samples[i];
        flex.samples[i] = v > 0.0 ? v : 0.0;
        ext.samples[i] = v < 0.0 ? -v : 0.0;
    }
    return {std::move(flex), std::move(ext)};
}

}  // namespace mudecode
