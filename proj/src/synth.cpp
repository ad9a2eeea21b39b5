#include "mudecode/synth.hpp"

#include <algorithm>
#include <cmath>

#include "mudecode/errors.hpp"
#include "mudecode/rng.hpp"

namespace mudecode::synth {

double triangular_value(const TrialSpec& spec, double t) {
    if (spec.n_ramps < 1) throw ValidationError("triangular_profile: n_ramps must be >= 1");
    if (t <= 0.0 || t >= spec.duration) return 0.0;
    const int n_segments = 2 * spec.n_ramps;
    const double seg_len = spec.duration / n_segments;
    const int s = std::min(static_cast<int>(t / seg_len), n_segments - 1);
    const double u = (t - s * seg_len) / seg_len;
    const double shape = 1.0 - std::abs(2.0 * u - 1.0);
    return (s % 2 == 0 ? 1.0 : -1.0) * spec.peak * shape;
}

ForceTrace triangular_profile(const TrialSpec& spec) {
    if (!(spec.duration > 0.0)) throw ValidationError("triangular_profile: duration must be positive");
    if (spec.peak < 0.0 || spec.peak > kMaxAbsForcePct) {
        throw ValidationError("triangular_profile: peak must lie in [0, 100] %MVC");
    }
    ForceTrace f;
    f.sample_rate = spec.sample_rate;
    const auto n = static_cast<std::size_t>(std::llround(spec.sample_rate * spec.duration));
    f.samples.resize(n);
    for (std::size_t i = 0; i < n; ++i) f.samples[i] = triangular_value(spec, f.time_at(i));
    return f;
}

double directional_drive(const MuProfile& mu, double force) {
    const double flex = force > 0.0 ? force : 0.0;
    const double ext = force < 0.0 ? -force : 0.0;
    return mu.flexor() ? flex + mu.direction_bias * ext : ext + mu.direction_bias * flex;
}

double instantaneous_rate(const MuProfile& mu, double drive, double drive_peak) {
    if (drive < mu.recruitment_threshold) return 0.0;
    const double span = drive_peak - mu.recruitment_threshold;
    const double frac = span > 0.0 ? (drive - mu.recruitment_threshold) / span : 1.0;
    const double rate = mu.min_rate + (mu.peak_rate - mu.min_rate) * frac;
    return std::min(rate, kMaxPhysiologicalRateHz);
}

double expected_mean_rate(const MuProfile& mu, const ForceTrace& force, double drive_peak) {
    if (force.size() == 0) return 0.0;
    double acc = 0.0;
    for (double v : force.samples) acc += instantaneous_rate(mu, directional_drive(mu, v), drive_peak);
    return acc / static_cast<double>(force.size());
}

std::vector<MuProfile> synth_mu_population(int n_flexion, int n_extension, std::uint64_t seed,
                                           const PopulationOptions& opts) {
    if (n_flexion < 0 || n_extension < 0) throw ValidationError("synth_mu_population: counts must be >= 0");
    if (!(opts.min_rate >= kMinPhysiologicalRateHz && opts.min_rate < opts.peak_rate &&
          opts.peak_rate <= kMaxPhysiologicalRateHz)) {
        throw ValidationError("synth_mu_population: need 2 <= min_rate < peak_rate <= 50");
    }
    if (!(opts.threshold_max >= 0.0 && opts.threshold_max <= opts.reference.peak)) {
        throw ValidationError("synth_mu_population: threshold_max must lie in [0, profile peak]");
    }

    const ForceTrace reference = triangular_profile(opts.reference);
    std::vector<MuProfile> out;
    out.reserve(static_cast<std::size_t>(n_flexion + n_extension));
    for (int id = 0; id < n_flexion + n_extension; ++id) {
        auto eng = rng::make_engine(seed, {static_cast<std::uint64_t>(id)});
        const bool flexor = id < n_flexion;
        MuProfile mu;
        mu.mu_id = id;
        mu.grid = (flexor ? 1 : 3) + (rng::uniform01(eng) < 0.5 ? 0 : 1);
        mu.min_rate = opts.min_rate;
        mu.peak_rate = opts.peak_rate;
        mu.jitter_cv = opts.jitter_cv;
        const double lo = flexor ? opts.flexor_bias_lo : opts.extensor_bias_lo;
        const double hi = flexor ? opts.flexor_bias_hi : opts.extensor_bias_hi;
        mu.direction_bias = lo + (hi - lo) * rng::uniform01(eng);
        // Redraw until the unit is active enough on the reference trial.
        bool active = false;
        for (int attempt = 0; attempt < 64 && !active; ++attempt) {
            mu.recruitment_threshold = opts.threshold_max * rng::uniform01(eng);
            active = expected_mean_rate(mu, reference, opts.reference.peak) >= opts.min_expected_rate;
        }
        if (!active) mu.recruitment_threshold = 0.0;
        out.push_back(mu);
    }
    return out;
}

std::vector<MuSpikeTrain> synth_spike_trains(std::span<const MuProfile> profiles, const ForceTrace& force,
                                             std::uint64_t seed, TrainLabel label, double drive_peak) {
    if (force.sample_rate < 50.0) throw ValidationError("synth_spike_trains: force must be sampled at >= 50 Hz");

    std::vector<MuSpikeTrain> out(profiles.size());
    const double dt = 1.0 / force.sample_rate;
    const double duration = force.duration();

    for (std::size_t m = 0; m < profiles.size(); ++m) {
        const MuProfile& mu = profiles[m];
        auto eng = rng::make_engine(seed, {static_cast<std::uint64_t>(mu.mu_id)});
        const double sigma2 = std::log1p(mu.jitter_cv * mu.jitter_cv);
        const double sigma = std::sqrt(sigma2);
        auto next_interval = [&] {
            // Lognormal with unit mean and the requested CV.
            return sigma > 0.0 ? std::exp(-0.5 * sigma2 + sigma * rng::normal(eng)) : 1.0;
        };

        MuSpikeTrain& tr = out[m];
        tr.mu_id = mu.mu_id;
        tr.grid = mu.grid;
        tr.finger = label.finger;
        tr.trial = label.trial;

        // Time-rescaled renewal process: a spike fires whenever the integrated
        // rate reaches the next unit-mean jittered interval. The rate is held
        // constant across each force sample period and the phase restarts
        // while the unit is derecruited.
        double phase = 0.0;
        double target = next_interval();
        for (std::size_t k = 0; k < force.size(); ++k) {
            const double lambda = instantaneous_rate(mu, directional_drive(mu, force.samples[k]), drive_peak);
            const double t0 = force.time_at(k);
            if (lambda <= 0.0) {
                phase = 0.0;
                continue;
            }
            double t = t0;
            const double t_end = std::min(t0 + dt, duration);
            while (true) {
                const double t_spike = t + (target - phase) / lambda;
                if (t_spike >= t_end) {
                    phase += (t_end - t) * lambda;
                    break;
                }
                if (tr.spike_times.empty() || t_spike > tr.spike_times.back()) tr.spike_times.push_back(t_spike);
                t = t_spike;
                phase = 0.0;
                target = next_interval();
            }
        }
    }
    return out;
}

FingerTask make_task(const TaskSpec& spec) {
    if (spec.n_trials < 1) throw ValidationError("make_task: need at least one trial");
    FingerTask task;
    task.finger = spec.finger;
    PopulationOptions popts = spec.population;
    popts.reference = spec.trial;
    task.profiles = synth_mu_population(spec.n_flexion, spec.n_extension, rng::derive(spec.seed, {0xB0B}), popts);
    for (int trial = 1; trial <= spec.n_trials; ++trial) {
        TrialSpec ts = spec.trial;
        ts.seed = rng::derive(spec.seed, {static_cast<std::uint64_t>(trial)});
        ForceTrace f = triangular_profile(ts);
        task.trains.push_back(
            synth_spike_trains(task.profiles, f, ts.seed, TrainLabel{spec.finger, trial}, spec.trial.peak));
        task.force.push_back(std::move(f));
    }
    return task;
}

}  // namespace mudecode::synth
