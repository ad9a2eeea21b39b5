#include "mudecode/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "mudecode/errors.hpp"

namespace mudecode::trainer {

namespace {

void enforce_fan_in(substrate::Connectivity& w) {
    for (std::size_t j = 0; j < w.n_outputs; ++j) {
        int excess = w.fan_in(j) - w.fan_in_limit;
        while (excess > 0) {
            std::size_t worst = 0;
            for (std::size_t i = 1; i < w.n_inputs; ++i) {
                if (std::abs(w.at(i, j)) > std::abs(w.at(worst, j))) worst = i;
            }
            w.at(worst, j) += w.at(worst, j) > 0 ? -1 : 1;
            --excess;
        }
    }
}

void round_into(const TrainerState& s, substrate::Connectivity& w, rng::Engine& eng) {
    for (std::size_t i = 0; i < s.n_mu; ++i) {
        for (std::size_t j = 0; j < s.m_out; ++j) w.at(i, j) = stochastic_round(s.w(i, j), s.k, eng);
    }
    enforce_fan_in(w);
}

std::vector<MuSpikeTrain> regular_probe_trains(int n, double rate, double duration) {
    std::vector<MuSpikeTrain> trains(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        trains[static_cast<std::size_t>(i)].mu_id = i;
        // Stagger phases so the summed drive is smooth.
        for (double t = (static_cast<double>(i) + 0.5) / (n * rate); t < duration; t += 1.0 / rate) {
            trains[static_cast<std::size_t>(i)].spike_times.push_back(t);
        }
    }
    return trains;
}

}  // namespace

int stochastic_round(double w_prime, int k, rng::Engine& eng) {
    if (k < 1) throw ValidationError("stochastic_round: k must be >= 1");
    const double f = std::floor(w_prime);
    const double residual = w_prime - f;
    const double r = rng::uniform01(eng);
    const double rounded = residual > r ? f + 1.0 : f;
    return static_cast<int>(std::clamp(rounded, static_cast<double>(-k), static_cast<double>(k)));
}

std::string_view to_string(Direction d) { return d == Direction::flexion ? "flexion" : "extension"; }

void PopulationSpec::validate() const {
    if (m_out < 1) throw ValidationError("population: m_out must be >= 1");
    if (input_grids.empty()) throw ValidationError("population: no input grids");
    for (int g : input_grids) {
        const bool ok = direction == Direction::flexion ? (g == 1 || g == 2) : (g == 3 || g == 4);
        if (!ok) {
            throw ValidationError("population " + std::string(to_string(direction)) + ": grid " + std::to_string(g) +
                                  " not allowed");
        }
    }
}

bool PopulationSpec::accepts(int grid) const {
    return std::find(input_grids.begin(), input_grids.end(), grid) != input_grids.end();
}

bool operator==(const TrainerState& a, const TrainerState& b) {
    return a.n_mu == b.n_mu && a.m_out == b.m_out && a.shadow == b.shadow && a.weights.weights == b.weights.weights &&
           a.weights.k == b.weights.k && a.weights.fan_in_limit == b.weights.fan_in_limit &&
           a.learning_rate == b.learning_rate && a.epoch == b.epoch && a.loss_history == b.loss_history &&
           a.k == b.k && a.rng_seed == b.rng_seed;
}

TrainerState initial_state(std::size_t n_mu, std::size_t m_out, int k, int fan_in_limit, double learning_rate,
                           std::uint64_t seed) {
    if (k < 1) throw ValidationError("trainer: k must be >= 1");
    if (!(learning_rate >= 0.0)) throw ValidationError("trainer: learning rate must be >= 0");
    TrainerState s;
    s.n_mu = n_mu;
    s.m_out = m_out;
    s.k = k;
    s.learning_rate = learning_rate;
    s.rng_seed = seed;
    s.shadow.resize(n_mu * m_out);
    auto eng = rng::make_engine(seed, {0x1417});
    for (auto& v : s.shadow) v = rng::uniform01(eng);
    s.weights = substrate::Connectivity(n_mu, m_out, k, fan_in_limit);
    auto round_eng = rng::make_engine(seed, {0});
    round_into(s, s.weights, round_eng);
    return s;
}

std::vector<double> population_rate(std::span<const RateTrace> rates) {
    if (rates.empty()) throw ValidationError("population_rate: no neurons");
    std::vector<double> mean(rates.front().size(), 0.0);
    for (const auto& r : rates) {
        if (r.size() != mean.size()) throw ValidationError("population_rate: grid mismatch");
        for (std::size_t t = 0; t < mean.size(); ++t) mean[t] += r.values[t];
    }
    for (auto& v : mean) v /= static_cast<double>(rates.size());
    return mean;
}

LossAndGradient surrogate_loss_and_grad(std::span<const RateTrace> recorded, std::span<const RateTrace> inputs,
                                        const ForceTrace& target, std::size_t m_out, double gain_alpha) {
    if (m_out == 0 || recorded.size() != m_out) throw ValidationError("surrogate: recorded traces must match m_out");
    const std::size_t n_t = target.size();
    if (n_t == 0) throw ValidationError("surrogate: empty target");
    auto check_grid = [&](const RateTrace& r) {
        if (r.size() != n_t || r.sample_rate != target.sample_rate) throw ValidationError("surrogate: grid mismatch");
    };
    for (const auto& r : recorded) check_grid(r);
    for (const auto& r : inputs) check_grid(r);

    const auto ybar = population_rate(recorded);
    LossAndGradient out;
    std::vector<double> err(n_t);
    double acc = 0.0;
    for (std::size_t t = 0; t < n_t; ++t) {
        err[t] = ybar[t] - target.samples[t];
        acc += err[t] * err[t];
    }
    out.mse = acc / static_cast<double>(n_t);
    if (!std::isfinite(out.mse)) throw RuntimeFailure("surrogate: non-finite loss");

    const double scale = 2.0 * gain_alpha / static_cast<double>(m_out) / static_cast<double>(n_t);
    out.gradient.assign(inputs.size() * m_out, 0.0);
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        double g = 0.0;
        for (std::size_t t = 0; t < n_t; ++t) g += err[t] * inputs[i].values[t];
        g *= scale;
        std::fill_n(out.gradient.begin() + static_cast<std::ptrdiff_t>(i * m_out), m_out, g);
    }
    return out;
}

std::vector<RateTrace> kernel_rates(std::span<const std::vector<double>> spikes, double duration) {
    std::vector<RateTrace> out(spikes.size());
    const auto n = static_cast<std::ptrdiff_t>(spikes.size());
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        out[static_cast<std::size_t>(i)] = exp_kernel_rate(spikes[static_cast<std::size_t>(i)], kRateTau, kReadoutRate, duration);
    }
    return out;
}

std::vector<RateTrace> kernel_rates(std::span<const MuSpikeTrain> trains, double duration) {
    std::vector<RateTrace> out(trains.size());
    const auto n = static_cast<std::ptrdiff_t>(trains.size());
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        out[static_cast<std::size_t>(i)] =
            exp_kernel_rate(trains[static_cast<std::size_t>(i)].spike_times, kRateTau, kReadoutRate, duration);
    }
    return out;
}

substrate::SimResult run_population(const substrate::Connectivity& w, std::span<const MuSpikeTrain> trains,
                                    double duration, const Chip& chip, std::uint64_t noise_seed) {
    substrate::Network net;
    net.cores.push_back(chip.core);
    net.add_input_projection(substrate::compile_connectivity(w), 0);
    const auto events = substrate::merge_event_streams(trains);
    substrate::SimOptions opts;
    opts.duration = duration;
    opts.dt = chip.dt;
    opts.noise_seed = noise_seed;
    return substrate::simulate(net, events, opts);
}

double calibrate_alpha(const Chip& chip) {
    constexpr double kProbeRate = 30.0;
    constexpr double kProbeDuration = 5.0;
    constexpr int kLow = 20, kHigh = 40;
    Chip quiet = chip;
    quiet.core.noise_current_sigma = 0.0;
    const auto trains = regular_probe_trains(kHigh, kProbeRate, kProbeDuration);
    auto mean_rate = [&](int n_syn) {
        substrate::Connectivity w(kHigh, static_cast<std::size_t>(quiet.core.n_neurons), 1, kHigh);
        for (int i = 0; i < n_syn; ++i) {
            for (std::size_t j = 0; j < w.n_outputs; ++j) w.at(static_cast<std::size_t>(i), j) = 1;
        }
        const auto res = run_population(w, trains, kProbeDuration, quiet, 0);
        double total = 0.0;
        for (const auto& s : res.spikes) total += static_cast<double>(s.size());
        return total / (kProbeDuration * static_cast<double>(res.spikes.size()));
    };
    const double slope = (mean_rate(kHigh) - mean_rate(kLow)) / ((kHigh - kLow) * kProbeRate);
    if (!(slope > 0.0)) throw RuntimeFailure("calibrate_alpha: substrate does not respond to added synapses");
    return slope;
}

TrainerState train_epoch(const TrainerState& state, const PopulationSpec& population, const EpochInputs& in,
                         const Chip& chip) {
    if (in.trains.size() != state.n_mu) throw ValidationError("train_epoch: input count does not match n_mu");
    if (static_cast<std::size_t>(population.m_out) != state.m_out || chip.core.n_neurons != population.m_out) {
        throw ValidationError("train_epoch: population size does not match state/chip");
    }
    if (in.target.sample_rate != kReadoutRate) throw ValidationError("train_epoch: target must be sampled at 100 Hz");

    const double duration = in.target.duration();
    const auto recorded_spikes =
        run_population(state.weights, in.trains, duration, chip,
                       rng::derive(chip.noise_seed, {static_cast<std::uint64_t>(state.epoch)}));
    const auto recorded = kernel_rates(recorded_spikes.spikes, duration);
    const auto inputs = kernel_rates(in.trains, duration);
    const auto lg = surrogate_loss_and_grad(recorded, inputs, in.target, state.m_out, in.alpha);

    TrainerState next = state;
    const double k = static_cast<double>(state.k);
    for (std::size_t e = 0; e < next.shadow.size(); ++e) {
        next.shadow[e] = std::clamp(next.shadow[e] - state.learning_rate * lg.gradient[e], -k, k);
    }
    auto eng = rng::make_engine(state.rng_seed, {static_cast<std::uint64_t>(state.epoch) + 1});
    round_into(next, next.weights, eng);
    next.loss_history.push_back({state.epoch, lg.mse});
    next.epoch = state.epoch + 1;
    return next;
}

std::vector<MuSpikeTrain> select_inputs(std::span<const MuSpikeTrain> trains, const PopulationSpec& spec) {
    std::vector<MuSpikeTrain> out;
    for (const auto& t : trains) {
        if (spec.accepts(t.grid)) out.push_back(t);
    }
    return out;
}

PopulationResult train_population(std::span<const MuSpikeTrain> inputs, const ForceTrace& target,
                                  const PopulationSpec& spec, const TrainConfig& cfg, const Chip& chip,
                                  const TrainerState* resume) {
    spec.validate();
    if (inputs.empty()) {
        throw ValidationError("train: no input MUs for the " + std::string(to_string(spec.direction)) + " population");
    }
    if (cfg.epochs < 0) throw ValidationError("train: epochs must be >= 0");

    PopulationResult result;
    result.spec = spec;
    for (const auto& t : inputs) result.mu_ids.push_back(t.mu_id);
    result.alpha = cfg.alpha > 0.0 ? cfg.alpha : calibrate_alpha(chip);

    const std::uint64_t pop_seed = rng::derive(cfg.seed, {static_cast<std::uint64_t>(spec.direction)});
    if (resume) {
        if (resume->n_mu != inputs.size() || resume->m_out != static_cast<std::size_t>(spec.m_out)) {
            throw ValidationError("train: checkpoint shape does not match the population");
        }
        result.state = *resume;
    } else {
        result.state = initial_state(inputs.size(), static_cast<std::size_t>(spec.m_out), cfg.k, cfg.fan_in_limit,
                                     cfg.learning_rate, pop_seed);
    }
    const EpochInputs in{inputs, target, result.alpha};
    if (!cfg.checkpoint_dir.empty()) std::filesystem::create_directories(cfg.checkpoint_dir);
    while (result.state.epoch < cfg.epochs) {
        result.state = train_epoch(result.state, spec, in, chip);
        if (!cfg.checkpoint_dir.empty()) {
            char name[64];
            std::snprintf(name, sizeof name, "%s_epoch%03d.ckpt", std::string(to_string(spec.direction)).c_str(),
                          result.state.epoch);
            write_checkpoint(cfg.checkpoint_dir / name, result.state);
        }
    }
    return result;
}

DecoderResult train_decoder(std::span<const MuSpikeTrain> trains, const ForceTrace& force,
                            const PopulationSpec& flexion, const PopulationSpec& extension, const TrainConfig& cfg,
                            const Chip& flexion_chip, const Chip& extension_chip) {
    if (flexion.direction != Direction::flexion || extension.direction != Direction::extension) {
        throw ValidationError("train_decoder: population directions swapped");
    }
    const ForceTrace readout_force =
        force.sample_rate == kReadoutRate && force.start_time == 0.0
            ? force
            : resample_linear(force, kReadoutRate, 0.0,
                              static_cast<std::size_t>(std::llround(force.duration() * kReadoutRate)));
    const auto [flex_target, ext_target] = rectified_targets(readout_force);
    const auto flex_inputs = select_inputs(trains, flexion);
    const auto ext_inputs = select_inputs(trains, extension);

    DecoderResult out;
    out.flexion = train_population(flex_inputs, flex_target, flexion, cfg, flexion_chip);
    out.extension = train_population(ext_inputs, ext_target, extension, cfg, extension_chip);
    return out;
}

void write_checkpoint(std::ostream& os, const TrainerState& s) {
    char buf[64];
    os << "mudecode-checkpoint 1\n";
    os << "n_mu " << s.n_mu << "\nm_out " << s.m_out << "\nk " << s.k << "\nfan_in_limit " << s.weights.fan_in_limit
       << "\nepoch " << s.epoch << '\n';
    std::snprintf(buf, sizeof buf, "%.17g", s.learning_rate);
    os << "learning_rate " << buf << "\nrng_seed " << s.rng_seed << "\nshadow\n";
    for (std::size_t i = 0; i < s.n_mu; ++i) {
        for (std::size_t j = 0; j < s.m_out; ++j) {
            std::snprintf(buf, sizeof buf, "%.17g", s.w(i, j));
            os << (j ? " " : "") << buf;
        }
        os << '\n';
    }
    os << "weights\n";
    for (std::size_t i = 0; i < s.n_mu; ++i) {
        for (std::size_t j = 0; j < s.m_out; ++j) os << (j ? " " : "") << s.weights.at(i, j);
        os << '\n';
    }
    os << "loss " << s.loss_history.size() << '\n';
    for (const auto& p : s.loss_history) {
        std::snprintf(buf, sizeof buf, "%.17g", p.mse);
        os << p.epoch << ' ' << buf << '\n';
    }
}

void write_checkpoint(const std::filesystem::path& path, const TrainerState& state) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw RuntimeFailure("cannot open " + path.string() + " for writing");
    write_checkpoint(os, state);
}

TrainerState read_checkpoint(std::istream& is) {
    auto expect = [&](std::string_view key) {
        std::string word;
        if (!(is >> word) || word != key) throw ValidationError("checkpoint: expected '" + std::string(key) + "'");
    };
    std::string magic;
    int version = 0;
    if (!(is >> magic >> version) || magic != "mudecode-checkpoint") throw ValidationError("checkpoint: bad magic");
    if (version != 1) throw ValidationError("checkpoint: unsupported version " + std::to_string(version));

    TrainerState s;
    int fan_in = 0;
    expect("n_mu");
    is >> s.n_mu;
    expect("m_out");
    is >> s.m_out;
    expect("k");
    is >> s.k;
    expect("fan_in_limit");
    is >> fan_in;
    expect("epoch");
    is >> s.epoch;
    expect("learning_rate");
    is >> s.learning_rate;
    expect("rng_seed");
    is >> s.rng_seed;
    if (!is) throw ValidationError("checkpoint: malformed header");

    expect("shadow");
    s.shadow.resize(s.n_mu * s.m_out);
    for (auto& v : s.shadow) {
        std::string tok;
        is >> tok;
        v = std::strtod(tok.c_str(), nullptr);
    }
    expect("weights");
    s.weights = substrate::Connectivity(s.n_mu, s.m_out, s.k, fan_in);
    for (auto& v : s.weights.weights) is >> v;
    expect("loss");
    std::size_t n_loss = 0;
    is >> n_loss;
    for (std::size_t i = 0; i < n_loss; ++i) {
        LossPoint p;
        std::string tok;
        is >> p.epoch >> tok;
        p.mse = std::strtod(tok.c_str(), nullptr);
        s.loss_history.push_back(p);
    }
    if (!is) throw ValidationError("checkpoint: truncated file");
    substrate::check_connectivity(s.weights);
    return s;
}

TrainerState read_checkpoint(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw ValidationError("cannot open " + path.string());
    return read_checkpoint(is);
}

}  // namespace mudecode::trainer
