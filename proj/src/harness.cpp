#include "mudecode/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <numeric>
#include <set>
#include <sstream>
#include <tuple>

#include "mudecode/csv_io.hpp"
#include "mudecode/errors.hpp"
#include "mudecode/rng.hpp"

namespace mudecode::harness {

namespace {

constexpr std::uint64_t kSynthKey = 0x5917;
constexpr std::uint64_t kTrainKey = 0x7241;
constexpr std::uint64_t kChipKey = 0xC419;
constexpr std::uint64_t kInferKey = 0x1F3E;

std::uint64_t finger_key(Finger f) { return static_cast<std::uint64_t>(f) + 1; }

std::ofstream open_out(const std::filesystem::path& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw RuntimeFailure("cannot open " + path.string() + " for writing");
    return os;
}

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

std::vector<std::string> split(const std::string& line, char sep) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream ss(line);
    while (std::getline(ss, cell, sep)) out.push_back(cell);
    if (!line.empty() && line.back() == sep) out.emplace_back();
    return out;
}

double parse_double(const std::string& s, const std::string& where) {
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (s.empty() || end != s.c_str() + s.size()) throw ValidationError(where + ": bad number '" + s + "'");
    return v;
}

void strip_cr(std::string& line) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
}

double mean_of(std::span<const double> v) {
    if (v.empty()) return 0.0;
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

substrate::CoreConfig population_core(const ExperimentConfig& cfg, const trainer::PopulationSpec& spec) {
    substrate::CoreConfig core = cfg.substrate.core(spec.core_id);
    core.n_neurons = spec.m_out;
    return core;
}

std::vector<Finger> parse_fingers(const std::string& list) {
    std::vector<Finger> out;
    for (auto& name : split(list, ',')) {
        const auto b = name.find_first_not_of(" \t");
        const auto e = name.find_last_not_of(" \t");
        if (b == std::string::npos) continue;
        out.push_back(parse_finger(name.substr(b, e - b + 1)));
    }
    return out;
}

void read_population(const ConfigMap& cfg, const std::string& prefix, trainer::PopulationSpec& spec,
                     const substrate::SubstrateConfig& sc) {
    spec.core_id = static_cast<int>(cfg.get_int(prefix + ".core", spec.core_id));
    const bool core_known = std::any_of(sc.cores.begin(), sc.cores.end(),
                                        [&](const auto& c) { return c.core_id == spec.core_id; });
    if (!core_known) throw ValidationError(prefix + ".core: no such core " + std::to_string(spec.core_id));
    spec.m_out = static_cast<int>(cfg.get_int(prefix + ".m_out", sc.core(spec.core_id).n_neurons));
    spec.input_grids = cfg.get_int_list(prefix + ".grids", spec.input_grids);
}

}  // namespace

const TrialData& FingerData::trial(int id) const {
    for (const auto& t : trials)
        if (t.trial == id) return t;
    throw ValidationError("finger " + std::string(to_string(finger)) + ": no trial " + std::to_string(id));
}

void ExperimentConfig::validate() const {
    if (fingers.empty()) throw ValidationError("fingers: at least one finger is required");
    if (train_trial < 1) throw ValidationError("train_trial must be >= 1");
    if (test_trials.empty()) throw ValidationError("test_trials must not be empty");
    for (int t : test_trials) {
        if (t < 1) throw ValidationError("test_trials must be >= 1");
        if (t == train_trial) throw ValidationError("test trial " + std::to_string(t) + " is the training trial");
    }
    if (n_repetitions < 1) throw ValidationError("n_repetitions must be >= 1");
    if (inhibition_count < 0) throw ValidationError("inhibition_count must be >= 0");
    if (!(window_len > 0.0) || !(hop > 0.0) || hop > window_len)
        throw ValidationError("baseline windows need 0 < hop <= window_len");
    flexion.validate();
    extension.validate();
    if (flexion.core_id == extension.core_id)
        throw ValidationError("flexion and extension populations need distinct cores");
    if (train.epochs < 0) throw ValidationError("train.epochs must be >= 0");
    if (!(train.learning_rate >= 0.0)) throw ValidationError("train.learning_rate must be >= 0");
    if (train.k < 1) throw ValidationError("train.k must be >= 1");
    if (train.fan_in_limit - inhibition_count * extension.m_out < 1)
        throw ValidationError("train.fan_in_limit leaves no room for feedforward synapses after inhibition");
    for (const auto& spec : {flexion, extension}) {
        auto core = population_core(*this, spec);
        core.validate();
    }
}

ExperimentConfig ExperimentConfig::from(const ConfigMap& cfg) {
    ExperimentConfig ec;
    ConfigMap merged;
    if (auto path = cfg.find("substrate_config")) merged = ConfigMap::load(*path);
    for (const auto& [k, v] : cfg.entries()) merged.set(k, v);
    ec.substrate = substrate::load_substrate_config(merged);

    if (auto list = cfg.find("fingers")) ec.fingers = parse_fingers(*list);
    else if (auto one = cfg.find("finger")) ec.fingers = parse_fingers(*one);
    ec.train_trial = static_cast<int>(cfg.get_int("train_trial", ec.train_trial));
    ec.test_trials = cfg.get_int_list("test_trials", ec.test_trials);
    ec.n_repetitions = static_cast<int>(cfg.get_int("n_repetitions", ec.n_repetitions));
    ec.inhibition_count = static_cast<int>(cfg.get_int("inhibition_count", ec.inhibition_count));
    ec.seed = cfg.get_u64("seed", ec.seed);
    ec.output_dir = cfg.get_string("output_dir", ec.output_dir.string());
    ec.data_dir = cfg.get_string("data_dir", "");
    ec.drop_invalid = cfg.get_bool("drop_invalid", ec.drop_invalid);
    ec.window_len = cfg.get_double("baseline.window_len", ec.window_len);
    ec.hop = cfg.get_double("baseline.hop", ec.hop);

    read_population(cfg, "population.flexion", ec.flexion, ec.substrate);
    read_population(cfg, "population.extension", ec.extension, ec.substrate);

    ec.train.epochs = static_cast<int>(cfg.get_int("train.epochs", ec.train.epochs));
    ec.train.learning_rate = cfg.get_double("train.learning_rate", ec.train.learning_rate);
    ec.train.k = static_cast<int>(cfg.get_int("train.k", ec.train.k));
    ec.train.fan_in_limit = static_cast<int>(cfg.get_int("train.fan_in_limit", ec.train.fan_in_limit));
    ec.train.alpha = cfg.get_double("train.alpha", ec.train.alpha);
    ec.train_seed_set = cfg.has("train.seed");
    ec.train.seed = cfg.get_u64("train.seed", ec.train.seed);

    auto& s = ec.synth;
    s.n_flexion = static_cast<int>(cfg.get_int("synth.n_flexion", s.n_flexion));
    s.n_extension = static_cast<int>(cfg.get_int("synth.n_extension", s.n_extension));
    s.trial.duration = cfg.get_double("synth.duration", s.trial.duration);
    s.trial.peak = cfg.get_double("synth.peak", s.trial.peak);
    s.trial.sample_rate = cfg.get_double("synth.sample_rate", s.trial.sample_rate);
    s.trial.n_ramps = static_cast<int>(cfg.get_int("synth.n_ramps", s.trial.n_ramps));
    s.population.jitter_cv = cfg.get_double("synth.jitter_cv", s.population.jitter_cv);
    s.population.reference = s.trial;
    ec.synth_seed_set = cfg.has("synth.seed");
    s.seed = cfg.get_u64("synth.seed", s.seed);
    return ec;
}

FingerData synthetic_finger(const ExperimentConfig& cfg, Finger finger) {
    synth::TaskSpec spec = cfg.synth;
    spec.finger = finger;
    spec.seed = cfg.synth_seed_set ? rng::derive(cfg.synth.seed, {finger_key(finger)})
                                   : rng::derive(cfg.seed, {kSynthKey, finger_key(finger)});
    int n_trials = cfg.train_trial;
    for (int t : cfg.test_trials) n_trials = std::max(n_trials, t);
    spec.n_trials = n_trials;
    spec.trial.seed = spec.seed;
    auto task = synth::make_task(spec);

    FingerData out;
    out.finger = finger;
    for (int t = 1; t <= task.n_trials(); ++t) {
        out.trials.push_back({t, std::move(task.force[static_cast<std::size_t>(t - 1)]),
                              std::move(task.trains[static_cast<std::size_t>(t - 1)])});
    }
    return out;
}

FingerData load_finger(const std::filesystem::path& dir, Finger finger, std::span<const int> trials) {
    const auto all = io::read_spikes(dir / "spikes.csv");
    FingerData out;
    out.finger = finger;
    for (int t : trials) {
        TrialData td;
        td.trial = t;
        const auto force_path = dir / ("force_" + std::string(to_string(finger)) + "_trial" + std::to_string(t) + ".csv");
        if (!std::filesystem::exists(force_path)) throw ValidationError("missing force file " + force_path.string());
        td.force = io::read_force(force_path);
        for (const auto& train : all)
            if (train.finger == finger && train.trial == t) td.trains.push_back(train);
        if (td.trains.empty())
            throw ValidationError("no spike trains for " + std::string(to_string(finger)) + " trial " +
                                  std::to_string(t));
        out.trials.push_back(std::move(td));
    }
    return out;
}

void save_finger(const std::filesystem::path& dir, const FingerData& data, bool append_spikes) {
    std::filesystem::create_directories(dir);
    std::vector<MuSpikeTrain> all;
    if (append_spikes && std::filesystem::exists(dir / "spikes.csv")) {
        for (auto& t : io::read_spikes(dir / "spikes.csv"))
            if (t.finger != data.finger) all.push_back(std::move(t));
    }
    for (const auto& trial : data.trials) {
        all.insert(all.end(), trial.trains.begin(), trial.trains.end());
        io::write_force(dir / ("force_" + std::string(to_string(data.finger)) + "_trial" +
                               std::to_string(trial.trial) + ".csv"),
                        trial.force);
    }
    io::write_spikes(dir / "spikes.csv", all);
}

std::vector<std::string> screen_trains(FingerData& data, bool drop_invalid) {
    std::vector<std::string> issues;
    std::set<int> bad;
    for (const auto& trial : data.trials) {
        for (const auto& train : trial.trains) {
            const auto r = validate_train(train, trial.force.duration());
            if (r.accepted) continue;
            bad.insert(train.mu_id);
            char buf[160];
            std::snprintf(buf, sizeof buf, "%s trial %d mu %d rejected: %s (mean rate %.3g Hz)",
                          std::string(to_string(data.finger)).c_str(), trial.trial, train.mu_id,
                          std::string(to_string(r.reason)).c_str(), r.mean_rate);
            issues.emplace_back(buf);
        }
    }
    if (bad.empty()) return {};
    if (!drop_invalid) {
        std::string msg = "invalid spike trains (use drop_invalid to exclude them):";
        for (const auto& s : issues) msg += "\n  " + s;
        throw ValidationError(msg);
    }
    for (auto& trial : data.trials) {
        std::erase_if(trial.trains, [&](const MuSpikeTrain& t) { return bad.contains(t.mu_id); });
    }
    for (auto& s : issues) s += "; dropped from every trial";
    return issues;
}

InferenceNetwork build_inference_topology(const substrate::Connectivity& w_flex, const substrate::Connectivity& w_ext,
                                          int inhibition_count, const substrate::CoreConfig& flex_core,
                                          const substrate::CoreConfig& ext_core, int fan_in_limit) {
    if (inhibition_count < 0) throw ValidationError("inhibition_count must be >= 0");
    if (static_cast<int>(w_flex.n_outputs) != flex_core.n_neurons ||
        static_cast<int>(w_ext.n_outputs) != ext_core.n_neurons)
        throw ValidationError("connectivity does not match the population sizes");
    substrate::check_connectivity(w_flex);
    substrate::check_connectivity(w_ext);

    InferenceNetwork topo;
    topo.n_flex_inputs = w_flex.n_inputs;
    topo.n_ext_inputs = w_ext.n_inputs;
    topo.n_flex = flex_core.n_neurons;
    topo.n_ext = ext_core.n_neurons;
    topo.net.cores = {flex_core, ext_core};
    topo.net.add_input_projection(substrate::compile_connectivity(w_flex), 0, 0);
    topo.net.add_input_projection(substrate::compile_connectivity(w_ext), 1, static_cast<int>(w_flex.n_inputs));
    if (inhibition_count > 0) topo.net.add_all_to_all(1, 0, substrate::SynapseType::gaba_b, inhibition_count);

    for (int j = 0; j < topo.n_flex; ++j) {
        int total = w_flex.fan_in(static_cast<std::size_t>(j)) + inhibition_count * topo.n_ext;
        if (total > fan_in_limit)
            throw substrate::ConnectivityError(substrate::ConnectivityFault::fan_in_exceeded, j,
                                               "flexion neuron " + std::to_string(j) + " fan-in " +
                                                   std::to_string(total) + " exceeds " +
                                                   std::to_string(fan_in_limit));
    }
    topo.net.validate();
    return topo;
}

InferenceOutput run_inference(const InferenceNetwork& topo, std::span<const MuSpikeTrain> flex_inputs,
                              std::span<const MuSpikeTrain> ext_inputs, double duration, double dt,
                              std::uint64_t noise_seed) {
    if (flex_inputs.size() != topo.n_flex_inputs || ext_inputs.size() != topo.n_ext_inputs)
        throw ValidationError("input trains do not match the trained connectivity");
    std::vector<MuSpikeTrain> inputs(flex_inputs.begin(), flex_inputs.end());
    inputs.insert(inputs.end(), ext_inputs.begin(), ext_inputs.end());
    const auto events = substrate::merge_event_streams(inputs);

    substrate::SimOptions opts;
    opts.duration = duration;
    opts.dt = dt;
    opts.noise_seed = noise_seed;

    InferenceOutput out;
    out.spikes = substrate::simulate(topo.net, events, opts);
    const auto rates = trainer::kernel_rates(std::span<const std::vector<double>>(out.spikes.spikes), duration);
    const auto flex = std::span<const RateTrace>(rates).subspan(0, static_cast<std::size_t>(topo.n_flex));
    const auto ext = std::span<const RateTrace>(rates).subspan(static_cast<std::size_t>(topo.n_flex));
    out.rate_flex = trainer::population_rate(flex);
    out.rate_ext = trainer::population_rate(ext);
    out.decoded.sample_rate = trainer::kReadoutRate;
    out.decoded.samples.resize(out.rate_flex.size());
    for (std::size_t i = 0; i < out.rate_flex.size(); ++i) out.decoded.samples[i] = out.rate_flex[i] - out.rate_ext[i];
    return out;
}

std::vector<MuSpikeTrain> pick_trains(std::span<const MuSpikeTrain> trains, std::span<const int> mu_ids) {
    std::vector<MuSpikeTrain> out;
    out.reserve(mu_ids.size());
    for (int id : mu_ids) {
        auto it = std::find_if(trains.begin(), trains.end(), [&](const MuSpikeTrain& t) { return t.mu_id == id; });
        if (it == trains.end()) throw ValidationError("no spike train for mu " + std::to_string(id));
        out.push_back(*it);
    }
    return out;
}

Summary summarize(std::span<const double> values) {
    Summary s;
    s.n = static_cast<int>(values.size());
    if (values.empty()) return s;
    s.mean = mean_of(values);
    if (s.n > 1) {
        double ss = 0.0;
        for (double v : values) ss += (v - s.mean) * (v - s.mean);
        s.std = std::sqrt(ss / static_cast<double>(s.n - 1));
    }
    return s;
}

const TableRow* ResultTable::find(Finger f, std::string_view decoder, int trial, std::string_view aggregation) const {
    for (const auto& r : rows)
        if (r.finger == f && r.decoder == decoder && r.trial == trial && r.aggregation == aggregation) return &r;
    return nullptr;
}

ResultTable build_table(std::span<const RunRecord> runs, std::span<const Finger> fingers,
                        std::span<const int> test_trials) {
    ResultTable table;
    for (Finger f : fingers) {
        for (std::string decoder : {"neuromorphic", "baseline"}) {
            std::vector<double> pooled, trial_means, pooled_flex, pooled_ext;
            for (int t : test_trials) {
                std::vector<double> vals, rf, re;
                for (const auto& r : runs) {
                    if (r.finger != f || r.decoder != decoder || r.trial != t || !r.ok) continue;
                    vals.push_back(r.rmse);
                    rf.push_back(r.mean_rate_flex);
                    re.push_back(r.mean_rate_ext);
                }
                TableRow row{f, decoder, t, "repetitions", summarize(vals), mean_of(rf), mean_of(re)};
                table.rows.push_back(row);
                pooled.insert(pooled.end(), vals.begin(), vals.end());
                pooled_flex.insert(pooled_flex.end(), rf.begin(), rf.end());
                pooled_ext.insert(pooled_ext.end(), re.begin(), re.end());
                if (!vals.empty()) trial_means.push_back(row.rmse.mean);
            }
            table.rows.push_back({f, decoder, 0, "pooled", summarize(pooled), mean_of(pooled_flex), mean_of(pooled_ext)});
            table.rows.push_back(
                {f, decoder, 0, "trial_means", summarize(trial_means), mean_of(pooled_flex), mean_of(pooled_ext)});
        }
    }
    return table;
}

FingerData acquire_finger(const ExperimentConfig& cfg, Finger finger, const std::map<Finger, FingerData>* data) {
    std::vector<int> needed{cfg.train_trial};
    needed.insert(needed.end(), cfg.test_trials.begin(), cfg.test_trials.end());
    FingerData fd;
    if (data && data->contains(finger)) fd = data->at(finger);
    else if (!cfg.data_dir.empty()) fd = load_finger(cfg.data_dir, finger, needed);
    else fd = synthetic_finger(cfg, finger);
    for (const auto& w : screen_trains(fd, cfg.drop_invalid)) std::cerr << "warning: " << w << '\n';
    return fd;
}

std::pair<trainer::Chip, trainer::Chip> training_chips(const ExperimentConfig& cfg, Finger finger) {
    const std::uint64_t fk = finger_key(finger);
    return {trainer::Chip{population_core(cfg, cfg.flexion), cfg.substrate.dt, rng::derive(cfg.seed, {kChipKey, fk, 0})},
            trainer::Chip{population_core(cfg, cfg.extension), cfg.substrate.dt,
                          rng::derive(cfg.seed, {kChipKey, fk, 1})}};
}

trainer::DecoderResult train_models(const ExperimentConfig& cfg, const FingerData& fd,
                                    const std::filesystem::path& resume_dir,
                                    const std::filesystem::path& checkpoint_dir) {
    const TrialData& train = fd.trial(cfg.train_trial);
    const std::uint64_t fk = finger_key(fd.finger);
    trainer::TrainConfig tc = cfg.train;
    tc.seed = cfg.train_seed_set ? rng::derive(cfg.train.seed, {fk}) : rng::derive(cfg.seed, {kTrainKey, fk});
    trainer::TrainConfig flex_tc = tc;
    flex_tc.fan_in_limit = tc.fan_in_limit - cfg.inhibition_count * cfg.extension.m_out;
    const auto [flex_chip, ext_chip] = training_chips(cfg, fd.finger);

    const ForceTrace readout = resample_linear(
        train.force, trainer::kReadoutRate, 0.0,
        static_cast<std::size_t>(std::llround(train.force.duration() * trainer::kReadoutRate)));
    const auto [flex_target, ext_target] = rectified_targets(readout);

    auto flex_inputs = trainer::select_inputs(train.trains, cfg.flexion);
    auto ext_inputs = trainer::select_inputs(train.trains, cfg.extension);
    if (flex_inputs.empty() || ext_inputs.empty())
        throw ValidationError(std::string(to_string(fd.finger)) + ": a population has no input MUs");
    if (!checkpoint_dir.empty()) {
        tc.checkpoint_dir = checkpoint_dir / std::string(to_string(fd.finger));
        flex_tc.checkpoint_dir = tc.checkpoint_dir;
    }
    std::optional<trainer::TrainerState> flex_resume, ext_resume;
    if (!resume_dir.empty()) {
        const std::string f(to_string(fd.finger));
        flex_resume = trainer::read_checkpoint(resume_dir / (f + "_flexion.ckpt"));
        ext_resume = trainer::read_checkpoint(resume_dir / (f + "_extension.ckpt"));
    }
    trainer::DecoderResult out;
    out.flexion = trainer::train_population(flex_inputs, flex_target, cfg.flexion, flex_tc, flex_chip,
                                            flex_resume ? &*flex_resume : nullptr);
    out.extension = trainer::train_population(ext_inputs, ext_target, cfg.extension, tc, ext_chip,
                                              ext_resume ? &*ext_resume : nullptr);
    return out;
}

baseline::LinearModel fit_baseline(const ExperimentConfig& cfg, const FingerData& fd) {
    const TrialData& train = fd.trial(cfg.train_trial);
    std::vector<MuSpikeTrain> trains = train.trains;
    std::sort(trains.begin(), trains.end(),
              [](const MuSpikeTrain& a, const MuSpikeTrain& b) { return a.mu_id < b.mu_id; });
    const auto counts = window_counts(trains, cfg.window_len, cfg.hop, train.force.duration());
    auto model = baseline::fit_ols(counts, baseline::window_targets(train.force, counts));
    for (const auto& t : trains) model.mu_ids.push_back(t.mu_id);
    if (model.rank_deficient)
        std::cerr << "warning: " << to_string(fd.finger) << " baseline design is rank deficient\n";
    return model;
}

ForceTrace baseline_predict(const baseline::LinearModel& model, const TrialData& trial) {
    const auto trains = pick_trains(trial.trains, model.mu_ids);
    return baseline::predict(model, window_counts(trains, model.window_len, model.hop, trial.force.duration()));
}

std::uint64_t inference_seed(const ExperimentConfig& cfg, Finger finger, int trial, int repetition) {
    return rng::derive(cfg.seed, {kInferKey, finger_key(finger), static_cast<std::uint64_t>(trial),
                                  static_cast<std::uint64_t>(repetition)});
}

ExperimentResult run_experiment(const ExperimentConfig& cfg, const std::map<Finger, FingerData>* data) {
    cfg.validate();
    ExperimentResult result;

    for (Finger finger : cfg.fingers) {
        const FingerData fd = acquire_finger(cfg, finger, data);
        FingerModels models;
        models.finger = finger;
        models.decoder = train_models(cfg, fd);
        models.baseline = fit_baseline(cfg, fd);
        models.baseline_mu_ids = models.baseline.mu_ids;
        const auto [flex_chip, ext_chip] = training_chips(cfg, finger);

        const auto topo = build_inference_topology(models.decoder.flexion.state.weights,
                                                   models.decoder.extension.state.weights, cfg.inhibition_count,
                                                   flex_chip.core, ext_chip.core, cfg.train.fan_in_limit);

        for (int t : cfg.test_trials) {
            const TrialData& test = fd.trial(t);
            const double duration = test.force.duration();
            const auto n_readout = static_cast<std::size_t>(std::llround(duration * trainer::kReadoutRate));
            const ForceTrace truth = resample_linear(test.force, trainer::kReadoutRate, 0.0, n_readout);

            // Baseline: deterministic, one run per trial.
            RunRecord base;
            base.finger = finger;
            base.decoder = "baseline";
            base.trial = t;
            ForceTrace base_pred;
            try {
                base_pred = baseline_predict(models.baseline, test);
                const ForceTrace base_truth =
                    resample_linear(test.force, base_pred.sample_rate, base_pred.start_time, base_pred.size());
                base.rmse = rmse(base_pred, base_truth);
                base.ok = true;
            } catch (const std::exception& e) {
                base.error = e.what();
                std::cerr << "warning: baseline " << to_string(finger) << " trial " << t << " failed: " << e.what()
                          << '\n';
            }
            result.runs.push_back(base);

            const auto test_flex = pick_trains(test.trains, models.decoder.flexion.mu_ids);
            const auto test_ext = pick_trains(test.trains, models.decoder.extension.mu_ids);
            for (int rep = 0; rep < cfg.n_repetitions; ++rep) {
                RunRecord run;
                run.finger = finger;
                run.decoder = "neuromorphic";
                run.trial = t;
                run.repetition = rep;
                try {
                    const std::uint64_t noise = inference_seed(cfg, finger, t, rep);
                    auto out = run_inference(topo, test_flex, test_ext, duration, cfg.substrate.dt, noise);
                    run.rmse = rmse(out.decoded, truth);
                    run.mean_rate_flex = mean_of(out.rate_flex);
                    run.mean_rate_ext = mean_of(out.rate_ext);
                    run.ok = true;
                    TraceBundle tb{finger, t, rep, truth, std::move(out.decoded), base_pred,
                                   std::move(out.rate_flex), std::move(out.rate_ext)};
                    result.traces.push_back(std::move(tb));
                } catch (const std::exception& e) {
                    run.error = e.what();
                    std::cerr << "warning: " << to_string(finger) << " trial " << t << " repetition " << rep
                              << " failed and is excluded: " << e.what() << '\n';
                }
                result.runs.push_back(run);
            }
        }
        result.models.push_back(std::move(models));
    }
    std::sort(result.runs.begin(), result.runs.end(), [](const RunRecord& a, const RunRecord& b) {
        return std::tie(a.finger, a.decoder, a.trial, a.repetition) < std::tie(b.finger, b.decoder, b.trial, b.repetition);
    });
    std::sort(result.traces.begin(), result.traces.end(), [](const TraceBundle& a, const TraceBundle& b) {
        return std::tie(a.finger, a.trial, a.repetition) < std::tie(b.finger, b.trial, b.repetition);
    });
    result.table = build_table(result.runs, cfg.fingers, cfg.test_trials);
    return result;
}

void write_table(std::ostream& os, const ResultTable& table) {
    os << "finger,decoder,trial,aggregation,n,mean_rmse,std_rmse,mean_rate_flex,mean_rate_ext\n";
    for (const auto& r : table.rows) {
        os << to_string(r.finger) << ',' << r.decoder << ',' << (r.trial ? std::to_string(r.trial) : "all") << ','
           << r.aggregation << ',' << r.rmse.n << ',' << fmt(r.rmse.mean) << ',' << fmt(r.rmse.std) << ','
           << fmt(r.mean_rate_flex) << ',' << fmt(r.mean_rate_ext) << '\n';
    }
}

void write_runs(std::ostream& os, std::span<const RunRecord> runs) {
    os << "finger,decoder,trial,repetition,status,rmse,mean_rate_flex,mean_rate_ext,error\n";
    for (const auto& r : runs) {
        std::string err = r.error;
        std::replace(err.begin(), err.end(), ',', ';');
        std::replace(err.begin(), err.end(), '\n', ' ');
        os << to_string(r.finger) << ',' << r.decoder << ',' << r.trial << ',' << r.repetition << ','
           << (r.ok ? "ok" : "failed") << ',' << (r.ok ? fmt(r.rmse) : "") << ',' << fmt(r.mean_rate_flex) << ','
           << fmt(r.mean_rate_ext) << ',' << err << '\n';
    }
}

void write_weights(std::ostream& os, const substrate::Connectivity& w, std::span<const int> mu_ids) {
    if (mu_ids.size() != w.n_inputs) throw ValidationError("weights: one mu id per input row is required");
    os << "mu_id";
    for (std::size_t j = 0; j < w.n_outputs; ++j) os << ",n" << j;
    os << '\n';
    for (std::size_t i = 0; i < w.n_inputs; ++i) {
        os << mu_ids[i];
        for (std::size_t j = 0; j < w.n_outputs; ++j) os << ',' << w.at(i, j);
        os << '\n';
    }
}

std::pair<substrate::Connectivity, std::vector<int>> read_weights(const std::filesystem::path& path, int k,
                                                                  int fan_in_limit) {
    std::ifstream is(path);
    if (!is) throw ValidationError("cannot open " + path.string());
    std::string line;
    if (!std::getline(is, line)) throw ValidationError(path.string() + ": empty file");
    strip_cr(line);
    const auto header = split(line, ',');
    if (header.size() < 2 || header[0] != "mu_id") throw ValidationError(path.string() + ": bad header");
    const std::size_t m = header.size() - 1;
    std::vector<int> ids;
    std::vector<int> values;
    while (std::getline(is, line)) {
        strip_cr(line);
        if (line.empty()) continue;
        const auto cells = split(line, ',');
        if (cells.size() != m + 1) throw ValidationError(path.string() + ": ragged row");
        ids.push_back(static_cast<int>(parse_double(cells[0], path.string())));
        for (std::size_t j = 1; j <= m; ++j) {
            const double v = parse_double(cells[j], path.string());
            if (v != std::round(v)) throw ValidationError(path.string() + ": non-integer weight");
            values.push_back(static_cast<int>(v));
        }
    }
    substrate::Connectivity w(ids.size(), m, k, fan_in_limit);
    w.weights = std::move(values);
    substrate::check_connectivity(w);
    return {std::move(w), std::move(ids)};
}

void write_trace(std::ostream& os, const TraceBundle& t) {
    os << "time_s,truth,neuromorphic_pred,rate_flex,rate_ext\n";
    for (std::size_t i = 0; i < t.truth.size(); ++i) {
        os << fmt(t.truth.time_at(i)) << ',' << fmt(t.truth.samples[i]) << ','
           << fmt(i < t.neuromorphic.size() ? t.neuromorphic.samples[i] : 0.0) << ','
           << fmt(i < t.rate_flex.size() ? t.rate_flex[i] : 0.0) << ','
           << fmt(i < t.rate_ext.size() ? t.rate_ext[i] : 0.0) << '\n';
    }
}

TraceBundle read_trace(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw ValidationError("cannot open " + path.string());
    TraceBundle t;
    // <finger>_trial<T>_rep<R>.csv
    const std::string stem = path.stem().string();
    const auto p1 = stem.find("_trial");
    const auto p2 = stem.find("_rep");
    if (p1 == std::string::npos || p2 == std::string::npos || p2 < p1)
        throw ValidationError(path.string() + ": unexpected trace file name");
    t.finger = parse_finger(stem.substr(0, p1));
    t.trial = std::stoi(stem.substr(p1 + 6, p2 - p1 - 6));
    t.repetition = std::stoi(stem.substr(p2 + 4));

    std::string line;
    std::getline(is, line);
    std::vector<double> times;
    while (std::getline(is, line)) {
        strip_cr(line);
        if (line.empty()) continue;
        const auto c = split(line, ',');
        if (c.size() != 5) throw ValidationError(path.string() + ": expected 5 columns");
        times.push_back(parse_double(c[0], path.string()));
        t.truth.samples.push_back(parse_double(c[1], path.string()));
        t.neuromorphic.samples.push_back(parse_double(c[2], path.string()));
        t.rate_flex.push_back(parse_double(c[3], path.string()));
        t.rate_ext.push_back(parse_double(c[4], path.string()));
    }
    if (times.size() < 2) throw ValidationError(path.string() + ": too few samples");
    const double rate = std::round(static_cast<double>(times.size() - 1) / (times.back() - times.front()) * 1e6) / 1e6;
    for (auto* f : {&t.truth, &t.neuromorphic}) {
        f->sample_rate = rate;
        f->start_time = times.front();
    }
    return t;
}

void write_outputs(const std::filesystem::path& dir, const ExperimentResult& result) {
    std::filesystem::create_directories(dir / "runs");
    {
        auto os = open_out(dir / "result_table.csv");
        write_table(os, result.table);
    }
    {
        auto os = open_out(dir / "runs.csv");
        write_runs(os, result.runs);
    }
    std::set<std::pair<Finger, int>> baseline_written;
    for (const auto& t : result.traces) {
        const std::string stem = std::string(to_string(t.finger)) + "_trial" + std::to_string(t.trial);
        auto os = open_out(dir / "runs" / (stem + "_rep" + std::to_string(t.repetition) + ".csv"));
        write_trace(os, t);
        if (baseline_written.insert({t.finger, t.trial}).second && t.baseline.size() > 0) {
            auto bs = open_out(dir / "runs" / (stem + "_baseline.csv"));
            io::write_force(bs, t.baseline);
        }
    }
    for (const auto& m : result.models) {
        const std::string f(to_string(m.finger));
        for (const auto* pop : {&m.decoder.flexion, &m.decoder.extension}) {
            const std::string d(trainer::to_string(pop->spec.direction));
            trainer::write_checkpoint(dir / (f + "_" + d + ".ckpt"), pop->state);
            auto ws = open_out(dir / (f + "_weights_" + d + ".csv"));
            write_weights(ws, pop->state.weights, pop->mu_ids);
            auto ls = open_out(dir / (f + "_loss_" + d + ".csv"));
            ls << "epoch,mse\n";
            for (const auto& p : pop->state.loss_history) ls << p.epoch << ',' << fmt(p.mse) << '\n';
        }
        baseline::write_model(dir / (f + "_baseline_model.csv"), m.baseline);
    }
}

std::vector<std::filesystem::path> export_plot_data(std::span<const TraceBundle> traces,
                                                    const std::filesystem::path& dir) {
    std::map<Finger, const TraceBundle*> first;
    for (const auto& t : traces) {
        auto& slot = first[t.finger];
        if (!slot || std::pair(t.trial, t.repetition) < std::pair(slot->trial, slot->repetition)) slot = &t;
    }
    std::filesystem::create_directories(dir);
    std::vector<std::filesystem::path> written;
    for (const auto& [finger, t] : first) {
        ForceTrace base;
        if (t->baseline.size() > 0) base = resample_linear(t->baseline, t->truth.sample_rate, t->truth.start_time, t->truth.size());
        const auto path = dir / ("plot_" + std::string(to_string(finger)) + ".csv");
        auto os = open_out(path);
        os << kPlotHeader << '\n';
        for (std::size_t i = 0; i < t->truth.size(); ++i) {
            const double rf = i < t->rate_flex.size() ? t->rate_flex[i] : 0.0;
            const double re = i < t->rate_ext.size() ? t->rate_ext[i] : 0.0;
            os << fmt(t->truth.time_at(i)) << ',' << fmt(t->truth.samples[i]) << ','
               << fmt(i < t->neuromorphic.size() ? t->neuromorphic.samples[i] : 0.0) << ','
               << (base.size() ? fmt(base.samples[i]) : std::string("nan")) << ',' << fmt(rf) << ',' << fmt(re) << ','
               << fmt(-re) << '\n';
        }
        written.push_back(path);
    }
    return written;
}

}  // namespace mudecode::harness
