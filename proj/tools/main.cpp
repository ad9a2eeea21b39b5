#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mudecode/baseline.hpp"
#include "mudecode/config.hpp"
#include "mudecode/csv_io.hpp"
#include "mudecode/errors.hpp"
#include "mudecode/harness.hpp"
#include "mudecode/trainer.hpp"

namespace fs = std::filesystem;
using namespace mudecode;

namespace {

struct Common {
    std::string config;
    std::vector<std::string> sets;
    std::optional<std::uint64_t> seed;
    bool drop_invalid = false;
    std::string data;
    std::string out;
};

void add_common(CLI::App* cmd, Common& c, bool with_data = true) {
    cmd->add_option("-c,--config", c.config, "experiment config file (key = value)");
    cmd->add_option("-s,--set", c.sets, "override a config key, key=value")->take_all();
    cmd->add_option("--seed", c.seed, "master seed");
    cmd->add_flag("--drop-invalid", c.drop_invalid, "exclude spike trains that fail validation");
    if (with_data) cmd->add_option("-d,--data", c.data, "data directory (default: synthetic data)");
}

ConfigMap build_config(const Common& c, const fs::path& base = {}) {
    ConfigMap cfg;
    if (!base.empty()) cfg = ConfigMap::load(base);
    if (!c.config.empty()) {
        const auto file = ConfigMap::load(c.config);
        for (const auto& [k, v] : file.entries()) cfg.set(k, v);
    }
    for (const auto& s : c.sets) cfg.set(s);
    if (c.seed) cfg.set("seed", std::to_string(*c.seed));
    if (c.drop_invalid) cfg.set("drop_invalid", "true");
    if (!c.data.empty()) cfg.set("data_dir", c.data);
    return cfg;
}

void save_config(const fs::path& path, const ConfigMap& cfg) {
    std::ofstream os(path);
    if (!os) throw RuntimeFailure("cannot write " + path.string());
    for (const auto& [k, v] : cfg.entries()) os << k << " = " << v << '\n';
}

fs::path out_dir(const Common& c, const harness::ExperimentConfig& ec) {
    const fs::path dir = c.out.empty() ? ec.output_dir : fs::path(c.out);
    fs::create_directories(dir);
    return dir;
}

int cmd_synth(const Common& c) {
    auto ec = harness::ExperimentConfig::from(build_config(c));
    ec.validate();
    const fs::path dir = c.out.empty() ? fs::path("data") : fs::path(c.out);
    bool first = true;
    for (Finger f : ec.fingers) {
        const auto fd = harness::synthetic_finger(ec, f);
        harness::save_finger(dir, fd, !first);
        first = false;
        std::printf("%s: %zu trials, %zu MUs\n", std::string(to_string(f)).c_str(), fd.trials.size(),
                    fd.trials.front().trains.size());
    }
    std::printf("wrote %s\n", dir.string().c_str());
    return 0;
}

int cmd_train(const Common& c, const std::string& resume, bool checkpoints) {
    const auto cfg = build_config(c);
    const auto ec = harness::ExperimentConfig::from(cfg);
    ec.validate();
    const fs::path dir = out_dir(c, ec);
    save_config(dir / "config.cfg", cfg);
    for (Finger f : ec.fingers) {
        const auto fd = harness::acquire_finger(ec, f);
        const auto models = harness::train_models(ec, fd, resume, checkpoints ? dir / "checkpoints" : fs::path{});
        const std::string fn(to_string(f));
        for (const auto* pop : {&models.flexion, &models.extension}) {
            const std::string d(trainer::to_string(pop->spec.direction));
            trainer::write_checkpoint(dir / (fn + "_" + d + ".ckpt"), pop->state);
            std::ofstream ws(dir / (fn + "_weights_" + d + ".csv"));
            harness::write_weights(ws, pop->state.weights, pop->mu_ids);
            std::ofstream ls(dir / (fn + "_loss_" + d + ".csv"));
            ls << "epoch,mse\n";
            for (const auto& p : pop->state.loss_history) ls << p.epoch << ',' << p.mse << '\n';
            const double first = pop->state.loss_history.empty() ? 0.0 : pop->state.loss_history.front().mse;
            const double last = pop->state.loss_history.empty() ? 0.0 : pop->state.loss_history.back().mse;
            std::printf("%s %s: alpha %.4g, mse %.4g -> %.4g over %d epochs\n", fn.c_str(), d.c_str(), pop->alpha,
                        first, last, pop->state.epoch);
        }
    }
    std::printf("wrote %s\n", dir.string().c_str());
    return 0;
}

int cmd_infer(const Common& c, const std::string& model, int trial, int repetition) {
    const fs::path model_dir(model);
    const fs::path saved = model_dir / "config.cfg";
    const auto cfg = build_config(c, fs::exists(saved) ? saved : fs::path{});
    const auto ec = harness::ExperimentConfig::from(cfg);
    ec.validate();
    const int t = trial > 0 ? trial : ec.test_trials.front();
    const fs::path dir = out_dir(c, ec);
    for (Finger f : ec.fingers) {
        auto fd = harness::acquire_finger(ec, f);
        const std::string fn(to_string(f));
        const auto [flex_chip, ext_chip] = harness::training_chips(ec, f);
        auto [w_flex, flex_ids] =
            harness::read_weights(model_dir / (fn + "_weights_flexion.csv"), ec.train.k, ec.train.fan_in_limit);
        auto [w_ext, ext_ids] =
            harness::read_weights(model_dir / (fn + "_weights_extension.csv"), ec.train.k, ec.train.fan_in_limit);
        const auto topo = harness::build_inference_topology(w_flex, w_ext, ec.inhibition_count, flex_chip.core,
                                                            ext_chip.core, ec.train.fan_in_limit);
        const auto& td = fd.trial(t);
        const auto out = harness::run_inference(topo, harness::pick_trains(td.trains, flex_ids),
                                                harness::pick_trains(td.trains, ext_ids), td.force.duration(),
                                                ec.substrate.dt, harness::inference_seed(ec, f, t, repetition));
        const auto truth = resample_linear(td.force, trainer::kReadoutRate, 0.0, out.decoded.size());
        harness::TraceBundle tb{f, t, repetition, truth, out.decoded, {}, out.rate_flex, out.rate_ext};
        const std::string stem = fn + "_trial" + std::to_string(t) + "_rep" + std::to_string(repetition);
        {
            std::ofstream os(dir / (stem + ".csv"));
            harness::write_trace(os, tb);
        }
        {
            std::ofstream os(dir / (stem + "_spikes.csv"));
            substrate::write_spikes_csv(os, out.spikes);
        }
        std::printf("%s trial %d rep %d: rmse %.4f %%MVC\n", fn.c_str(), t, repetition, rmse(out.decoded, truth));
    }
    return 0;
}

int cmd_baseline(const Common& c) {
    const auto ec = harness::ExperimentConfig::from(build_config(c));
    ec.validate();
    const fs::path dir = out_dir(c, ec);
    for (Finger f : ec.fingers) {
        const auto fd = harness::acquire_finger(ec, f);
        const std::string fn(to_string(f));
        const auto model = harness::fit_baseline(ec, fd);
        baseline::write_model(dir / (fn + "_baseline_model.csv"), model);
        for (int t : ec.test_trials) {
            const auto& td = fd.trial(t);
            const auto pred = harness::baseline_predict(model, td);
            const auto truth = resample_linear(td.force, pred.sample_rate, pred.start_time, pred.size());
            io::write_force(dir / (fn + "_trial" + std::to_string(t) + "_baseline.csv"), pred);
            std::printf("%s trial %d: baseline rmse %.4f %%MVC\n", fn.c_str(), t, rmse(pred, truth));
        }
    }
    return 0;
}

int cmd_eval(const Common& c) {
    const auto cfg = build_config(c);
    const auto ec = harness::ExperimentConfig::from(cfg);
    const auto result = harness::run_experiment(ec);
    const fs::path dir = out_dir(c, ec);
    save_config(dir / "config.cfg", cfg);
    harness::write_outputs(dir, result);
    harness::write_table(std::cout, result.table);
    return 0;
}

int cmd_export(const std::string& from, const std::string& out) {
    const fs::path runs = fs::path(from) / "runs";
    if (!fs::is_directory(runs)) throw ValidationError("no runs directory under " + from);
    std::vector<harness::TraceBundle> traces;
    for (const auto& entry : fs::directory_iterator(runs)) {
        const std::string name = entry.path().filename().string();
        if (name.find("_rep") == std::string::npos || entry.path().extension() != ".csv") continue;
        auto tb = harness::read_trace(entry.path());
        const auto base = runs / (std::string(to_string(tb.finger)) + "_trial" + std::to_string(tb.trial) +
                                  "_baseline.csv");
        if (fs::exists(base)) tb.baseline = io::read_force(base);
        traces.push_back(std::move(tb));
    }
    if (traces.empty()) throw ValidationError("no run traces under " + runs.string());
    for (const auto& p : harness::export_plot_data(traces, out.empty() ? fs::path(from) : fs::path(out)))
        std::printf("wrote %s\n", p.string().c_str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Decode finger force from motor-unit spike trains on an emulated mixed-signal substrate"};
    app.require_subcommand(1);

    Common synth_o, train_o, infer_o, base_o, eval_o;
    auto* synth = app.add_subcommand("synth", "generate synthetic spike and force data");
    add_common(synth, synth_o, false);
    synth->add_option("-o,--out", synth_o.out, "output data directory")->default_val("data");

    auto* train = app.add_subcommand("train", "train both decoder populations on the training trial");
    add_common(train, train_o);
    train->add_option("-o,--out", train_o.out, "model directory");
    std::string resume;
    bool checkpoints = false;
    train->add_option("--resume", resume, "continue from the checkpoints in a model directory");
    train->add_flag("--checkpoints", checkpoints, "write a checkpoint after every epoch");

    std::string model;
    int trial = 0, repetition = 0;
    auto* infer = app.add_subcommand("infer", "run a trained decoder on one trial");
    add_common(infer, infer_o);
    infer->add_option("-m,--model", model, "model directory written by train")->required();
    infer->add_option("-t,--trial", trial, "trial to decode (default: first test trial)");
    infer->add_option("-r,--repetition", repetition, "repetition index, selects the noise seed");
    infer->add_option("-o,--out", infer_o.out, "output directory");

    auto* base = app.add_subcommand("baseline", "fit and score the linear regression baseline");
    add_common(base, base_o);
    base->add_option("-o,--out", base_o.out, "output directory");

    auto* eval = app.add_subcommand("eval", "full protocol: train, repeated inference, baseline, result table");
    add_common(eval, eval_o);
    eval->add_option("-o,--out", eval_o.out, "output directory");

    std::string from, export_out;
    auto* exp = app.add_subcommand("export", "write per-finger plot CSVs from an eval directory");
    exp->add_option("-f,--from", from, "eval output directory")->required();
    exp->add_option("-o,--out", export_out, "destination (default: the eval directory)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    try {
        if (*synth) return cmd_synth(synth_o);
        if (*train) return cmd_train(train_o, resume, checkpoints);
        if (*infer) return cmd_infer(infer_o, model, trial, repetition);
        if (*base) return cmd_baseline(base_o);
        if (*eval) return cmd_eval(eval_o);
        if (*exp) return cmd_export(from, export_out);
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 1;
}
