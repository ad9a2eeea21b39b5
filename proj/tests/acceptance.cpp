// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "mudecode/baseline.hpp"
#include "mudecode/harness.hpp"
#include "mudecode/kernels.hpp"
#include "mudecode/trainer.hpp"
#include "oracles.hpp"
#include "scenarios.hpp"

using namespace mudecode;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
    bool pass = true;
    std::string detail;

    void require(bool ok, const std::string& what) {
        if (!ok) {
            pass = false;
            detail += (detail.empty() ? "" : "; ") + what;
        }
    }
    void note(const std::string& what) { detail += (detail.empty() ? "" : "; ") + what; }
};

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0) {
    char buf[256];
    std::snprintf(buf, sizeof buf, f, a, b, c);
    return buf;
}

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

Outcome stochastic_rounding() {
    Outcome o;
    const auto t0 = Clock::now();
    std::mt19937_64 pick(2024);
    std::uniform_real_distribution<double> u(-3.0, 3.0);
    constexpr int k = 3, draws = 100000;
    double worst_z = 0.0;
    for (int c = 0; c < 50; ++c) {
        const double w = u(pick);
        const double f = std::floor(w);
        const double rho = w - f;
        auto eng = rng::make_engine(77, {static_cast<std::uint64_t>(c)});
        double sum = 0.0;
        bool support_ok = true;
        for (int d = 0; d < draws; ++d) {
            const int v = trainer::stochastic_round(w, k, eng);
            const double lo = std::clamp(f, -3.0, 3.0), hi = std::clamp(f + 1.0, -3.0, 3.0);
            if (v != lo && v != hi) support_ok = false;
            sum += v;
        }
        const double se = std::sqrt(rho * (1.0 - rho) / draws);
        const double err = std::abs(sum / draws - w);
        if (se > 0.0) worst_z = std::max(worst_z, err / se);
        o.require(support_ok, fmt("support violated at w'=%.4f", w));
        o.require(err <= 3.0 * se + 1e-12, fmt("w'=%.4f mean off by %.2e (3 SE = %.2e)", w, err, 3.0 * se));
    }
    const double dt = seconds_since(t0);
    o.require(dt < 5.0, fmt("runtime %.2f s", dt));
    o.note(fmt("50 values, worst |err|/SE %.2f, %.2f s", worst_z, dt));
    return o;
}

Outcome rate_kernel() {
    Outcome o;
    const std::vector<double> one{0.0};
    const auto r = exp_kernel_rate(one, 0.2, 100.0, 1.0);
    const double expect = 5.0 * std::exp(-1.0);
    o.require(std::abs(r.values[20] - expect) <= 1e-9, fmt("r(0.2)=%.12f", r.values[20]));
    std::vector<double> train;
    for (int i = 0; i < 250; ++i) train.push_back(0.1 * i);
    const auto rr = exp_kernel_rate(train, 0.2, 1000.0, 25.0);
    std::vector<double> tail(rr.values.begin() + 5000, rr.values.end());
    const double avg = oracle::trapezoid(tail, 1e-3) / ((tail.size() - 1) * 1e-3);
    o.require(std::abs(avg - 10.0) <= 0.1, fmt("10 Hz average %.5f", avg));
    o.note(fmt("r(tau)=%.9f, average over 100 tau %.5f Hz", r.values[20], avg));
    return o;
}

Outcome surrogate_gradient() {
    Outcome o;
    constexpr std::size_t n = 10, m = 5, T = 300;
    constexpr double alpha = 0.034;
    std::mt19937_64 eng(5);
    std::uniform_real_distribution<double> ux(0.0, 40.0), uw(-3.0, 3.0);
    std::vector<RateTrace> x(n);
    for (auto& r : x) {
        r.values.resize(T);
        for (auto& v : r.values) v = ux(eng);
    }
    ForceTrace target;
    target.samples.resize(T);
    for (auto& v : target.samples) v = 0.5 * ux(eng);
    std::vector<double> w(n * m);
    for (auto& v : w) v = uw(eng);
    auto recorded = [&](const std::vector<double>& wm) {
        std::vector<RateTrace> out(m);
        for (std::size_t j = 0; j < m; ++j) {
            out[j].values.assign(T, 0.0);
            for (std::size_t t = 0; t < T; ++t)
                for (std::size_t i = 0; i < n; ++i) out[j].values[t] += alpha * wm[i * m + j] * x[i].values[t];
        }
        return out;
    };
    auto loss = [&](const std::vector<double>& wm) {
        const auto r = recorded(wm);
        double acc = 0.0;
        for (std::size_t t = 0; t < T; ++t) {
            double y = 0.0;
            for (const auto& rj : r) y += rj.values[t];
            const double e = y / m - target.samples[t];
            acc += e * e;
        }
        return acc / T;
    };
    const auto lg = trainer::surrogate_loss_and_grad(recorded(w), x, target, m, alpha);
    double worst = 0.0;
    for (std::size_t e = 0; e < w.size(); ++e) {
        auto wp = w, wm = w;
        wp[e] += 1e-4;
        wm[e] -= 1e-4;
        const double fd = (loss(wp) - loss(wm)) / 2e-4;
        worst = std::max(worst, std::abs(lg.gradient[e] - fd) / std::max(std::abs(fd), 1e-12));
    }
    o.require(worst <= 1e-5, fmt("max relative error %.3e", worst));
    o.note(fmt("max relative error %.3e over 50 weights", worst));
    return o;
}

Outcome substrate_integration() {
    Outcome o;
    using namespace substrate;
    const auto s = scenario::standard();
    SimOptions coarse;
    coarse.duration = s.duration;
    coarse.dt = 1e-4;
    SimOptions fine = coarse;
    fine.dt = 2e-5;
    const auto a = simulate(s.net, s.events, coarse);
    const auto b = simulate(s.net, s.events, fine);
    double worst = 0.0;
    for (std::size_t j = 0; j < a.spikes.size(); ++j) {
        const double nb = static_cast<double>(b.spikes[j].size());
        if (nb == 0.0) {
            o.require(a.spikes[j].empty(), "neuron silent at fine dt only");
            continue;
        }
        worst = std::max(worst, std::abs(static_cast<double>(a.spikes[j].size()) - nb) / nb);
    }
    o.require(worst <= 0.02, fmt("dt refinement changes counts by %.2f%%", 100 * worst));

    std::size_t prev = 0;
    bool monotone = true;
    for (int level = 1; level <= 10; ++level) {
        const auto r = scenario::drive_single(level, 30.0, 3.0);
        monotone = monotone && r.spikes[0].size() >= prev;
        prev = r.spikes[0].size();
    }
    o.require(monotone && prev > 0, "f-I curve not nondecreasing");

    auto noisy = scenario::standard(3.0);
    noisy.net.cores[0].noise_current_sigma = 0.5;
    SimOptions nopts;
    nopts.duration = noisy.duration;
    nopts.noise_seed = 9;
    const auto nr = simulate(noisy.net, noisy.events, nopts);
    const auto inst = apply_mismatch(noisy.net.cores[0]);
    double min_gap = 1e9;
    for (std::size_t j = 0; j < nr.spikes.size(); ++j)
        for (std::size_t k = 1; k < nr.spikes[j].size(); ++k) {
            const double gap = nr.spikes[j][k] - nr.spikes[j][k - 1] - inst[j].params.refractory;
            min_gap = std::min(min_gap, gap);
        }
    o.require(min_gap > 0.0, fmt("refractory violated by %.3e s", -min_gap));

    Network quiet;
    quiet.cores = {noisy.net.cores[0]};
    quiet.cores[0].noise_current_sigma = 0.0;
    SimOptions qopts;
    qopts.duration = 2.0;
    const auto p = kernels::prepare(quiet, {}, qopts);
    double drift = 0.0;
    for (std::size_t j = 0; j < p.neurons.size(); ++j) {
        std::vector<double> v;
        kernels::run_serial(p, &v, j);
        for (double x : v) drift = std::max(drift, std::abs(x - p.neurons[j].E_L));
    }
    o.require(drift <= 1e-9, fmt("resting drift %.3e", drift));
    o.note(fmt("max count change %.2f%%, resting drift %.1e, min refractory margin %.1e s", 100 * worst, drift,
               min_gap));
    return o;
}

Outcome ols_equivalence() {
    Outcome o;
    double worst = 0.0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        std::mt19937_64 eng(seed);
        std::poisson_distribution<int> pc(5.0);
        std::normal_distribution<double> nz(0.0, 2.0);
        const std::size_t rows = 60, cols = 6;
        WindowedCounts c;
        c.n_windows = rows;
        c.n_mu = cols;
        c.counts.resize(rows * cols);
        std::vector<double> x(rows * cols), y(rows);
        for (std::size_t e = 0; e < c.counts.size(); ++e) x[e] = c.counts[e] = pc(eng);
        for (std::size_t w = 0; w < rows; ++w) {
            y[w] = 3.0 + nz(eng);
            for (std::size_t i = 0; i < cols; ++i) y[w] += (0.5 * i - 1.0) * x[w * cols + i];
        }
        const auto ref = oracle::normal_equations(x, y, rows, cols);
        const auto m = baseline::fit_ols(c, y);
        worst = std::max(worst, std::abs(m.intercept - ref[0]) / std::max(std::abs(ref[0]), 1e-300));
        for (std::size_t i = 0; i < cols; ++i)
            worst = std::max(worst, std::abs(m.coefficients[i] - ref[i + 1]) / std::max(std::abs(ref[i + 1]), 1e-300));
    }
    o.require(worst <= 1e-8, fmt("max relative deviation %.3e", worst));

    WindowedCounts c;
    c.n_windows = 40;
    c.n_mu = 2;
    std::vector<double> y(40);
    for (std::size_t w = 0; w < 40; ++w) {
        c.counts.push_back(static_cast<int>((w * 7) % 11));
        c.counts.push_back(static_cast<int>((w * 5) % 13));
        y[w] = 2.0 * c.counts[2 * w] - 0.5 * c.counts[2 * w + 1] + 1.0;
    }
    const auto m = baseline::fit_ols(c, y);
    const auto p = baseline::predict(m, c);
    double res = 0.0;
    for (std::size_t w = 0; w < 40; ++w) res += (p.samples[w] - y[w]) * (p.samples[w] - y[w]);
    res = std::sqrt(res);
    o.require(res < 1e-9, fmt("exact-fit residual %.3e", res));
    o.note(fmt("20 problems, max relative deviation %.2e, exact-fit residual %.1e", worst, res));
    return o;
}

Outcome training_progress() {
    Outcome o;
    const auto t0 = Clock::now();
    harness::ExperimentConfig cfg = harness::ExperimentConfig::from(ConfigMap{});
    const auto fd = harness::synthetic_finger(cfg, Finger::index);
    o.require(fd.trials.front().trains.size() == 26, "task does not have 26 MUs");
    const auto models = harness::train_models(cfg, fd);
    for (const auto* pop : {&models.flexion, &models.extension}) {
        const auto& h = pop->state.loss_history;
        const std::string name(trainer::to_string(pop->spec.direction));
        if (h.size() != 30) {
            o.require(false, name + ": expected 30 epochs");
            continue;
        }
        double tail = 0.0;
        for (std::size_t e = 25; e < 30; ++e) tail += h[e].mse;
        tail /= 5.0;
        o.require(tail < 0.5 * h.front().mse, name + fmt(": final-5 mean %.3f vs first %.3f", tail, h.front().mse));
        o.note(name + fmt(" mse %.2f -> %.2f (ratio %.3f)", h.front().mse, tail, tail / h.front().mse));
    }
    const double dt = seconds_since(t0);
    o.require(dt < 300.0, fmt("runtime %.0f s", dt));
    o.note(fmt("%.1f s", dt));
    return o;
}

struct SharedRun {
    harness::ExperimentConfig cfg;
    harness::ExperimentResult result;
};

SharedRun& experiment() {
    static SharedRun run = [] {
        SharedRun r;
        r.cfg = harness::ExperimentConfig::from(ConfigMap{});
        r.result = harness::run_experiment(r.cfg);
        return r;
    }();
    return run;
}

std::size_t flexion_spikes_during_extension(const harness::ExperimentConfig& cfg, const harness::FingerModels& m,
                                            const harness::TrialData& trial, int inhibition) {
    auto [fc, ec] = harness::training_chips(cfg, m.finger);
    fc.core.noise_current_sigma = 0.0;
    ec.core.noise_current_sigma = 0.0;
    const auto topo = harness::build_inference_topology(m.decoder.flexion.state.weights,
                                                        m.decoder.extension.state.weights, inhibition, fc.core,
                                                        ec.core, cfg.train.fan_in_limit);
    const auto out = harness::run_inference(topo, harness::pick_trains(trial.trains, m.decoder.flexion.mu_ids),
                                            harness::pick_trains(trial.trains, m.decoder.extension.mu_ids),
                                            trial.force.duration(), cfg.substrate.dt, 0);
    std::size_t n = 0;
    for (int j = 0; j < topo.n_flex; ++j)
        for (double t : out.spikes.spikes[static_cast<std::size_t>(j)]) {
            const auto idx = static_cast<std::size_t>(std::floor((t - trial.force.start_time) * trial.force.sample_rate));
            if (idx < trial.force.size() && trial.force.samples[idx] < 0.0) ++n;
        }
    return n;
}

Outcome decoding_quality() {
    Outcome o;
    const auto t0 = Clock::now();
    auto& run = experiment();
    const auto& table = run.result.table;
    for (Finger f : run.cfg.fingers)
        for (int t : run.cfg.test_trials) {
            const auto* n = table.find(f, "neuromorphic", t, "repetitions");
            const auto* b = table.find(f, "baseline", t, "repetitions");
            if (!n || !b || n->rmse.n == 0 || b->rmse.n == 0) {
                o.require(false, fmt("missing results for trial %.0f", t));
                continue;
            }
            o.require(n->rmse.mean < 15.0, fmt("trial %.0f neuromorphic %.2f %%MVC", t, n->rmse.mean));
            o.require(n->rmse.mean < 2.0 * b->rmse.mean,
                      fmt("trial %.0f ratio to baseline %.2f", t, n->rmse.mean / b->rmse.mean));
            o.note(fmt("trial %.0f: %.2f +- %.2f", t, n->rmse.mean, n->rmse.std) +
                   fmt(" vs baseline %.2f (x%.2f)", b->rmse.mean, n->rmse.mean / b->rmse.mean));
        }
    const auto fd = harness::synthetic_finger(run.cfg, run.cfg.fingers.front());
    const auto& model = run.result.models.front();
    for (int t : run.cfg.test_trials) {
        const auto& trial = fd.trial(t);
        const auto with = flexion_spikes_during_extension(run.cfg, model, trial, 1);
        const auto without = flexion_spikes_during_extension(run.cfg, model, trial, 0);
        o.require(with < without, fmt("trial %.0f inhibition %.0f vs %.0f flexion spikes", t, double(with),
                                      double(without)));
        o.note(fmt("trial %.0f flexion spikes in extension %.0f -> %.0f", t, double(without), double(with)));
    }
    o.note(fmt("%.1f s", seconds_since(t0)));
    return o;
}

Outcome protocol_fidelity() {
    Outcome o;
    auto& run = experiment();
    for (int t : run.cfg.test_trials) {
        int n = 0, base = 0;
        for (const auto& r : run.result.runs) {
            if (r.trial != t) continue;
            if (r.decoder == "neuromorphic") ++n;
            else ++base;
        }
        o.require(n == 5, fmt("trial %.0f has %.0f neuromorphic runs", t, n));
        o.require(base == 1, fmt("trial %.0f has %.0f baseline runs", t, base));
        const auto* row = run.result.table.find(run.cfg.fingers.front(), "neuromorphic", t, "repetitions");
        o.require(row && row->rmse.n == 5, "table n differs from 5");
    }
    // Fit on trial 1 must not depend on the test trials' content.
    auto fd = harness::synthetic_finger(run.cfg, run.cfg.fingers.front());
    const auto reference = harness::fit_baseline(run.cfg, fd);
    for (auto& trial : fd.trials)
        if (trial.trial != run.cfg.train_trial)
            for (auto& tr : trial.trains)
                for (auto& s : tr.spike_times) s = std::min(s * 0.5, trial.force.duration());
    const auto perturbed = harness::fit_baseline(run.cfg, fd);
    const auto& used = run.result.models.front().baseline;
    o.require(used.coefficients == reference.coefficients && used.intercept == reference.intercept,
              "experiment baseline differs from the trial-1 fit");
    o.require(perturbed.coefficients == reference.coefficients && perturbed.intercept == reference.intercept,
              "baseline depends on test trials");
    o.require(run.cfg.train_trial == 1, "training trial is not 1");
    o.note("5 repetitions per test trial, baseline fitted on trial 1 only");
    return o;
}

}  // namespace

int main() {
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"1 stochastic rounding unbiased", stochastic_rounding},
        {"2 rate kernel oracle", rate_kernel},
        {"3 surrogate gradient vs finite differences", surrogate_gradient},
        {"4 substrate integration", substrate_integration},
        {"5 OLS equivalence", ols_equivalence},
        {"6 training progress", training_progress},
        {"7 decoding quality and inhibition ablation", decoding_quality},
        {"8 protocol fidelity", protocol_fidelity},
    };
    int failed = 0;
    for (const auto& [name, check] : criteria) {
        Outcome o;
        try {
            o = check();
        } catch (const std::exception& e) {
            o.pass = false;
            o.detail = std::string("exception: ") + e.what();
        }
        failed += o.pass ? 0 : 1;
        std::printf("%s [%s] %s\n", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str());
        std::fflush(stdout);
    }
    std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
    return failed == 0 ? 0 : 1;
}
