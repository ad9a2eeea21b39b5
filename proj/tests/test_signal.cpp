#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "mudecode/errors.hpp"
#include "mudecode/signal.hpp"
#include "oracles.hpp"

using namespace mudecode;

namespace {

MuSpikeTrain train_of(std::vector<double> times) {
    MuSpikeTrain t;
    t.spike_times = std::move(times);
    return t;
}

std::vector<double> regular(double rate, double duration, double phase = 0.0) {
    std::vector<double> out;
    for (double t = phase; t < duration; t += 1.0 / rate) out.push_back(t);
    return out;
}

ForceTrace trace(std::vector<double> v, double rate = 100.0) {
    ForceTrace f;
    f.sample_rate = rate;
    f.samples = std::move(v);
    return f;
}

}  // namespace

TEST(ValidateTrain, AcceptsFourHertz) {
    std::vector<double> times;
    for (int i = 0; i < 100; ++i) times.push_back(0.125 + 0.25 * i);
    const auto r = validate_train(train_of(times), 25.0);
    EXPECT_TRUE(r.accepted);
    EXPECT_EQ(r.reason, RejectReason::none);
    EXPECT_DOUBLE_EQ(r.mean_rate, 4.0);
}

TEST(ValidateTrain, RejectsLowRate) {
    const auto r = validate_train(train_of(regular(1.0, 25.0, 0.5)), 25.0);
    EXPECT_FALSE(r.accepted);
    EXPECT_EQ(r.reason, RejectReason::rate_too_low);
    EXPECT_DOUBLE_EQ(r.mean_rate, 1.0);
}

TEST(ValidateTrain, RejectsOutOfRange) {
    auto times = regular(10.0, 25.0, 0.05);
    times.push_back(26.0);
    const auto r = validate_train(train_of(times), 25.0);
    EXPECT_FALSE(r.accepted);
    EXPECT_EQ(r.reason, RejectReason::out_of_range);
}

TEST(ValidateTrain, RejectsNonMonotonicAndHighRate) {
    auto times = regular(10.0, 25.0, 0.05);
    std::swap(times[3], times[4]);
    EXPECT_EQ(validate_train(train_of(times), 25.0).reason, RejectReason::non_monotonic);
    EXPECT_EQ(validate_train(train_of(regular(60.0, 25.0, 0.001)), 25.0).reason, RejectReason::rate_too_high);
}

TEST(ValidateTrain, BoundaryRatesAccepted) {
    EXPECT_TRUE(validate_train(train_of(regular(2.0, 25.0, 0.1)), 25.0).accepted);
    std::vector<double> fifty;
    for (int i = 0; i < 1250; ++i) fifty.push_back(0.01 + 0.02 * i);
    EXPECT_TRUE(validate_train(train_of(fifty), 25.0).accepted);
}

TEST(ExpKernelRate, SingleSpikeClosedForm) {
    const std::vector<double> spikes{0.0};
    const auto r = exp_kernel_rate(spikes, 0.2, 100.0, 1.0);
    ASSERT_EQ(r.size(), 100u);
    EXPECT_NEAR(r.values[20], 5.0 * std::exp(-1.0), 1e-9);
    EXPECT_NEAR(r.values[0], 5.0, 1e-12);
}

TEST(ExpKernelRate, EmptyIsZero) {
    const auto r = exp_kernel_rate({}, 0.2, 100.0, 2.0);
    ASSERT_EQ(r.size(), 200u);
    for (double v : r.values) EXPECT_EQ(v, 0.0);
}

TEST(ExpKernelRate, MatchesDirectSumOracle) {
    std::mt19937_64 eng(3);
    std::uniform_real_distribution<double> u(0.0, 5.0);
    std::vector<double> spikes(200);
    for (auto& s : spikes) s = u(eng);
    std::sort(spikes.begin(), spikes.end());
    const auto r = exp_kernel_rate(spikes, 0.2, 100.0, 5.0);
    for (std::size_t i = 0; i < r.size(); ++i) {
        const double expect = oracle::kernel_rate_at(spikes, 0.2, static_cast<double>(i) / 100.0);
        EXPECT_NEAR(r.values[i], expect, 1e-9 * std::max(1.0, expect));
    }
}

TEST(ExpKernelRate, IsCausal) {
    const std::vector<double> spikes{1.005};
    const auto r = exp_kernel_rate(spikes, 0.2, 100.0, 2.0);
    for (int i = 0; i <= 100; ++i) EXPECT_EQ(r.values[static_cast<std::size_t>(i)], 0.0);
    EXPECT_GT(r.values[101], 0.0);
}

TEST(ExpKernelRate, RegularTrainAveragesToItsRate) {
    const auto spikes = regular(10.0, 25.0);
    const auto r = exp_kernel_rate(spikes, 0.2, 1000.0, 25.0);
    std::vector<double> tail(r.values.begin() + 5000, r.values.end());
    const double avg = oracle::trapezoid(tail, 1e-3) / (static_cast<double>(tail.size() - 1) * 1e-3);
    EXPECT_NEAR(avg, 10.0, 0.1);
}

TEST(ExpKernelRate, IntegratesToOnePerSpike) {
    const std::vector<double> spikes{0.0};
    const auto r = exp_kernel_rate(spikes, 0.2, 10000.0, 4.0);
    EXPECT_NEAR(oracle::trapezoid(r.values, 1e-4), 1.0, 1e-3);
}

TEST(ExpKernelRate, LinearInSpikeSet) {
    std::mt19937_64 eng(11);
    std::uniform_real_distribution<double> u(0.0, 3.0);
    std::vector<double> a(40), b(60);
    for (auto& s : a) s = u(eng);
    for (auto& s : b) s = u(eng);
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    std::vector<double> both(a);
    both.insert(both.end(), b.begin(), b.end());
    std::sort(both.begin(), both.end());
    const auto ra = exp_kernel_rate(a, 0.2, 100.0, 3.0);
    const auto rb = exp_kernel_rate(b, 0.2, 100.0, 3.0);
    const auto rab = exp_kernel_rate(both, 0.2, 100.0, 3.0);
    for (std::size_t i = 0; i < rab.size(); ++i) {
        const double sum = ra.values[i] + rb.values[i];
        EXPECT_NEAR(rab.values[i], sum, 1e-9 * std::max(1.0, sum));
    }
}

TEST(ExpKernelRate, RejectsBadParameters) {
    EXPECT_THROW(exp_kernel_rate({}, 0.0, 100.0, 1.0), ValidationError);
    EXPECT_THROW(exp_kernel_rate({}, 0.2, -1.0, 1.0), ValidationError);
}

TEST(WindowCounts, PaperLayoutHas499Windows) {
    EXPECT_EQ(window_count(25.0, 0.1, 0.05), 499u);
    const auto c = window_counts({}, 0.1, 0.05, 25.0);
    EXPECT_EQ(c.n_windows, 499u);
}

TEST(WindowCounts, SpikeMembership) {
    const std::vector<MuSpikeTrain> trains{train_of({0.07})};
    const auto c = window_counts(trains, 0.1, 0.05, 1.0);
    for (std::size_t w = 0; w < c.n_windows; ++w) EXPECT_EQ(c.at(w, 0), (w == 0 || w == 1) ? 1 : 0) << w;
}

TEST(WindowCounts, NoSpikesAllZero) {
    const std::vector<MuSpikeTrain> trains(3);
    const auto c = window_counts(trains, 0.1, 0.05, 2.0);
    for (int v : c.counts) EXPECT_EQ(v, 0);
}

TEST(WindowCounts, InteriorSpikesCountedTwice) {
    std::mt19937_64 eng(5);
    std::uniform_real_distribution<double> u(0.2, 9.8);
    std::vector<double> times(300);
    for (auto& t : times) t = u(eng);
    std::sort(times.begin(), times.end());
    const std::vector<MuSpikeTrain> trains{train_of(times)};
    const auto c = window_counts(trains, 0.1, 0.05, 10.0);
    long total = 0;
    for (std::size_t w = 0; w < c.n_windows; ++w) total += c.at(w, 0);
    EXPECT_EQ(total, 2 * static_cast<long>(times.size()));
}

TEST(WindowCounts, RejectsBadLayout) {
    EXPECT_THROW(window_counts({}, 0.1, 0.0, 1.0), ValidationError);
    EXPECT_THROW(window_counts({}, 2.0, 0.5, 1.0), ValidationError);
}

TEST(Rmse, Examples) {
    const auto t = trace({1.0, 2.0, -4.0, 7.0});
    EXPECT_EQ(rmse(t, t), 0.0);
    auto shifted = t;
    for (auto& v : shifted.samples) v += 3.0;
    EXPECT_NEAR(rmse(shifted, t), 3.0, 1e-12);
    EXPECT_NEAR(rmse(trace({0, 0, 0, 0}), trace({3, -3, 3, -3})), 3.0, 1e-12);
}

TEST(Rmse, SymmetricAndScales) {
    const auto a = trace({1.0, -2.0, 0.5, 4.0});
    const auto b = trace({0.0, 1.0, 2.5, -1.0});
    EXPECT_DOUBLE_EQ(rmse(a, b), rmse(b, a));
    auto a2 = a, b2 = b;
    for (auto& v : a2.samples) v *= 2.5;
    for (auto& v : b2.samples) v *= 2.5;
    EXPECT_NEAR(rmse(a2, b2), 2.5 * rmse(a, b), 1e-12);
}

TEST(Rmse, MismatchIsAnError) {
    EXPECT_THROW(rmse(trace({1, 2, 3}), trace({1, 2})), ValidationError);
    EXPECT_THROW(rmse(trace({1, 2}, 100.0), trace({1, 2}, 50.0)), ValidationError);
}

TEST(RectifiedTargets, Example) {
    const auto [flex, ext] = rectified_targets(trace({10.0, -20.0, 0.0}));
    EXPECT_EQ(flex.samples, (std::vector<double>{10.0, 0.0, 0.0}));
    EXPECT_EQ(ext.samples, (std::vector<double>{0.0, 20.0, 0.0}));
}

TEST(RectifiedTargets, ReconstructionIsExact) {
    std::mt19937_64 eng(9);
    std::normal_distribution<double> n(0.0, 20.0);
    std::vector<double> v(1000);
    for (auto& x : v) x = n(eng);
    const auto f = trace(v);
    const auto [flex, ext] = rectified_targets(f);
    for (std::size_t i = 0; i < v.size(); ++i) {
        EXPECT_GE(flex.samples[i], 0.0);
        EXPECT_GE(ext.samples[i], 0.0);
        EXPECT_EQ(flex.samples[i] - ext.samples[i], v[i]);
    }
}

TEST(RectifiedTargets, AllPositiveHasZeroExtension) {
    const auto [flex, ext] = rectified_targets(trace({1.0, 5.0, 2.0}));
    for (double v : ext.samples) EXPECT_EQ(v, 0.0);
}

TEST(ResampleLinear, InterpolatesAndClamps) {
    const auto src = trace({0.0, 10.0, 20.0}, 10.0);
    const auto r = resample_linear(src, 20.0, 0.0, 6);
    const std::vector<double> expect{0.0, 5.0, 10.0, 15.0, 20.0, 20.0};
    for (std::size_t i = 0; i < expect.size(); ++i) EXPECT_NEAR(r.samples[i], expect[i], 1e-12);
}
