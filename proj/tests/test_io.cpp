#include <gtest/gtest.h>

#include <sstream>

#include "mudecode/config.hpp"
#include "mudecode/csv_io.hpp"
#include "mudecode/errors.hpp"

using namespace mudecode;

TEST(SpikeCsv, RoundTrip) {
    std::vector<MuSpikeTrain> trains(2);
    trains[0] = {3, 1, Finger::ring, 2, {0.1, 0.25, 1.123456789}};
    trains[1] = {7, 4, Finger::ring, 2, {0.5}};
    std::stringstream ss;
    io::write_spikes(ss, trains);
    const auto back = io::read_spikes(ss);
    ASSERT_EQ(back.size(), 2u);
    EXPECT_EQ(back[0].mu_id, 3);
    EXPECT_EQ(back[0].grid, 1);
    EXPECT_EQ(back[0].finger, Finger::ring);
    EXPECT_EQ(back[0].trial, 2);
    ASSERT_EQ(back[0].spike_times.size(), 3u);
    EXPECT_NEAR(back[0].spike_times[2], 1.123456789, 1e-9);
    EXPECT_EQ(back[1].grid, 4);
}

TEST(SpikeCsv, SortsUnorderedRowsAndAcceptsCrlf) {
    std::stringstream ss("mu_id,grid,finger,trial,time_s\r\n0,2,index,1,0.5\r\n0,2,index,1,0.2\r\n");
    const auto t = io::read_spikes(ss);
    ASSERT_EQ(t.size(), 1u);
    EXPECT_EQ(t[0].spike_times, (std::vector<double>{0.2, 0.5}));
}

TEST(SpikeCsv, RejectsBadInput) {
    std::stringstream bad_header("id,grid,finger,trial,time_s\n");
    EXPECT_THROW(io::read_spikes(bad_header), ValidationError);
    std::stringstream bad_grid("mu_id,grid,finger,trial,time_s\n0,5,index,1,0.5\n");
    EXPECT_THROW(io::read_spikes(bad_grid), ValidationError);
    std::stringstream bad_finger("mu_id,grid,finger,trial,time_s\n0,1,toe,1,0.5\n");
    EXPECT_THROW(io::read_spikes(bad_finger), ValidationError);
    std::stringstream grid_change("mu_id,grid,finger,trial,time_s\n0,1,index,1,0.5\n0,2,index,1,0.7\n");
    EXPECT_THROW(io::read_spikes(grid_change), ValidationError);
}

TEST(ForceCsv, RoundTrip) {
    ForceTrace f;
    f.sample_rate = 100.0;
    f.samples = {0.0, 1.5, -2.25, 30.0};
    std::stringstream ss;
    io::write_force(ss, f);
    const auto back = io::read_force(ss);
    EXPECT_DOUBLE_EQ(back.sample_rate, 100.0);
    EXPECT_EQ(back.samples, f.samples);
    EXPECT_EQ(back.start_time, 0.0);
}

TEST(ForceCsv, RejectsNonUniformSpacing) {
    std::stringstream ss("time_s,force_pct_mvc\n0,1\n0.01,2\n0.05,3\n");
    EXPECT_THROW(io::read_force(ss), ValidationError);
}

TEST(ConfigMap, ParsesCommentsAndOverrides) {
    std::stringstream ss("# comment\nseed = 42\n train.k=2 # trailing\n\nfingers = index, ring\n");
    auto cfg = ConfigMap::parse(ss);
    EXPECT_EQ(cfg.get_u64("seed", 0), 42u);
    EXPECT_EQ(cfg.get_int("train.k", 3), 2);
    EXPECT_EQ(cfg.get_string("fingers", ""), "index, ring");
    cfg.set("train.k=3");
    EXPECT_EQ(cfg.get_int("train.k", 0), 3);
    EXPECT_EQ(cfg.get_double("missing", 1.5), 1.5);
}

TEST(ConfigMap, RejectsMalformed) {
    std::stringstream no_eq("seed 42\n");
    EXPECT_THROW(ConfigMap::parse(no_eq), ValidationError);
    std::stringstream ss("seed = abc\n");
    const auto cfg = ConfigMap::parse(ss);
    EXPECT_THROW(cfg.get_u64("seed", 0), ValidationError);
    EXPECT_THROW(ConfigMap::load("/nonexistent/cfg"), ValidationError);
}

TEST(ConfigMap, IntListAndBool) {
    std::stringstream ss("test_trials = 2, 3\nflag = true\n");
    const auto cfg = ConfigMap::parse(ss);
    EXPECT_EQ(cfg.get_int_list("test_trials", {}), (std::vector<int>{2, 3}));
    EXPECT_TRUE(cfg.get_bool("flag", false));
}

TEST(SubstrateConfig, DefaultsAndRoundTrip) {
    const auto sc = substrate::load_substrate_config(ConfigMap{});
    ASSERT_EQ(sc.cores.size(), 2u);
    EXPECT_EQ(sc.core(0).n_neurons, 20);
    EXPECT_DOUBLE_EQ(sc.core(1).synapse[substrate::SynapseType::ampa].gain,
                     2.0 * sc.core(0).synapse[substrate::SynapseType::ampa].gain);

    std::stringstream cfg_text("dt = 5e-5\ncore.2.n_neurons = 8\ncore.0.neuron.b = 0.2\ncore.0.synapse.nmda.tau = 0.2\n");
    const auto sc2 = substrate::load_substrate_config(ConfigMap::parse(cfg_text));
    EXPECT_EQ(sc2.cores.size(), 3u);
    EXPECT_EQ(sc2.core(2).n_neurons, 8);
    EXPECT_DOUBLE_EQ(sc2.core(0).neuron.b, 0.2);
    EXPECT_DOUBLE_EQ(sc2.core(0).synapse[substrate::SynapseType::nmda].tau, 0.2);

    std::stringstream out;
    substrate::write_substrate_config(out, sc2);
    const auto sc3 = substrate::load_substrate_config(ConfigMap::parse(out));
    ASSERT_EQ(sc3.cores.size(), sc2.cores.size());
    EXPECT_EQ(sc3.dt, sc2.dt);
    for (std::size_t i = 0; i < sc2.cores.size(); ++i) {
        EXPECT_EQ(sc3.cores[i].neuron.b, sc2.cores[i].neuron.b);
        EXPECT_EQ(sc3.cores[i].seed, sc2.cores[i].seed);
        EXPECT_EQ(sc3.cores[i].synapse.types[1].tau, sc2.cores[i].synapse.types[1].tau);
    }
}

TEST(SubstrateConfig, RejectsBadValues) {
    std::stringstream big_dt("dt = 0.001\n");
    EXPECT_THROW(substrate::load_substrate_config(ConfigMap::parse(big_dt)), ValidationError);
    std::stringstream bad_core("core.7.n_neurons = 3\n");
    EXPECT_THROW(substrate::load_substrate_config(ConfigMap::parse(bad_core)), ValidationError);
    std::stringstream too_many("core.0.n_neurons = 300\n");
    EXPECT_THROW(substrate::load_substrate_config(ConfigMap::parse(too_many)), ValidationError);
}
