#pragma once

// Spike CSV:  mu_id,grid,finger,trial,time_s   (one row per spike)
// Force CSV:  time_s,force_pct_mvc             (uniform sampling)
// UTF-8, LF line endings, times written with 9 decimals.

#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

#include "mudecode/signal.hpp"

namespace mudecode::io {

void write_spikes(std::ostream& os, std::span<const MuSpikeTrain> trains);
void write_spikes(const std::filesystem::path& path, std::span<const MuSpikeTrain> trains);

/// Groups rows by (finger, trial, mu_id) and sorts each train's times.
/// Trains are returned ordered by finger, trial, then mu_id.
std::vector<MuSpikeTrain> read_spikes(std::istream& is);
std::vector<MuSpikeTrain> read_spikes(const std::filesystem::path& path);

void write_force(std::ostream& os, const ForceTrace& force);
void write_force(const std::filesystem::path& path, const ForceTrace& force);

/// Sample rate is inferred from the first two rows; spacing must be uniform.
ForceTrace read_force(std::istream& is);
ForceTrace read_force(const std::filesystem::path& path);

}  // namespace mudecode::io
