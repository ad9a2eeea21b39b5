#pragma once

// Reference decoder: ordinary least squares from windowed MU spike counts to
// the signed force.

#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

#include "mudecode/signal.hpp"

namespace mudecode::baseline {

struct LinearModel {
    std::vector<double> coefficients;  // one per MU column
    double intercept = 0.0;
    double window_len = 0.1;
    double hop = 0.05;
    std::vector<int> mu_ids;           // optional labels for the columns
    bool rank_deficient = false;       // minimum-norm solution was returned
    bool degenerate = false;           // every feature column is constant
};

/// Mean of the force samples inside each window [w*hop, w*hop + window_len).
/// Windows without a sample take the interpolated value at their center.
std::vector<double> window_targets(const ForceTrace& force, const WindowedCounts& layout);

/// Least squares with intercept on centered features, solved by a complete
/// orthogonal decomposition. Rank-deficient problems get the minimum-norm
/// coefficient vector and the rank_deficient flag.
LinearModel fit_ols(const WindowedCounts& counts, std::span<const double> target);

/// One value per window, sampled at 1/hop Hz and stamped at window centers.
ForceTrace predict(const LinearModel& model, const WindowedCounts& counts);

// CSV: term,mu_id,value  with rows intercept, window_len, hop, then one
// "coef" row per column.
void write_model(std::ostream& os, const LinearModel& model);
void write_model(const std::filesystem::path& path, const LinearModel& model);
LinearModel read_model(std::istream& is);
LinearModel read_model(const std::filesystem::path& path);

}  // namespace mudecode::baseline
