#include "mudecode/csv_io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <string>
#include <tuple>

#include "mudecode/errors.hpp"

namespace mudecode::io {

namespace {

std::vector<std::string_view> split(std::string_view line, char sep) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(sep, start);
        out.push_back(line.substr(start, pos - start));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

template <typename T>
T parse_number(std::string_view s, std::size_t line_no) {
    T v{};
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size()) {
        throw ValidationError("line " + std::to_string(line_no) + ": cannot parse '" + std::string(s) + "'");
    }
    return v;
}

std::string_view strip_cr(std::string_view s) {
    if (!s.empty() && s.back() == '\r') s.remove_suffix(1);
    return s;
}

std::ofstream open_out(const std::filesystem::path& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw RuntimeFailure("cannot open " + path.string() + " for writing");
    return os;
}

std::ifstream open_in(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw ValidationError("cannot open " + path.string());
    return is;
}

}  // namespace

void write_spikes(std::ostream& os, std::span<const MuSpikeTrain> trains) {
    os << "mu_id,grid,finger,trial,time_s\n";
    char buf[64];
    for (const auto& tr : trains) {
        for (double t : tr.spike_times) {
            std::snprintf(buf, sizeof buf, "%.9f", t);
            os << tr.mu_id << ',' << tr.grid << ',' << to_string(tr.finger) << ',' << tr.trial << ','
               << buf << '\n';
        }
    }
}

void write_spikes(const std::filesystem::path& path, std::span<const MuSpikeTrain> trains) {
    auto os = open_out(path);
    write_spikes(os, trains);
}

std::vector<MuSpikeTrain> read_spikes(std::istream& is) {
    std::string line;
    if (!std::getline(is, line) || strip_cr(line) != "mu_id,grid,finger,trial,time_s") {
        throw ValidationError("spike CSV: expected header 'mu_id,grid,finger,trial,time_s'");
    }
    using Key = std::tuple<int, int, int>;  // finger, trial, mu_id
    std::map<Key, MuSpikeTrain> trains;
    std::size_t line_no = 1;
    while (std::getline(is, line)) {
        ++line_no;
        const auto row = strip_cr(line);
        if (row.empty()) continue;
        const auto f = split(row, ',');
        if (f.size() != 5) throw ValidationError("spike CSV line " + std::to_string(line_no) + ": expected 5 fields");
        const int mu = parse_number<int>(f[0], line_no);
        const int grid = parse_number<int>(f[1], line_no);
        const Finger finger = parse_finger(f[2]);
        const int trial = parse_number<int>(f[3], line_no);
        const double t = parse_number<double>(f[4], line_no);
        if (grid < 1 || grid > 4) throw ValidationError("spike CSV line " + std::to_string(line_no) + ": grid must be 1..4");
        if (trial < 1) throw ValidationError("spike CSV line " + std::to_string(line_no) + ": trial must be >= 1");
        auto& tr = trains[Key{static_cast<int>(finger), trial, mu}];
        if (tr.spike_times.empty()) {
            tr.mu_id = mu;
            tr.grid = grid;
            tr.finger = finger;
            tr.trial = trial;
        } else if (tr.grid != grid) {
            throw ValidationError("spike CSV line " + std::to_string(line_no) + ": MU " + std::to_string(mu) +
                                  " changes grid");
        }
        tr.spike_times.push_back(t);
    }
    std::vector<MuSpikeTrain> out;
    out.reserve(trains.size());
    for (auto& [key, tr] : trains) {
        std::sort(tr.spike_times.begin(), tr.spike_times.end());
        out.push_back(std::move(tr));
    }
    return out;
}

std::vector<MuSpikeTrain> read_spikes(const std::filesystem::path& path) {
    auto is = open_in(path);
    return read_spikes(is);
}

void write_force(std::ostream& os, const ForceTrace& force) {
    os << "time_s,force_pct_mvc\n";
    char buf[96];
    for (std::size_t i = 0; i < force.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%.9f,%.9g", force.time_at(i), force.samples[i]);
        os << buf << '\n';
    }
}

void write_force(const std::filesystem::path& path, const ForceTrace& force) {
    auto os = open_out(path);
    write_force(os, force);
}

ForceTrace read_force(std::istream& is) {
    std::string line;
    if (!std::getline(is, line) || strip_cr(line) != "time_s,force_pct_mvc") {
        throw ValidationError("force CSV: expected header 'time_s,force_pct_mvc'");
    }
    std::vector<double> times;
    ForceTrace out;
    std::size_t line_no = 1;
    while (std::getline(is, line)) {
        ++line_no;
        const auto row = strip_cr(line);
        if (row.empty()) continue;
        const auto f = split(row, ',');
        if (f.size() != 2) throw ValidationError("force CSV line " + std::to_string(line_no) + ": expected 2 fields");
        times.push_back(parse_number<double>(f[0], line_no));
        out.samples.push_back(parse_number<double>(f[1], line_no));
    }
    if (times.size() < 2) throw ValidationError("force CSV: need at least two samples");
    const double dt = times[1] - times[0];
    if (!(dt > 0.0)) throw ValidationError("force CSV: times must increase");
    for (std::size_t i = 1; i < times.size(); ++i) {
        const double expected = times[0] + static_cast<double>(i) * dt;
        if (std::abs(times[i] - expected) > 1e-6 + 1e-6 * std::abs(expected)) {
            throw ValidationError("force CSV: non-uniform sampling at row " + std::to_string(i + 2));
        }
    }
    // Times carry 9 decimals; snap the rate to the nearest 1e-6 Hz.
    const double span = times.back() - times.front();
    out.sample_rate = std::round(1e6 * static_cast<double>(times.size() - 1) / span) / 1e6;
    out.start_time = times[0];
    return out;
}

ForceTrace read_force(const std::filesystem::path& path) {
    auto is = open_in(path);
    return read_force(is);
}

}  // namespace mudecode::io
