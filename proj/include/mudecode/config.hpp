#pragma once

// Plain-text key-value configuration:
//
//   # comment
//   key = value
//
// Keys are dotted paths (core.0.neuron.V_T, train.epochs, ...). Later
// assignments and CLI overrides replace earlier ones.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mudecode/substrate.hpp"

namespace mudecode {

class ConfigMap {
public:
    static ConfigMap parse(std::istream& is);
    static ConfigMap load(const std::filesystem::path& path);

    /// Applies "key=value".
    void set(const std::string& assignment);
    void set(const std::string& key, const std::string& value) { values_[key] = value; }

    bool has(const std::string& key) const { return values_.contains(key); }
    std::optional<std::string> find(const std::string& key) const;

    std::string get_string(const std::string& key, const std::string& fallback) const;
    double get_double(const std::string& key, double fallback) const;
    long long get_int(const std::string& key, long long fallback) const;
    std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;
    bool get_bool(const std::string& key, bool fallback) const;
    std::vector<int> get_int_list(const std::string& key, std::vector<int> fallback) const;

    const std::map<std::string, std::string>& entries() const { return values_; }

private:
    std::map<std::string, std::string> values_;
};

namespace substrate {

struct SubstrateConfig {
    double dt = kDefaultDt;
    std::vector<CoreConfig> cores;

    const CoreConfig& core(int core_id) const;
};

/// Defaults for core N: 20 neurons, mismatch 0.1, membrane noise 0.3, seed
/// 1000 + N. Core 1 hosts the extension population and doubles the AMPA gain.
CoreConfig default_core(int core_id);

/// Reads `dt` and every `core.N.*` key. Cores 0 and 1 always exist; other
/// cores appear when any of their keys is set.
SubstrateConfig load_substrate_config(const ConfigMap& cfg);

void write_substrate_config(std::ostream& os, const SubstrateConfig& sc);

}  // namespace substrate

}  // namespace mudecode
