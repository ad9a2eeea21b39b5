#include "mudecode/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>

#include "mudecode/errors.hpp"

namespace mudecode {

namespace {

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

template <typename T>
T parse_as(const std::string& key, const std::string& text) {
    T v{};
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc{} || ptr != text.data() + text.size()) {
        throw ValidationError("config: cannot parse " + key + " = '" + text + "'");
    }
    return v;
}

}  // namespace

ConfigMap ConfigMap::parse(std::istream& is) {
    ConfigMap cfg;
    std::string line;
    int line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        const auto hash = line.find('#');
        const std::string body = trim(std::string_view(line).substr(0, hash));
        if (body.empty()) continue;
        const auto eq = body.find('=');
        if (eq == std::string::npos) {
            throw ValidationError("config line " + std::to_string(line_no) + ": expected 'key = value'");
        }
        const std::string key = trim(std::string_view(body).substr(0, eq));
        if (key.empty()) throw ValidationError("config line " + std::to_string(line_no) + ": empty key");
        cfg.values_[key] = trim(std::string_view(body).substr(eq + 1));
    }
    return cfg;
}

ConfigMap ConfigMap::load(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw ValidationError("cannot open config " + path.string());
    return parse(is);
}

void ConfigMap::set(const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos) throw ValidationError("override '" + assignment + "': expected key=value");
    const std::string key = trim(std::string_view(assignment).substr(0, eq));
    if (key.empty()) throw ValidationError("override '" + assignment + "': empty key");
    values_[key] = trim(std::string_view(assignment).substr(eq + 1));
}

std::optional<std::string> ConfigMap::find(const std::string& key) const {
    const auto it = values_.find(key);
    if (it == values_.end()) return std::nullopt;
    return it->second;
}

std::string ConfigMap::get_string(const std::string& key, const std::string& fallback) const {
    return find(key).value_or(fallback);
}

double ConfigMap::get_double(const std::string& key, double fallback) const {
    const auto v = find(key);
    return v ? parse_as<double>(key, *v) : fallback;
}

long long ConfigMap::get_int(const std::string& key, long long fallback) const {
    const auto v = find(key);
    return v ? parse_as<long long>(key, *v) : fallback;
}

std::uint64_t ConfigMap::get_u64(const std::string& key, std::uint64_t fallback) const {
    const auto v = find(key);
    return v ? parse_as<std::uint64_t>(key, *v) : fallback;
}

bool ConfigMap::get_bool(const std::string& key, bool fallback) const {
    const auto v = find(key);
    if (!v) return fallback;
    std::string s = *v;
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
    if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
    if (s == "false" || s == "0" || s == "no" || s == "off") return false;
    throw ValidationError("config: " + key + " must be a boolean");
}

std::vector<int> ConfigMap::get_int_list(const std::string& key, std::vector<int> fallback) const {
    const auto v = find(key);
    if (!v) return fallback;
    std::vector<int> out;
    std::stringstream ss(*v);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(parse_as<int>(key, item));
    }
    return out;
}

namespace substrate {

CoreConfig default_core(int core_id) {
    CoreConfig c;
    c.core_id = core_id;
    c.n_neurons = 20;
    c.mismatch_sigma = 0.1;
    c.noise_current_sigma = 0.3;
    c.seed = 1000 + static_cast<std::uint64_t>(core_id);
    // The extension population sees fewer MUs (grids 3-4), so its core runs
    // with twice the AMPA gain to reach the same peak rate within k.
    if (core_id == 1) c.synapse[SynapseType::ampa].gain *= 2.0;
    return c;
}

const CoreConfig& SubstrateConfig::core(int core_id) const {
    for (const auto& c : cores) {
        if (c.core_id == core_id) return c;
    }
    throw ValidationError("substrate config: no core " + std::to_string(core_id));
}

namespace {

struct NeuronField {
    const char* name;
    double NeuronParams::*member;
};

constexpr NeuronField kNeuronFields[] = {
    {"C", &NeuronParams::C},         {"g_L", &NeuronParams::g_L},         {"E_L", &NeuronParams::E_L},
    {"V_T", &NeuronParams::V_T},     {"Delta_T", &NeuronParams::Delta_T}, {"V_peak", &NeuronParams::V_peak},
    {"V_reset", &NeuronParams::V_reset}, {"a", &NeuronParams::a},         {"b", &NeuronParams::b},
    {"tau_w", &NeuronParams::tau_w}, {"refractory", &NeuronParams::refractory},
};

CoreConfig read_core(const ConfigMap& cfg, int id) {
    const std::string p = "core." + std::to_string(id) + ".";
    CoreConfig c = default_core(id);
    c.n_neurons = static_cast<int>(cfg.get_int(p + "n_neurons", c.n_neurons));
    c.mismatch_sigma = cfg.get_double(p + "mismatch_sigma", c.mismatch_sigma);
    c.noise_current_sigma = cfg.get_double(p + "noise_current_sigma", c.noise_current_sigma);
    c.seed = cfg.get_u64(p + "seed", c.seed);
    for (const auto& f : kNeuronFields) c.neuron.*f.member = cfg.get_double(p + "neuron." + f.name, c.neuron.*f.member);
    for (std::size_t k = 0; k < kNumSynapseTypes; ++k) {
        const std::string sp = p + "synapse." + std::string(to_string(static_cast<SynapseType>(k))) + ".";
        c.synapse.types[k].tau = cfg.get_double(sp + "tau", c.synapse.types[k].tau);
        c.synapse.types[k].gain = cfg.get_double(sp + "gain", c.synapse.types[k].gain);
    }
    c.validate();
    return c;
}

}  // namespace

SubstrateConfig load_substrate_config(const ConfigMap& cfg) {
    SubstrateConfig sc;
    sc.dt = cfg.get_double("dt", kDefaultDt);
    if (!(sc.dt > 0.0 && sc.dt <= kMaxDt)) throw ValidationError("substrate config: dt must lie in (0, 0.5 ms]");
    std::set<int> ids{0, 1};
    for (const auto& [key, value] : cfg.entries()) {
        if (key.rfind("core.", 0) != 0) continue;
        const auto dot = key.find('.', 5);
        const std::string id_text = key.substr(5, dot == std::string::npos ? std::string::npos : dot - 5);
        int id = -1;
        const auto [ptr, ec] = std::from_chars(id_text.data(), id_text.data() + id_text.size(), id);
        if (ec != std::errc{} || ptr != id_text.data() + id_text.size() || id < 0 || id >= kMaxCores) {
            throw ValidationError("substrate config: bad core key '" + key + "'");
        }
        ids.insert(id);
    }
    for (int id : ids) sc.cores.push_back(read_core(cfg, id));
    return sc;
}

void write_substrate_config(std::ostream& os, const SubstrateConfig& sc) {
    char buf[64];
    auto num = [&](double v) {
        std::snprintf(buf, sizeof buf, "%.17g", v);
        return std::string(buf);
    };
    os << "dt = " << num(sc.dt) << '\n';
    for (const auto& c : sc.cores) {
        const std::string p = "core." + std::to_string(c.core_id) + ".";
        os << p << "n_neurons = " << c.n_neurons << '\n';
        os << p << "mismatch_sigma = " << num(c.mismatch_sigma) << '\n';
        os << p << "noise_current_sigma = " << num(c.noise_current_sigma) << '\n';
        os << p << "seed = " << c.seed << '\n';
        for (const auto& f : kNeuronFields) os << p << "neuron." << f.name << " = " << num(c.neuron.*f.member) << '\n';
        for (std::size_t k = 0; k < kNumSynapseTypes; ++k) {
            const std::string sp = p + "synapse." + std::string(to_string(static_cast<SynapseType>(k))) + ".";
            os << sp << "tau = " << num(c.synapse.types[k].tau) << '\n';
            os << sp << "gain = " << num(c.synapse.types[k].gain) << '\n';
        }
    }
}

}  // namespace substrate

}  // namespace mudecode
