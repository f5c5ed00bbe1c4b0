#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "skt/params.hpp"

namespace skt {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

namespace detail {

inline std::string trim(const std::string& s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

inline double to_double(const std::string& key, const std::string& value) {
    try {
        std::size_t used = 0;
        const double v = std::stod(value, &used);
        if (used != value.size()) throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        throw ConfigError("config key '" + key + "' is not a number: '" + value + "'");
    }
}

inline long to_long(const std::string& key, const std::string& value) {
    try {
        std::size_t used = 0;
        const long v = std::stol(value, &used);
        if (used != value.size()) throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        throw ConfigError("config key '" + key + "' is not an integer: '" + value + "'");
    }
}

inline bool to_bool(const std::string& key, const std::string& value) {
    if (value == "true" || value == "yes" || value == "1") return true;
    if (value == "false" || value == "no" || value == "0") return false;
    throw ConfigError("config key '" + key + "' is not a boolean: '" + value + "'");
}

inline std::vector<std::string> split_list(const std::string& value) {
    std::vector<std::string> items;
    std::stringstream ss(value);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) items.push_back(item);
    }
    return items;
}

} // namespace detail

/// Raw parsed form: section -> key -> value. Lines are `key = value`,
/// `[section]` headers, blanks, or `#` comments.
using ConfigMap = std::map<std::string, std::map<std::string, std::string>>;

inline ConfigMap parse_config_text(std::istream& in, const std::string& origin) {
    ConfigMap out;
    std::string section;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') {
                throw ConfigError(origin + ":" + std::to_string(lineno) + ": unterminated section");
            }
            section = detail::trim(line.substr(1, line.size() - 2));
            out[section];
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected key = value");
        }
        const std::string key = detail::trim(line.substr(0, eq));
        const std::string value = detail::trim(line.substr(eq + 1));
        if (key.empty()) {
            throw ConfigError(origin + ":" + std::to_string(lineno) + ": empty key");
        }
        out[section][key] = value;
    }
    return out;
}

inline ConfigMap parse_config_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config: " + path.string());
    return parse_config_text(in, path.string());
}

/// Everything one experiment run needs, with validated invariants.
struct ExperimentConfig {
    int dim = 1;
    double x_min = 0.0, x_max = 1.0;
    double y_min = 0.0, y_max = 1.0;
    int nx = 0, ny = 0;

    SktParams params;

    double dt = 1e-3;
    double t_end = 0.0;
    bool stop_on_steady = true;
    double tol_st = 1e-6;
    int store_every = 1;
    std::optional<double> t_train;

    std::string init_kind = "perturbed";   // perturbed | entropy1d | entropy2d
    double amplitude = 0.01;
    std::uint64_t seed = 1;

    std::string rom_mode = "none";          // none | gpod | ppod
    double tol_ric = 1e-4;
    double tol_pid = 1e-8;
    int oversample = 10;
    int power_iters = 2;

    std::vector<double> sweep_tols;
    std::vector<std::string> sweep_methods;

    std::string out_dir = "out";
    std::vector<double> fields_at;

    void validate() const {
        if (dim != 1 && dim != 2) throw ConfigError("grid.dim must be 1 or 2");
        if (nx < 2) throw ConfigError("grid.nx must be at least 2");
        if (!(x_max > x_min)) throw ConfigError("grid x interval is empty");
        if (dim == 2) {
            if (ny < 2) throw ConfigError("grid.ny must be at least 2");
            if (!(y_max > y_min)) throw ConfigError("grid y interval is empty");
        }
        try {
            params.validate();
        } catch (const std::exception& e) {
            throw ConfigError(std::string("params: ") + e.what());
        }
        if (!(dt > 0.0)) throw ConfigError("time.dt must be positive");
        if (!(t_end > 0.0)) throw ConfigError("time.t_end must be positive");
        if (!(tol_st > 0.0)) throw ConfigError("time.tol_st must be positive");
        if (store_every < 1) throw ConfigError("time.store_every must be at least 1");
        if (t_train) {
            if (!(*t_train > 0.0)) throw ConfigError("time.t_train must be positive");
            if (*t_train > t_end) throw ConfigError("time.t_train must not exceed t_end");
        }
        if (init_kind != "perturbed" && init_kind != "entropy1d" && init_kind != "entropy2d") {
            throw ConfigError("init.kind must be perturbed, entropy1d, or entropy2d");
        }
        if (init_kind == "entropy1d" && dim != 1) throw ConfigError("init.kind entropy1d needs dim = 1");
        if (init_kind == "entropy2d" && dim != 2) throw ConfigError("init.kind entropy2d needs dim = 2");
        if (!(amplitude >= 0.0)) throw ConfigError("init.amplitude must be nonnegative");
        if (rom_mode != "none" && rom_mode != "gpod" && rom_mode != "ppod") {
            throw ConfigError("rom.mode must be none, gpod, or ppod");
        }
        if (!(tol_ric > 0.0)) throw ConfigError("rom.tol_ric must be positive");
        if (!(tol_pid > 0.0)) throw ConfigError("rom.tol_pid must be positive");
        if (oversample < 0) throw ConfigError("rom.oversample must be nonnegative");
        if (power_iters < 0) throw ConfigError("rom.power_iters must be nonnegative");
        for (double tol : sweep_tols) {
            if (!(tol > 0.0)) throw ConfigError("sweep.tols entries must be positive");
        }
        for (const auto& m : sweep_methods) {
            if (m != "gpod" && m != "ppod") throw ConfigError("sweep.methods entries must be gpod or ppod");
        }
        for (double t : fields_at) {
            if (t < 0.0 || t > t_end) throw ConfigError("output.fields_at times must lie in [0, t_end]");
        }
        if (out_dir.empty()) throw ConfigError("output.dir must not be empty");
    }
};

namespace detail {

class SectionReader {
public:
    SectionReader(const ConfigMap& map, const std::string& section) : section_(section) {
        const auto it = map.find(section);
        if (it != map.end()) entries_ = it->second;
    }

    std::optional<std::string> take(const std::string& key) {
        const auto it = entries_.find(key);
        if (it == entries_.end()) return std::nullopt;
        std::string value = it->second;
        entries_.erase(it);
        return value;
    }

    std::string require(const std::string& key) {
        auto v = take(key);
        if (!v) throw ConfigError("missing config key " + section_ + "." + key);
        return *v;
    }

    void finish() const {
        if (!entries_.empty()) {
            throw ConfigError("unknown config key " + section_ + "." + entries_.begin()->first);
        }
    }

private:
    std::string section_;
    std::map<std::string, std::string> entries_;
};

} // namespace detail

inline ExperimentConfig load_experiment_config(const ConfigMap& map) {
    ExperimentConfig c;

    detail::SectionReader grid(map, "grid");
    c.dim = static_cast<int>(detail::to_long("grid.dim", grid.require("dim")));
    c.x_min = detail::to_double("grid.x_min", grid.require("x_min"));
    c.x_max = detail::to_double("grid.x_max", grid.require("x_max"));
    c.nx = static_cast<int>(detail::to_long("grid.nx", grid.require("nx")));
    if (auto v = grid.take("y_min")) c.y_min = detail::to_double("grid.y_min", *v);
    if (auto v = grid.take("y_max")) c.y_max = detail::to_double("grid.y_max", *v);
    if (auto v = grid.take("ny")) c.ny = static_cast<int>(detail::to_long("grid.ny", *v));
    grid.finish();

    detail::SectionReader params(map, "params");
    auto param = [&](const std::string& key) {
        return detail::to_double("params." + key, params.require(key));
    };
    c.params.a1 = param("a1");
    c.params.a2 = param("a2");
    c.params.b1 = param("b1");
    c.params.b2 = param("b2");
    c.params.c1 = param("c1");
    c.params.c2 = param("c2");
    c.params.Gamma = param("Gamma");
    c.params.r1 = param("r1");
    c.params.r2 = param("r2");
    c.params.gamma11 = param("gamma11");
    c.params.gamma12 = param("gamma12");
    c.params.gamma21 = param("gamma21");
    c.params.gamma22 = param("gamma22");
    params.finish();

    detail::SectionReader time(map, "time");
    c.dt = detail::to_double("time.dt", time.require("dt"));
    c.t_end = detail::to_double("time.t_end", time.require("t_end"));
    if (auto v = time.take("stop_on_steady")) c.stop_on_steady = detail::to_bool("time.stop_on_steady", *v);
    if (auto v = time.take("tol_st")) c.tol_st = detail::to_double("time.tol_st", *v);
    if (auto v = time.take("store_every")) c.store_every = static_cast<int>(detail::to_long("time.store_every", *v));
    if (auto v = time.take("t_train")) c.t_train = detail::to_double("time.t_train", *v);
    time.finish();

    detail::SectionReader init(map, "init");
    if (auto v = init.take("kind")) c.init_kind = *v;
    if (auto v = init.take("amplitude")) c.amplitude = detail::to_double("init.amplitude", *v);
    if (auto v = init.take("seed")) {
        c.seed = static_cast<std::uint64_t>(detail::to_long("init.seed", *v));
    }
    init.finish();

    detail::SectionReader rom(map, "rom");
    if (auto v = rom.take("mode")) c.rom_mode = *v;
    if (auto v = rom.take("tol_ric")) c.tol_ric = detail::to_double("rom.tol_ric", *v);
    if (auto v = rom.take("tol_pid")) c.tol_pid = detail::to_double("rom.tol_pid", *v);
    if (auto v = rom.take("oversample")) c.oversample = static_cast<int>(detail::to_long("rom.oversample", *v));
    if (auto v = rom.take("power_iters")) c.power_iters = static_cast<int>(detail::to_long("rom.power_iters", *v));
    rom.finish();

    detail::SectionReader sweep(map, "sweep");
    if (auto v = sweep.take("tols")) {
        for (const auto& item : detail::split_list(*v)) {
            c.sweep_tols.push_back(detail::to_double("sweep.tols", item));
        }
    }
    if (auto v = sweep.take("methods")) c.sweep_methods = detail::split_list(*v);
    sweep.finish();

    detail::SectionReader output(map, "output");
    if (auto v = output.take("dir")) c.out_dir = *v;
    if (auto v = output.take("fields_at")) {
        for (const auto& item : detail::split_list(*v)) {
            c.fields_at.push_back(detail::to_double("output.fields_at", item));
        }
    }
    output.finish();

    for (const auto& [section, entries] : map) {
        if (section != "grid" && section != "params" && section != "time" &&
            section != "init" && section != "rom" && section != "sweep" &&
            section != "output") {
            throw ConfigError("unknown config section [" + section + "]");
        }
        (void)entries;
    }

    c.validate();
    return c;
}

inline ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
    return load_experiment_config(parse_config_file(path));
}

} // namespace skt
