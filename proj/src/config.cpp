#include "v2g/config.hpp"

#include <fstream>
#include <sstream>

namespace v2g {

namespace {

std::string trim(const std::string& s) {
    auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

long to_long(const std::string& key, const std::string& v) {
    try {
        std::size_t pos = 0;
        long out = std::stol(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return out;
    } catch (const std::exception&) {
        throw ConfigError("config: bad integer for " + key + ": " + v);
    }
}

double to_double(const std::string& key, const std::string& v) {
    try {
        std::size_t pos = 0;
        double out = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return out;
    } catch (const std::exception&) {
        throw ConfigError("config: bad number for " + key + ": " + v);
    }
}

}  // namespace

LoadedConfig parse_config(const std::string& text) {
    LoadedConfig cfg;
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
        std::string key = trim(line.substr(0, eq));
        std::string val = trim(line.substr(eq + 1));
        if (key.empty() || val.empty())
            throw ConfigError("config line " + std::to_string(lineno) + ": empty key or value");

        EngineConfig& e = cfg.engine;
        if (key == "pool_size")
            e.pool_size = static_cast<int>(to_long(key, val));
        else if (key == "idle_timeout_ms")
            e.protocol.idle_timeout_ms = to_long(key, val);
        else if (key == "min_rated_kw")
            e.protocol.min_rated_kw = to_double(key, val);
        else if (key == "power_status_period_ms")
            e.schedule.power_status_ms = to_long(key, val);
        else if (key == "reservation_list_period_ms")
            e.schedule.reservation_list_ms = to_long(key, val);
        else if (key == "pricing_period_ms")
            e.schedule.pricing_ms = to_long(key, val);
        else if (key == "load_control_period_ms")
            e.schedule.load_control_ms = to_long(key, val);
        else if (key == "tolerance_fraction")
            e.schedule.tolerance_fraction = to_double(key, val);
        else if (key == "band_halfwidth_kw")
            e.detection.band_halfwidth_kw = to_double(key, val);
        else if (key == "event_range_fraction")
            e.detection.event_range_fraction = to_double(key, val);
        else if (key == "trigger_floor_kw")
            e.detection.trigger_floor_kw = to_double(key, val);
        else if (key == "high_rated_threshold_kw")
            e.detection.high_rated_threshold_kw = to_double(key, val);
        else if (key == "constant_charging_minutes")
            e.detection.constant_charging_ms = to_long(key, val) * 60'000;
        else if (key == "charging_efficiency")
            e.efficiency.eta1 = to_double(key, val);
        else if (key == "discharging_efficiency")
            e.efficiency.eta2 = to_double(key, val);
        else if (key == "transition_table")
            cfg.transition_table_path = val;
        else
            throw ConfigError("config line " + std::to_string(lineno) + ": unknown key " + key);
    }
    if (cfg.engine.pool_size < 1) throw ConfigError("config: pool_size must be >= 1");
    if (cfg.engine.schedule.tolerance_fraction < 0.0 ||
        cfg.engine.schedule.tolerance_fraction >= 1.0)
        throw ConfigError("config: tolerance_fraction must be in [0, 1)");
    if (cfg.engine.schedule.power_status_ms <= 0 ||
        cfg.engine.schedule.reservation_list_ms <= 0 || cfg.engine.schedule.pricing_ms <= 0 ||
        cfg.engine.schedule.load_control_ms <= 0)
        throw ConfigError("config: periods must be positive");
    if (cfg.engine.protocol.idle_timeout_ms <= 0)
        throw ConfigError("config: idle_timeout_ms must be positive");
    if (cfg.engine.detection.band_halfwidth_kw <= 0.0 ||
        cfg.engine.detection.event_range_fraction <= 0.0 ||
        cfg.engine.detection.event_range_fraction >= 1.0)
        throw ConfigError("config: detection band and range must be positive fractions");
    if (!(cfg.engine.efficiency.eta1 > 0.0 && cfg.engine.efficiency.eta1 <= 1.0) ||
        !(cfg.engine.efficiency.eta2 > 0.0 && cfg.engine.efficiency.eta2 <= 1.0))
        throw ConfigError("config: efficiencies must lie in (0, 1]");
    return cfg;
}

LoadedConfig load_config_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw Error("cannot open config file: " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    return parse_config(ss.str());
}

std::string default_config_text() {
    EngineConfig d;
    std::ostringstream out;
    out << "# anomaly detection engine configuration\n";
    out << "pool_size = " << d.pool_size << '\n';
    out << "idle_timeout_ms = " << d.protocol.idle_timeout_ms << '\n';
    out << "min_rated_kw = " << d.protocol.min_rated_kw << '\n';
    out << "power_status_period_ms = " << d.schedule.power_status_ms << '\n';
    out << "reservation_list_period_ms = " << d.schedule.reservation_list_ms << '\n';
    out << "pricing_period_ms = " << d.schedule.pricing_ms << '\n';
    out << "load_control_period_ms = " << d.schedule.load_control_ms << '\n';
    out << "tolerance_fraction = " << d.schedule.tolerance_fraction << '\n';
    out << "band_halfwidth_kw = " << d.detection.band_halfwidth_kw << '\n';
    out << "event_range_fraction = " << d.detection.event_range_fraction << '\n';
    out << "trigger_floor_kw = " << d.detection.trigger_floor_kw << '\n';
    out << "high_rated_threshold_kw = " << d.detection.high_rated_threshold_kw << '\n';
    out << "constant_charging_minutes = " << d.detection.constant_charging_ms / 60'000 << '\n';
    out << "charging_efficiency = " << d.efficiency.eta1 << '\n';
    out << "discharging_efficiency = " << d.efficiency.eta2 << '\n';
    return out.str();
}

TransitionTable resolve_table(const LoadedConfig& cfg) {
    if (cfg.transition_table_path) return TransitionTable::from_file(*cfg.transition_table_path);
    return TransitionTable::standard();
}

}  // namespace v2g
