#ifndef V2G_CONFIG_HPP
#define V2G_CONFIG_HPP

#include <optional>
#include <string>

#include "v2g/engine.hpp"

namespace v2g {

// Engine configuration as loaded from a "key = value" file ('#' comments).
// Recognized keys:
//   pool_size, idle_timeout_ms, min_rated_kw,
//   power_status_period_ms, reservation_list_period_ms, pricing_period_ms,
//   load_control_period_ms, tolerance_fraction,
//   band_halfwidth_kw, event_range_fraction, trigger_floor_kw,
//   high_rated_threshold_kw, constant_charging_minutes,
//   charging_efficiency, discharging_efficiency,
//   transition_table (path to a phase/kind/next-phase triple file)
// Unknown keys are rejected.
struct LoadedConfig {
    EngineConfig engine;
    std::optional<std::string> transition_table_path;
};

LoadedConfig parse_config(const std::string& text);
LoadedConfig load_config_file(const std::string& path);
std::string default_config_text();

// The engine with the table resolved (default table when none configured).
TransitionTable resolve_table(const LoadedConfig& cfg);

}  // namespace v2g

#endif  // V2G_CONFIG_HPP
