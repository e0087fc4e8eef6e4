#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mgv/ecus.hpp"
#include "mgv/signals.hpp"
#include "mgv/threats.hpp"
#include "mgv/vehicle.hpp"

namespace mgv {

struct OutputPaths {
    std::string csv;
    std::string canlog;
    std::string summary;
};

// A fully loaded experiment description: the schema-checked config plus the
// dictionary, vehicle and route files it references (loaded eagerly so
// missing files fail at load time).
struct ScenarioConfig {
    double duration_s = 800.0;
    double dt = 0.01;
    uint64_t seed = 1;
    int route_id = 1;

    std::string vehicle_file;
    std::string signals_file;
    std::string route_file;
    OutputPaths outputs;

    FanControllerConfig fan;
    std::string fan_watchdog = "internal";  // internal | off
    double chassis_cadence_s = 0.1;
    double sensor_cadence_s = 0.1;  // vehicle state emission onto the chassis bus

    std::vector<AttackSpec> attacks;
    std::vector<DefenseSpec> defenses;

    bool textlink_enabled = false;
    uint16_t textlink_port = 0;

    SignalDictionary dict;
    VehicleParams vehicle;
    Route route;

    std::string base_dir;
    std::string canonical_json;  // normalized config used for the config hash
};

ScenarioConfig load_scenario(const std::string& path);
ScenarioConfig scenario_from_json_text(const std::string& text, const std::string& origin,
                                       const std::string& base_dir);

// Copy with every attack removed (the `baseline` subcommand).
ScenarioConfig strip_attacks(const ScenarioConfig& config);

// FNV-1a over the canonical serialization, as a 16-digit hex string.
std::string config_hash(const ScenarioConfig& config);

}  // namespace mgv
