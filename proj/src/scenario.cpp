#include "mgv/scenario.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "json_util.hpp"
#include "mgv/rng.hpp"

namespace mgv {

namespace fs = std::filesystem;
using detail::json;
using ordered_json = nlohmann::ordered_json;

namespace {

std::string resolve(const std::string& base_dir, const std::string& path) {
    fs::path p(path);
    if (p.is_absolute() || base_dir.empty()) return p.lexically_normal().string();
    return (fs::path(base_dir) / p).lexically_normal().string();
}

std::vector<uint16_t> parse_id_list(const json& j, const std::string& context) {
    std::vector<uint16_t> ids;
    if (!j.is_array()) throw ConfigError(context + ": 'ids' must be an array");
    for (const auto& item : j) {
        if (item.is_string())
            ids.push_back(parse_frame_id(item.get<std::string>()));
        else if (item.is_number_integer() || item.is_number_unsigned())
            ids.push_back(uint16_t(item.get<int>()));
        else
            throw ConfigError(context + ": ids are numbers or hex strings");
    }
    if (ids.empty()) throw ConfigError(context + ": empty id list");
    return ids;
}

AttackSpec parse_attack(const json& j, const SignalDictionary& dict, size_t index) {
    const std::string context = "attack[" + std::to_string(index) + "]";
    detail::check_keys(j,
                       {"kind", "start", "stop", "bus", "period_s", "payload", "at", "ids",
                        "signal", "mode", "value", "target", "label"},
                       context);
    AttackSpec spec;
    const std::string kind = detail::require<std::string>(j, "kind", context);
    spec.start = detail::get_or<double>(j, "start", 0.0, context);
    if (j.contains("stop")) spec.stop = j.at("stop").get<double>();
    if (spec.stop && *spec.stop <= spec.start)
        throw ConfigError(context + ": stop must be after start");
    spec.label = detail::get_or<std::string>(j, "label", kind + std::to_string(index), context);

    if (kind == "inject") {
        spec.kind = AttackSpec::Kind::kInject;
        spec.bus = detail::require<std::string>(j, "bus", context);
        spec.period_s = detail::get_or<double>(j, "period_s", 0.1, context);
        if (spec.period_s <= 0) throw ConfigError(context + ": period_s must be positive");
        if (!j.contains("payload")) throw ConfigError(context + ": inject needs a payload");
        const json& jp = j.at("payload");
        detail::check_keys(jp, {"signal", "value", "id", "data"}, context + " payload");
        if (jp.contains("signal")) {
            const SignalDef& def = dict.signal(jp.at("signal").get<std::string>());
            CanFrame frame = dict.blank_frame(def);
            spec.payload = encode_signal(def, detail::require<double>(jp, "value", context), frame);
        } else {
            spec.payload.id = parse_frame_id(detail::require<std::string>(jp, "id", context));
            const std::string hex = detail::get_or<std::string>(jp, "data", "", context);
            if (hex.size() % 2 != 0 || hex.size() > 16)
                throw ConfigError(context + ": payload data must be 0..8 hex byte pairs");
            spec.payload.dlc = uint8_t(hex.size() / 2);
            for (size_t i = 0; i < spec.payload.dlc; ++i)
                spec.payload.data[i] =
                    uint8_t(std::stoul(hex.substr(2 * i, 2), nullptr, 16));
        }
    } else if (kind == "block") {
        spec.kind = AttackSpec::Kind::kBlock;
        spec.at_tap = detail::require<std::string>(j, "at", context);
        spec.target_ids = parse_id_list(j.at("ids"), context);
    } else if (kind == "modify") {
        spec.kind = AttackSpec::Kind::kModify;
        spec.at_tap = detail::require<std::string>(j, "at", context);
        const std::string signal = detail::require<std::string>(j, "signal", context);
        if (!dict.has_signal(signal))
            throw ConfigError(context + ": modify targets unmapped signal '" + signal + "'");
        spec.modify_signal = dict.signal(signal);
        spec.modify_dlc = dict.frame(spec.modify_signal.frame_id).dlc;
        const std::string mode = detail::get_or<std::string>(j, "mode", "set", context);
        if (mode == "set")
            spec.modify_mode = AttackSpec::ModifyMode::kSet;
        else if (mode == "add")
            spec.modify_mode = AttackSpec::ModifyMode::kAdd;
        else if (mode == "identity")
            spec.modify_mode = AttackSpec::ModifyMode::kIdentity;
        else
            throw ConfigError(context + ": modify mode must be set|add|identity");
        spec.modify_value = detail::get_or<double>(j, "value", 0.0, context);
    } else if (kind == "firmware") {
        spec.kind = AttackSpec::Kind::kFirmware;
        spec.target_ecu = detail::require<std::string>(j, "target", context);
    } else {
        throw ConfigError(context + ": unknown attack kind '" + kind + "'");
    }
    return spec;
}

DefenseSpec parse_defense(const json& j, const SignalDictionary& dict, size_t index) {
    const std::string context = "defense[" + std::to_string(index) + "]";
    detail::check_keys(j,
                       {"kind", "key", "ids", "apply_at", "verify_at", "drop_on_reject", "at",
                        "signal", "window_s", "tolerance", "target", "label"},
                       context);
    DefenseSpec spec;
    const std::string kind = detail::require<std::string>(j, "kind", context);
    spec.label = detail::get_or<std::string>(j, "label", kind + std::to_string(index), context);

    if (kind == "watermark") {
        spec.kind = DefenseSpec::Kind::kWatermark;
        spec.key = detail::require<uint64_t>(j, "key", context);
        spec.ids = parse_id_list(j.at("ids"), context);
        spec.apply_at = detail::require<std::string>(j, "apply_at", context);
        spec.verify_at = detail::require<std::string>(j, "verify_at", context);
        spec.drop_on_reject = detail::get_or<bool>(j, "drop_on_reject", true, context);
        for (uint16_t id : spec.ids)
            if (!dict.frame(id).watermark_start)
                throw ConfigError(context + ": frame " + std::to_string(id) +
                                  " has no designated watermark bits");
    } else if (kind == "plausibility") {
        spec.kind = DefenseSpec::Kind::kPlausibility;
        spec.at_tap = detail::require<std::string>(j, "at", context);
        spec.signal = detail::require<std::string>(j, "signal", context);
        if (!dict.has_signal(spec.signal))
            throw ConfigError(context + ": plausibility watches unknown signal '" +
                              spec.signal + "'");
        spec.window_s = detail::get_or<double>(j, "window_s", 5.0, context);
        spec.tolerance = detail::require<double>(j, "tolerance", context);
        if (spec.tolerance <= 0) throw ConfigError(context + ": tolerance must be positive");
        if (spec.window_s <= 0) throw ConfigError(context + ": window_s must be positive");
    } else if (kind == "reflash_responder") {
        spec.kind = DefenseSpec::Kind::kReflashResponder;
        spec.target_ecu = detail::require<std::string>(j, "target", context);
    } else {
        throw ConfigError(context + ": unknown defense kind '" + kind + "'");
    }
    return spec;
}

}  // namespace

ScenarioConfig load_scenario(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open scenario '" + path + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    return scenario_from_json_text(buf.str(), path, fs::path(path).parent_path().string());
}

ScenarioConfig scenario_from_json_text(const std::string& text, const std::string& origin,
                                       const std::string& base_dir) {
    json root;
    try {
        root = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(origin + ": " + e.what());
    }
    detail::check_keys(root,
                       {"duration", "dt", "seed", "route", "routes_dir", "vehicle", "signals",
                        "outputs", "ecus", "attacks", "defenses", "textlink"},
                       origin);

    ScenarioConfig cfg;
    cfg.base_dir = base_dir;
    cfg.duration_s = detail::get_or<double>(root, "duration", 800.0, origin);
    if (cfg.duration_s <= 0) throw ConfigError(origin + ": duration must be positive");
    cfg.dt = detail::get_or<double>(root, "dt", 0.01, origin);
    if (cfg.dt <= 0 || cfg.dt > cfg.duration_s)
        throw ConfigError(origin + ": dt must be positive and at most the duration");
    cfg.seed = detail::get_or<uint64_t>(root, "seed", 1, origin);
    cfg.route_id = detail::get_or<int>(root, "route", 1, origin);
    if (cfg.route_id < 1 || cfg.route_id > 5)
        throw ConfigError(origin + ": route must be 1..5");

    const std::string routes_dir =
        resolve(base_dir, detail::get_or<std::string>(root, "routes_dir", "routes", origin));
    cfg.route_file = routes_dir + "/route" + std::to_string(cfg.route_id) + ".json";
    cfg.vehicle_file = resolve(
        base_dir, detail::get_or<std::string>(root, "vehicle", "vehicle_default.json", origin));
    cfg.signals_file = resolve(
        base_dir, detail::get_or<std::string>(root, "signals", "signals_default.json", origin));

    if (root.contains("outputs")) {
        const json& jo = root.at("outputs");
        detail::check_keys(jo, {"csv", "canlog", "summary"}, origin + " outputs");
        cfg.outputs.csv = resolve(base_dir, detail::get_or<std::string>(jo, "csv", "run.csv", origin));
        cfg.outputs.canlog =
            resolve(base_dir, detail::get_or<std::string>(jo, "canlog", "run.log", origin));
        cfg.outputs.summary = resolve(
            base_dir, detail::get_or<std::string>(jo, "summary", "run_summary.json", origin));
    } else {
        cfg.outputs.csv = resolve(base_dir, "run.csv");
        cfg.outputs.canlog = resolve(base_dir, "run.log");
        cfg.outputs.summary = resolve(base_dir, "run_summary.json");
    }

    if (root.contains("ecus")) {
        const json& je = root.at("ecus");
        detail::check_keys(je, {"fan_controller", "chassis", "sensors"}, origin + " ecus");
        if (je.contains("fan_controller")) {
            const json& jf = je.at("fan_controller");
            detail::check_keys(jf,
                               {"upper_c", "lower_c", "cadence_s", "reflash_outage_s",
                                "watchdog_base_s", "watchdog_jitter_s", "watchdog_margin_c",
                                "warmup_min_time_s", "watchdog"},
                               origin + " fan_controller");
            cfg.fan.upper_c = detail::get_or<double>(jf, "upper_c", 103.0, origin);
            cfg.fan.lower_c = detail::get_or<double>(jf, "lower_c", 85.0, origin);
            cfg.fan.emit_period_s = detail::get_or<double>(jf, "cadence_s", 1.0, origin);
            cfg.fan.reflash_outage_s =
                detail::get_or<double>(jf, "reflash_outage_s", 20.0, origin);
            cfg.fan.watchdog_base_s =
                detail::get_or<double>(jf, "watchdog_base_s", 100.0, origin);
            cfg.fan.watchdog_jitter_s =
                detail::get_or<double>(jf, "watchdog_jitter_s", 10.0, origin);
            cfg.fan.watchdog_margin_c =
                detail::get_or<double>(jf, "watchdog_margin_c", 5.0, origin);
            cfg.fan.warmup_min_time_s =
                detail::get_or<double>(jf, "warmup_min_time_s", 0.0, origin);
            cfg.fan_watchdog = detail::get_or<std::string>(jf, "watchdog", "internal", origin);
            if (cfg.fan_watchdog != "internal" && cfg.fan_watchdog != "off")
                throw ConfigError(origin + ": fan watchdog must be internal|off");
            if (cfg.fan.lower_c >= cfg.fan.upper_c)
                throw ConfigError(origin + ": fan lower threshold must be below the upper");
        }
        if (je.contains("chassis")) {
            const json& jc = je.at("chassis");
            detail::check_keys(jc, {"cadence_s"}, origin + " chassis");
            cfg.chassis_cadence_s = detail::get_or<double>(jc, "cadence_s", 0.1, origin);
            if (cfg.chassis_cadence_s <= 0)
                throw ConfigError(origin + ": chassis cadence must be positive");
        }
        if (je.contains("sensors")) {
            const json& js = je.at("sensors");
            detail::check_keys(js, {"cadence_s"}, origin + " sensors");
            cfg.sensor_cadence_s = detail::get_or<double>(js, "cadence_s", 0.1, origin);
            if (cfg.sensor_cadence_s <= 0)
                throw ConfigError(origin + ": sensor cadence must be positive");
        }
    }
    cfg.fan.watchdog_enabled = cfg.fan_watchdog == "internal";

    if (root.contains("textlink")) {
        const json& jt = root.at("textlink");
        detail::check_keys(jt, {"enabled", "port"}, origin + " textlink");
        cfg.textlink_enabled = detail::get_or<bool>(jt, "enabled", false, origin);
        cfg.textlink_port = uint16_t(detail::get_or<int>(jt, "port", 0, origin));
    }

    // referenced files load now so problems surface at load time
    cfg.dict = SignalDictionary::load(cfg.signals_file);
    cfg.vehicle = VehicleParams::load(cfg.vehicle_file);
    cfg.route = Route::load(cfg.route_file);

    if (root.contains("attacks")) {
        size_t i = 0;
        for (const auto& ja : root.at("attacks")) cfg.attacks.push_back(parse_attack(ja, cfg.dict, i++));
    }
    if (root.contains("defenses")) {
        size_t i = 0;
        for (const auto& jd : root.at("defenses"))
            cfg.defenses.push_back(parse_defense(jd, cfg.dict, i++));
    }

    // canonical form: normalized values in a fixed key order
    ordered_json canon;
    canon["duration"] = cfg.duration_s;
    canon["dt"] = cfg.dt;
    canon["seed"] = cfg.seed;
    canon["route"] = cfg.route_id;
    canon["vehicle"] = cfg.vehicle_file;
    canon["signals"] = cfg.signals_file;
    canon["fan"] = {{"upper_c", cfg.fan.upper_c},
                    {"lower_c", cfg.fan.lower_c},
                    {"cadence_s", cfg.fan.emit_period_s},
                    {"reflash_outage_s", cfg.fan.reflash_outage_s},
                    {"watchdog_base_s", cfg.fan.watchdog_base_s},
                    {"watchdog_jitter_s", cfg.fan.watchdog_jitter_s},
                    {"watchdog_margin_c", cfg.fan.watchdog_margin_c},
                    {"warmup_min_time_s", cfg.fan.warmup_min_time_s},
                    {"watchdog", cfg.fan_watchdog}};
    canon["chassis_cadence_s"] = cfg.chassis_cadence_s;
    canon["sensor_cadence_s"] = cfg.sensor_cadence_s;
    canon["attacks"] = root.contains("attacks") ? root.at("attacks") : json::array();
    canon["defenses"] = root.contains("defenses") ? root.at("defenses") : json::array();
    cfg.canonical_json = canon.dump();

    return cfg;
}

ScenarioConfig strip_attacks(const ScenarioConfig& config) {
    ScenarioConfig out = config;
    out.attacks.clear();
    // the canonical form must reflect the stripped config
    ordered_json canon = ordered_json::parse(config.canonical_json);
    canon["attacks"] = json::array();
    out.canonical_json = canon.dump();
    return out;
}

std::string config_hash(const ScenarioConfig& config) {
    const uint64_t h = Rng::fnv1a(config.canonical_json);
    char buf[17];
    snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return std::string(buf);
}

}  // namespace mgv
