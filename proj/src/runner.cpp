#include "mgv/runner.hpp"

#include <charconv>
#include <cmath>
#include <deque>
#include <filesystem>
#include <fstream>
#include <memory>
#include <sstream>
#include <tuple>

#include "json_util.hpp"
#include "mgv/gateway.hpp"
#include "mgv/rng.hpp"
#include "mgv/textlink.hpp"
#include "mgv/threats.hpp"
#include "mgv/vbus.hpp"

namespace mgv {

namespace fs = std::filesystem;

namespace {

std::string fixed(double v, int decimals) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::fixed,
                                   decimals);
    return std::string(buf, res.ptr);
}

void ensure_parent_dir(const std::string& path) {
    const fs::path parent = fs::path(path).parent_path();
    if (!parent.empty()) fs::create_directories(parent);
}

// Latest actuation values decoded from the gateway's SimToVis lines. Values
// hold between messages (no actuator-side timeout: a starved fan input
// freezes in its last state).
struct ActuationMailbox {
    double throttle = 0.0;
    double brake = 0.0;
    bool fan_on = false;

    void apply(const std::string& parameter, double value) {
        if (parameter == "spn91")
            throttle = value;
        else if (parameter == "brake")
            brake = value;
        else if (parameter == "fan_control")
            fan_on = value >= 0.5;
    }
};

struct ParsedTuple {
    double ts;
    std::string parameter;
    double value;
};

ParsedTuple parse_tuple(const std::string& line) {
    const size_t c1 = line.find(',');
    const size_t c2 = c1 == std::string::npos ? std::string::npos : line.find(',', c1 + 1);
    if (c2 == std::string::npos)
        throw GatewayError("malformed tuple: '" + line + "'");
    ParsedTuple t;
    t.parameter = line.substr(c1 + 1, c2 - c1 - 1);
    const char* p = line.data();
    auto r1 = std::from_chars(p, p + c1, t.ts);
    auto r2 = std::from_chars(p + c2 + 1, p + line.size(), t.value);
    if (r1.ec != std::errc() || r2.ec != std::errc())
        throw GatewayError("malformed tuple: '" + line + "'");
    return t;
}

// The full wiring of one experiment: two buses, the virtual ECUs, the
// gateway, threat/defense plugins, the automated driver and the vehicle.
class Simulation {
  public:
    explicit Simulation(const ScenarioConfig& cfg)
        : cfg_(cfg),
          pt_("pt"),
          ch_("ch"),
          gateway_(GatewayMapping::from_dictionary(cfg.dict)),
          chassis_({cfg.chassis_cadence_s}, cfg.dict.signal("accelerator_pedal"),
                   cfg.dict.signal("brake_pedal"), cfg.dict.signal("steering_position"),
                   cfg.dict.frame(cfg.dict.signal("accelerator_pedal").frame_id).dlc,
                   cfg.dict.frame(cfg.dict.signal("brake_pedal").frame_id).dlc,
                   cfg.dict.frame(cfg.dict.signal("steering_position").frame_id).dlc),
          powertrain_(make_powertrain_mappings(cfg.dict)),
          fan_(cfg.fan, cfg.dict.signal("fan_control"),
               cfg.dict.frame(cfg.dict.signal("fan_control").frame_id).dlc,
               Rng(cfg.seed, "fan_watchdog")) {
        wire();
    }

    RunArtifacts execute();

  private:
    static std::vector<PowertrainEcu::Mapping> make_powertrain_mappings(
        const SignalDictionary& dict) {
        std::vector<PowertrainEcu::Mapping> maps;
        PowertrainEcu::Mapping throttle;
        throttle.input = dict.signal("accelerator_pedal");
        throttle.output = dict.signal("engine_throttle");
        throttle.output_dlc = dict.frame(throttle.output.frame_id).dlc;
        maps.push_back(throttle);
        PowertrainEcu::Mapping brake;
        brake.input = dict.signal("brake_pedal");
        brake.output = dict.signal("engine_brake");
        brake.output_dlc = dict.frame(brake.output.frame_id).dlc;
        maps.push_back(brake);
        return maps;
    }

    void wire();
    void install_filters();
    void apply_firmware_events(double now);
    void log_frame(const TimedFrame& tf);
    void drain_gateway(double now);
    Bus* find_bus_of_tap(const std::string& tap, TapId* out_tap);

    const ScenarioConfig& cfg_;
    Bus pt_;
    Bus ch_;
    Gateway gateway_;
    ChassisEcu chassis_;
    PowertrainEcu powertrain_;
    FanController fan_;
    PidController pid_;
    VehicleState vehicle_state_;
    ActuationMailbox mailbox_;

    TapId chassis_tap_ = 0, powertrain_tap_ = 0, fan_tap_ = 0;
    TapId logger_pt_tap_ = 0, logger_ch_tap_ = 0;
    std::map<std::string, std::pair<Bus*, TapId>> taps_by_name_;

    std::optional<double> pending_temp_;
    std::vector<std::pair<TapId, std::unique_ptr<InjectPlugin>>> injectors_;
    std::vector<std::unique_ptr<WatermarkChannel>> watermarks_;
    std::vector<std::unique_ptr<PlausibilityFilter>> plausibility_;
    std::map<std::pair<Bus*, TapId>, FilterChain> ingress_chains_;
    std::map<std::pair<Bus*, TapId>, FilterChain> egress_chains_;
    std::map<std::string, std::unique_ptr<uint64_t>> counters_;

    // detached bonware responder state
    std::unique_ptr<WatchdogLogic> bonware_;
    std::optional<double> bonware_temp_;
    bool bonware_fan_cmd_ = false;
    bool bonware_warmed_ = false;

    std::ofstream canlog_;
    uint64_t frames_logged_ = 0;

    TextLinkServer textlink_;
    bool textlink_on_ = false;
};

uint64_t* counter_slot(std::map<std::string, std::unique_ptr<uint64_t>>& counters,
                             const std::string& key) {
    auto& slot = counters[key];
    if (!slot) slot = std::make_unique<uint64_t>(0);
    return slot.get();
}

void Simulation::wire() {
    const SignalDef& coolant = cfg_.dict.signal("coolant_temp");
    const SignalDef& fan_signal = cfg_.dict.signal("fan_control");

    // powertrain bus: chassis-style inputs, engine responses, gateway, log
    chassis_tap_ = pt_.attach_tap("chassis_ecu");
    powertrain_tap_ = pt_.attach_tap("powertrain_ecu", [this](const TimedFrame& tf) {
        for (const CanFrame& f : powertrain_.on_frame(tf, tf.timestamp))
            pt_.publish(powertrain_tap_, f, tf.timestamp);
    });
    const TapId gateway_pt_tap = gateway_.attach(pt_, "gateway_pt");
    logger_pt_tap_ = pt_.attach_tap("logger_pt", [this](const TimedFrame& tf) { log_frame(tf); });

    // chassis bus: vehicle sensor frames, fan controller, gateway, log
    const TapId gateway_ch_tap = gateway_.attach(ch_, "gateway_ch");
    fan_tap_ = ch_.attach_tap("fan_controller", [this, coolant](const TimedFrame& tf) {
        if (tf.frame.id == coolant.frame_id)
            pending_temp_ = decode_signal(coolant, tf.frame);
    });
    logger_ch_tap_ = ch_.attach_tap("logger_ch", [this](const TimedFrame& tf) { log_frame(tf); });

    taps_by_name_ = {
        {"chassis_ecu", {&pt_, chassis_tap_}},
        {"powertrain_ecu", {&pt_, powertrain_tap_}},
        {"gateway_pt", {&pt_, gateway_pt_tap}},
        {"logger_pt", {&pt_, logger_pt_tap_}},
        {"gateway_ch", {&ch_, gateway_ch_tap}},
        {"fan_controller", {&ch_, fan_tap_}},
        {"logger_ch", {&ch_, logger_ch_tap_}},
    };

    // attack taps
    for (const AttackSpec& spec : cfg_.attacks) {
        if (spec.kind != AttackSpec::Kind::kInject) continue;
        Bus* bus = spec.bus == "pt" ? &pt_ : spec.bus == "ch" ? &ch_ : nullptr;
        if (!bus) throw ConfigError("inject attack '" + spec.label + "': unknown bus '" +
                                    spec.bus + "'");
        const TapId tap = bus->attach_tap("attack:" + spec.label);
        injectors_.emplace_back(tap, std::make_unique<InjectPlugin>(spec));
        taps_by_name_["attack:" + spec.label] = {bus, tap};
    }

    // bonware responder needs a tap that watches temp and fan command
    for (const DefenseSpec& spec : cfg_.defenses) {
        if (spec.kind != DefenseSpec::Kind::kReflashResponder) continue;
        if (spec.target_ecu != "fan_controller")
            throw ConfigError("reflash_responder supports target 'fan_controller'");
        bonware_ = std::make_unique<WatchdogLogic>(cfg_.fan, Rng(cfg_.seed, "bonware_watchdog"));
        const TapId tap =
            ch_.attach_tap("bonware", [this, coolant, fan_signal](const TimedFrame& tf) {
                if (tf.frame.id == coolant.frame_id) {
                    bonware_temp_ = decode_signal(coolant, tf.frame);
                    if (*bonware_temp_ >= cfg_.fan.lower_c) bonware_warmed_ = true;
                } else if (tf.frame.id == fan_signal.frame_id) {
                    bonware_fan_cmd_ = decode_signal(fan_signal, tf.frame) >= 0.5;
                }
            });
        taps_by_name_["bonware"] = {&ch_, tap};
    }

    install_filters();
}

Bus* Simulation::find_bus_of_tap(const std::string& tap, TapId* out_tap) {
    const auto it = taps_by_name_.find(tap);
    if (it == taps_by_name_.end()) return nullptr;
    *out_tap = it->second.second;
    return it->second.first;
}

void Simulation::install_filters() {
    // attack stages first, then defenses: a man-in-the-middle mutation runs
    // before the victim's own verification
    for (const AttackSpec& spec : cfg_.attacks) {
        if (spec.kind == AttackSpec::Kind::kBlock) {
            TapId tap;
            Bus* bus = find_bus_of_tap(spec.at_tap, &tap);
            if (!bus)
                throw ConfigError("block attack '" + spec.label + "': unknown tap '" +
                                  spec.at_tap + "'");
            ingress_chains_[{bus, tap}].stages.push_back(make_block_stage(
                spec, counter_slot(counters_, spec.label + ".dropped")));
        } else if (spec.kind == AttackSpec::Kind::kModify) {
            TapId tap;
            Bus* bus = find_bus_of_tap(spec.at_tap, &tap);
            if (!bus)
                throw ConfigError("modify attack '" + spec.label + "': unknown tap '" +
                                  spec.at_tap + "'");
            ingress_chains_[{bus, tap}].stages.push_back(make_modify_stage(
                spec, counter_slot(counters_, spec.label + ".modified")));
        }
    }

    for (const DefenseSpec& spec : cfg_.defenses) {
        if (spec.kind == DefenseSpec::Kind::kWatermark) {
            watermarks_.push_back(std::make_unique<WatermarkChannel>(spec.key, &cfg_.dict));
            WatermarkChannel* channel = watermarks_.back().get();
            TapId apply_tap, verify_tap;
            Bus* apply_bus = find_bus_of_tap(spec.apply_at, &apply_tap);
            Bus* verify_bus = find_bus_of_tap(spec.verify_at, &verify_tap);
            if (!apply_bus || !verify_bus)
                throw ConfigError("watermark '" + spec.label + "': unknown tap");
            const std::vector<uint16_t> ids = spec.ids;
            egress_chains_[{apply_bus, apply_tap}].stages.push_back(
                [channel, ids](const TimedFrame& tf) {
                    for (uint16_t id : ids)
                        if (tf.frame.id == id)
                            return FilterAction::replace(channel->apply(tf.frame));
                    return FilterAction::pass();
                });
            uint64_t* rejected = counter_slot(counters_, spec.label + ".rejected");
            const bool drop = spec.drop_on_reject;
            ingress_chains_[{verify_bus, verify_tap}].stages.push_back(
                [channel, ids, rejected, drop](const TimedFrame& tf) {
                    for (uint16_t id : ids) {
                        if (tf.frame.id != id) continue;
                        if (channel->verify(tf.frame)) return FilterAction::pass();
                        (*rejected)++;
                        return drop ? FilterAction::drop() : FilterAction::pass();
                    }
                    return FilterAction::pass();
                });
        } else if (spec.kind == DefenseSpec::Kind::kPlausibility) {
            TapId tap;
            Bus* bus = find_bus_of_tap(spec.at_tap, &tap);
            if (!bus)
                throw ConfigError("plausibility '" + spec.label + "': unknown tap '" +
                                  spec.at_tap + "'");
            const SignalDef& def = cfg_.dict.signal(spec.signal);
            plausibility_.push_back(std::make_unique<PlausibilityFilter>(
                def, cfg_.dict.frame(def.frame_id).dlc, spec.window_s, spec.tolerance));
            ingress_chains_[{bus, tap}].stages.push_back(plausibility_.back()->as_stage());
        }
    }

    for (auto& [key, chain] : ingress_chains_) key.first->set_ingress(key.second, chain);
    for (auto& [key, chain] : egress_chains_) key.first->set_egress(key.second, chain);
}

void Simulation::apply_firmware_events(double now) {
    const double eps = cfg_.dt * 0.5;
    for (const AttackSpec& spec : cfg_.attacks) {
        if (spec.kind != AttackSpec::Kind::kFirmware) continue;
        if (spec.target_ecu != "fan_controller")
            throw ConfigError("firmware attack supports target 'fan_controller'");
        if (std::abs(now - spec.start) < eps) fan_.trigger_attack(now);
        if (spec.stop && std::abs(now - *spec.stop) < eps) fan_.stop_attack(now);
    }
}

void Simulation::log_frame(const TimedFrame& tf) {
    canlog_ << format_log_line(tf) << '\n';
    frames_logged_++;
}

void Simulation::drain_gateway(double now) {
    for (auto& [topic, line] : gateway_.drain_lines()) {
        if (topic == "SimToVis") {
            const ParsedTuple t = parse_tuple(line);
            mailbox_.apply(t.parameter, t.value);
        }
        if (textlink_on_) textlink_.send(topic, line);
    }
    if (textlink_on_) {
        for (auto& [topic, line] : textlink_.poll()) {
            if (topic != "VisToSim") continue;  // clients may only drive the vehicle side
            try {
                gateway_.ingest_line(topic, line, now);
            } catch (const GatewayError&) {
                (*counter_slot(counters_, "textlink.bad_lines"))++;
            }
        }
    }
}

RunArtifacts Simulation::execute() {
    RunArtifacts artifacts;

    const double dt = cfg_.dt;
    const long per_second = std::lround(1.0 / dt);
    if (per_second < 1 || std::abs(per_second * dt - 1.0) > 1e-9)
        throw ConfigError("dt must divide 1 s for the 1 Hz report cadence");
    const long chassis_ticks = std::lround(cfg_.chassis_cadence_s / dt);
    const long sensor_ticks = std::lround(cfg_.sensor_cadence_s / dt);
    if (chassis_ticks < 1 || sensor_ticks < 1)
        throw ConfigError("cadences must be at least dt");

    ensure_parent_dir(cfg_.outputs.canlog);
    ensure_parent_dir(cfg_.outputs.csv);
    ensure_parent_dir(cfg_.outputs.summary);
    canlog_.open(cfg_.outputs.canlog, std::ios::binary | std::ios::trunc);
    if (!canlog_) throw Error("cannot write CAN log '" + cfg_.outputs.canlog + "'");

    if (cfg_.textlink_enabled) {
        textlink_.listen(cfg_.textlink_port);
        textlink_on_ = true;
    }

    vehicle_state_.coolant_temp_c = cfg_.vehicle.coolant_init_c;
    double driver_throttle = 0.0, driver_brake = 0.0;

    // trailing 10 s window for the fuel efficiency column
    std::deque<std::pair<double, double>> trailing;  // (odometer_km, fuel_l)
    double last_eff = 0.0;

    auto make_row = [&](double t) {
        CsvRow row;
        row.t = t;
        row.speed_kmh = vehicle_state_.speed_mps * 3.6;
        row.rpm = vehicle_state_.rpm;
        row.gear = vehicle_state_.gear + 1;  // 1-based in reports
        row.throttle = vehicle_state_.throttle;
        row.brake = vehicle_state_.brake;
        row.fuel_used_l = vehicle_state_.fuel_used_l;
        row.coolant_c = vehicle_state_.coolant_temp_c;
        row.fan_on = vehicle_state_.fan_on ? 1 : 0;
        row.odometer_km = vehicle_state_.odometer_m / 1000.0;

        trailing.emplace_back(row.odometer_km, row.fuel_used_l);
        while (trailing.size() > 11) trailing.pop_front();
        const double dist = trailing.back().first - trailing.front().first;
        const double fuel = trailing.back().second - trailing.front().second;
        if (fuel > 1e-12) last_eff = dist / fuel;
        row.fuel_eff_km_per_l = last_eff;
        return row;
    };

    const long total_ticks = std::lround(cfg_.duration_s / dt);
    bool route_done = false;
    long tick = 0;
    for (; tick < total_ticks; ++tick) {
        const double now = double(tick) * dt;

        if (tick % per_second == 0) artifacts.rows.push_back(make_row(now));

        apply_firmware_events(now);

        // automated driver
        const RouteSegment& seg = cfg_.route.at(vehicle_state_.position_m);
        const double target_mps = seg.target_speed_kmh / 3.6;
        std::tie(driver_throttle, driver_brake) =
            pid_.update(target_mps, vehicle_state_.speed_mps, dt);

        // chassis ECU encodes the driver at its cadence
        if (tick % chassis_ticks == 0)
            for (const CanFrame& f : chassis_.step(driver_throttle, driver_brake, 0.0, now))
                pt_.publish(chassis_tap_, f, now);

        // attack injectors
        for (auto& [tap, plugin] : injectors_) {
            Bus* bus = taps_by_name_.at("attack:" + plugin->spec().label).first;
            while (auto frame = plugin->poll(now)) bus->publish(tap, *frame, now);
        }

        // vehicle sensors toward the chassis bus (instrument-cluster role)
        if (tick % sensor_ticks == 0) {
            gateway_.ingest_line(
                "VisToSim",
                format_gateway_line(now, "speed", vehicle_state_.speed_mps * 3.6), now);
            gateway_.ingest_line("VisToSim",
                                 format_gateway_line(now, "rpm", vehicle_state_.rpm), now);
            gateway_.ingest_line(
                "VisToSim",
                format_gateway_line(now, "coolant_temp", vehicle_state_.coolant_temp_c), now);
        }

        // fan controller: consumes the last delivered temperature
        {
            const std::optional<double> temp = pending_temp_;
            pending_temp_.reset();
            if (auto frame = fan_.step(temp, now)) ch_.publish(fan_tap_, *frame, now);
        }

        // detached bonware responder
        if (bonware_ && bonware_warmed_ && bonware_temp_) {
            const bool oor = (*bonware_temp_ < cfg_.fan.lower_c && bonware_fan_cmd_) ||
                             (*bonware_temp_ > cfg_.fan.upper_c + cfg_.fan.watchdog_margin_c);
            if (bonware_->update(oor, now)) {
                fan_.reflash(now);
                (*counter_slot(counters_, "bonware.reflashes"))++;
            }
        }

        pt_.deliver(now);
        ch_.deliver(now);
        drain_gateway(now);

        VehicleInputs inputs;
        inputs.throttle = mailbox_.throttle;
        inputs.brake = mailbox_.brake;
        inputs.fan_on = mailbox_.fan_on;
        if (!vehicle_step(vehicle_state_, inputs, cfg_.route, cfg_.vehicle, dt)) {
            route_done = true;
            ++tick;
            break;
        }
    }

    const double end_time = double(tick) * dt;
    artifacts.rows.push_back(make_row(end_time));

    canlog_.close();
    write_run_csv(cfg_.outputs.csv, artifacts.rows);

    RunSummary& s = artifacts.summary;
    s.duration_s = end_time;
    s.ended_early = route_done;
    s.distance_km = vehicle_state_.odometer_m / 1000.0;
    s.fuel_l = vehicle_state_.fuel_used_l;
    s.mean_speed_kmh = end_time > 0 ? (vehicle_state_.odometer_m / end_time) * 3.6 : 0.0;
    s.seed = cfg_.seed;
    s.config_hash = config_hash(cfg_);
    s.frames_logged = frames_logged_;
    s.fan_reflashes = fan_.reflash_count();
    for (const auto& [name, count] : pt_.publish_stats()) s.tap_frames["pt/" + name] = count;
    for (const auto& [name, count] : ch_.publish_stats()) s.tap_frames["ch/" + name] = count;
    for (const auto& [name, counter] : counters_) s.plugin_counters[name] = *counter;

    nlohmann::ordered_json js;
    js["duration_s"] = s.duration_s;
    js["ended_early"] = s.ended_early;
    js["distance_km"] = s.distance_km;
    js["fuel_l"] = s.fuel_l;
    js["mean_speed_kmh"] = s.mean_speed_kmh;
    js["seed"] = s.seed;
    js["config_hash"] = s.config_hash;
    js["frames_logged"] = s.frames_logged;
    js["fan_reflashes"] = s.fan_reflashes;
    js["tap_frames"] = s.tap_frames;
    js["plugin_counters"] = s.plugin_counters;
    std::ofstream summary_out(cfg_.outputs.summary, std::ios::binary | std::ios::trunc);
    if (!summary_out) throw Error("cannot write summary '" + cfg_.outputs.summary + "'");
    summary_out << js.dump(2) << '\n';

    artifacts.csv_path = cfg_.outputs.csv;
    artifacts.canlog_path = cfg_.outputs.canlog;
    artifacts.summary_path = cfg_.outputs.summary;
    return artifacts;
}

}  // namespace

RunArtifacts run(const ScenarioConfig& config) {
    Simulation sim(config);
    return sim.execute();
}

void write_run_csv(const std::string& path, const std::vector<CsvRow>& rows) {
    ensure_parent_dir(path);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write CSV '" + path + "'");
    out << "t,speed_kmh,rpm,gear,throttle,brake,fuel_used_L,fuel_eff_km_per_L,coolant_C,"
           "fan_on,odometer_km\n";
    for (const CsvRow& r : rows) {
        out << fixed(r.t, 1) << ',' << fixed(r.speed_kmh, 3) << ',' << fixed(r.rpm, 1) << ','
            << r.gear << ',' << fixed(r.throttle, 4) << ',' << fixed(r.brake, 4) << ','
            << fixed(r.fuel_used_l, 6) << ',' << fixed(r.fuel_eff_km_per_l, 4) << ','
            << fixed(r.coolant_c, 3) << ',' << r.fan_on << ',' << fixed(r.odometer_km, 5)
            << '\n';
    }
}

CsvTable read_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open CSV '" + path + "'");
    CsvTable table;
    std::string line;
    if (!std::getline(in, line)) throw Error("empty CSV '" + path + "'");
    std::stringstream header(line);
    std::string cell;
    while (std::getline(header, cell, ',')) table.columns.push_back(cell);
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<double> row;
        size_t start = 0;
        while (start <= line.size()) {
            size_t end = line.find(',', start);
            if (end == std::string::npos) end = line.size();
            double v = 0.0;
            const auto res = std::from_chars(line.data() + start, line.data() + end, v);
            if (res.ec != std::errc())
                throw Error("bad number in CSV '" + path + "': '" +
                            line.substr(start, end - start) + "'");
            row.push_back(v);
            start = end + 1;
        }
        if (row.size() != table.columns.size())
            throw Error("ragged row in CSV '" + path + "'");
        table.rows.push_back(std::move(row));
    }
    return table;
}

TimeSeries csv_column_series(const CsvTable& table, const std::string& column) {
    size_t t_idx = SIZE_MAX, c_idx = SIZE_MAX;
    for (size_t i = 0; i < table.columns.size(); ++i) {
        if (table.columns[i] == "t") t_idx = i;
        if (table.columns[i] == column) c_idx = i;
    }
    if (t_idx == SIZE_MAX) throw ArgumentError("CSV has no 't' column");
    if (c_idx == SIZE_MAX) throw ArgumentError("CSV has no '" + column + "' column");
    if (table.rows.size() < 2) throw ArgumentError("CSV has fewer than 2 rows");

    TimeSeries series;
    series.t0 = table.rows[0][t_idx];
    series.step = table.rows[1][t_idx] - series.t0;
    if (series.step <= 0) throw ArgumentError("CSV time column is not increasing");
    for (size_t i = 0; i < table.rows.size(); ++i) {
        const double expect = series.t0 + double(i) * series.step;
        if (std::abs(table.rows[i][t_idx] - expect) > 1e-6)
            throw ArgumentError("CSV rows are not on a uniform time grid");
        series.v.push_back(table.rows[i][c_idx]);
    }
    return series;
}

AnalysisResult analyze_metrics(const TimeSeries& baseline_metric,
                               const TimeSeries& attack_metric, const AnalysisOptions& opts) {
    if (baseline_metric.size() != attack_metric.size())
        throw ArgumentError("mismatched durations: baseline has " +
                            std::to_string(baseline_metric.size()) + " rows, attack has " +
                            std::to_string(attack_metric.size()));

    // skip the standing start where the efficiency metric is still zero
    size_t first = 0;
    while (first < baseline_metric.size() &&
           (baseline_metric.v[first] <= 0.0 || attack_metric.v[first] <= 0.0))
        ++first;
    if (baseline_metric.size() - first < 16)
        throw ArgumentError("metric series has too few usable rows");

    TimeSeries base = baseline_metric, att = attack_metric;
    base.v.erase(base.v.begin(), base.v.begin() + long(first));
    att.v.erase(att.v.begin(), att.v.begin() + long(first));
    base.t0 += double(first) * base.step;
    att.t0 += double(first) * att.step;

    AnalysisResult result;
    result.analysis_t0 = base.t0;
    result.functionality_series = functionality(att, base, opts.mode, opts.smooth_window_s);

    AucOptions auc_opts;
    auc_opts.smooth_window_s = opts.smooth_window_s;
    result.auc_loss_value = auc_loss(base, att, opts.mode, opts.interval, auc_opts);

    FitOptions fit_opts;
    fit_opts.parallel = opts.parallel_fit;
    result.fit = fit_model(result.functionality_series, fit_opts);

    result.score = resilience_score(result.functionality_series,
                                    result.functionality_series.series.t0,
                                    result.functionality_series.series.t_end());
    const MultiObjectiveScore mo =
        multi_objective({result.score}, {result.functionality_series.nominal});
    result.score_normalized = mo.normalized;
    return result;
}

std::string analysis_to_json(const AnalysisResult& result, const AnalysisOptions& opts) {
    nlohmann::ordered_json js;
    js["auc_loss"] = result.auc_loss_value;
    js["mode"] = opts.mode == FunctionalityMode::kCompensatory ? "compensatory"
                                                               : "noncompensatory";
    js["interval"] = opts.interval == AucInterval::kFull ? "full" : "deviation";
    js["metric"] = opts.metric;
    js["smooth_window_s"] = opts.smooth_window_s;
    js["analysis_t0"] = result.analysis_t0;
    if (result.fit.degenerate) {
        js["fit"] = {{"M0", 0.0}, {"B0", 0.0}, {"tm", nullptr}, {"tstar", nullptr},
                     {"degenerate", true}};
    } else {
        js["fit"] = {{"M0", result.fit.params.malware_rate},
                     {"B0", result.fit.params.bonware_rate},
                     {"tm", result.fit.params.onset_s},
                     {"tstar", result.fit.params.switch_s},
                     {"degenerate", false}};
    }
    js["rmse"] = result.fit.rmse;
    js["R"] = result.score;
    js["R_normalized"] = result.score_normalized;
    return js.dump(2);
}

void write_functionality_csv(const std::string& path, const AnalysisResult& result) {
    ensure_parent_dir(path);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write CSV '" + path + "'");
    out << "t,F_observed,F_fitted\n";
    const TimeSeries& f = result.functionality_series.series;
    for (size_t i = 0; i < f.size(); ++i) {
        const double fitted =
            result.fit.fitted.v.size() == f.size() ? result.fit.fitted.v[i] : 0.0;
        out << fixed(f.t(i), 1) << ',' << fixed(f.v[i], 6) << ',' << fixed(fitted, 6) << '\n';
    }
}

}  // namespace mgv
