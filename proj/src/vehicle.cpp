#include "mgv/vehicle.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "json_util.hpp"

namespace mgv {

namespace {
constexpr double kHpToKw = 0.7457;
constexpr double kTwoPi = 6.28318530717958647692;
}  // namespace

double Curve::at(double x) const {
    if (rpm.empty()) throw ConfigError("empty curve");
    if (x <= rpm.front()) return value.front();
    if (x >= rpm.back()) return value.back();
    // curves have a handful of knots; linear scan is fine
    size_t i = 1;
    while (rpm[i] < x) ++i;
    const double f = (x - rpm[i - 1]) / (rpm[i] - rpm[i - 1]);
    return value[i - 1] + f * (value[i] - value[i - 1]);
}

double Curve::min_value() const { return *std::min_element(value.begin(), value.end()); }
double Curve::max_value() const { return *std::max_element(value.begin(), value.end()); }

namespace {

Curve curve_from_json(const detail::json& j, const std::string& context) {
    Curve c;
    if (!j.is_array() || j.empty())
        throw ConfigError(context + ": curve must be a non-empty array of [rpm, value]");
    for (const auto& knot : j) {
        if (!knot.is_array() || knot.size() != 2)
            throw ConfigError(context + ": curve knots are [rpm, value] pairs");
        c.rpm.push_back(knot[0].get<double>());
        c.value.push_back(knot[1].get<double>());
    }
    for (size_t i = 1; i < c.rpm.size(); ++i)
        if (c.rpm[i] <= c.rpm[i - 1])
            throw ConfigError(context + ": curve rpm knots must be strictly increasing");
    return c;
}

}  // namespace

void VehicleParams::finalize() {
    if (gear_ratios.empty()) throw ConfigError("vehicle: no gear ratios");
    for (size_t i = 1; i < gear_ratios.size(); ++i)
        if (gear_ratios[i] >= gear_ratios[i - 1])
            throw ConfigError("vehicle: gear ratios must be strictly decreasing");
    if (wheel_count != 6) throw ConfigError("vehicle: wheel_count must be 6");
    if (torque_curve.rpm.empty() || hp_curve.rpm.empty() || bsfc_curve.rpm.empty())
        throw ConfigError("vehicle: torque, hp and bsfc curves are required");
    if (torque_curve.rpm.front() != hp_curve.rpm.front() ||
        torque_curve.rpm.front() != bsfc_curve.rpm.front() ||
        torque_curve.rpm.back() != hp_curve.rpm.back() ||
        torque_curve.rpm.back() != bsfc_curve.rpm.back())
        throw ConfigError("vehicle: curves must share one rpm domain");
    if (idle_rpm < torque_curve.rpm.front() || idle_rpm > torque_curve.rpm.back())
        throw ConfigError("vehicle: idle rpm outside curve domain");

    // Shift schedule from the torque curve: the upshift point of gear g is
    // the lowest rpm where the post-shift wheel torque matches or beats the
    // pre-shift one. Downshift thresholds sit >= 200 rpm (in post-shift
    // terms) below the upshift to give hysteresis.
    const double redline = torque_curve.rpm.back();
    const size_t n = gear_ratios.size();
    gear_schedule.upshift_rpm.assign(n, std::numeric_limits<double>::infinity());
    gear_schedule.downshift_rpm.assign(n, 0.0);
    for (size_t g = 0; g + 1 < n; ++g) {
        const double r_lo = gear_ratios[g];
        const double r_hi = gear_ratios[g + 1];
        double up = redline;  // shift at redline when torque never crosses
        for (double rpm = idle_rpm; rpm <= redline; rpm += 1.0) {
            const double pre = torque_curve.at(rpm) * r_lo;
            const double post = torque_curve.at(rpm * r_hi / r_lo) * r_hi;
            if (post >= pre) {
                up = rpm;
                break;
            }
        }
        gear_schedule.upshift_rpm[g] = up;
        const double post_shift_rpm = up * r_hi / r_lo;
        gear_schedule.downshift_rpm[g + 1] =
            std::max(idle_rpm * 0.5, post_shift_rpm - 250.0);
    }
}

VehicleParams VehicleParams::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open vehicle params '" + path + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    return from_json_text(buf.str(), path);
}

VehicleParams VehicleParams::from_json_text(const std::string& text, const std::string& origin) {
    using detail::json;
    json root;
    try {
        root = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(origin + ": " + e.what());
    }
    detail::check_keys(root,
                       {"mass_kg", "wheel_circumference_m", "wheel_count", "gear_ratios",
                        "torque_curve", "hp_curve", "bsfc_curve", "idle_rpm", "fan_power_hp",
                        "fan_torque_penalty", "fuel_density_kg_per_l", "drag_area_m2",
                        "air_density", "rolling_coeff", "brake_force_max_n", "coolant"},
                       origin);

    VehicleParams p;
    p.mass_kg = detail::require<double>(root, "mass_kg", origin);
    p.wheel_circumference_m = detail::require<double>(root, "wheel_circumference_m", origin);
    p.wheel_count = detail::get_or<int>(root, "wheel_count", 6, origin);
    p.gear_ratios = detail::require<std::vector<double>>(root, "gear_ratios", origin);
    p.torque_curve = curve_from_json(root.at("torque_curve"), origin + " torque_curve");
    p.hp_curve = curve_from_json(root.at("hp_curve"), origin + " hp_curve");
    p.bsfc_curve = curve_from_json(root.at("bsfc_curve"), origin + " bsfc_curve");
    p.idle_rpm = detail::get_or<double>(root, "idle_rpm", 600.0, origin);
    p.fan_power_hp = detail::get_or<double>(root, "fan_power_hp", 50.0, origin);
    p.fan_torque_penalty = detail::get_or<double>(root, "fan_torque_penalty", 0.25, origin);
    p.fuel_density_kg_per_l =
        detail::get_or<double>(root, "fuel_density_kg_per_l", 0.832, origin);
    p.drag_area_m2 = detail::get_or<double>(root, "drag_area_m2", 4.5, origin);
    p.air_density = detail::get_or<double>(root, "air_density", 1.225, origin);
    p.rolling_coeff = detail::get_or<double>(root, "rolling_coeff", 0.010, origin);
    p.brake_force_max_n = detail::get_or<double>(root, "brake_force_max_n", 30000.0, origin);

    if (root.contains("coolant")) {
        const json& jc = root.at("coolant");
        detail::check_keys(jc,
                           {"init_c", "fan_target_c", "base_c", "load_gain_c", "tau_cooling_s",
                            "tau_heating_s"},
                           origin + " coolant");
        p.coolant_init_c = detail::get_or<double>(jc, "init_c", 88.0, origin);
        p.coolant_fan_target_c = detail::get_or<double>(jc, "fan_target_c", 60.0, origin);
        p.coolant_base_c = detail::get_or<double>(jc, "base_c", 90.0, origin);
        p.coolant_load_gain_c = detail::get_or<double>(jc, "load_gain_c", 30.0, origin);
        p.coolant_tau_cooling_s = detail::get_or<double>(jc, "tau_cooling_s", 120.0, origin);
        p.coolant_tau_heating_s = detail::get_or<double>(jc, "tau_heating_s", 180.0, origin);
    }

    p.finalize();
    return p;
}

double Route::total_length_m() const {
    double total = 0.0;
    for (const auto& s : segments) total += s.length_m;
    return total;
}

const RouteSegment& Route::at(double position_m) const {
    if (segments.empty()) throw ConfigError("empty route");
    double start = 0.0;
    for (const auto& s : segments) {
        if (position_m < start + s.length_m) return s;
        start += s.length_m;
    }
    return segments.back();
}

Route Route::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open route '" + path + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    return from_json_text(buf.str(), path);
}

Route Route::from_json_text(const std::string& text, const std::string& origin) {
    using detail::json;
    json root;
    try {
        root = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(origin + ": " + e.what());
    }
    detail::check_keys(root, {"name", "segments"}, origin);

    Route route;
    for (const auto& js : detail::require<json>(root, "segments", origin)) {
        detail::check_keys(js, {"length_m", "grade", "surface", "target_speed_kmh"},
                           origin + " segment");
        RouteSegment seg;
        seg.length_m = detail::require<double>(js, "length_m", origin);
        seg.grade = detail::get_or<double>(js, "grade", 0.0, origin);
        seg.surface = detail::get_or<std::string>(js, "surface", "main_road", origin);
        seg.target_speed_kmh = detail::require<double>(js, "target_speed_kmh", origin);
        if (seg.length_m <= 0) throw ConfigError(origin + ": segment length must be positive");
        if (seg.target_speed_kmh <= 0)
            throw ConfigError(origin + ": target speed must be positive");
        static const char* kSurfaces[] = {"main_road", "off_road", "hilly", "incline",
                                          "decline"};
        if (std::find_if(std::begin(kSurfaces), std::end(kSurfaces), [&](const char* s) {
                return seg.surface == s;
            }) == std::end(kSurfaces))
            throw ConfigError(origin + ": unknown surface '" + seg.surface + "'");
        route.segments.push_back(seg);
    }
    if (route.segments.empty()) throw ConfigError(origin + ": route has no segments");
    return route;
}

std::pair<double, double> PidController::update(double target_speed, double speed, double dt) {
    if (dt <= 0) throw ArgumentError("pid: dt must be positive");
    const double e = target_speed - speed;
    integral = std::clamp(integral + e * dt, -windup_limit, windup_limit);
    const double derivative = has_prev ? (e - prev_error) / dt : 0.0;
    prev_error = e;
    has_prev = true;
    const double u = std::clamp(kp * e + ki * integral + kd * derivative, -1.0, 1.0);
    return {std::max(u, 0.0), std::max(-u, 0.0)};
}

void PidController::reset() {
    integral = 0.0;
    prev_error = 0.0;
    has_prev = false;
}

double engine_rpm(double speed_mps, const VehicleParams& params, int gear) {
    if (gear < 0 || size_t(gear) >= params.gear_ratios.size())
        throw ArgumentError("engine_rpm: bad gear index");
    const double rpm =
        speed_mps / params.wheel_circumference_m * params.gear_ratios[size_t(gear)] * 60.0;
    return std::max(params.idle_rpm, rpm);
}

EnginePoint lookup_performance(const VehicleParams& params, double rpm) {
    EnginePoint pt;
    pt.torque_nm = params.torque_curve.at(rpm);
    pt.power_hp = params.hp_curve.at(rpm);
    pt.bsfc_g_per_kwh = params.bsfc_curve.at(rpm);
    return pt;
}

WheelTorque wheel_torque(const VehicleParams& params, double engine_torque_nm, double throttle,
                         int gear, bool fan_on) {
    if (gear < 0 || size_t(gear) >= params.gear_ratios.size())
        throw ArgumentError("wheel_torque: bad gear index");
    WheelTorque wt;
    wt.total_nm = engine_torque_nm * throttle * params.gear_ratios[size_t(gear)];
    if (fan_on) wt.total_nm *= (1.0 - params.fan_torque_penalty);
    wt.per_wheel_nm = wt.total_nm / params.wheel_count;
    return wt;
}

double fuel_burn(double power_hp, double bsfc_g_per_kwh, bool fan_on,
                 const VehicleParams& params, double dt) {
    if (dt <= 0) throw ArgumentError("fuel_burn: dt must be positive");
    const double effective_hp = power_hp + (fan_on ? params.fan_power_hp : 0.0);
    const double grams = effective_hp * kHpToKw * bsfc_g_per_kwh * dt / 3600.0;
    return grams / (1000.0 * params.fuel_density_kg_per_l);
}

int select_gear(const VehicleState& state, const VehicleParams& params) {
    const auto& sched = params.gear_schedule;
    int gear = state.gear;
    if (gear < 0 || size_t(gear) >= params.gear_ratios.size())
        throw ArgumentError("select_gear: bad gear index");
    if (state.rpm >= sched.upshift_rpm[size_t(gear)] &&
        size_t(gear) + 1 < params.gear_ratios.size())
        return gear + 1;
    if (state.rpm <= sched.downshift_rpm[size_t(gear)] && gear > 0) return gear - 1;
    return gear;
}

double coolant_step(double temp_c, bool fan_on, double load, const VehicleParams& params,
                    double dt) {
    if (dt <= 0) throw ArgumentError("coolant_step: dt must be positive");
    load = std::clamp(load, 0.0, 1.0);
    const double t_eq = fan_on ? params.coolant_fan_target_c
                               : params.coolant_base_c + params.coolant_load_gain_c * load;
    const double tau =
        temp_c > t_eq ? params.coolant_tau_cooling_s : params.coolant_tau_heating_s;
    double next = temp_c + dt * (t_eq - temp_c) / tau;
    return std::clamp(next, -40.0, 150.0);
}

bool vehicle_step(VehicleState& state, const VehicleInputs& inputs, const Route& route,
                  const VehicleParams& params, double dt) {
    if (dt <= 0) throw ArgumentError("vehicle_step: dt must be positive");

    state.throttle = std::clamp(inputs.throttle, 0.0, 1.0);
    state.brake = std::clamp(inputs.brake, 0.0, 1.0);
    state.fan_on = inputs.fan_on;

    state.rpm = engine_rpm(state.speed_mps, params, state.gear);
    state.gear = select_gear(state, params);
    state.rpm = engine_rpm(state.speed_mps, params, state.gear);

    const EnginePoint engine = lookup_performance(params, state.rpm);
    const WheelTorque wt =
        wheel_torque(params, engine.torque_nm, state.throttle, state.gear, state.fan_on);

    const RouteSegment& seg = route.at(state.position_m);
    const double wheel_radius = params.wheel_circumference_m / kTwoPi;
    const double drive_force = wt.total_nm / wheel_radius;
    const double slope = seg.grade / std::sqrt(1.0 + seg.grade * seg.grade);
    const double cos_slope = 1.0 / std::sqrt(1.0 + seg.grade * seg.grade);
    const double grade_force = params.mass_kg * params.gravity * slope;
    const double normal = params.mass_kg * params.gravity * cos_slope;
    const double rolling = state.speed_mps > 0.0 ? params.rolling_coeff * normal : 0.0;
    const double aero =
        0.5 * params.air_density * params.drag_area_m2 * state.speed_mps * state.speed_mps;
    const double brake_force = state.brake * params.brake_force_max_n;

    double force = drive_force - grade_force - rolling - aero - brake_force;
    // statics: resistive forces never push a standing vehicle backward
    if (state.speed_mps <= 0.0 && force < 0.0 && seg.grade >= 0.0) force = 0.0;

    const double accel = force / params.mass_kg;
    double new_speed = state.speed_mps + accel * dt;
    if (new_speed < 0.0) new_speed = 0.0;
    const double avg_speed = 0.5 * (state.speed_mps + new_speed);

    state.speed_mps = new_speed;
    state.position_m += avg_speed * dt;
    state.odometer_m += avg_speed * dt;

    const double delivered_hp = engine.power_hp * state.throttle;
    state.fuel_used_l += fuel_burn(delivered_hp, engine.bsfc_g_per_kwh, state.fan_on, params, dt);

    state.coolant_temp_c = coolant_step(state.coolant_temp_c, state.fan_on, state.throttle,
                                        params, dt);

    state.t += dt;
    return !route.exhausted(state.position_m);
}

}  // namespace mgv
