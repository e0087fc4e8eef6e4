#pragma once

#include <optional>
#include <string>
#include <vector>

#include "mgv/errors.hpp"

namespace mgv {

// Piecewise-linear map over engine RPM, clamped at both ends.
struct Curve {
    std::vector<double> rpm;
    std::vector<double> value;

    double at(double x) const;
    double min_value() const;
    double max_value() const;
};

struct GearSchedule {
    std::vector<double> upshift_rpm;    // per gear; +inf for the top gear
    std::vector<double> downshift_rpm;  // per gear; 0 for first gear
};

struct VehicleParams {
    double mass_kg = 6500.0;
    double wheel_circumference_m = 3.0;
    int wheel_count = 6;
    std::vector<double> gear_ratios;  // total effective ratio, strictly decreasing
    Curve torque_curve;               // N*m over rpm
    Curve hp_curve;                   // hp over rpm
    Curve bsfc_curve;                 // g/kWh over rpm
    double idle_rpm = 600.0;
    double fan_power_hp = 50.0;
    double fan_torque_penalty = 0.25;
    double fuel_density_kg_per_l = 0.832;

    // Longitudinal force balance constants.
    double drag_area_m2 = 4.5;  // Cd * A
    double air_density = 1.225;
    double rolling_coeff = 0.010;
    double brake_force_max_n = 30000.0;
    double gravity = 9.81;

    // Coolant model: first-order relaxation toward the active equilibrium.
    double coolant_init_c = 88.0;
    double coolant_fan_target_c = 60.0;
    double coolant_base_c = 90.0;
    double coolant_load_gain_c = 30.0;
    double coolant_tau_cooling_s = 120.0;
    double coolant_tau_heating_s = 180.0;

    GearSchedule gear_schedule;  // derived from the torque curve at load time

    static VehicleParams load(const std::string& path);
    static VehicleParams from_json_text(const std::string& text, const std::string& origin);
    void finalize();  // validates and computes the gear schedule
};

struct RouteSegment {
    double length_m = 0.0;
    double grade = 0.0;  // rise/run
    std::string surface; // main_road | off_road | hilly | incline | decline
    double target_speed_kmh = 60.0;
};

struct Route {
    std::vector<RouteSegment> segments;

    double total_length_m() const;
    // Segment containing `position`; the last segment for positions past the
    // end (the runner flags route exhaustion separately).
    const RouteSegment& at(double position_m) const;
    bool exhausted(double position_m) const { return position_m >= total_length_m(); }

    static Route load(const std::string& path);
    static Route from_json_text(const std::string& text, const std::string& origin);
};

// PID speed controller; positive output drives the throttle, negative the
// brake. Integral accumulator clamps for anti-windup.
struct PidController {
    double kp = 0.5;
    double ki = 0.05;
    double kd = 0.1;
    double windup_limit = 2.0;

    double integral = 0.0;
    double prev_error = 0.0;
    bool has_prev = false;

    // Returns (throttle, brake), both in [0, 1].
    std::pair<double, double> update(double target_speed, double speed, double dt);
    void reset();
};

struct VehicleState {
    double t = 0.0;
    double position_m = 0.0;
    double speed_mps = 0.0;
    int gear = 0;  // index into gear_ratios
    double rpm = 0.0;
    double throttle = 0.0;  // actuated, 0..1
    double brake = 0.0;     // actuated, 0..1
    double fuel_used_l = 0.0;
    double odometer_m = 0.0;
    double coolant_temp_c = 88.0;
    bool fan_on = false;
};

struct EnginePoint {
    double torque_nm = 0.0;
    double power_hp = 0.0;
    double bsfc_g_per_kwh = 0.0;
};

double engine_rpm(double speed_mps, const VehicleParams& params, int gear);
EnginePoint lookup_performance(const VehicleParams& params, double rpm);

// Total and per-wheel drive torque after throttle, gear ratio and the fan's
// torque penalty.
struct WheelTorque {
    double total_nm = 0.0;
    double per_wheel_nm = 0.0;
};
WheelTorque wheel_torque(const VehicleParams& params, double engine_torque_nm, double throttle,
                         int gear, bool fan_on);

// Liters burned over dt given the delivered engine power; the fan adds its
// constant load on top.
double fuel_burn(double power_hp, double bsfc_g_per_kwh, bool fan_on,
                 const VehicleParams& params, double dt);

int select_gear(const VehicleState& state, const VehicleParams& params);

double coolant_step(double temp_c, bool fan_on, double load, const VehicleParams& params,
                    double dt);

struct VehicleInputs {
    double throttle = 0.0;
    double brake = 0.0;
    bool fan_on = false;
};

// Advances one fixed physics step. Returns false once the route is
// exhausted (run-complete signal).
bool vehicle_step(VehicleState& state, const VehicleInputs& inputs, const Route& route,
                  const VehicleParams& params, double dt);

}  // namespace mgv
