#include <doctest.h>

#include <cmath>

#include "mgv/vehicle.hpp"

using namespace mgv;

namespace {

VehicleParams default_params() {
    return VehicleParams::load(std::string(MGV_DATA_DIR) + "/vehicle_default.json");
}

Route flat_route(double length_m = 100000.0, double target_kmh = 60.0) {
    Route r;
    RouteSegment seg;
    seg.length_m = length_m;
    seg.grade = 0.0;
    seg.surface = "main_road";
    seg.target_speed_kmh = target_kmh;
    r.segments.push_back(seg);
    return r;
}

}  // namespace

TEST_CASE("engine rpm formula and idle floor") {
    VehicleParams p = default_params();
    p.wheel_circumference_m = 3.0;
    p.gear_ratios = {4.0};
    p.gear_schedule.upshift_rpm = {1e18};
    p.gear_schedule.downshift_rpm = {0.0};
    CHECK(engine_rpm(16.667, p, 0) == doctest::Approx(1333.36).epsilon(1e-3));
    CHECK(engine_rpm(0.0, p, 0) == doctest::Approx(p.idle_rpm));

    // strictly increasing in speed within a gear once above the idle floor
    const double floor_speed = p.idle_rpm * p.wheel_circumference_m / (4.0 * 60.0);
    double prev = engine_rpm(floor_speed + 0.1, p, 0);
    for (double v = floor_speed + 0.6; v < 40.0; v += 0.5) {
        const double rpm = engine_rpm(v, p, 0);
        CHECK(rpm > prev);
        prev = rpm;
    }
}

TEST_CASE("curve lookup: knots, midpoints, clamping") {
    const VehicleParams p = default_params();
    const Curve& tq = p.torque_curve;
    // exact knot
    CHECK(tq.at(1800.0) == doctest::Approx(620.0));
    // midpoint between knots is the mean of the knot values
    CHECK(tq.at(1600.0) == doctest::Approx((560.0 + 620.0) / 2));
    // clamped below idle and above redline
    CHECK(tq.at(100.0) == doctest::Approx(tq.value.front()));
    CHECK(tq.at(9000.0) == doctest::Approx(tq.value.back()));
}

TEST_CASE("wheel torque with and without the fan penalty") {
    VehicleParams p = default_params();
    p.gear_ratios = {4.0};
    p.gear_schedule.upshift_rpm = {1e18};
    p.gear_schedule.downshift_rpm = {0.0};
    p.fan_torque_penalty = 0.25;

    const WheelTorque off = wheel_torque(p, 400.0, 0.5, 0, false);
    CHECK(off.total_nm == doctest::Approx(800.0));
    CHECK(off.per_wheel_nm == doctest::Approx(133.3333).epsilon(1e-4));

    const WheelTorque on = wheel_torque(p, 400.0, 0.5, 0, true);
    CHECK(on.total_nm == doctest::Approx(600.0));  // 25% drop

    CHECK(wheel_torque(p, 400.0, 0.0, 0, false).total_nm == doctest::Approx(0.0));
}

TEST_CASE("fan penalty is exactly multiplicative at equal operating points") {
    const VehicleParams p = default_params();
    for (double throttle : {0.1, 0.5, 0.9}) {
        for (int gear = 0; gear < int(p.gear_ratios.size()); ++gear) {
            const double off = wheel_torque(p, 500.0, throttle, gear, false).total_nm;
            const double on = wheel_torque(p, 500.0, throttle, gear, true).total_nm;
            CHECK(on == doctest::Approx(off * (1.0 - p.fan_torque_penalty)));
        }
    }
}

TEST_CASE("fuel burn unit arithmetic") {
    VehicleParams p = default_params();
    p.fuel_density_kg_per_l = 0.832;
    p.fan_power_hp = 50.0;

    // 100 hp, bsfc 210 g/kWh, 1 s: 100*0.7457*210/3600 = 4.34992 g
    const double liters = fuel_burn(100.0, 210.0, false, p, 1.0);
    CHECK(liters == doctest::Approx(4.34992 / 832.0).epsilon(1e-5));

    CHECK(fuel_burn(0.0, 210.0, false, p, 1.0) == doctest::Approx(0.0));

    // the fan adds exactly its constant-load burn
    const double with_fan = fuel_burn(100.0, 210.0, true, p, 1.0);
    const double fan_only = fuel_burn(0.0, 210.0, true, p, 1.0);
    CHECK(with_fan - liters == doctest::Approx(fan_only).epsilon(1e-9));
}

TEST_CASE("gear selection: thresholds and hysteresis band") {
    const VehicleParams p = default_params();
    const auto& sched = p.gear_schedule;
    REQUIRE(sched.upshift_rpm.size() == p.gear_ratios.size());

    // the schedule leaves a proper hysteresis gap
    for (size_t g = 0; g + 1 < p.gear_ratios.size(); ++g) {
        const double up = sched.upshift_rpm[g];
        const double post = up * p.gear_ratios[g + 1] / p.gear_ratios[g];
        CHECK(post - sched.downshift_rpm[g + 1] >= 200.0);
    }

    VehicleState st;
    st.gear = 0;
    st.rpm = sched.upshift_rpm[0];
    CHECK(select_gear(st, p) == 1);  // at the threshold
    st.gear = 1;
    st.rpm = 0.5 * (sched.downshift_rpm[1] + sched.upshift_rpm[1]);
    CHECK(select_gear(st, p) == 1);  // inside the band
    st.rpm = sched.downshift_rpm[1];
    CHECK(select_gear(st, p) == 0);
}

TEST_CASE("full-throttle sweep never oscillates gears within one second") {
    const VehicleParams p = default_params();
    const Route route = flat_route();
    VehicleState st;
    st.coolant_temp_c = 88.0;
    VehicleInputs in;
    in.throttle = 1.0;

    std::vector<std::pair<double, int>> shifts;
    int last_gear = st.gear;
    for (int k = 0; k < 12000; ++k) {
        vehicle_step(st, in, route, p, 0.01);
        if (st.gear != last_gear) {
            shifts.emplace_back(st.t, st.gear);
            last_gear = st.gear;
        }
    }
    CHECK(st.speed_mps > 20.0);  // actually accelerated
    for (size_t i = 1; i < shifts.size(); ++i) {
        if (shifts[i].first - shifts[i - 1].first < 1.0)
            CHECK(shifts[i].second > shifts[i - 1].second);  // no up-down flapping
    }
}

TEST_CASE("pid controller basics") {
    PidController pid;
    CHECK(pid.update(10.0, 10.0, 0.01) == std::pair<double, double>{0.0, 0.0});

    PidController pid2;
    auto [throttle, brake] = pid2.update(5.0, 20.0, 0.01);  // far too fast
    CHECK(throttle == 0.0);
    CHECK(brake > 0.0);
}

TEST_CASE("pid settles a 40 to 60 km/h step on flat road") {
    const VehicleParams p = default_params();
    const Route route = flat_route();
    PidController pid;
    VehicleState st;
    st.speed_mps = 40.0 / 3.6;
    st.gear = 3;
    st.coolant_temp_c = 88.0;

    const double dt = 0.01;
    const double target = 60.0 / 3.6;
    double settle_time = -1.0;
    for (int k = 0; k < 12000; ++k) {
        auto [throttle, brake] = pid.update(target, st.speed_mps, dt);
        VehicleInputs in;
        in.throttle = throttle;
        in.brake = brake;
        vehicle_step(st, in, route, p, dt);
        const bool within = std::abs(st.speed_mps - target) * 3.6 <= 2.0;
        if (within && settle_time < 0) settle_time = st.t;
        if (!within) settle_time = -1.0;  // must stay within the band
    }
    CHECK(settle_time >= 0.0);
    CHECK(settle_time <= 30.0);
}

TEST_CASE("coolant relaxation model") {
    const VehicleParams p = default_params();

    // fixed point
    CHECK(coolant_step(60.0, true, 0.5, p, 1.0) == doctest::Approx(60.0));

    // euler step arithmetic: T=100, fan on, dt=1, tau=120
    CHECK(coolant_step(100.0, true, 0.0, p, 1.0) == doctest::Approx(100.0 - 40.0 / 120.0));

    // fan held on long enough converges to the 60 C steady state
    double temp = 103.0;
    for (int k = 0; k < 80000; ++k) temp = coolant_step(temp, true, 0.5, p, 0.01);
    CHECK(temp == doctest::Approx(60.0).epsilon(0.01));

    // monotone approach toward the active equilibrium
    temp = 100.0;
    double prev = temp;
    for (int k = 0; k < 1000; ++k) {
        temp = coolant_step(temp, true, 0.2, p, 0.01);
        CHECK(temp <= prev);
        prev = temp;
    }
}

TEST_CASE("statics: no inputs, no grade, no motion") {
    const VehicleParams p = default_params();
    const Route route = flat_route();
    VehicleState st;
    VehicleInputs in;  // all zero
    for (int k = 0; k < 500; ++k) vehicle_step(st, in, route, p, 0.01);
    CHECK(st.speed_mps == 0.0);
    CHECK(st.position_m == 0.0);
    CHECK(st.fuel_used_l == 0.0);
}

TEST_CASE("fuel and odometer are non-decreasing") {
    const VehicleParams p = default_params();
    const Route route = flat_route();
    VehicleState st;
    PidController pid;
    double prev_fuel = 0.0, prev_odo = 0.0;
    for (int k = 0; k < 6000; ++k) {
        auto [throttle, brake] = pid.update(60.0 / 3.6, st.speed_mps, 0.01);
        VehicleInputs in;
        in.throttle = throttle;
        in.brake = brake;
        in.fan_on = (k / 1000) % 2 == 1;
        vehicle_step(st, in, route, p, 0.01);
        CHECK(st.fuel_used_l >= prev_fuel);
        CHECK(st.odometer_m >= prev_odo);
        prev_fuel = st.fuel_used_l;
        prev_odo = st.odometer_m;
    }
}

TEST_CASE("steady cruise burns strictly more fuel with the fan on") {
    const VehicleParams p = default_params();
    const Route route = flat_route();

    auto cruise_fuel = [&](bool fan) {
        VehicleState st;
        st.speed_mps = 60.0 / 3.6;
        st.gear = 4;
        PidController pid;
        // settle first, then measure 100 s
        for (int k = 0; k < 20000; ++k) {
            auto [throttle, brake] = pid.update(60.0 / 3.6, st.speed_mps, 0.01);
            VehicleInputs in;
            in.throttle = throttle;
            in.brake = brake;
            in.fan_on = fan;
            vehicle_step(st, in, route, p, 0.01);
        }
        const double fuel_mark = st.fuel_used_l;
        for (int k = 0; k < 10000; ++k) {
            auto [throttle, brake] = pid.update(60.0 / 3.6, st.speed_mps, 0.01);
            VehicleInputs in;
            in.throttle = throttle;
            in.brake = brake;
            in.fan_on = fan;
            vehicle_step(st, in, route, p, 0.01);
        }
        return st.fuel_used_l - fuel_mark;
    };

    CHECK(cruise_fuel(true) > cruise_fuel(false) * 1.2);
}

TEST_CASE("energy sanity: fuel mass at least the minimum-bsfc equivalent") {
    const VehicleParams p = default_params();
    const Route route = flat_route();
    VehicleState st;
    PidController pid;

    double delivered_hp_integral = 0.0;  // hp * s
    const double dt = 0.01;
    for (int k = 0; k < 30000; ++k) {
        auto [throttle, brake] = pid.update(60.0 / 3.6, st.speed_mps, dt);
        VehicleInputs in;
        in.throttle = throttle;
        in.brake = brake;
        vehicle_step(st, in, route, p, dt);
        delivered_hp_integral += lookup_performance(p, st.rpm).power_hp * st.throttle * dt;
    }
    const double grams_actual = st.fuel_used_l * 1000.0 * p.fuel_density_kg_per_l;
    const double grams_floor = delivered_hp_integral * 0.7457 * p.bsfc_curve.min_value() / 3600.0;
    CHECK(grams_actual >= grams_floor * 0.999);
}

TEST_CASE("vehicle step is deterministic") {
    const VehicleParams p = default_params();
    const Route route = flat_route();
    auto run_once = [&] {
        VehicleState st;
        PidController pid;
        for (int k = 0; k < 5000; ++k) {
            auto [throttle, brake] = pid.update(50.0 / 3.6, st.speed_mps, 0.01);
            VehicleInputs in;
            in.throttle = throttle;
            in.brake = brake;
            in.fan_on = k > 2500;
            vehicle_step(st, in, route, p, 0.01);
        }
        return st;
    };
    const VehicleState a = run_once();
    const VehicleState b = run_once();
    CHECK(a.speed_mps == b.speed_mps);
    CHECK(a.fuel_used_l == b.fuel_used_l);
    CHECK(a.coolant_temp_c == b.coolant_temp_c);
    CHECK(a.position_m == b.position_m);
}

TEST_CASE("route loading validates segments") {
    const Route r = Route::load(std::string(MGV_DATA_DIR) + "/routes/route1.json");
    CHECK(r.total_length_m() == doctest::Approx(30000.0));
    CHECK(r.at(0.0).surface == "main_road");
    CHECK(r.at(1500.0).surface == "incline");
    CHECK(r.at(1500.0).target_speed_kmh == doctest::Approx(40.0));
    CHECK_FALSE(r.exhausted(29999.0));
    CHECK(r.exhausted(30000.0));

    CHECK_THROWS_AS(
        Route::from_json_text(R"({"segments":[{"length_m":-5,"target_speed_kmh":60}]})", "x"),
        ConfigError);
    CHECK_THROWS_AS(
        Route::from_json_text(
            R"({"segments":[{"length_m":5,"target_speed_kmh":60,"surface":"swamp"}]})", "x"),
        ConfigError);
}

TEST_CASE("all five bundled subroutes total about 151 km") {
    double total = 0.0;
    for (int id = 1; id <= 5; ++id) {
        const Route r =
            Route::load(std::string(MGV_DATA_DIR) + "/routes/route" + std::to_string(id) +
                        ".json");
        total += r.total_length_m();
    }
    CHECK(total / 1000.0 == doctest::Approx(151.0).epsilon(0.01));
}
