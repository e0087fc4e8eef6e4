#include "mgv/ecus.hpp"

#include <cmath>

namespace mgv {

namespace {
constexpr double kTimeEps = 1e-9;
}

bool WatchdogLogic::update(bool out_of_range, double now) {
    if (!out_of_range) {
        armed_since_.reset();
        return false;
    }
    if (!armed_since_) {
        armed_since_ = now;
        window_ = cfg_.watchdog_base_s +
                  rng_.uniform(-cfg_.watchdog_jitter_s, cfg_.watchdog_jitter_s);
    }
    if (now - *armed_since_ >= window_ - kTimeEps) {
        armed_since_.reset();
        return true;
    }
    return false;
}

void WatchdogLogic::reset() { armed_since_.reset(); }

FanController::FanController(FanControllerConfig cfg, SignalDef fan_signal,
                             uint8_t fan_frame_dlc, Rng watchdog_rng)
    : cfg_(cfg),
      fan_signal_(std::move(fan_signal)),
      fan_frame_dlc_(fan_frame_dlc),
      watchdog_(cfg, std::move(watchdog_rng)) {}

bool FanController::out_of_range(double temp_c) const {
    // stuck-fan signature (cold while the fan is commanded) or overheat
    if (temp_c < cfg_.lower_c && state_.fan_commanded) return true;
    if (temp_c > cfg_.upper_c + cfg_.watchdog_margin_c) return true;
    return false;
}

void FanController::come_online_if_due(double now) {
    if (state_.status.mode != EcuStatus::Mode::kOffline) return;
    if (now < state_.status.offline_until) return;
    // outage over: firmware restored, state cleared
    state_.status.mode = EcuStatus::Mode::kOnline;
    state_.fan_commanded = false;
    watchdog_.reset();
    if (state_.attack_pending) {
        state_.attack_pending = false;
        state_.status.mode = EcuStatus::Mode::kCompromised;
    }
}

std::optional<CanFrame> FanController::step(std::optional<double> temp_c, double now) {
    if (!started_) {
        started_ = true;
        start_time_ = now;
    }
    come_online_if_due(now);
    if (state_.status.mode == EcuStatus::Mode::kOffline) return std::nullopt;

    if (temp_c) {
        state_.last_temp_c = *temp_c;
        if (*temp_c >= cfg_.lower_c) state_.warmed_up = true;

        if (*temp_c >= cfg_.upper_c) {
            state_.fan_commanded = true;
        } else if (*temp_c <= cfg_.lower_c &&
                   state_.status.mode != EcuStatus::Mode::kCompromised) {
            state_.fan_commanded = false;
        }
        // readings between the thresholds hold the current command
    }

    const bool warmup_done =
        state_.warmed_up && (now - start_time_ >= cfg_.warmup_min_time_s - kTimeEps);
    if (cfg_.watchdog_enabled && warmup_done && state_.last_temp_c) {
        if (watchdog_.update(out_of_range(*state_.last_temp_c), now)) {
            reflash(now);
            return std::nullopt;
        }
    }

    if (now - state_.last_emit >= cfg_.emit_period_s - kTimeEps) {
        state_.last_emit = now;
        CanFrame frame;
        frame.id = fan_signal_.frame_id;
        frame.dlc = fan_frame_dlc_;
        frame = encode_signal(fan_signal_, state_.fan_commanded ? 1.0 : 0.0, frame);
        return frame;
    }
    return std::nullopt;
}

void FanController::trigger_attack(double now) {
    if (state_.status.mode == EcuStatus::Mode::kOffline && now < state_.status.offline_until) {
        state_.attack_pending = true;  // deferred until the ECU is back
        return;
    }
    state_.status.mode = EcuStatus::Mode::kCompromised;
}

void FanController::stop_attack(double now) {
    state_.attack_pending = false;
    if (state_.status.mode == EcuStatus::Mode::kCompromised)
        state_.status.mode = EcuStatus::Mode::kOnline;
    (void)now;
}

void FanController::reflash(double now) {
    state_.status.mode = EcuStatus::Mode::kOffline;
    state_.status.offline_until = now + cfg_.reflash_outage_s;
    watchdog_.reset();
    reflash_count_++;
}

std::vector<CanFrame> PowertrainEcu::on_frame(const TimedFrame& tf, double now) {
    std::vector<CanFrame> out;
    if (!status_.online_at(now)) return out;
    if (status_.mode == EcuStatus::Mode::kOffline) status_.mode = EcuStatus::Mode::kOnline;

    for (const Mapping& m : mappings_) {
        if (m.input.frame_id != tf.frame.id) continue;
        double value = decode_signal(m.input, tf.frame);
        if (override_) value = override_(m.input.name, value);
        CanFrame frame;
        frame.id = m.output.frame_id;
        frame.dlc = m.output_dlc;
        out.push_back(encode_signal(m.output, value, frame));
    }
    return out;
}

ChassisEcu::ChassisEcu(Config cfg, SignalDef accelerator, SignalDef brake, SignalDef steering,
                       uint8_t acc_dlc, uint8_t brake_dlc, uint8_t steer_dlc)
    : cfg_(cfg),
      acc_def_(std::move(accelerator)),
      brake_def_(std::move(brake)),
      steer_def_(std::move(steering)),
      acc_dlc_(acc_dlc),
      brake_dlc_(brake_dlc),
      steer_dlc_(steer_dlc) {}

std::vector<CanFrame> ChassisEcu::step(double accelerator, double brake, double steering,
                                       double now) {
    std::vector<CanFrame> out;
    if (!status_.online_at(now)) return out;
    if (status_.mode == EcuStatus::Mode::kOffline) status_.mode = EcuStatus::Mode::kOnline;
    if (now - last_emit_ < cfg_.cadence_s - kTimeEps) return out;
    last_emit_ = now;

    auto encode = [](const SignalDef& def, uint8_t dlc, double value) {
        CanFrame f;
        f.id = def.frame_id;
        f.dlc = dlc;
        return encode_signal(def, value, f);
    };
    out.push_back(encode(acc_def_, acc_dlc_, accelerator));
    out.push_back(encode(brake_def_, brake_dlc_, brake));
    out.push_back(encode(steer_def_, steer_dlc_, steering));
    return out;
}

}  // namespace mgv
