#pragma once

#include <optional>
#include <string>

#include "mgv/rng.hpp"
#include "mgv/signals.hpp"
#include "mgv/vbus.hpp"

namespace mgv {

// Lifecycle shared by all virtual ECUs. An offline ECU emits nothing and
// ignores all input until its outage expires; compromised ECUs keep running
// with altered behavior.
struct EcuStatus {
    enum class Mode { kOnline, kOffline, kCompromised };
    Mode mode = Mode::kOnline;
    double offline_until = 0.0;
    double uptime = 0.0;

    bool online_at(double now) const {
        return mode != Mode::kOffline || now >= offline_until;
    }
};

struct FanControllerConfig {
    double upper_c = 103.0;
    double lower_c = 85.0;
    double emit_period_s = 1.0;
    double reflash_outage_s = 20.0;
    double watchdog_base_s = 100.0;
    double watchdog_jitter_s = 10.0;
    double watchdog_margin_c = 5.0;   // overheat slack above the upper threshold
    double warmup_min_time_s = 0.0;
    bool watchdog_enabled = true;
};

// Out-of-range monitor shared by the fan controller's built-in watchdog and
// the detached bonware tap. Arms when the reading stays abnormal, draws its
// window (base +/- uniform jitter) once per arming, and fires a re-flash
// trigger when the window elapses.
class WatchdogLogic {
  public:
    WatchdogLogic(const FanControllerConfig& cfg, Rng rng) : cfg_(cfg), rng_(std::move(rng)) {}

    // `out_of_range` is the caller's abnormality predicate result at `now`.
    // Returns true exactly when the re-flash trigger fires.
    bool update(bool out_of_range, double now);
    void reset();

    std::optional<double> armed_since() const { return armed_since_; }
    double current_window() const { return window_; }

  private:
    FanControllerConfig cfg_;
    Rng rng_;
    std::optional<double> armed_since_;
    double window_ = 0.0;
};

struct FanControllerState {
    EcuStatus status;
    bool fan_commanded = false;
    double last_emit = -1e18;
    bool attack_pending = false;  // trigger received while offline
    bool warmed_up = false;
    std::optional<double> last_temp_c;
};

// The fan controller ECU: listens for coolant temperature frames, commands
// the fan with dual-threshold hysteresis, and emits one C_FAN frame per
// second while online. A simulated firmware compromise pins the fan on; the
// built-in watchdog re-flashes the ECU after a sustained abnormal reading.
class FanController {
  public:
    FanController(FanControllerConfig cfg, SignalDef fan_signal, uint8_t fan_frame_dlc,
                  Rng watchdog_rng);

    // Feeds one temperature reading (or none) and advances to `now`.
    // Returns the C_FAN frame when one is due.
    std::optional<CanFrame> step(std::optional<double> temp_c, double now);

    void trigger_attack(double now);
    void stop_attack(double now);
    void reflash(double now);

    const FanControllerState& state() const { return state_; }
    const FanControllerConfig& config() const { return cfg_; }
    uint64_t reflash_count() const { return reflash_count_; }

  private:
    bool out_of_range(double temp_c) const;
    void come_online_if_due(double now);

    FanControllerConfig cfg_;
    SignalDef fan_signal_;
    uint8_t fan_frame_dlc_;
    FanControllerState state_;
    WatchdogLogic watchdog_;
    double start_time_ = 0.0;
    bool started_ = false;
    uint64_t reflash_count_ = 0;
};

// Powertrain ECU: answers pedal-position frames with the corresponding
// engine actuation frames. The response map is identity unless an attack
// rule overrides it.
class PowertrainEcu {
  public:
    struct Mapping {
        SignalDef input;    // pedal signal
        SignalDef output;   // actuation signal
        uint8_t output_dlc = 8;
    };

    explicit PowertrainEcu(std::vector<Mapping> mappings) : mappings_(std::move(mappings)) {}

    // Response frames for one incoming frame; empty when offline or the
    // frame carries no mapped signal.
    std::vector<CanFrame> on_frame(const TimedFrame& tf, double now);

    void set_override(std::function<double(const std::string& signal, double value)> fn) {
        override_ = std::move(fn);
    }
    EcuStatus& status() { return status_; }

  private:
    std::vector<Mapping> mappings_;
    std::function<double(const std::string&, double)> override_;
    EcuStatus status_;
};

// Chassis ECU: encodes the automated driver's outputs (accelerator, brake,
// steering) at a fixed cadence.
class ChassisEcu {
  public:
    struct Config {
        double cadence_s = 0.1;
    };

    ChassisEcu(Config cfg, SignalDef accelerator, SignalDef brake, SignalDef steering,
               uint8_t acc_dlc, uint8_t brake_dlc, uint8_t steer_dlc);

    // Frames due at `now` (empty between cadence points or while offline).
    std::vector<CanFrame> step(double accelerator, double brake, double steering, double now);

    EcuStatus& status() { return status_; }

  private:
    Config cfg_;
    SignalDef acc_def_, brake_def_, steer_def_;
    uint8_t acc_dlc_, brake_dlc_, steer_dlc_;
    double last_emit_ = -1e18;
    EcuStatus status_;
};

}  // namespace mgv
