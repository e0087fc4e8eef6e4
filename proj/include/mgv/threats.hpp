#pragma once

#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mgv/signals.hpp"
#include "mgv/vbus.hpp"

namespace mgv {

// An attack window plus the per-kind payload. Outside [start, stop) every
// attack plugin is a bit-level identity on bus traffic.
struct AttackSpec {
    enum class Kind { kInject, kBlock, kModify, kFirmware };
    enum class ModifyMode { kSet, kAdd, kIdentity };

    Kind kind = Kind::kInject;
    double start = 0.0;
    std::optional<double> stop;

    // inject
    std::string bus;
    double period_s = 0.1;
    CanFrame payload;

    // block / modify placement: the tap whose ingress chain gets the filter
    std::string at_tap;
    std::vector<uint16_t> target_ids;

    // modify
    SignalDef modify_signal;
    uint8_t modify_dlc = 8;
    ModifyMode modify_mode = ModifyMode::kSet;
    double modify_value = 0.0;

    // firmware
    std::string target_ecu;

    std::string label;

    bool active_at(double now) const {
        return now >= start && (!stop || now < *stop);
    }
};

struct DefenseSpec {
    enum class Kind { kWatermark, kPlausibility, kReflashResponder };

    Kind kind = Kind::kWatermark;

    // watermark
    uint64_t key = 0;
    std::vector<uint16_t> ids;
    std::string apply_at;
    std::string verify_at;
    bool drop_on_reject = true;

    // plausibility
    std::string at_tap;
    std::string signal;
    double window_s = 5.0;
    double tolerance = 10.0;

    // reflash responder
    std::string target_ecu;

    std::string label;
};

// Periodic frame injector. Emits the payload every period while the window
// is open; the caller publishes the returned frames.
class InjectPlugin {
  public:
    explicit InjectPlugin(AttackSpec spec) : spec_(std::move(spec)), next_emit_(spec_.start) {}

    std::optional<CanFrame> poll(double now);
    const AttackSpec& spec() const { return spec_; }
    uint64_t emitted() const { return emitted_; }

  private:
    AttackSpec spec_;
    double next_emit_;
    uint64_t emitted_ = 0;
};

// Filter stages for a tap's ingress chain. Counters outlive the stage so
// runs can audit how many frames were touched.
FilterStage make_block_stage(const AttackSpec& spec, uint64_t* dropped_counter);
FilterStage make_modify_stage(const AttackSpec& spec, uint64_t* modified_counter);

// Keyed 8-bit watermark over (id, non-watermark payload bits, rolling
// counter mod 16), stored in the frame's designated watermark field. The
// MAC is a keyed 64-bit mixer truncated to 8 bits; detection tests rely
// only on the 2^-8 collision bound. Verification runs in lockstep with the
// stamped stream: the verifier advances its counter on every observed
// frame, accepted or not.
class WatermarkChannel {
  public:
    WatermarkChannel(uint64_t key, const SignalDictionary* dict) : key_(key), dict_(dict) {}

    CanFrame apply(const CanFrame& frame);
    bool verify(const CanFrame& frame);

    static uint8_t mac8(uint64_t key, const CanFrame& masked_frame, uint8_t counter);

  private:
    uint8_t watermark_start(uint16_t id) const;

    uint64_t key_;
    const SignalDictionary* dict_;
    std::map<uint16_t, uint8_t> apply_counter_;
    std::map<uint16_t, uint8_t> verify_counter_;
};

// Model-based plausibility filter for one signal: predicts the next value
// by linear extrapolation over a trailing window and substitutes a frame
// carrying the prediction when the observation strays beyond the tolerance.
// Cold predictors pass frames through untouched.
class PlausibilityFilter {
  public:
    PlausibilityFilter(SignalDef def, uint8_t dlc, double window_s, double tolerance)
        : def_(std::move(def)), dlc_(dlc), window_s_(window_s), tolerance_(tolerance) {
        if (tolerance_ <= 0) throw ConfigError("plausibility tolerance must be positive");
    }

    FilterAction check(const TimedFrame& tf);
    FilterStage as_stage();  // shares this object's state

    uint64_t substitutions() const { return substitutions_; }

  private:
    bool warmed() const;
    double predict(double t) const;

    SignalDef def_;
    uint8_t dlc_;
    double window_s_;
    double tolerance_;
    std::deque<std::pair<double, double>> history_;  // (t, value)
    uint64_t substitutions_ = 0;
};

}  // namespace mgv
