#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <variant>
#include <vector>

#include "mgv/signals.hpp"

namespace mgv {

// One stage of a filter chain: pass the frame on, drop it, or replace it.
struct FilterAction {
    enum Kind { kPass, kDrop, kReplace } kind = kPass;
    CanFrame replacement;

    static FilterAction pass() { return {kPass, {}}; }
    static FilterAction drop() { return {kDrop, {}}; }
    static FilterAction replace(CanFrame f) { return {kReplace, f}; }
};

using FilterStage = std::function<FilterAction(const TimedFrame&)>;

// Ordered filter stages; a drop terminates processing.
struct FilterChain {
    std::vector<FilterStage> stages;

    // Returns false when the frame was dropped; otherwise tf carries the
    // (possibly replaced) frame.
    bool run(TimedFrame& tf) const {
        for (const auto& stage : stages) {
            const FilterAction act = stage(tf);
            if (act.kind == FilterAction::kDrop) return false;
            if (act.kind == FilterAction::kReplace) tf.frame = act.replacement;
        }
        return true;
    }
};

using TapId = size_t;

// Virtual broadcast CAN bus with attachable taps. Frames published during a
// tick are delivered to every tap except their source before the next tick
// begins, ordered by ascending frame id (CAN priority) with submission order
// breaking ties. Responses published by taps while a tick is being delivered
// cascade within the same tick.
//
// Single-owner: all taps run on the simulation loop's thread.
class Bus {
  public:
    explicit Bus(std::string name) : name_(std::move(name)) {}

    const std::string& name() const { return name_; }

    // Handler invoked for every delivered frame; null for passive taps that
    // only publish. Returned id is used for publish().
    TapId attach_tap(const std::string& tap_name,
                     std::function<void(const TimedFrame&)> on_frame = nullptr,
                     FilterChain ingress = {});

    void set_ingress(TapId tap, FilterChain chain);
    // Egress stages transform frames as the tap publishes them (e.g. a
    // watermark stamp on a protected sender).
    void set_egress(TapId tap, FilterChain chain);

    bool publish(TapId tap, const CanFrame& frame, double now);

    // Delivers everything pending for this tick, including cascaded
    // responses. Caps the cascade depth to catch feedback loops.
    void deliver(double now);

    const std::string& tap_name(TapId tap) const;
    uint64_t published_count(TapId tap) const;
    uint64_t delivered_count(TapId tap) const;
    const std::map<std::string, uint64_t>& publish_stats() const { return publish_by_name_; }

  private:
    struct Tap {
        std::string name;
        std::function<void(const TimedFrame&)> on_frame;
        FilterChain ingress;
        FilterChain egress;
        uint64_t published = 0;
        uint64_t delivered = 0;
    };

    struct Pending {
        TimedFrame tf;
        TapId source;
        uint64_t seq;
    };

    std::string name_;
    std::vector<Tap> taps_;
    std::vector<Pending> pending_;
    std::map<std::string, uint64_t> publish_by_name_;
    uint64_t seq_ = 0;
    bool delivering_ = false;
};

}  // namespace mgv
