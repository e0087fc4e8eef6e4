#include "mgv/vbus.hpp"

#include <algorithm>

namespace mgv {

TapId Bus::attach_tap(const std::string& tap_name,
                      std::function<void(const TimedFrame&)> on_frame,
                      FilterChain ingress) {
    for (const auto& t : taps_)
        if (t.name == tap_name)
            throw ConfigError("bus '" + name_ + "': duplicate tap name '" + tap_name + "'");
    Tap tap;
    tap.name = tap_name;
    tap.on_frame = std::move(on_frame);
    tap.ingress = std::move(ingress);
    taps_.push_back(std::move(tap));
    return taps_.size() - 1;
}

void Bus::set_ingress(TapId tap, FilterChain chain) {
    if (tap >= taps_.size()) throw UsageError("bad tap id");
    taps_[tap].ingress = std::move(chain);
}

void Bus::set_egress(TapId tap, FilterChain chain) {
    if (tap >= taps_.size()) throw UsageError("bad tap id");
    taps_[tap].egress = std::move(chain);
}

bool Bus::publish(TapId tap, const CanFrame& frame, double now) {
    if (tap >= taps_.size())
        throw UsageError("publish from detached tap on bus '" + name_ + "'");
    if (frame.id > CanFrame::kMaxId || frame.dlc > 8)
        throw UsageError("invalid frame on bus '" + name_ + "'");

    TimedFrame tf;
    tf.timestamp = now;
    tf.bus = name_;
    tf.frame = frame;
    if (!taps_[tap].egress.run(tf)) return false;

    pending_.push_back(Pending{std::move(tf), tap, seq_++});
    taps_[tap].published++;
    publish_by_name_[taps_[tap].name]++;
    return true;
}

void Bus::deliver(double now) {
    (void)now;
    if (delivering_) return;  // cascaded publishes are picked up by the outer call
    delivering_ = true;

    // Cascade rounds: frames published by handlers during delivery belong to
    // the same tick and go out in the next round.
    int rounds = 0;
    while (!pending_.empty()) {
        if (++rounds > 16)
            throw UsageError("bus '" + name_ + "': tap feedback loop exceeded cascade depth");
        std::vector<Pending> batch;
        batch.swap(pending_);
        std::stable_sort(batch.begin(), batch.end(), [](const Pending& a, const Pending& b) {
            if (a.tf.frame.id != b.tf.frame.id) return a.tf.frame.id < b.tf.frame.id;
            return a.seq < b.seq;
        });
        for (const Pending& p : batch) {
            for (TapId i = 0; i < taps_.size(); ++i) {
                if (i == p.source) continue;
                TimedFrame tf = p.tf;
                if (!taps_[i].ingress.run(tf)) continue;
                taps_[i].delivered++;
                if (taps_[i].on_frame) taps_[i].on_frame(tf);
            }
        }
    }
    delivering_ = false;
}

const std::string& Bus::tap_name(TapId tap) const {
    if (tap >= taps_.size()) throw UsageError("bad tap id");
    return taps_[tap].name;
}

uint64_t Bus::published_count(TapId tap) const {
    if (tap >= taps_.size()) throw UsageError("bad tap id");
    return taps_[tap].published;
}

uint64_t Bus::delivered_count(TapId tap) const {
    if (tap >= taps_.size()) throw UsageError("bad tap id");
    return taps_[tap].delivered;
}

}  // namespace mgv
