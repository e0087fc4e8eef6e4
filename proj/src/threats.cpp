#include "mgv/threats.hpp"

#include <algorithm>
#include <cmath>

namespace mgv {

namespace {

bool id_matches(const std::vector<uint16_t>& ids, uint16_t id) {
    return std::find(ids.begin(), ids.end(), id) != ids.end();
}

uint64_t mix(uint64_t h, uint64_t v) {
    h ^= v + 0x9E3779B97F4A7C15ull + (h << 6) + (h >> 2);
    // splitmix finalizer for avalanche
    h = (h ^ (h >> 30)) * 0xBF58476D1CE4E5B9ull;
    h = (h ^ (h >> 27)) * 0x94D049BB133111EBull;
    return h ^ (h >> 31);
}

}  // namespace

std::optional<CanFrame> InjectPlugin::poll(double now) {
    if (!spec_.active_at(now)) return std::nullopt;
    if (now + 1e-9 < next_emit_) return std::nullopt;
    emitted_++;
    // multiplicative schedule, immune to accumulation drift
    next_emit_ = spec_.start + double(emitted_) * spec_.period_s;
    return spec_.payload;
}

FilterStage make_block_stage(const AttackSpec& spec, uint64_t* dropped_counter) {
    return [spec, dropped_counter](const TimedFrame& tf) {
        if (!spec.active_at(tf.timestamp)) return FilterAction::pass();
        if (!id_matches(spec.target_ids, tf.frame.id)) return FilterAction::pass();
        if (dropped_counter) (*dropped_counter)++;
        return FilterAction::drop();
    };
}

FilterStage make_modify_stage(const AttackSpec& spec, uint64_t* modified_counter) {
    return [spec, modified_counter](const TimedFrame& tf) {
        if (!spec.active_at(tf.timestamp)) return FilterAction::pass();
        if (tf.frame.id != spec.modify_signal.frame_id) return FilterAction::pass();
        double value = decode_signal(spec.modify_signal, tf.frame);
        switch (spec.modify_mode) {
            case AttackSpec::ModifyMode::kSet: value = spec.modify_value; break;
            case AttackSpec::ModifyMode::kAdd: value += spec.modify_value; break;
            case AttackSpec::ModifyMode::kIdentity: break;
        }
        if (modified_counter) (*modified_counter)++;
        return FilterAction::replace(encode_signal(spec.modify_signal, value, tf.frame));
    };
}

uint8_t WatermarkChannel::watermark_start(uint16_t id) const {
    const FrameDef& fd = dict_->frame(id);
    if (!fd.watermark_start)
        throw ConfigError("frame " + std::to_string(id) +
                          " has no designated watermark bits in the dictionary");
    return *fd.watermark_start;
}

uint8_t WatermarkChannel::mac8(uint64_t key, const CanFrame& masked_frame, uint8_t counter) {
    uint64_t h = key;
    h = mix(h, masked_frame.id);
    h = mix(h, masked_frame.dlc);
    h = mix(h, extract_bits(masked_frame, 0, 64));
    h = mix(h, counter & 0x0F);
    return uint8_t(h & 0xFF);
}

CanFrame WatermarkChannel::apply(const CanFrame& frame) {
    const uint8_t wm = watermark_start(frame.id);
    CanFrame masked = frame;
    deposit_bits(masked, wm, 8, 0);
    uint8_t& ctr = apply_counter_[frame.id];
    const uint8_t mac = mac8(key_, masked, ctr);
    ctr = uint8_t((ctr + 1) & 0x0F);
    CanFrame out = frame;
    deposit_bits(out, wm, 8, mac);
    return out;
}

bool WatermarkChannel::verify(const CanFrame& frame) {
    const uint8_t wm = watermark_start(frame.id);
    CanFrame masked = frame;
    deposit_bits(masked, wm, 8, 0);
    uint8_t& ctr = verify_counter_[frame.id];
    const uint8_t expected = mac8(key_, masked, ctr);
    ctr = uint8_t((ctr + 1) & 0x0F);
    return uint64_t(expected) == extract_bits(frame, wm, 8);
}

bool PlausibilityFilter::warmed() const {
    if (history_.size() < 3) return false;
    return history_.back().first - history_.front().first >= window_s_ - 1e-9;
}

double PlausibilityFilter::predict(double t) const {
    // least-squares line over the window, extrapolated to t
    const double t0 = history_.front().first;
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const double n = double(history_.size());
    for (const auto& [ti, vi] : history_) {
        const double x = ti - t0;
        sx += x;
        sy += vi;
        sxx += x * x;
        sxy += x * vi;
    }
    const double denom = n * sxx - sx * sx;
    if (std::abs(denom) < 1e-12) return sy / n;
    const double slope = (n * sxy - sx * sy) / denom;
    const double intercept = (sy - slope * sx) / n;
    return intercept + slope * (t - t0);
}

FilterAction PlausibilityFilter::check(const TimedFrame& tf) {
    if (tf.frame.id != def_.frame_id) return FilterAction::pass();
    const double observed = decode_signal(def_, tf.frame);

    if (!warmed()) {
        history_.emplace_back(tf.timestamp, observed);
        while (history_.size() > 2 &&
               tf.timestamp - history_[1].first >= window_s_ - 1e-9)
            history_.pop_front();
        return FilterAction::pass();
    }

    const double predicted = predict(tf.timestamp);
    if (std::abs(observed - predicted) > tolerance_) {
        substitutions_++;
        history_.emplace_back(tf.timestamp, predicted);
        while (history_.size() > 2 && tf.timestamp - history_[1].first >= window_s_ - 1e-9)
            history_.pop_front();
        CanFrame sub;
        sub.id = def_.frame_id;
        sub.dlc = dlc_;
        sub = encode_signal(def_, predicted, sub);
        return FilterAction::replace(sub);
    }

    history_.emplace_back(tf.timestamp, observed);
    while (history_.size() > 2 && tf.timestamp - history_[1].first >= window_s_ - 1e-9)
        history_.pop_front();
    return FilterAction::pass();
}

FilterStage PlausibilityFilter::as_stage() {
    return [this](const TimedFrame& tf) { return check(tf); };
}

}  // namespace mgv
