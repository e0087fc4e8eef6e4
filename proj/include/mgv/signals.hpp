#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mgv/errors.hpp"

namespace mgv {

// Classic 11-bit CAN frame, up to 8 data bytes. No FD, no extended ids.
struct CanFrame {
    uint16_t id = 0;  // 0..=0x7FF
    uint8_t dlc = 0;  // 0..=8
    std::array<uint8_t, 8> data{};

    static constexpr uint16_t kMaxId = 0x7FF;

    bool operator==(const CanFrame& other) const {
        if (id != other.id || dlc != other.dlc) return false;
        for (uint8_t i = 0; i < dlc; ++i)
            if (data[i] != other.data[i]) return false;
        return true;
    }
};

// Bit-field mapping of one physical signal inside a frame.
// Little-endian bit numbering over the frame payload, unsigned raw values:
//   physical = raw * scale + offset
//   raw      = round((physical - offset) / scale), clamped to [0, 2^len - 1]
struct SignalDef {
    std::string name;
    uint16_t frame_id = 0;
    uint8_t start_bit = 0;   // 0..=63
    uint8_t bit_length = 0;  // 1..=32
    double scale = 1.0;      // != 0
    double offset = 0.0;
    std::string unit;

    uint32_t max_raw() const { return bit_length >= 32 ? 0xFFFFFFFFu : ((1u << bit_length) - 1u); }
};

// A frame on a named bus at a point in run time. Timestamps are seconds
// since run start, serialized at fixed 6-decimal precision.
struct TimedFrame {
    double timestamp = 0.0;
    std::string bus;
    CanFrame frame;
};

// Writes the raw field for `physical` into `frame`, leaving every other bit
// untouched. Out-of-range physical values clamp to the raw range; when
// `clamped` is non-null it reports whether clamping happened.
CanFrame encode_signal(const SignalDef& def, double physical, CanFrame frame,
                       bool* clamped = nullptr);

double decode_signal(const SignalDef& def, const CanFrame& frame);

// Raw field access used by the codec and by the watermarking plugin.
uint64_t extract_bits(const CanFrame& frame, uint8_t start_bit, uint8_t bit_length);
void deposit_bits(CanFrame& frame, uint8_t start_bit, uint8_t bit_length, uint64_t value);

// Log line grammar (one frame per line):
//   (<ts 6dp>) <bus> <ID as 3 uppercase hex>#<data as 2 hex per byte>
// e.g. "(1.234000) pt 183#7D". parse_log_line rejects anything else with a
// byte offset in the error.
std::string format_log_line(const TimedFrame& tf);
TimedFrame parse_log_line(const std::string& line);

// Static frame metadata from the dictionary file: payload size plus the
// designated watermark field, when the frame reserves one.
struct FrameDef {
    uint16_t id = 0;
    std::string name;
    uint8_t dlc = 8;
    std::optional<uint8_t> watermark_start;  // 8 bits at [start, start+8)
};

// The signal dictionary: every signal and frame the simulation knows about,
// loaded from JSON. Also carries the gateway parameter table so that bus
// wiring and codec definitions live in one file.
struct GatewayEntryDef {
    std::string parameter;
    std::string signal;
    std::string direction;  // "to_text" | "from_text"
    std::string topic;      // "SimToVis" | "VisToSim"
    std::string bus;
};

class SignalDictionary {
  public:
    static SignalDictionary load(const std::string& path);
    static SignalDictionary from_json_text(const std::string& text, const std::string& origin);

    const SignalDef& signal(const std::string& name) const;
    bool has_signal(const std::string& name) const { return signals_.count(name) != 0; }
    const FrameDef& frame(uint16_t id) const;
    bool has_frame(uint16_t id) const { return frames_.count(id) != 0; }
    std::vector<const SignalDef*> signals_of_frame(uint16_t id) const;
    const std::vector<GatewayEntryDef>& gateway_entries() const { return gateway_; }

    // Frame pre-filled with the dictionary dlc for the signal's frame.
    CanFrame blank_frame(const SignalDef& def) const;

  private:
    std::map<std::string, SignalDef> signals_;
    std::map<uint16_t, FrameDef> frames_;
    std::vector<GatewayEntryDef> gateway_;
};

// "0x387" / "387" (hex with or without prefix) or a plain decimal number.
uint16_t parse_frame_id(const std::string& text);

}  // namespace mgv
