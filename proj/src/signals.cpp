#include "mgv/signals.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "json_util.hpp"

namespace mgv {

namespace {

void check_field(const SignalDef& def, const CanFrame& frame) {
    if (def.frame_id != frame.id)
        throw CodecError("signal '" + def.name + "' targets frame " +
                         std::to_string(def.frame_id) + " but got frame " +
                         std::to_string(frame.id));
    if (def.bit_length == 0 || def.bit_length > 32)
        throw CodecError("signal '" + def.name + "' has invalid bit length");
    if (def.start_bit + def.bit_length > frame.dlc * 8)
        throw CodecError("signal '" + def.name + "' field [" +
                         std::to_string(def.start_bit) + ", " +
                         std::to_string(def.start_bit + def.bit_length) +
                         ") exceeds frame payload of " + std::to_string(frame.dlc) + " bytes");
}

uint64_t payload_as_u64(const CanFrame& frame) {
    uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | frame.data[size_t(i)];
    return v;
}

void payload_from_u64(CanFrame& frame, uint64_t v) {
    for (size_t i = 0; i < 8; ++i) {
        frame.data[i] = uint8_t(v & 0xFF);
        v >>= 8;
    }
}

}  // namespace

uint64_t extract_bits(const CanFrame& frame, uint8_t start_bit, uint8_t bit_length) {
    const uint64_t payload = payload_as_u64(frame);
    const uint64_t mask = bit_length >= 64 ? ~0ull : ((1ull << bit_length) - 1ull);
    return (payload >> start_bit) & mask;
}

void deposit_bits(CanFrame& frame, uint8_t start_bit, uint8_t bit_length, uint64_t value) {
    const uint64_t mask = bit_length >= 64 ? ~0ull : ((1ull << bit_length) - 1ull);
    uint64_t payload = payload_as_u64(frame);
    payload &= ~(mask << start_bit);
    payload |= (value & mask) << start_bit;
    payload_from_u64(frame, payload);
}

CanFrame encode_signal(const SignalDef& def, double physical, CanFrame frame, bool* clamped) {
    check_field(def, frame);
    if (def.scale == 0.0) throw CodecError("signal '" + def.name + "' has zero scale");
    if (!std::isfinite(physical))
        throw CodecError("non-finite value for signal '" + def.name + "'");

    const double raw_f = std::round((physical - def.offset) / def.scale);
    const double max_raw = double(def.max_raw());
    bool did_clamp = false;
    double raw = raw_f;
    if (raw < 0.0) {
        raw = 0.0;
        did_clamp = true;
    } else if (raw > max_raw) {
        raw = max_raw;
        did_clamp = true;
    }
    if (clamped) *clamped = did_clamp;

    deposit_bits(frame, def.start_bit, def.bit_length, uint64_t(raw));
    return frame;
}

double decode_signal(const SignalDef& def, const CanFrame& frame) {
    check_field(def, frame);
    const uint64_t raw = extract_bits(frame, def.start_bit, def.bit_length);
    return double(raw) * def.scale + def.offset;
}

std::string format_log_line(const TimedFrame& tf) {
    char ts[40];
    const auto res = std::to_chars(ts, ts + sizeof(ts), tf.timestamp,
                                   std::chars_format::fixed, 6);
    std::string out = "(";
    out.append(ts, res.ptr);
    out += ") ";
    out += tf.bus;
    out += ' ';
    static const char* hex = "0123456789ABCDEF";
    out += hex[(tf.frame.id >> 8) & 0xF];
    out += hex[(tf.frame.id >> 4) & 0xF];
    out += hex[tf.frame.id & 0xF];
    out += '#';
    for (uint8_t i = 0; i < tf.frame.dlc; ++i) {
        out += hex[tf.frame.data[i] >> 4];
        out += hex[tf.frame.data[i] & 0xF];
    }
    return out;
}

namespace {

int hex_value(char c) {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    return -1;
}

}  // namespace

TimedFrame parse_log_line(const std::string& line) {
    size_t pos = 0;
    auto fail = [&](const std::string& why) -> ParseError { return ParseError(why, pos); };

    if (pos >= line.size() || line[pos] != '(') throw fail("expected '('");
    ++pos;
    const size_t ts_begin = pos;
    while (pos < line.size() && line[pos] >= '0' && line[pos] <= '9') ++pos;
    if (pos == ts_begin) throw fail("expected timestamp digits");
    if (pos >= line.size() || line[pos] != '.') throw fail("expected '.' in timestamp");
    ++pos;
    const size_t frac_begin = pos;
    while (pos < line.size() && line[pos] >= '0' && line[pos] <= '9') ++pos;
    if (pos - frac_begin != 6) throw fail("timestamp must have exactly 6 decimals");
    double ts = 0.0;
    {
        const char* first = line.data() + ts_begin;
        const char* last = line.data() + pos;
        const auto res = std::from_chars(first, last, ts);
        if (res.ec != std::errc() || res.ptr != last) throw fail("bad timestamp");
    }
    if (pos >= line.size() || line[pos] != ')') throw fail("expected ')'");
    ++pos;
    if (pos >= line.size() || line[pos] != ' ') throw fail("expected ' ' after timestamp");
    ++pos;

    const size_t bus_begin = pos;
    while (pos < line.size() && line[pos] != ' ') ++pos;
    if (pos == bus_begin) throw fail("expected bus name");
    const std::string bus = line.substr(bus_begin, pos - bus_begin);
    if (pos >= line.size()) throw fail("expected ' ' after bus name");
    ++pos;

    uint32_t id = 0;
    for (int i = 0; i < 3; ++i) {
        if (pos >= line.size()) throw fail("expected 3 hex digits of frame id");
        const int v = hex_value(line[pos]);
        if (v < 0) throw fail("bad hex digit in frame id");
        id = (id << 4) | uint32_t(v);
        ++pos;
    }
    if (id > CanFrame::kMaxId) throw fail("frame id exceeds 11 bits");
    if (pos >= line.size() || line[pos] != '#') throw fail("expected '#'");
    ++pos;

    CanFrame frame;
    frame.id = uint16_t(id);
    while (pos < line.size()) {
        if (frame.dlc >= 8) throw fail("more than 8 data bytes");
        const int hi = hex_value(line[pos]);
        if (hi < 0) throw fail("bad hex digit in data");
        ++pos;
        if (pos >= line.size()) throw fail("odd number of hex digits in data");
        const int lo = hex_value(line[pos]);
        if (lo < 0) throw fail("bad hex digit in data");
        ++pos;
        frame.data[frame.dlc++] = uint8_t((hi << 4) | lo);
    }

    TimedFrame tf;
    tf.timestamp = ts;
    tf.bus = bus;
    tf.frame = frame;
    return tf;
}

uint16_t parse_frame_id(const std::string& text) {
    std::string body = text;
    if (body.rfind("0x", 0) == 0 || body.rfind("0X", 0) == 0) body = body.substr(2);
    if (body.empty()) throw ConfigError("empty frame id '" + text + "'");
    uint32_t id = 0;
    for (char c : body) {
        int v = hex_value(char(std::toupper(static_cast<unsigned char>(c))));
        if (v < 0) throw ConfigError("bad frame id '" + text + "'");
        id = (id << 4) | uint32_t(v);
        if (id > 0xFFFF) throw ConfigError("frame id '" + text + "' out of range");
    }
    if (id > CanFrame::kMaxId)
        throw ConfigError("frame id '" + text + "' exceeds 11 bits");
    return uint16_t(id);
}

namespace {

uint16_t frame_id_from_json(const detail::json& j, const std::string& context) {
    if (j.is_number_unsigned() || j.is_number_integer()) {
        const int64_t v = j.get<int64_t>();
        if (v < 0 || v > CanFrame::kMaxId)
            throw ConfigError(context + ": frame id out of range");
        return uint16_t(v);
    }
    if (j.is_string()) return parse_frame_id(j.get<std::string>());
    throw ConfigError(context + ": frame id must be a number or hex string");
}

}  // namespace

SignalDictionary SignalDictionary::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open signal dictionary '" + path + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    return from_json_text(buf.str(), path);
}

SignalDictionary SignalDictionary::from_json_text(const std::string& text,
                                                  const std::string& origin) {
    using detail::json;
    json root;
    try {
        root = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(origin + ": " + e.what());
    }
    detail::check_keys(root, {"signals", "frames", "gateway"}, origin);

    SignalDictionary dict;

    for (const auto& jf : detail::get_or<json>(root, "frames", json::array(), origin)) {
        detail::check_keys(jf, {"id", "name", "dlc", "watermark_start"}, origin + " frame");
        FrameDef fd;
        fd.id = frame_id_from_json(jf.at("id"), origin);
        fd.name = detail::get_or<std::string>(jf, "name", "", origin);
        const int dlc = detail::get_or<int>(jf, "dlc", 8, origin);
        if (dlc < 0 || dlc > 8) throw ConfigError(origin + ": frame dlc must be 0..8");
        fd.dlc = uint8_t(dlc);
        if (jf.contains("watermark_start")) {
            const int wm = jf.at("watermark_start").get<int>();
            if (wm < 0 || wm + 8 > dlc * 8)
                throw ConfigError(origin + ": watermark field outside frame payload");
            fd.watermark_start = uint8_t(wm);
        }
        if (!dict.frames_.emplace(fd.id, fd).second)
            throw ConfigError(origin + ": duplicate frame id " + std::to_string(fd.id));
    }

    for (const auto& js : detail::require<json>(root, "signals", origin)) {
        detail::check_keys(js, {"name", "frame_id", "start_bit", "bit_length", "scale",
                                "offset", "unit"},
                           origin + " signal");
        SignalDef def;
        def.name = detail::require<std::string>(js, "name", origin);
        def.frame_id = frame_id_from_json(js.at("frame_id"), origin + " signal " + def.name);
        const int start = detail::require<int>(js, "start_bit", origin);
        const int len = detail::require<int>(js, "bit_length", origin);
        if (start < 0 || start > 63) throw ConfigError(origin + ": start_bit out of range");
        if (len < 1 || len > 32) throw ConfigError(origin + ": bit_length out of range");
        if (start + len > 64) throw ConfigError(origin + ": field crosses 64-bit payload");
        def.start_bit = uint8_t(start);
        def.bit_length = uint8_t(len);
        def.scale = detail::require<double>(js, "scale", origin);
        if (def.scale == 0.0) throw ConfigError(origin + ": zero scale for '" + def.name + "'");
        def.offset = detail::get_or<double>(js, "offset", 0.0, origin);
        def.unit = detail::get_or<std::string>(js, "unit", "", origin);

        const auto fit = dict.frames_.find(def.frame_id);
        if (fit == dict.frames_.end())
            throw ConfigError(origin + ": signal '" + def.name + "' references frame " +
                              std::to_string(def.frame_id) + " missing from the frame table");
        if (def.start_bit + def.bit_length > fit->second.dlc * 8)
            throw ConfigError(origin + ": signal '" + def.name + "' exceeds the frame payload");
        if (fit->second.watermark_start) {
            const int wm = *fit->second.watermark_start;
            const bool overlap = def.start_bit < wm + 8 && wm < def.start_bit + def.bit_length;
            if (overlap)
                throw ConfigError(origin + ": signal '" + def.name +
                                  "' overlaps the watermark field");
        }
        if (!dict.signals_.emplace(def.name, def).second)
            throw ConfigError(origin + ": duplicate signal '" + def.name + "'");
    }

    for (const auto& jg : detail::get_or<json>(root, "gateway", json::array(), origin)) {
        detail::check_keys(jg, {"parameter", "signal", "direction", "topic", "bus"},
                           origin + " gateway entry");
        GatewayEntryDef g;
        g.parameter = detail::require<std::string>(jg, "parameter", origin);
        if (g.parameter.empty() ||
            g.parameter.find_first_of(",:\r\n") != std::string::npos)
            throw ConfigError(origin + ": gateway parameter '" + g.parameter +
                              "' is not representable in the tuple wire format");
        g.signal = detail::require<std::string>(jg, "signal", origin);
        g.direction = detail::require<std::string>(jg, "direction", origin);
        g.topic = detail::require<std::string>(jg, "topic", origin);
        g.bus = detail::require<std::string>(jg, "bus", origin);
        if (g.direction != "to_text" && g.direction != "from_text")
            throw ConfigError(origin + ": gateway direction must be to_text|from_text");
        if (g.topic != "SimToVis" && g.topic != "VisToSim")
            throw ConfigError(origin + ": gateway topic must be SimToVis|VisToSim");
        if (!dict.has_signal(g.signal))
            throw ConfigError(origin + ": gateway entry references unknown signal '" +
                              g.signal + "'");
        for (const auto& prev : dict.gateway_)
            if (prev.parameter == g.parameter && prev.direction == g.direction)
                throw ConfigError(origin + ": duplicate gateway parameter '" + g.parameter +
                                  "' for direction " + g.direction);
        dict.gateway_.push_back(std::move(g));
    }

    return dict;
}

const SignalDef& SignalDictionary::signal(const std::string& name) const {
    const auto it = signals_.find(name);
    if (it == signals_.end()) throw ConfigError("unknown signal '" + name + "'");
    return it->second;
}

const FrameDef& SignalDictionary::frame(uint16_t id) const {
    const auto it = frames_.find(id);
    if (it == frames_.end())
        throw ConfigError("unknown frame id " + std::to_string(id));
    return it->second;
}

std::vector<const SignalDef*> SignalDictionary::signals_of_frame(uint16_t id) const {
    std::vector<const SignalDef*> out;
    for (const auto& [name, def] : signals_)
        if (def.frame_id == id) out.push_back(&def);
    return out;
}

CanFrame SignalDictionary::blank_frame(const SignalDef& def) const {
    CanFrame f;
    f.id = def.frame_id;
    f.dlc = frame(def.frame_id).dlc;
    return f;
}

}  // namespace mgv
