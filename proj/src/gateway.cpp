#include "mgv/gateway.hpp"

#include <charconv>
#include <cmath>

namespace mgv {

GatewayMapping::GatewayMapping(std::vector<GatewayMappingEntry> entries)
    : entries_(std::move(entries)) {
    for (size_t i = 0; i < entries_.size(); ++i)
        for (size_t j = i + 1; j < entries_.size(); ++j)
            if (entries_[i].parameter == entries_[j].parameter &&
                entries_[i].direction == entries_[j].direction)
                throw ConfigError("duplicate gateway parameter '" + entries_[i].parameter + "'");
}

GatewayMapping GatewayMapping::from_dictionary(const SignalDictionary& dict) {
    std::vector<GatewayMappingEntry> entries;
    for (const GatewayEntryDef& g : dict.gateway_entries()) {
        GatewayMappingEntry e;
        e.def = dict.signal(g.signal);
        e.frame_dlc = dict.frame(e.def.frame_id).dlc;
        e.parameter = g.parameter;
        e.direction = g.direction == "to_text" ? GatewayDirection::kToText
                                               : GatewayDirection::kFromText;
        e.topic = g.topic;
        e.bus = g.bus;
        entries.push_back(std::move(e));
    }
    return GatewayMapping(std::move(entries));
}

const GatewayMappingEntry* GatewayMapping::find_parameter(const std::string& parameter,
                                                          GatewayDirection dir) const {
    for (const auto& e : entries_)
        if (e.parameter == parameter && e.direction == dir) return &e;
    return nullptr;
}

bool GatewayMapping::maps_frame(uint16_t id) const {
    for (const auto& e : entries_)
        if (e.direction == GatewayDirection::kToText && e.def.frame_id == id) return true;
    return false;
}

std::string format_gateway_line(double ts, const std::string& parameter, double value) {
    char buf[48];
    auto res = std::to_chars(buf, buf + sizeof(buf), ts, std::chars_format::fixed, 3);
    std::string out(buf, res.ptr);
    out += ',';
    out += parameter;
    out += ',';
    res = std::to_chars(buf, buf + sizeof(buf), value);  // shortest round-trip
    out.append(buf, res.ptr);
    return out;
}

std::vector<std::string> gateway_to_text(const GatewayMapping& mapping, const TimedFrame& tf,
                                         GatewayStats* stats) {
    std::vector<std::string> lines;
    for (const auto& e : mapping.entries()) {
        if (e.direction != GatewayDirection::kToText) continue;
        if (e.def.frame_id != tf.frame.id) continue;
        if (!e.bus.empty() && !tf.bus.empty() && e.bus != tf.bus) continue;
        const double value = decode_signal(e.def, tf.frame);
        lines.push_back(format_gateway_line(tf.timestamp, e.parameter, value));
    }
    if (lines.empty() && stats) stats->unmapped_frames++;
    if (stats) stats->lines_out += lines.size();
    return lines;
}

TimedFrame gateway_from_text(const GatewayMapping& mapping, const std::string& line,
                             const std::string& bus_hint) {
    const size_t c1 = line.find(',');
    if (c1 == std::string::npos)
        throw GatewayError("malformed gateway line (no comma): '" + line + "'");
    const size_t c2 = line.find(',', c1 + 1);
    if (c2 == std::string::npos)
        throw GatewayError("malformed gateway line (two fields): '" + line + "'");
    if (line.find(',', c2 + 1) != std::string::npos)
        throw GatewayError("malformed gateway line (extra fields): '" + line + "'");

    double ts = 0.0;
    {
        const char* first = line.data();
        const char* last = line.data() + c1;
        const auto res = std::from_chars(first, last, ts);
        if (res.ec != std::errc() || res.ptr != last || !std::isfinite(ts) || ts < 0.0)
            throw GatewayError("bad timestamp in gateway line: '" + line + "'");
    }
    const std::string parameter = line.substr(c1 + 1, c2 - c1 - 1);
    if (parameter.empty())
        throw GatewayError("empty parameter in gateway line: '" + line + "'");
    double value = 0.0;
    {
        const char* first = line.data() + c2 + 1;
        const char* last = line.data() + line.size();
        if (first == last) throw GatewayError("empty value in gateway line: '" + line + "'");
        const auto res = std::from_chars(first, last, value);
        if (res.ec != std::errc() || res.ptr != last || !std::isfinite(value))
            throw GatewayError("bad value in gateway line: '" + line + "'");
    }

    const GatewayMappingEntry* entry =
        mapping.find_parameter(parameter, GatewayDirection::kFromText);
    if (!entry)
        throw GatewayError("unknown gateway parameter '" + parameter + "' in line: '" + line +
                           "'");

    CanFrame frame;
    frame.id = entry->def.frame_id;
    frame.dlc = entry->frame_dlc;
    frame = encode_signal(entry->def, value, frame);

    TimedFrame tf;
    tf.timestamp = ts;
    tf.bus = !entry->bus.empty() ? entry->bus : bus_hint;
    tf.frame = frame;
    return tf;
}

TapId Gateway::attach(Bus& bus, const std::string& tap_name) {
    const TapId tap =
        bus.attach_tap(tap_name, [this](const TimedFrame& tf) { on_frame(tf); });
    attachments_.push_back({&bus, tap});
    return tap;
}

void Gateway::on_frame(const TimedFrame& tf) {
    for (std::string& line : gateway_to_text(mapping_, tf, &stats_)) {
        const GatewayMappingEntry* entry = nullptr;
        // recover the topic of the matched parameter
        const size_t c1 = line.find(',');
        const size_t c2 = line.find(',', c1 + 1);
        const std::string parameter = line.substr(c1 + 1, c2 - c1 - 1);
        entry = mapping_.find_parameter(parameter, GatewayDirection::kToText);
        out_lines_.emplace_back(entry ? entry->topic : "SimToVis", std::move(line));
    }
}

std::vector<std::pair<std::string, std::string>> Gateway::drain_lines() {
    std::vector<std::pair<std::string, std::string>> out;
    out.swap(out_lines_);
    return out;
}

void Gateway::ingest_line(const std::string& topic, const std::string& line, double now) {
    TimedFrame tf = gateway_from_text(mapping_, line);
    stats_.lines_in++;
    tf.timestamp = now;
    for (auto& att : attachments_) {
        if (!tf.bus.empty() && att.bus->name() != tf.bus) continue;
        att.bus->publish(att.tap, tf.frame, now);
        return;
    }
    throw GatewayError("gateway has no attachment for bus '" + tf.bus + "' (topic " + topic +
                       ")");
}

}  // namespace mgv
