#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "mgv/signals.hpp"
#include "mgv/vbus.hpp"

namespace mgv {

// Direction of one gateway mapping entry: to_text turns bus frames into
// "<ts>,<parameter>,<value>" tuples; from_text encodes tuples back into
// frames.
enum class GatewayDirection { kToText, kFromText };

struct GatewayMappingEntry {
    SignalDef def;
    uint8_t frame_dlc = 8;
    std::string parameter;
    GatewayDirection direction = GatewayDirection::kToText;
    std::string topic;  // "SimToVis" | "VisToSim"
    std::string bus;
};

struct GatewayStats {
    uint64_t lines_out = 0;
    uint64_t lines_in = 0;
    uint64_t unmapped_frames = 0;
};

class GatewayMapping {
  public:
    GatewayMapping() = default;
    explicit GatewayMapping(std::vector<GatewayMappingEntry> entries);

    // Built from the dictionary's gateway table.
    static GatewayMapping from_dictionary(const SignalDictionary& dict);

    const std::vector<GatewayMappingEntry>& entries() const { return entries_; }
    const GatewayMappingEntry* find_parameter(const std::string& parameter,
                                              GatewayDirection dir) const;
    bool maps_frame(uint16_t id) const;

  private:
    std::vector<GatewayMappingEntry> entries_;
};

// Tuple grammar: "<ts 3dp>,<parameter>,<value>" with the value printed as
// the shortest decimal that round-trips.
std::string format_gateway_line(double ts, const std::string& parameter, double value);

// One line per to_text signal matched in the frame. Unmapped frame ids
// yield an empty list and bump the unmapped counter.
std::vector<std::string> gateway_to_text(const GatewayMapping& mapping, const TimedFrame& tf,
                                         GatewayStats* stats = nullptr);

// Parses one tuple and encodes the mapped from_text signal into a fresh
// frame. Throws GatewayError on malformed lines or unknown parameters.
TimedFrame gateway_from_text(const GatewayMapping& mapping, const std::string& line,
                             const std::string& bus_hint = "");

// The CAN<->text bridge wired as an ordinary bus tap per bus. Collected
// SimToVis lines go to a sink callback (the vehicle model, a TCP link, a
// test); VisToSim lines are ingested and published as frames.
class Gateway {
  public:
    explicit Gateway(GatewayMapping mapping) : mapping_(std::move(mapping)) {}

    // Attaches this gateway to a bus; delivered frames matching to_text
    // entries for that bus are emitted as lines. Returns the tap id.
    TapId attach(Bus& bus, const std::string& tap_name = "gateway");

    // Lines produced since the last drain, in delivery order: (topic, line).
    std::vector<std::pair<std::string, std::string>> drain_lines();

    // Feeds one text tuple into the gateway; the mapped frame is published
    // on the entry's bus at `now`.
    void ingest_line(const std::string& topic, const std::string& line, double now);

    const GatewayMapping& mapping() const { return mapping_; }
    const GatewayStats& stats() const { return stats_; }

  private:
    struct Attachment {
        Bus* bus;
        TapId tap;
    };

    void on_frame(const TimedFrame& tf);

    GatewayMapping mapping_;
    GatewayStats stats_;
    std::vector<Attachment> attachments_;
    std::vector<std::pair<std::string, std::string>> out_lines_;
};

}  // namespace mgv
