#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace mgv {

// Optional line-oriented TCP transport for the gateway's text tuples.
// Wire format, one message per line:
//   SimToVis:<ts>,<param>,<value>\n
//   VisToSim:<ts>,<param>,<value>\n
// Single listener, single client; all reads and writes happen on the
// simulation loop's thread between ticks.
class TextLinkServer {
  public:
    TextLinkServer() = default;
    ~TextLinkServer();
    TextLinkServer(const TextLinkServer&) = delete;
    TextLinkServer& operator=(const TextLinkServer&) = delete;

    // Binds 127.0.0.1:<port>; port 0 picks an ephemeral port. Returns the
    // bound port.
    uint16_t listen(uint16_t port);

    bool has_client() const { return client_fd_ >= 0; }

    // Accepts a pending client (if any) and reads whatever complete lines
    // arrived, split into (topic, payload) pairs. Never blocks.
    std::vector<std::pair<std::string, std::string>> poll();

    // Queues one line to the client (no-op when nobody is connected).
    void send(const std::string& topic, const std::string& payload);

    void close_all();

  private:
    int listen_fd_ = -1;
    int client_fd_ = -1;
    std::string rx_buffer_;
};

}  // namespace mgv
