#include "mgv/textlink.hpp"

#include <arpa/inet.h>
#include <fcntl.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>

#include "mgv/errors.hpp"

namespace mgv {

namespace {

void set_nonblocking(int fd) {
    const int flags = fcntl(fd, F_GETFL, 0);
    fcntl(fd, F_SETFL, flags | O_NONBLOCK);
}

}  // namespace

TextLinkServer::~TextLinkServer() { close_all(); }

uint16_t TextLinkServer::listen(uint16_t port) {
    close_all();
    listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    if (listen_fd_ < 0) throw Error("textlink: socket() failed");
    const int one = 1;
    ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));

    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
    addr.sin_port = htons(port);
    if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0) {
        close_all();
        throw Error("textlink: bind failed: " + std::string(strerror(errno)));
    }
    if (::listen(listen_fd_, 1) != 0) {
        close_all();
        throw Error("textlink: listen failed");
    }
    set_nonblocking(listen_fd_);

    socklen_t len = sizeof(addr);
    ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
    return ntohs(addr.sin_port);
}

std::vector<std::pair<std::string, std::string>> TextLinkServer::poll() {
    std::vector<std::pair<std::string, std::string>> lines;
    if (listen_fd_ < 0) return lines;

    if (client_fd_ < 0) {
        const int fd = ::accept(listen_fd_, nullptr, nullptr);
        if (fd >= 0) {
            client_fd_ = fd;
            set_nonblocking(client_fd_);
        }
    }
    if (client_fd_ < 0) return lines;

    char buf[4096];
    for (;;) {
        const ssize_t n = ::recv(client_fd_, buf, sizeof(buf), 0);
        if (n > 0) {
            rx_buffer_.append(buf, size_t(n));
            continue;
        }
        if (n == 0) {  // client hung up
            ::close(client_fd_);
            client_fd_ = -1;
        }
        break;
    }

    size_t start = 0;
    for (;;) {
        const size_t nl = rx_buffer_.find('\n', start);
        if (nl == std::string::npos) break;
        std::string line = rx_buffer_.substr(start, nl - start);
        start = nl + 1;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const size_t colon = line.find(':');
        if (colon == std::string::npos) {
            lines.emplace_back("", std::move(line));
        } else {
            lines.emplace_back(line.substr(0, colon), line.substr(colon + 1));
        }
    }
    rx_buffer_.erase(0, start);
    return lines;
}

void TextLinkServer::send(const std::string& topic, const std::string& payload) {
    if (client_fd_ < 0) return;
    std::string msg = topic + ":" + payload + "\n";
    size_t sent = 0;
    int stalls = 0;
    while (sent < msg.size()) {
        const ssize_t n = ::send(client_fd_, msg.data() + sent, msg.size() - sent, MSG_NOSIGNAL);
        if (n <= 0) {
            // a stalled client must not wedge the simulation loop
            if ((errno == EAGAIN || errno == EWOULDBLOCK) && ++stalls < 1000) continue;
            ::close(client_fd_);
            client_fd_ = -1;
            return;
        }
        stalls = 0;
        sent += size_t(n);
    }
}

void TextLinkServer::close_all() {
    if (client_fd_ >= 0) ::close(client_fd_);
    if (listen_fd_ >= 0) ::close(listen_fd_);
    client_fd_ = -1;
    listen_fd_ = -1;
    rx_buffer_.clear();
}

}  // namespace mgv
