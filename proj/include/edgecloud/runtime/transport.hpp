// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace edgecloud::runtime {

struct Endpoint {
  std::string host;
  std::uint16_t port = 0;
};

/// "host:port"; the host may be a name or a numeric address.
Endpoint parse_endpoint(const std::string &text);

/// Owning TCP socket; move-only.
class Socket {
public:
  Socket() = default;
  explicit Socket(int fd) noexcept : fd_(fd) {}
  Socket(Socket &&other) noexcept;
  Socket &operator=(Socket &&other) noexcept;
  Socket(const Socket &) = delete;
  Socket &operator=(const Socket &) = delete;
  ~Socket();

  int fd() const noexcept { return fd_; }
  bool valid() const noexcept { return fd_ >= 0; }
  /// Unblocks pending reads/accepts on this socket from another thread.
  void shutdown() noexcept;
  void close() noexcept;

private:
  int fd_ = -1;
};

/// Network error when the endpoint cannot be reached.
Socket connect_to(const Endpoint &ep);

class Listener {
public:
  /// Port 0 picks a free port; see port().
  explicit Listener(const Endpoint &ep);
  std::uint16_t port() const noexcept { return port_; }
  /// Empty socket once the listener has been shut down.
  Socket accept();
  void shutdown() noexcept { sock_.shutdown(); }

private:
  Socket sock_;
  std::uint16_t port_ = 0;
};

/// Writes a u32 little-endian length prefix followed by the frame.
void send_frame(Socket &s, std::span<const std::uint8_t> frame);

/// nullopt on a clean close between frames; protocol error on a close
/// inside a frame or an oversized length prefix.
std::optional<std::vector<std::uint8_t>> recv_frame(Socket &s);

} // namespace edgecloud::runtime
