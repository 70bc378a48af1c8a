// SPDX-License-Identifier: Apache-2.0
#include <edgecloud/runtime/transport.hpp>

#include <cerrno>
#include <cstring>

#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <edgecloud/error.hpp>
#include <edgecloud/runtime/wire.hpp>

namespace edgecloud::runtime {

namespace {

std::string describe(const Endpoint &ep) { return ep.host + ":" + std::to_string(ep.port); }

struct AddrInfo {
  addrinfo *head = nullptr;
  ~AddrInfo() {
    if (head)
      freeaddrinfo(head);
  }
};

AddrInfo resolve(const Endpoint &ep, bool passive) {
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  if (passive)
    hints.ai_flags = AI_PASSIVE;
  AddrInfo ai;
  const std::string port = std::to_string(ep.port);
  const int rc = getaddrinfo(ep.host.empty() ? nullptr : ep.host.c_str(), port.c_str(),
                             &hints, &ai.head);
  if (rc != 0)
    fail(ErrorKind::Network, "cannot resolve " + describe(ep) + ": " + gai_strerror(rc));
  return ai;
}

void write_all(Socket &s, const std::uint8_t *p, std::size_t n) {
  while (n > 0) {
    const ssize_t k = ::send(s.fd(), p, n, MSG_NOSIGNAL);
    if (k < 0) {
      if (errno == EINTR)
        continue;
      fail(ErrorKind::Network, std::string("send failed: ") + std::strerror(errno));
    }
    p += k;
    n -= static_cast<std::size_t>(k);
  }
}

/// Bytes read before EOF.
std::size_t read_all(Socket &s, std::uint8_t *p, std::size_t n) {
  std::size_t got = 0;
  while (got < n) {
    const ssize_t k = ::recv(s.fd(), p + got, n - got, 0);
    if (k < 0) {
      if (errno == EINTR)
        continue;
      fail(ErrorKind::Network, std::string("recv failed: ") + std::strerror(errno));
    }
    if (k == 0)
      break;
    got += static_cast<std::size_t>(k);
  }
  return got;
}

} // namespace

Endpoint parse_endpoint(const std::string &text) {
  const auto colon = text.rfind(':');
  if (colon == std::string::npos || colon + 1 == text.size())
    fail(ErrorKind::Config, "endpoint \"" + text + "\" must be host:port");
  Endpoint ep;
  ep.host = text.substr(0, colon);
  if (ep.host.size() >= 2 && ep.host.front() == '[' && ep.host.back() == ']')
    ep.host = ep.host.substr(1, ep.host.size() - 2);
  try {
    std::size_t used = 0;
    const unsigned long port = std::stoul(text.substr(colon + 1), &used);
    if (used != text.size() - colon - 1 || port > 65535)
      throw std::out_of_range("port");
    ep.port = static_cast<std::uint16_t>(port);
  } catch (const std::exception &) {
    fail(ErrorKind::Config, "bad port in endpoint \"" + text + "\"");
  }
  return ep;
}

Socket::Socket(Socket &&other) noexcept : fd_(other.fd_) { other.fd_ = -1; }

Socket &Socket::operator=(Socket &&other) noexcept {
  if (this != &other) {
    close();
    fd_ = other.fd_;
    other.fd_ = -1;
  }
  return *this;
}

Socket::~Socket() { close(); }

void Socket::shutdown() noexcept {
  if (fd_ >= 0)
    ::shutdown(fd_, SHUT_RDWR);
}

void Socket::close() noexcept {
  if (fd_ >= 0) {
    ::close(fd_);
    fd_ = -1;
  }
}

Socket connect_to(const Endpoint &ep) {
  AddrInfo ai = resolve(ep, false);
  std::string last = "no addresses";
  for (addrinfo *a = ai.head; a; a = a->ai_next) {
    Socket s(::socket(a->ai_family, a->ai_socktype, a->ai_protocol));
    if (!s.valid())
      continue;
    if (::connect(s.fd(), a->ai_addr, a->ai_addrlen) == 0) {
      int one = 1;
      setsockopt(s.fd(), IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
      return s;
    }
    last = std::strerror(errno);
  }
  fail(ErrorKind::Network, "cannot connect to " + describe(ep) + ": " + last);
}

Listener::Listener(const Endpoint &ep) {
  AddrInfo ai = resolve(ep, true);
  std::string last = "no addresses";
  for (addrinfo *a = ai.head; a; a = a->ai_next) {
    Socket s(::socket(a->ai_family, a->ai_socktype, a->ai_protocol));
    if (!s.valid())
      continue;
    int one = 1;
    setsockopt(s.fd(), SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
    if (::bind(s.fd(), a->ai_addr, a->ai_addrlen) != 0 || ::listen(s.fd(), 16) != 0) {
      last = std::strerror(errno);
      continue;
    }
    sockaddr_storage bound{};
    socklen_t len = sizeof bound;
    getsockname(s.fd(), reinterpret_cast<sockaddr *>(&bound), &len);
    port_ = bound.ss_family == AF_INET6
              ? ntohs(reinterpret_cast<sockaddr_in6 *>(&bound)->sin6_port)
              : ntohs(reinterpret_cast<sockaddr_in *>(&bound)->sin_port);
    sock_ = std::move(s);
    return;
  }
  fail(ErrorKind::Network, "cannot listen on " + describe(ep) + ": " + last);
}

Socket Listener::accept() {
  while (true) {
    const int fd = ::accept(sock_.fd(), nullptr, nullptr);
    if (fd >= 0) {
      int one = 1;
      setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
      return Socket(fd);
    }
    if (errno == EINTR || errno == ECONNABORTED)
      continue;
    return Socket();
  }
}

void send_frame(Socket &s, std::span<const std::uint8_t> frame) {
  if (frame.size() > kMaxFrameBytes)
    fail(ErrorKind::Protocol, "frame of " + std::to_string(frame.size()) + " bytes exceeds limit");
  const auto n = static_cast<std::uint32_t>(frame.size());
  const std::uint8_t prefix[4] = {static_cast<std::uint8_t>(n), static_cast<std::uint8_t>(n >> 8),
                                  static_cast<std::uint8_t>(n >> 16),
                                  static_cast<std::uint8_t>(n >> 24)};
  write_all(s, prefix, 4);
  write_all(s, frame.data(), frame.size());
}

std::optional<std::vector<std::uint8_t>> recv_frame(Socket &s) {
  std::uint8_t prefix[4];
  const std::size_t got = read_all(s, prefix, 4);
  if (got == 0)
    return std::nullopt;
  if (got < 4)
    fail(ErrorKind::Protocol, "stream closed inside a length prefix");
  const std::uint32_t n = prefix[0] | (prefix[1] << 8) | (prefix[2] << 16) |
                          (static_cast<std::uint32_t>(prefix[3]) << 24);
  if (n > kMaxFrameBytes)
    fail(ErrorKind::Protocol, "frame length " + std::to_string(n) + " exceeds limit");
  std::vector<std::uint8_t> frame(n);
  if (read_all(s, frame.data(), n) < n)
    fail(ErrorKind::Protocol, "stream closed inside a frame");
  return frame;
}

} // namespace edgecloud::runtime
