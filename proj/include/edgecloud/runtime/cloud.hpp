// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <atomic>
#include <cstdint>
#include <memory>
#include <mutex>
#include <thread>
#include <vector>

#include <edgecloud/nn/network.hpp>
#include <edgecloud/runtime/profile.hpp>
#include <edgecloud/runtime/transport.hpp>

namespace edgecloud::runtime {

/**
 * @brief Teacher inference server. Each connection is served on its own
 * thread, requests answered in arrival order with the teacher's argmax. A
 * Shutdown frame on any connection stops the server. A malformed frame
 * closes only its own connection (logged to stderr).
 */
class CloudServer {
public:
  CloudServer(nn::Network teacher, const Endpoint &bind, NetProfile profile = {});
  ~CloudServer();
  CloudServer(const CloudServer &) = delete;
  CloudServer &operator=(const CloudServer &) = delete;

  std::uint16_t port() const noexcept { return listener_.port(); }
  /// Blocks until shutdown.
  void run();
  /// Runs the accept loop on a background thread.
  void start();
  /// Thread-safe; returns after every connection thread has ended when
  /// called on a started server.
  void stop();
  std::size_t requests_served() const noexcept { return served_; }

private:
  void serve(std::shared_ptr<Socket> conn);

  nn::Network teacher_;
  NetProfile profile_;
  Listener listener_;
  std::atomic<bool> stopping_{false};
  std::atomic<std::size_t> served_{0};
  std::mutex mu_;
  std::vector<std::shared_ptr<Socket>> conns_;
  std::vector<std::thread> workers_;
  std::thread runner_;
};

} // namespace edgecloud::runtime
