// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <string>

namespace edgecloud::runtime {

/**
 * @brief Link model. Real mode measures wall time; a nonzero rtt_ms makes
 * the cloud server sleep for the modeled delay before each reply. Simulated
 * mode adds the modeled delay per offloaded request and edge compute as
 * student MACs / edge_macs_per_s to a virtual clock. Cloud compute is
 * assumed to be part of the round trip.
 */
struct NetProfile {
  enum class Mode : std::uint8_t { Real, Simulated };

  Mode mode = Mode::Real;
  double rtt_ms = 0.0;
  double bandwidth_bytes_per_s = 0.0; ///< 0 = unlimited in real mode
  double edge_macs_per_s = 1e8;

  void validate() const;
};

const char *to_string(NetProfile::Mode mode) noexcept;
NetProfile::Mode parse_mode(const std::string &name);

/// rtt_ms / 1000 + bytes / bandwidth. Real mode → state error.
double simulate_delay(const NetProfile &profile, std::size_t message_bytes);

} // namespace edgecloud::runtime
