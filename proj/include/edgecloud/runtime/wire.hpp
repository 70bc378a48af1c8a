// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <variant>
#include <vector>

namespace edgecloud::runtime {

inline constexpr std::uint16_t kWireVersion = 1;

enum class WireVariant : std::uint8_t {
  InferRequest = 1,
  InferResponse = 2,
  Shutdown = 3,
};

struct InferRequest {
  std::uint64_t request_id = 0;
  std::vector<std::uint32_t> dims;
  std::vector<float> payload; ///< product(dims) values

  bool operator==(const InferRequest &) const = default;
};

struct InferResponse {
  std::uint64_t request_id = 0;
  std::uint32_t predicted_class = 0;

  bool operator==(const InferResponse &) const = default;
};

struct Shutdown {
  bool operator==(const Shutdown &) const = default;
};

using WireMessage = std::variant<InferRequest, InferResponse, Shutdown>;

/**
 * @brief Frame: "ECWP" | u16 version | u8 variant | body, little-endian.
 *   InferRequest:  u64 id | u32 rank | u32 dims[rank] | f32 payload[prod]
 *   InferResponse: u64 id | u32 class
 *   Shutdown:      empty
 */
std::vector<std::uint8_t> encode_message(const WireMessage &m);

/// Protocol error naming the byte offset on any malformed frame.
WireMessage decode_message(std::span<const std::uint8_t> frame);

/// Largest frame accepted from the stream.
inline constexpr std::uint32_t kMaxFrameBytes = 64u << 20;

} // namespace edgecloud::runtime
