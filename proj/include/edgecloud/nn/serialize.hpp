// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <edgecloud/nn/network.hpp>

namespace edgecloud::nn {

/**
 * Network file layout, all integers little-endian:
 *
 *   "ECNN" | u16 version | u32 class_count | u8 input_rank | u32 dims[rank]
 *   | u32 layer_count | layer[layer_count]
 *
 *   layer: u8 kind | u32 kernel | u32 stride | u32 padding | u32 outputs
 *          (conv/dense only:) u32 n_weight | f32[n_weight]
 *                             u32 n_bias   | f32[n_bias]
 */
inline constexpr std::uint16_t kNetworkFormatVersion = 1;

std::vector<std::uint8_t> serialize(const Network &net);
Network deserialize(std::span<const std::uint8_t> bytes);

void save_network(const Network &net, const std::string &path);
Network load_network(const std::string &path);

} // namespace edgecloud::nn
