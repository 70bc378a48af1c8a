// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <edgecloud/nn/dataset.hpp>

namespace edgecloud::io {

/**
 * @brief Parses an IDX image file (magic 0x00000803, u8 pixels, N×rows×cols)
 * and label file (magic 0x00000801), both big-endian. Pixels are scaled to
 * [0, 1]; samples get shape [1, rows, cols]; every row is tagged Train;
 * class_count is the largest label plus one. Parse errors name the file and
 * byte offset.
 */
nn::Dataset parse_idx(std::span<const std::uint8_t> images, std::span<const std::uint8_t> labels);
nn::Dataset load_idx(const std::string &images_path, const std::string &labels_path);

/// Reassigns splits per class: round(0.7 n) train, round(0.1 n) val, the
/// rest test, over a seeded shuffle of each class's rows.
void stratified_split(nn::Dataset &data, std::uint64_t seed);

/**
 * @brief Gaussian blobs with unit variance around class means placed at
 * separation / sqrt(2) along orthonormal random directions, so every pair of
 * means is `separation` apart. Sample i has class i % class_count. Split
 * stratified 70/10/20. Needs class_count <= product(dims).
 */
nn::Dataset gen_synthetic(std::size_t class_count, std::size_t per_class,
                          const nn::Shape &dims, double separation, std::uint64_t seed);

/**
 * Dataset cache layout, little-endian:
 *
 *   "ECDS" | u16 version | u32 class_count | u8 rank | u32 dims[rank]
 *   | u64 n | f32 samples[n * prod(dims)] | u32 labels[n] | u8 splits[n]
 */
inline constexpr std::uint16_t kDatasetFormatVersion = 1;

std::vector<std::uint8_t> serialize_dataset(const nn::Dataset &data);
nn::Dataset deserialize_dataset(std::span<const std::uint8_t> bytes);
void save_dataset(const nn::Dataset &data, const std::string &path);
nn::Dataset load_dataset(const std::string &path);

} // namespace edgecloud::io
