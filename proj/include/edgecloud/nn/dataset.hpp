// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <edgecloud/nn/tensor.hpp>

namespace edgecloud::nn {

using Label = std::uint32_t;

enum class Split : std::uint8_t { Train = 0, Val = 1, Test = 2 };

const char *to_string(Split split) noexcept;

/**
 * @brief Labeled samples. samples has dims [N, ...sample shape]; labels and
 * splits have one entry per sample.
 */
struct Dataset {
  Tensor samples;
  std::vector<Label> labels;
  std::vector<Split> splits;
  std::size_t class_count = 0;

  std::size_t size() const noexcept { return labels.size(); }
  bool empty() const noexcept { return labels.empty(); }
  Shape sample_shape() const;

  /// Throws an input error on any broken invariant.
  void validate() const;

  Dataset subset(Split split) const;
  Dataset select(std::span<const std::size_t> indices) const;
  Tensor batch(std::span<const std::size_t> indices) const;

  bool operator==(const Dataset &other) const = default;
};

Dataset concat(const Dataset &a, const Dataset &b);

} // namespace edgecloud::nn
