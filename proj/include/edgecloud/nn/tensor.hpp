// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace edgecloud::nn {

using Shape = std::vector<std::size_t>;

std::size_t element_count(const Shape &shape) noexcept;
std::string shape_string(const Shape &shape);

/**
 * @brief Dense row-major float tensor. The leading dimension is the batch
 * dimension wherever a tensor carries samples.
 */
class Tensor {
public:
  Tensor() = default;
  explicit Tensor(Shape dims, float fill = 0.0f);
  Tensor(Shape dims, std::vector<float> values);

  const Shape &dims() const noexcept { return dims_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  std::span<float> data() noexcept { return data_; }
  std::span<const float> data() const noexcept { return data_; }
  float &operator[](std::size_t i) noexcept { return data_[i]; }
  float operator[](std::size_t i) const noexcept { return data_[i]; }

  /// Elements per leading-dimension slice.
  std::size_t row_size() const noexcept;
  std::size_t rows() const noexcept { return dims_.empty() ? 0 : dims_[0]; }
  std::span<float> row(std::size_t i) noexcept;
  std::span<const float> row(std::size_t i) const noexcept;

  /// Same data viewed with new dims; element counts must agree.
  Tensor reshaped(Shape dims) const;

  bool all_finite() const noexcept;

  bool operator==(const Tensor &other) const = default;

private:
  Shape dims_;
  std::vector<float> data_;
};

} // namespace edgecloud::nn
