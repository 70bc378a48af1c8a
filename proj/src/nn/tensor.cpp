// SPDX-License-Identifier: Apache-2.0
#include <edgecloud/nn/tensor.hpp>

#include <cmath>

#include <edgecloud/error.hpp>

namespace edgecloud::nn {

std::size_t element_count(const Shape &shape) noexcept {
  if (shape.empty())
    return 0;
  std::size_t n = 1;
  for (auto d : shape)
    n *= d;
  return n;
}

std::string shape_string(const Shape &shape) {
  std::string out = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i)
      out += "x";
    out += std::to_string(shape[i]);
  }
  return out + "]";
}

Tensor::Tensor(Shape dims, float fill) : dims_(std::move(dims)) {
  for (auto d : dims_)
    if (d == 0)
      fail(ErrorKind::Shape, "tensor dims must be positive, got " +
                                 shape_string(dims_));
  data_.assign(element_count(dims_), fill);
}

Tensor::Tensor(Shape dims, std::vector<float> values)
  : dims_(std::move(dims)), data_(std::move(values)) {
  for (auto d : dims_)
    if (d == 0)
      fail(ErrorKind::Shape, "tensor dims must be positive, got " +
                                 shape_string(dims_));
  if (element_count(dims_) != data_.size())
    fail(ErrorKind::Shape, "tensor dims " + shape_string(dims_) + " hold " +
                               std::to_string(element_count(dims_)) +
                               " values, got " + std::to_string(data_.size()));
}

std::size_t Tensor::row_size() const noexcept {
  return dims_.empty() || dims_[0] == 0 ? 0 : data_.size() / dims_[0];
}

std::span<float> Tensor::row(std::size_t i) noexcept {
  const auto n = row_size();
  return std::span<float>(data_).subspan(i * n, n);
}

std::span<const float> Tensor::row(std::size_t i) const noexcept {
  const auto n = row_size();
  return std::span<const float>(data_).subspan(i * n, n);
}

Tensor Tensor::reshaped(Shape dims) const {
  if (element_count(dims) != data_.size())
    fail(ErrorKind::Shape, "cannot reshape " + shape_string(dims_) + " to " +
                               shape_string(dims));
  return Tensor(std::move(dims), data_);
}

bool Tensor::all_finite() const noexcept {
  for (float v : data_)
    if (!std::isfinite(v))
      return false;
  return true;
}

} // namespace edgecloud::nn
