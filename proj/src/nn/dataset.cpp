// SPDX-License-Identifier: Apache-2.0
#include <edgecloud/nn/dataset.hpp>

#include <algorithm>

#include <edgecloud/error.hpp>

namespace edgecloud::nn {

const char *to_string(Split split) noexcept {
  switch (split) {
  case Split::Train:
    return "train";
  case Split::Val:
    return "val";
  case Split::Test:
    return "test";
  }
  return "?";
}

Shape Dataset::sample_shape() const {
  if (samples.dims().empty())
    return {};
  return Shape(samples.dims().begin() + 1, samples.dims().end());
}

void Dataset::validate() const {
  if (class_count == 0)
    fail(ErrorKind::Input, "dataset class_count must be positive");
  if (samples.rows() != labels.size())
    fail(ErrorKind::Input, "dataset has " + std::to_string(samples.rows()) +
                               " samples but " + std::to_string(labels.size()) +
                               " labels");
  if (splits.size() != labels.size())
    fail(ErrorKind::Input, "dataset split tags do not cover every sample");
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (labels[i] >= class_count)
      fail(ErrorKind::Input, "label " + std::to_string(labels[i]) +
                                 " at sample " + std::to_string(i) +
                                 " is not below class_count " +
                                 std::to_string(class_count));
}

Tensor Dataset::batch(std::span<const std::size_t> indices) const {
  Shape dims = samples.dims();
  if (indices.empty())
    fail(ErrorKind::Input, "empty batch");
  dims[0] = indices.size();
  const std::size_t n = samples.row_size();
  std::vector<float> values(indices.size() * n);
  for (std::size_t i = 0; i < indices.size(); ++i) {
    auto src = samples.row(indices[i]);
    std::copy(src.begin(), src.end(), values.begin() + i * n);
  }
  return Tensor(std::move(dims), std::move(values));
}

Dataset Dataset::select(std::span<const std::size_t> indices) const {
  Dataset out;
  out.class_count = class_count;
  if (indices.empty())
    return out;
  out.samples = batch(indices);
  out.labels.reserve(indices.size());
  out.splits.reserve(indices.size());
  for (auto i : indices) {
    out.labels.push_back(labels[i]);
    out.splits.push_back(splits[i]);
  }
  return out;
}

Dataset Dataset::subset(Split split) const {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < splits.size(); ++i)
    if (splits[i] == split)
      idx.push_back(i);
  return select(idx);
}

Dataset concat(const Dataset &a, const Dataset &b) {
  if (a.empty())
    return b;
  if (b.empty())
    return a;
  if (a.sample_shape() != b.sample_shape() || a.class_count != b.class_count)
    fail(ErrorKind::Input, "cannot concatenate datasets of different shape");
  Dataset out;
  out.class_count = a.class_count;
  Shape dims = a.samples.dims();
  dims[0] = a.size() + b.size();
  std::vector<float> values(a.samples.data().begin(), a.samples.data().end());
  values.insert(values.end(), b.samples.data().begin(), b.samples.data().end());
  out.samples = Tensor(std::move(dims), std::move(values));
  out.labels = a.labels;
  out.labels.insert(out.labels.end(), b.labels.begin(), b.labels.end());
  out.splits = a.splits;
  out.splits.insert(out.splits.end(), b.splits.begin(), b.splits.end());
  return out;
}

} // namespace edgecloud::nn
