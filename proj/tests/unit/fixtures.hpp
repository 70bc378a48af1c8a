// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <random>

#include <edgecloud/nn/dataset.hpp>
#include <edgecloud/nn/train.hpp>

namespace fixtures {

using edgecloud::nn::Dataset;
using edgecloud::nn::Split;

/**
 * @brief Four-class images of shape [1, side, side]: class c brightens
 * quadrant c, plus Gaussian pixel noise. Every fifth sample is Val, every
 * fifth-plus-one is Test, the rest Train.
 */
inline Dataset quadrant_images(std::size_t per_class, std::size_t side,
                               float noise, std::uint64_t seed) {
  const std::size_t n = 4 * per_class, half = side / 2;
  Dataset d;
  d.class_count = 4;
  d.samples = edgecloud::nn::Tensor({n, 1, side, side});
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> dist(0.0f, noise);
  for (std::size_t i = 0; i < n; ++i) {
    const auto c = static_cast<edgecloud::nn::Label>(i % 4);
    auto row = d.samples.row(i);
    for (std::size_t y = 0; y < side; ++y)
      for (std::size_t x = 0; x < side; ++x) {
        const std::size_t q = (y >= half ? 2 : 0) + (x >= half ? 1 : 0);
        row[y * side + x] = (q == c ? 1.0f : 0.0f) + dist(rng);
      }
    d.labels.push_back(c);
    d.splits.push_back(i % 5 == 0 ? Split::Val : i % 5 == 1 ? Split::Test : Split::Train);
  }
  return d;
}

} // namespace fixtures
