// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include <edgecloud/nn/tensor.hpp>

namespace edgecloud::nn {

/// Order matches the one-hot layout of the RL state encoding.
enum class LayerKind : std::uint8_t { Conv = 0, Dense, Pool, Relu, Flatten };

constexpr std::size_t kLayerKindCount = 5;

const char *to_string(LayerKind kind) noexcept;

/**
 * @brief A realized layer. Shapes are per sample: [c, h, w] for spatial
 * activations, [n] after flatten.
 *
 * conv weight dims: [outputs, c_in, kernel, kernel]; dense: [outputs, n_in].
 * Pool is fixed 2x2 with stride 2.
 */
struct Layer {
  LayerKind kind = LayerKind::Relu;
  Shape in_shape;
  Shape out_shape;
  std::size_t kernel = 0;
  std::size_t stride = 0;
  std::size_t padding = 0;
  std::size_t outputs = 0;
  Tensor weight;
  Tensor bias;

  bool parametric() const noexcept {
    return kind == LayerKind::Conv || kind == LayerKind::Dense;
  }
  std::size_t param_count() const noexcept {
    return weight.size() + bias.size();
  }

  bool operator==(const Layer &other) const = default;
};

/// Per-sample output shape of a layer, or nullopt if the layer cannot be
/// applied to `in` (wrong rank or spatial collapse below 1x1).
std::optional<Shape> layer_output_shape(LayerKind kind, const Shape &in,
                                        std::size_t kernel, std::size_t stride,
                                        std::size_t padding,
                                        std::size_t outputs);

class Network {
public:
  /// Validates shape chaining and that the output width equals class_count.
  Network(Shape input_shape, std::vector<Layer> layers,
          std::size_t class_count);

  const Shape &input_shape() const noexcept { return input_shape_; }
  std::size_t class_count() const noexcept { return class_count_; }
  std::span<const Layer> layers() const noexcept { return layers_; }
  std::span<Layer> layers() noexcept { return layers_; }
  std::size_t layer_count() const noexcept { return layers_.size(); }

  std::size_t param_count() const noexcept;
  /// Multiply-accumulates for one sample's forward pass.
  std::size_t macs_per_sample() const noexcept;

  bool operator==(const Network &other) const = default;

private:
  Shape input_shape_;
  std::vector<Layer> layers_;
  std::size_t class_count_ = 0;
};

/**
 * @brief Incremental network construction with Glorot-uniform init
 * (bound sqrt(6/(fan_in+fan_out)), zero bias), seeded per layer.
 */
class NetworkBuilder {
public:
  explicit NetworkBuilder(Shape input_shape);

  NetworkBuilder &conv(std::size_t outputs, std::size_t kernel,
                       std::size_t stride = 1, std::size_t padding = 0);
  NetworkBuilder &dense(std::size_t outputs);
  NetworkBuilder &pool();
  NetworkBuilder &relu();
  NetworkBuilder &flatten();
  /// Appends a layer by descriptor; throws a shape error if inapplicable.
  NetworkBuilder &add(LayerKind kind, std::size_t kernel, std::size_t stride,
                      std::size_t padding, std::size_t outputs);
  bool can_add(LayerKind kind, std::size_t kernel, std::size_t stride,
               std::size_t padding, std::size_t outputs) const;

  const Shape &current_shape() const noexcept { return shape_; }
  std::size_t size() const noexcept { return layers_.size(); }
  const Layer &back() const { return layers_.back(); }

  Network build(std::size_t class_count, std::uint64_t seed) const;

private:
  Shape input_shape_;
  Shape shape_;
  std::vector<Layer> layers_;
};

/// activations[0] is the input batch, activations[i + 1] the output of
/// layer i.
struct ForwardPass {
  std::vector<Tensor> activations;

  const Tensor &logits() const { return activations.back(); }
  /// Input of the final layer, flattened to [batch, n].
  Tensor features() const;
};

ForwardPass forward_pass(const Network &net, const Tensor &batch);

struct ForwardResult {
  Tensor logits;
  Tensor features;
};

ForwardResult forward(const Network &net, const Tensor &batch);

struct LayerGrad {
  Tensor weight;
  Tensor bias;
};

struct Gradients {
  std::vector<LayerGrad> layers;
  double loss = 0.0;
};

/**
 * @brief Reverse pass. d_features, when given, is added to the gradient
 * flowing into the final layer's input (same shape as
 * ForwardPass::features()).
 */
Gradients backward(const Network &net, const ForwardPass &pass,
                   const Tensor &d_logits, const Tensor *d_features = nullptr);

/// Lowest index wins ties.
std::size_t argmax(std::span<const float> values) noexcept;

} // namespace edgecloud::nn
