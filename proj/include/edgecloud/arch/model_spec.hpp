// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <edgecloud/nn/network.hpp>

namespace edgecloud::arch {

using nn::LayerKind;

/**
 * @brief Five-field layer descriptor (type, kernel, stride, padding, outputs).
 *
 * conv: kernel, stride, outputs >= 1. dense: outputs >= 1, other fields 0.
 * pool: fixed 2/2/0/0. relu, flatten: all zero.
 */
struct LayerSpec {
  LayerKind type = LayerKind::Relu;
  std::size_t kernel = 0;
  std::size_t stride = 0;
  std::size_t padding = 0;
  std::size_t outputs = 0;

  bool parametric() const noexcept {
    return type == LayerKind::Conv || type == LayerKind::Dense;
  }
  void validate() const;
  bool operator==(const LayerSpec &) const = default;
};

/// Ordered architecture whose final layer is the dense class head.
struct ModelSpec {
  std::vector<LayerSpec> layers;
  nn::Shape input_dims;
  std::size_t class_count = 0;

  void validate() const;
  bool operator==(const ModelSpec &) const = default;
};

/// Candidate scaling coefficients; 0 removes a layer, 1 keeps it intact.
inline constexpr std::array<double, 6> kActionPool = {0.0, 0.2, 0.4,
                                                      0.6, 0.8, 1.0};
inline constexpr std::size_t kActionCount = kActionPool.size();
inline constexpr std::size_t kKeepAction = kActionCount - 1;

// Caps for the numeric part of the state encoding.
inline constexpr double kKernelCap = 11.0;
inline constexpr double kStrideCap = 4.0;
inline constexpr double kPaddingCap = 5.0;
inline constexpr double kOutputsCap = 512.0;

inline constexpr std::size_t kStateWidth = nn::kLayerKindCount + 4;
using StateVector = std::array<double, kStateWidth>;

ModelSpec describe(const nn::Network &net);

/// One-hot layer type followed by k/11, d/4, p/5, o/512, each clamped to 1.
StateVector encode_state(const LayerSpec &layer) noexcept;

/// Index of the protected class head (the final layer).
std::size_t head_index(const ModelSpec &spec);

struct ActionResult {
  ModelSpec spec;
  bool coerced = false; ///< the action targeted the protected head
};

/**
 * @brief Shrinks or removes layer t by phi (must be a pool coefficient).
 *
 * phi = 0 removes the layer, phi = 1 keeps it. Otherwise conv/dense fields
 * scale with round-to-nearest: k' = max(1, round(k phi)), d' = max(1,
 * round(d phi)), p' = round(p phi), o' = max(1, round(o phi)); dense keeps
 * k = d = p = 0. Pool/relu/flatten are kept unchanged for 0 < phi < 1.
 * Any phi != 1 on the class head is coerced to 1 and flagged.
 */
ActionResult apply_action(const ModelSpec &spec, std::size_t t, double phi);

struct EpisodeSpec {
  ModelSpec spec;
  std::vector<bool> coerced; ///< one flag per original layer
};

/// Applies one coefficient per original layer, in layer order.
EpisodeSpec apply_actions(const ModelSpec &spec, std::span<const double> phis);

struct Realized {
  nn::Network net;
  /// Spec layer indices dropped because they no longer fit the running shape
  /// (spatial collapse below 1x1, or conv/pool after flatten).
  std::vector<std::size_t> skipped;
};

/**
 * @brief Builds a shape-consistent network from a spec: recomputes shapes in
 * order, inserts a flatten before the first dense layer when needed, and
 * ends with a dense head of class_count outputs. Seeded initialization.
 */
Realized realize(const ModelSpec &spec, std::uint64_t seed);

std::size_t param_count(const nn::Network &net) noexcept;
std::size_t serialized_size_bytes(const nn::Network &net);

/// 1 - student/teacher by parameter count.
double compression_ratio(const nn::Network &teacher,
                         const nn::Network &student);
/// Same ratio from raw sizes in any common unit.
double compression_ratio(double teacher_size, double student_size);

/**
 * Text form, one layer per line after the header:
 *   input 1x8x8 classes 4
 *   conv 3 1 1 8
 *   relu 0 0 0 0
 */
std::string format_spec(const ModelSpec &spec);
ModelSpec parse_spec(const std::string &text);

LayerKind parse_layer_kind(const std::string &name);

} // namespace edgecloud::arch
