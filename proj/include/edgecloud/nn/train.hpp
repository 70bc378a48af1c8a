// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include <edgecloud/nn/dataset.hpp>
#include <edgecloud/nn/network.hpp>

namespace edgecloud::nn {

enum class KdMode : std::uint8_t { LogitKl, SimilarityPreserving, Combined };

/**
 * @brief Distillation term added to the student's cross-entropy:
 *   kl_weight * T^2 * KL(teacher_T || student_T)   (LogitKl, Combined)
 *   sp_weight * similarity-preserving loss         (SimilarityPreserving, Combined)
 * A zero weight drops its term entirely.
 */
struct KdConfig {
  KdMode mode = KdMode::Combined;
  double temperature = 4.0;
  double kl_weight = 0.5;
  double sp_weight = 1.0;

  void validate() const;
};

struct EpochStats {
  std::size_t epoch = 0;
  double loss = 0.0;     ///< sample-weighted mean batch loss
  double accuracy = 0.0; ///< training accuracy from the same forward passes
};

struct TrainConfig {
  std::size_t epochs = 10;
  std::size_t batch_size = 32;
  double learning_rate = 0.05;
  std::uint64_t seed = 1;
  std::optional<KdConfig> kd;
  /// Called after every epoch; progress reporting only.
  std::function<void(const EpochStats &)> on_epoch;

  void validate() const;
};

/// Teacher outputs for the rows of one batch.
struct TeacherTargets {
  Tensor logits;
  Tensor features;
};

/// Cross-entropy when kd is null; otherwise cross-entropy plus the KD terms
/// against `teacher`.
struct LossSpec {
  const KdConfig *kd = nullptr;
  const TeacherTargets *teacher = nullptr;
};

/// Mean-loss gradients for one batch. Non-finite loss or gradients raise a
/// numeric error naming the first offending layer.
Gradients grad(const Network &net, const Tensor &batch,
               std::span<const Label> labels, const LossSpec &loss = {});

/// Plain SGD: w -= lr * g.
void sgd_step(Network &net, const Gradients &grads, double learning_rate);

struct TrainResult {
  Network net;
  std::vector<EpochStats> history;
};

TrainResult train(Network net, const Dataset &data, const TrainConfig &cfg);

/// Trains `student` against the combined cross-entropy + KD objective.
TrainResult distill(const Network &teacher, Network student,
                    const Dataset &data, const TrainConfig &cfg);

/// Teacher logits and features for every sample, in dataset order.
TeacherTargets teacher_targets(const Network &teacher, const Dataset &data);

std::vector<Label> predict(const Network &net, const Tensor &batch);

/// Fraction of samples whose argmax logit (lowest index on ties) equals the
/// label.
double evaluate(const Network &net, const Dataset &data);

} // namespace edgecloud::nn
