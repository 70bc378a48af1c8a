// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <span>

#include <edgecloud/nn/dataset.hpp>
#include <edgecloud/nn/tensor.hpp>

namespace edgecloud::nn {

struct LossGrad {
  double value = 0.0;
  Tensor grad; ///< d value / d input, same dims as the differentiated input
};

/// Mean softmax cross-entropy over the batch.
LossGrad softmax_cross_entropy(const Tensor &logits,
                               std::span<const Label> labels);

/// temperature^2 * mean_b KL(softmax(t/T) || softmax(s/T)); gradient is
/// with respect to the student logits.
LossGrad distillation_kl(const Tensor &student_logits,
                         const Tensor &teacher_logits, double temperature);

/**
 * @brief Similarity-preserving distillation loss.
 *
 * For a batch of b feature rows A, G = A A^T and each row of G is scaled to
 * unit L2 norm; the loss is ||G_s - G_t||_F^2 / b^2. A zero feature row has
 * a zero Gram row, which stays the zero row after normalization.
 * Feature widths of teacher and student may differ; batch sizes must match.
 */
double sp_kd_loss(const Tensor &teacher_feats, const Tensor &student_feats);

/// Same value as sp_kd_loss plus the gradient with respect to the student
/// features.
LossGrad sp_kd_loss_grad(const Tensor &teacher_feats,
                         const Tensor &student_feats);

} // namespace edgecloud::nn
