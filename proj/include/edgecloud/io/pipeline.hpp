// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>

#include <edgecloud/arch/model_spec.hpp>
#include <edgecloud/gate/gate.hpp>
#include <edgecloud/io/config.hpp>
#include <edgecloud/nn/dataset.hpp>
#include <edgecloud/nn/network.hpp>

namespace edgecloud::io {

/**
 * @brief Teacher used when no spec file is given. Rank-3 inputs get three
 * 3x3 conv layers (8, 16, 16 channels, one 2x2 pool); rank-1 inputs get a
 * 64-32 ReLU MLP. Both end in a dense head.
 */
arch::ModelSpec default_teacher_spec(const nn::Shape &input_dims, std::size_t class_count);

struct GateArtifacts {
  gate::GateModel model;
  gate::GateReport report;
};

/**
 * @brief Labels the Train rows with the student, builds the balanced QBC
 * training set, trains a gate of settings.kind and scores it on the Test
 * rows. Falls back to all rows for whichever split is missing.
 */
GateArtifacts train_gate_pipeline(const nn::Network &student, const nn::Dataset &data,
                                  const GateSettings &settings);

/// Test rows when present, otherwise every row.
nn::Dataset evaluation_rows(const nn::Dataset &data);

} // namespace edgecloud::io
