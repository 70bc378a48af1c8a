// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace edgecloud::gate {

/// Complex samples are the ones the student gets wrong.
enum class GateLabel : std::uint8_t { Complex = 0, Normal = 1 };

struct GateSample {
  std::vector<double> features; ///< student logits
  GateLabel label = GateLabel::Normal;
  std::size_t source_index = 0; ///< row in the originating dataset

  bool operator==(const GateSample &) const = default;
};

enum class GateKind : std::uint8_t { LinearSvm = 0, Knn = 1, RandomForest = 2 };

const char *to_string(GateKind kind) noexcept;
/// Accepts "linear_svm"/"svm", "knn", "random_forest"/"rf".
GateKind parse_gate_kind(const std::string &name);

struct GateHyper {
  double svm_lambda = 1e-3; ///< L2 strength of the Pegasos objective
  std::size_t svm_epochs = 50;
  std::size_t knn_k = 5;
  std::size_t rf_trees = 5;
  std::size_t rf_depth = 4;

  void validate() const;
};

/// Standardized features, margin w.x + b; P(normal) = sigmoid(margin).
struct LinearSvm {
  std::vector<double> mean, scale, w;
  double b = 0.0;
  bool operator==(const LinearSvm &) const = default;
};

/// Euclidean k nearest neighbours; P(normal) = fraction of normal votes.
struct Knn {
  std::size_t k = 5;
  std::vector<std::vector<double>> refs;
  std::vector<GateLabel> labels;
  bool operator==(const Knn &) const = default;
};

struct TreeNode {
  std::int32_t feature = -1; ///< -1 marks a leaf
  double threshold = 0.0;    ///< go left when x[feature] <= threshold
  std::uint32_t left = 0, right = 0;
  double p_normal = 0.0; ///< leaf class fraction
  bool operator==(const TreeNode &) const = default;
};

struct DecisionTree {
  std::vector<TreeNode> nodes; ///< root at 0
  bool operator==(const DecisionTree &) const = default;
};

/// Bagged Gini trees over sqrt(d) candidate features per split; P(normal) is
/// the mean leaf fraction.
struct RandomForest {
  std::vector<DecisionTree> trees;
  bool operator==(const RandomForest &) const = default;
};

/// A default-constructed model is untrained.
struct GateModel {
  GateKind kind = GateKind::LinearSvm;
  std::size_t width = 0;
  std::variant<std::monostate, LinearSvm, Knn, RandomForest> impl;

  bool trained() const noexcept { return impl.index() != 0; }
  bool operator==(const GateModel &) const = default;
};

/// Requires both labels present; deterministic given seed.
GateModel train_gate(std::span<const GateSample> samples, GateKind kind,
                     const GateHyper &hyper, std::uint64_t seed);

/// (P(complex), P(normal)). Untrained → state error; width mismatch → input
/// error.
std::array<double, 2> gate_proba(const GateModel &gate,
                                 std::span<const double> features);

/// Normal when P(normal) > 0.5, otherwise Complex (ties offload).
GateLabel gate_predict(const GateModel &gate, std::span<const double> features);

enum class OffloadDecision : std::uint8_t { Local = 0, Offload = 1 };

OffloadDecision gate_decide(const GateModel &gate, std::span<const double> logits);

/// Positive class = complex.
struct GateEval {
  double accuracy = 0.0;
  std::size_t tp = 0, tn = 0, fp = 0, fn = 0;
  std::size_t total() const noexcept { return tp + tn + fp + fn; }
};

GateEval evaluate_gate(const GateModel &gate, std::span<const GateSample> samples);

/// "ECGT" | u16 version | u8 kind | u32 width | kind-specific body.
std::vector<std::uint8_t> serialize_gate(const GateModel &gate);
GateModel deserialize_gate(std::span<const std::uint8_t> bytes);
void save_gate(const GateModel &gate, const std::string &path);
GateModel load_gate(const std::string &path);

struct GateReport {
  GateKind kind;
  std::size_t train_m = 0;
  GateEval eval;
  std::size_t model_bytes = 0;
};

/// kind,train_M,accuracy,TP,TN,FP,FN,model_bytes
std::string gate_report_csv(std::span<const GateReport> rows);

} // namespace edgecloud::gate
