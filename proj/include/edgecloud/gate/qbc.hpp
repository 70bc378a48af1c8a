// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <random>
#include <span>
#include <vector>

#include <edgecloud/gate/gate.hpp>
#include <edgecloud/nn/dataset.hpp>
#include <edgecloud/nn/network.hpp>

namespace edgecloud::gate {

struct LabeledSamples {
  std::vector<GateSample> complex; ///< student wrong
  std::vector<GateSample> normal;  ///< student right
};

/// Partitions every row of `data` by whether the student's argmax matches
/// its label; features are the student's logits.
LabeledSamples label_samples(const nn::Network &student, const nn::Dataset &data);

/// Natural-log entropy; 0 log 0 = 0. Probabilities must sum to 1 within 1e-6.
double committee_entropy(std::span<const double> probs);

struct Committee {
  std::vector<GateModel> members;
};

/// Default members: linear SVM, kNN (k = 5), random forest (5 trees, depth 4).
inline const std::vector<GateKind> kDefaultCommittee = {
  GateKind::LinearSvm, GateKind::Knn, GateKind::RandomForest};

/// Member i is trained with seed derive_seed(seed, i).
Committee train_committee(std::span<const GateSample> samples,
                          std::span<const GateKind> kinds,
                          const GateHyper &hyper, std::uint64_t seed);

/// Largest member entropy at x.
double qbc_score(const Committee &committee, std::span<const double> x);

/// Number of random picks: floor(r M), at least 1 when M >= 1, at most M.
std::size_t qbc_random_count(std::size_t m, double r);

/// Positions into a pool of `pool_size` drawn without replacement.
std::vector<std::size_t> qbc_random_draw(std::size_t pool_size, std::size_t m,
                                         double r, std::mt19937_64 &rng);

struct QbcConfig {
  double r = 0.5;
  std::vector<GateKind> committee = kDefaultCommittee;
  GateHyper hyper;

  void validate() const;
};

/**
 * @brief Chooses M normal samples: a random draw of qbc_random_count(M, r),
 * then a committee (seeded from rng after the draw) trained on complex plus
 * drawn samples scores the rest, and the highest scores fill the remainder
 * (ties go to the lower source_index). Drawn samples come first in the
 * result, in draw order.
 */
std::vector<GateSample> qbc_select(std::span<const GateSample> normal,
                                   std::size_t m,
                                   std::span<const GateSample> complex,
                                   const QbcConfig &cfg, std::mt19937_64 &rng);

struct GateTrainingSet {
  std::vector<GateSample> samples; ///< complex first, then selected normal
  std::size_t m = 0;               ///< samples per class
};

/**
 * @brief Balanced gate training data from labeled samples. M = min(|complex|,
 * |normal|); when complex outnumbers normal, a seeded random subset of
 * complex is kept. Requires both labels present.
 */
GateTrainingSet build_training_set(const LabeledSamples &labeled,
                                   const QbcConfig &cfg, std::uint64_t seed);

} // namespace edgecloud::gate
