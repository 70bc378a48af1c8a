// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <edgecloud/arch/model_spec.hpp>
#include <edgecloud/nn/train.hpp>
#include <edgecloud/rl/policy.hpp>

namespace edgecloud::rl {

struct RewardParams {
  double alpha = 20.0;
  double beta = 15.0;
  double c0 = 0.3; ///< compression threshold
  double a0 = 0.7; ///< accuracy threshold

  void validate() const;
};

/// Exponent clamp applied to each factor before exponentiation.
inline constexpr double kRewardExponentCap = 700.0;

/// R = exp(alpha (C - c0)) * exp(beta (A - a0)).
double reward(double compression, double accuracy, const RewardParams &p);

/// decay b + (1 - decay) mean(rewards).
double baseline_update(double b, std::span<const double> rewards, double decay);

struct Episode {
  std::vector<std::size_t> actions; ///< indices into the action pool
  std::vector<double> logprobs;     ///< log-probability of each sampled action
  arch::ModelSpec student_spec;
  std::vector<bool> coerced;
  std::vector<std::size_t> skipped; ///< spec layers dropped by the realizer
  double C = 0.0;
  double A = 0.0;
  double R = 0.0;
};

/// States the policy sees for each layer of the teacher, in order.
std::vector<arch::StateVector> teacher_states(const arch::ModelSpec &teacher);

/// Samples one action per teacher layer and folds them into a student spec.
/// C, A and R are left at zero.
Episode sample_episode(const Policy &policy, const arch::ModelSpec &teacher,
                       std::mt19937_64 &rng);

/**
 * @brief One REINFORCE ascent step:
 *   theta += lr * (1/N) sum_i (R_i - b) grad sum_t log pi(a_it | ...).
 * Leaves the policy untouched (bit-exact) when every R_i equals b.
 * Non-finite gradients raise a numeric error naming the parameter block.
 */
void reinforce_update(Policy &policy, std::span<const arch::StateVector> states,
                      std::span<const Episode> episodes, double baseline,
                      double learning_rate);

struct CompressConfig {
  std::size_t episodes = 30;
  std::size_t batch_size = 3;
  double policy_lr = 1e-4;
  double baseline_decay = 0.7;
  PolicyConfig policy;
  /// Starting policy; a seeded make_policy(policy) when unset.
  std::optional<Policy> initial_policy;
  nn::TrainConfig distill;
  RewardParams reward;
  /// Fraction of the training split held out for A when the dataset has no
  /// validation rows.
  double val_fraction = 0.2;
  std::uint64_t seed = 1;
  /// Evaluate the episodes of a batch on separate threads.
  bool parallel = true;

  CompressConfig();
  void validate() const;
};

struct CompressResult {
  nn::Network best_student;
  std::size_t best_episode = 0;
  std::vector<Episode> history;
  Policy policy;
};

using EpisodeCallback = std::function<void(std::size_t index, const Episode &)>;

/**
 * @brief Policy-gradient compression loop: sample, realize, distill, score on
 * the validation rows, update the policy every batch_size episodes, keep the
 * highest-reward student (first one on ties).
 */
CompressResult compress(const nn::Network &teacher, const nn::Dataset &data,
                        const CompressConfig &cfg,
                        const EpisodeCallback &on_episode = {});

/// Validation rows used for A: the Val split if present, otherwise a seeded
/// val_fraction of Train. Returns (train, val).
std::pair<nn::Dataset, nn::Dataset> validation_split(const nn::Dataset &data,
                                                     double val_fraction,
                                                     std::uint64_t seed);

/// episode,C,A,R,actions with actions dash-joined.
std::string history_csv(std::span<const Episode> history);

} // namespace edgecloud::rl
