// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <edgecloud/arch/model_spec.hpp>

namespace edgecloud::rl {

/// Width of one policy input: layer state followed by the previous action
/// one-hot (all zeros at the first step).
inline constexpr std::size_t kInputWidth = arch::kStateWidth + arch::kActionCount;

using Distribution = std::array<double, arch::kActionCount>;

struct PolicyConfig {
  std::size_t hidden = 64;
  std::size_t layers = 2;

  void validate() const;
  bool operator==(const PolicyConfig &) const = default;
};

/// Named slice of the flat parameter vector.
struct ParamBlock {
  std::string name;
  std::size_t offset = 0;
  std::size_t size = 0;

  bool operator==(const ParamBlock &) const = default;
};

/**
 * @brief Stacked GRU over layer states with a dense head to action logits.
 *
 * Per GRU layer the blocks are W [3H x in], U [3H x H] and b [3H], with gate
 * rows ordered update z, reset r, candidate n:
 *   z = sigmoid(Wz x + Uz h + bz)
 *   r = sigmoid(Wr x + Ur h + br)
 *   n = tanh(Wn x + Un (r * h) + bn)
 *   h' = (1 - z) * n + z * h
 * followed by head.W [6 x H] and head.b [6]. Parameters are doubles.
 */
class Policy {
public:
  explicit Policy(PolicyConfig cfg = {});

  const PolicyConfig &config() const noexcept { return cfg_; }
  std::span<double> params() noexcept { return theta_; }
  std::span<const double> params() const noexcept { return theta_; }
  const std::vector<ParamBlock> &blocks() const noexcept { return blocks_; }
  /// Throws an input error for unknown names.
  const ParamBlock &block(const std::string &name) const;
  std::span<double> block_params(const std::string &name);

  bool operator==(const Policy &) const = default;

private:
  PolicyConfig cfg_;
  std::vector<ParamBlock> blocks_;
  std::vector<double> theta_;
};

/// Uniform(-1/sqrt(H), 1/sqrt(H)) initialization.
Policy make_policy(const PolicyConfig &cfg, std::uint64_t seed);

/// Builds the per-step inputs from states and the actions taken so far.
/// actions[t] is fed back at step t + 1; entries beyond the last state are
/// ignored.
std::vector<std::array<double, kInputWidth>>
policy_inputs(std::span<const arch::StateVector> states,
              std::span<const std::size_t> actions);

/// Action distribution at every step, given the actions fed back.
/// Requires actions.size() >= states.size() - 1.
std::vector<Distribution> policy_forward(const Policy &policy,
                                         std::span<const arch::StateVector> states,
                                         std::span<const std::size_t> actions);

/// Incremental evaluation used for sampling: one call per step.
class PolicyStepper {
public:
  explicit PolicyStepper(const Policy &policy);
  Distribution step(const arch::StateVector &state);
  /// Records the action taken at the current step for feedback.
  void take(std::size_t action);

private:
  const Policy *policy_;
  std::vector<std::vector<double>> hidden_;
  std::ptrdiff_t prev_action_ = -1;
};

struct LogProbGrad {
  double logprob = 0.0;      ///< sum over steps of log pi(a_t | ...)
  std::vector<double> grad;  ///< gradient of logprob w.r.t. params
};

/// Backpropagation through time of the summed log-probability of `actions`.
LogProbGrad logprob_grad(const Policy &policy,
                         std::span<const arch::StateVector> states,
                         std::span<const std::size_t> actions);

} // namespace edgecloud::rl
