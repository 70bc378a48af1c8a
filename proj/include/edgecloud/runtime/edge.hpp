// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <edgecloud/error.hpp>
#include <edgecloud/gate/gate.hpp>
#include <edgecloud/nn/dataset.hpp>
#include <edgecloud/nn/network.hpp>
#include <edgecloud/runtime/profile.hpp>
#include <edgecloud/runtime/transport.hpp>

namespace edgecloud::runtime {

enum class Strategy : std::uint8_t { EdgeOnly, CloudOnly, Cooperation };

const char *to_string(Strategy s) noexcept;
/// Accepts edge/cloud/coop and edge_only/cloud_only/cooperation.
Strategy parse_strategy(const std::string &name);

/// How cooperation decides to offload a sample.
struct OffloadPolicy {
  enum class Kind : std::uint8_t { Learned, Oracle, AlwaysLocal, AlwaysOffload };
  Kind kind = Kind::AlwaysLocal;
  const gate::GateModel *model = nullptr; ///< Learned only

  static OffloadPolicy learned(const gate::GateModel &g) { return {Kind::Learned, &g}; }
  static OffloadPolicy oracle() { return {Kind::Oracle, nullptr}; }
  static OffloadPolicy always_local() { return {Kind::AlwaysLocal, nullptr}; }
  static OffloadPolicy always_offload() { return {Kind::AlwaysOffload, nullptr}; }
};

/// Edge side of the wire protocol; one request in flight at a time.
class CloudClient {
public:
  /// Network error when unreachable.
  explicit CloudClient(const Endpoint &ep);
  /// Sends one sample; checks the response id. Returns the predicted class.
  std::uint32_t infer(std::span<const std::uint32_t> dims, std::span<const float> sample);
  void send_shutdown();
  /// Request and response bytes on the wire for the last infer(), including
  /// length prefixes.
  std::size_t last_exchange_bytes() const noexcept { return last_bytes_; }

private:
  Socket sock_;
  std::uint64_t next_id_ = 1;
  std::size_t last_bytes_ = 0;
};

struct BenchReport {
  Strategy strategy = Strategy::EdgeOnly;
  double runtime_s = 0.0;
  double accuracy = 0.0;
  double offload_fraction = 0.0;
  std::size_t samples = 0;

  bool operator==(const BenchReport &) const = default;
};

/// Thrown when the cloud drops mid-run; carries the samples finished so far.
class PartialRunError : public Error {
public:
  PartialRunError(const std::string &what, BenchReport partial)
      : Error(ErrorKind::Network, what), partial_(partial) {}
  const BenchReport &partial() const noexcept { return partial_; }

private:
  BenchReport partial_;
};

/**
 * @brief Runs one strategy over every row of `data` in order. `cloud` may be
 * null for edge_only. Runtime excludes model loading: wall time of the loop
 * in real mode, the virtual clock in simulated mode.
 */
BenchReport edge_run(const nn::Network &student, const OffloadPolicy &policy,
                     const nn::Dataset &data, CloudClient *cloud, Strategy strategy,
                     const NetProfile &profile);

/// edge_only, cloud_only, cooperation on the same rows.
std::vector<BenchReport> bench_compare(const nn::Network &student,
                                       const OffloadPolicy &policy,
                                       const nn::Dataset &data, CloudClient &cloud,
                                       const NetProfile &profile);

/// strategy,runtime_s,accuracy,offload_fraction,samples
std::string bench_csv(std::span<const BenchReport> reports);
std::vector<BenchReport> parse_bench_csv(const std::string &csv);

/// Aligned text table, one row per strategy.
std::string bench_table(std::span<const BenchReport> reports);

} // namespace edgecloud::runtime
