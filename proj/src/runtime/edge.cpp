// SPDX-License-Identifier: Apache-2.0
#include <edgecloud/runtime/edge.hpp>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <sstream>

#include <edgecloud/runtime/wire.hpp>

namespace edgecloud::runtime {

const char *to_string(Strategy s) noexcept {
  switch (s) {
  case Strategy::EdgeOnly:
    return "edge_only";
  case Strategy::CloudOnly:
    return "cloud_only";
  case Strategy::Cooperation:
    return "cooperation";
  }
  return "?";
}

Strategy parse_strategy(const std::string &name) {
  if (name == "edge" || name == "edge_only")
    return Strategy::EdgeOnly;
  if (name == "cloud" || name == "cloud_only")
    return Strategy::CloudOnly;
  if (name == "coop" || name == "cooperation")
    return Strategy::Cooperation;
  fail(ErrorKind::Config, "unknown strategy \"" + name + "\" (expected edge, cloud or coop)");
}

CloudClient::CloudClient(const Endpoint &ep) : sock_(connect_to(ep)) {}

std::uint32_t CloudClient::infer(std::span<const std::uint32_t> dims,
                                 std::span<const float> sample) {
  const std::uint64_t id = next_id_++;
  const auto frame = encode_message(InferRequest{
    id, {dims.begin(), dims.end()}, {sample.begin(), sample.end()}});
  send_frame(sock_, frame);
  const auto reply = recv_frame(sock_);
  if (!reply)
    fail(ErrorKind::Network, "cloud closed the connection");
  last_bytes_ = frame.size() + reply->size() + 8;
  const WireMessage msg = decode_message(*reply);
  const auto *resp = std::get_if<InferResponse>(&msg);
  if (!resp)
    fail(ErrorKind::Protocol, "expected an inference response from the cloud");
  if (resp->request_id != id)
    fail(ErrorKind::Protocol, "response id " + std::to_string(resp->request_id) +
                                  " does not match request " + std::to_string(id));
  return resp->predicted_class;
}

void CloudClient::send_shutdown() { send_frame(sock_, encode_message(Shutdown{})); }

BenchReport edge_run(const nn::Network &student, const OffloadPolicy &policy,
                     const nn::Dataset &data, CloudClient *cloud, Strategy strategy,
                     const NetProfile &profile) {
  profile.validate();
  data.validate();
  if (strategy != Strategy::EdgeOnly && cloud == nullptr)
    fail(ErrorKind::Network, std::string(to_string(strategy)) + " needs a cloud endpoint");
  if (policy.kind == OffloadPolicy::Kind::Learned && policy.model == nullptr)
    fail(ErrorKind::State, "learned offload policy has no gate model");
  if (data.empty())
    fail(ErrorKind::Input, "no samples to run");
  if (data.sample_shape() != student.input_shape())
    fail(ErrorKind::Input, "samples " + nn::shape_string(data.sample_shape()) +
                               " do not match student input " +
                               nn::shape_string(student.input_shape()));

  const bool simulated = profile.mode == NetProfile::Mode::Simulated;
  const double edge_seconds =
    static_cast<double>(student.macs_per_sample()) / profile.edge_macs_per_s;
  const nn::Shape sample_shape = data.sample_shape();
  std::vector<std::uint32_t> dims;
  for (auto d : sample_shape)
    dims.push_back(static_cast<std::uint32_t>(d));
  nn::Shape one{1};
  one.insert(one.end(), sample_shape.begin(), sample_shape.end());

  BenchReport r{strategy, 0.0, 0.0, 0.0, 0};
  std::size_t correct = 0, offloaded = 0;
  double virtual_s = 0.0;
  auto finish = [&](std::size_t done, double wall) {
    r.samples = done;
    r.accuracy = done ? static_cast<double>(correct) / static_cast<double>(done) : 0.0;
    r.offload_fraction = done ? static_cast<double>(offloaded) / static_cast<double>(done) : 0.0;
    r.runtime_s = simulated ? virtual_s : wall;
  };
  const auto t0 = std::chrono::steady_clock::now();
  auto elapsed = [&] {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  };

  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto row = data.samples.row(i);
    nn::Label pred = 0;
    bool offload = strategy == Strategy::CloudOnly;
    if (strategy != Strategy::CloudOnly) {
      const nn::Tensor logits =
        nn::forward(student, nn::Tensor(one, {row.begin(), row.end()})).logits;
      const auto z = logits.row(0);
      pred = static_cast<nn::Label>(std::max_element(z.begin(), z.end()) - z.begin());
      virtual_s += edge_seconds;
      if (strategy == Strategy::Cooperation) {
        switch (policy.kind) {
        case OffloadPolicy::Kind::Learned: {
          const std::vector<double> features(z.begin(), z.end());
          offload = gate::gate_decide(*policy.model, features) == gate::OffloadDecision::Offload;
          break;
        }
        case OffloadPolicy::Kind::Oracle:
          offload = pred != data.labels[i];
          break;
        case OffloadPolicy::Kind::AlwaysLocal:
          offload = false;
          break;
        case OffloadPolicy::Kind::AlwaysOffload:
          offload = true;
          break;
        }
      }
    }
    if (offload) {
      try {
        pred = cloud->infer(dims, row);
      } catch (const Error &e) {
        finish(i, elapsed());
        throw PartialRunError(std::string("cloud failed after ") + std::to_string(i) + " of " +
                                std::to_string(data.size()) + " samples: " + e.what(),
                              r);
      }
      if (simulated)
        virtual_s += simulate_delay(profile, cloud->last_exchange_bytes());
      ++offloaded;
    }
    correct += pred == data.labels[i];
  }
  finish(data.size(), elapsed());
  return r;
}

std::vector<BenchReport> bench_compare(const nn::Network &student,
                                       const OffloadPolicy &policy,
                                       const nn::Dataset &data, CloudClient &cloud,
                                       const NetProfile &profile) {
  std::vector<BenchReport> out;
  for (auto s : {Strategy::EdgeOnly, Strategy::CloudOnly, Strategy::Cooperation})
    out.push_back(edge_run(student, policy, data, &cloud, s, profile));
  return out;
}

std::string bench_csv(std::span<const BenchReport> reports) {
  std::string out = "strategy,runtime_s,accuracy,offload_fraction,samples\n";
  char buf[160];
  for (const auto &r : reports) {
    std::snprintf(buf, sizeof buf, "%s,%.6f,%.6f,%.6f,%zu\n", to_string(r.strategy),
                  r.runtime_s, r.accuracy, r.offload_fraction, r.samples);
    out += buf;
  }
  return out;
}

std::vector<BenchReport> parse_bench_csv(const std::string &csv) {
  std::istringstream in(csv);
  std::string line;
  if (!std::getline(in, line) || line != "strategy,runtime_s,accuracy,offload_fraction,samples")
    fail(ErrorKind::Parse, "bench CSV: missing or unexpected header");
  std::vector<BenchReport> out;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty())
      continue;
    std::vector<std::string> f;
    std::istringstream fields(line);
    for (std::string cell; std::getline(fields, cell, ',');)
      f.push_back(cell);
    try {
      if (f.size() != 5)
        throw std::invalid_argument("field count");
      out.push_back({parse_strategy(f[0]), std::stod(f[1]), std::stod(f[2]), std::stod(f[3]),
                     static_cast<std::size_t>(std::stoull(f[4]))});
    } catch (const std::exception &) {
      fail(ErrorKind::Parse, "bench CSV: bad row at line " + std::to_string(line_no));
    }
  }
  return out;
}

std::string bench_table(std::span<const BenchReport> reports) {
  std::string out;
  char buf[160];
  std::snprintf(buf, sizeof buf, "%-12s %12s %9s %10s %8s\n", "strategy", "runtime_s",
                "accuracy", "offloaded", "samples");
  out += buf;
  for (const auto &r : reports) {
    std::snprintf(buf, sizeof buf, "%-12s %12.4f %8.2f%% %9.1f%% %8zu\n", to_string(r.strategy),
                  r.runtime_s, 100.0 * r.accuracy, 100.0 * r.offload_fraction, r.samples);
    out += buf;
  }
  return out;
}

} // namespace edgecloud::runtime
