// SPDX-License-Identifier: Apache-2.0
#include <edgecloud/runtime/cloud.hpp>

#include <algorithm>
#include <chrono>
#include <iostream>

#include <edgecloud/error.hpp>
#include <edgecloud/nn/train.hpp>
#include <edgecloud/runtime/wire.hpp>

namespace edgecloud::runtime {

void NetProfile::validate() const {
  if (!(rtt_ms >= 0.0))
    fail(ErrorKind::Config, "rtt_ms must be nonnegative");
  if (!(bandwidth_bytes_per_s >= 0.0))
    fail(ErrorKind::Config, "bandwidth must be nonnegative");
  if (mode == Mode::Simulated && !(bandwidth_bytes_per_s > 0.0))
    fail(ErrorKind::Config, "simulated mode needs a positive bandwidth");
  if (!(edge_macs_per_s > 0.0))
    fail(ErrorKind::Config, "edge_macs_per_s must be positive");
}

const char *to_string(NetProfile::Mode mode) noexcept {
  return mode == NetProfile::Mode::Real ? "real" : "simulated";
}

NetProfile::Mode parse_mode(const std::string &name) {
  if (name == "real")
    return NetProfile::Mode::Real;
  if (name == "simulated")
    return NetProfile::Mode::Simulated;
  fail(ErrorKind::Config, "unknown network mode \"" + name + "\" (expected real or simulated)");
}

double simulate_delay(const NetProfile &profile, std::size_t message_bytes) {
  if (profile.mode != NetProfile::Mode::Simulated)
    fail(ErrorKind::State, "simulate_delay needs a simulated profile");
  return profile.rtt_ms / 1000.0 +
         static_cast<double>(message_bytes) / profile.bandwidth_bytes_per_s;
}

CloudServer::CloudServer(nn::Network teacher, const Endpoint &bind, NetProfile profile)
    : teacher_(std::move(teacher)), profile_(profile), listener_(bind) {
  profile_.validate();
}

CloudServer::~CloudServer() { stop(); }

void CloudServer::run() {
  while (!stopping_) {
    Socket s = listener_.accept();
    if (!s.valid() || stopping_)
      break;
    auto conn = std::make_shared<Socket>(std::move(s));
    std::lock_guard lock(mu_);
    conns_.push_back(conn);
    workers_.emplace_back(&CloudServer::serve, this, conn);
  }
  std::vector<std::thread> workers;
  {
    std::lock_guard lock(mu_);
    for (auto &c : conns_)
      c->shutdown();
    workers.swap(workers_);
  }
  for (auto &w : workers)
    w.join();
  std::lock_guard lock(mu_);
  conns_.clear();
}

void CloudServer::start() { runner_ = std::thread(&CloudServer::run, this); }

void CloudServer::stop() {
  stopping_ = true;
  listener_.shutdown();
  if (runner_.joinable() && runner_.get_id() != std::this_thread::get_id())
    runner_.join();
}

void CloudServer::serve(std::shared_ptr<Socket> conn) {
  const nn::Shape &input = teacher_.input_shape();
  try {
    while (auto frame = recv_frame(*conn)) {
      const WireMessage msg = decode_message(*frame);
      if (std::holds_alternative<Shutdown>(msg)) {
        stopping_ = true;
        listener_.shutdown();
        break;
      }
      const auto *req = std::get_if<InferRequest>(&msg);
      if (!req)
        fail(ErrorKind::Protocol, "unexpected response frame from client");
      if (!std::equal(req->dims.begin(), req->dims.end(), input.begin(), input.end()))
        fail(ErrorKind::Protocol, "request dims do not match teacher input " +
                                      nn::shape_string(input));
      nn::Shape batch{1};
      batch.insert(batch.end(), input.begin(), input.end());
      const auto cls = nn::predict(teacher_, nn::Tensor(batch, req->payload))[0];
      const auto reply = encode_message(InferResponse{req->request_id, cls});
      if (profile_.mode == NetProfile::Mode::Real && profile_.rtt_ms > 0.0) {
        double delay = profile_.rtt_ms / 1000.0;
        if (profile_.bandwidth_bytes_per_s > 0.0)
          delay += static_cast<double>(frame->size() + reply.size() + 8) /
                   profile_.bandwidth_bytes_per_s;
        std::this_thread::sleep_for(std::chrono::duration<double>(delay));
      }
      ++served_;
      send_frame(*conn, reply);
    }
  } catch (const std::exception &e) {
    if (!stopping_)
      std::cerr << "cloud: closing connection: " << e.what() << "\n";
  }
  conn->shutdown();
}

} // namespace edgecloud::runtime
