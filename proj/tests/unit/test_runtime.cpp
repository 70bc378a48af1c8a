// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <cstring>
#include <random>
#include <thread>

#include <edgecloud/nn/train.hpp>
#include <edgecloud/runtime/cloud.hpp>
#include <edgecloud/runtime/edge.hpp>
#include <edgecloud/runtime/wire.hpp>

#include "fixtures.hpp"

using namespace edgecloud;
using namespace edgecloud::runtime;

namespace {

const Endpoint kLocal{"127.0.0.1", 0};

struct Models {
  nn::Dataset data;
  nn::Network teacher, student;
};

/// Noisy quadrant images with a decent teacher and a weaker dense student.
const Models &models() {
  static const Models m = [] {
    auto data = fixtures::quadrant_images(60, 6, 0.9f, 11);
    nn::TrainConfig tc;
    tc.epochs = 20;
    tc.batch_size = 16;
    auto teacher = nn::train(nn::NetworkBuilder({1, 6, 6}).conv(4, 3, 1, 1).relu().flatten().dense(4).build(4, 1),
                             data.subset(nn::Split::Train), tc).net;
    tc.epochs = 2;
    auto student = nn::train(nn::NetworkBuilder({1, 6, 6}).flatten().dense(4).build(4, 2),
                             data.subset(nn::Split::Train), tc).net;
    return Models{data.subset(nn::Split::Test), teacher, student};
  }();
  return m;
}

NetProfile simulated(double rtt_ms = 50.0, double bw = 1e6) {
  NetProfile p;
  p.mode = NetProfile::Mode::Simulated;
  p.rtt_ms = rtt_ms;
  p.bandwidth_bytes_per_s = bw;
  return p;
}

WireMessage random_message(std::mt19937_64 &rng) {
  switch (rng() % 3) {
  case 0: {
    InferRequest r;
    r.request_id = rng();
    const std::size_t rank = 1 + rng() % 4;
    std::size_t n = 1;
    for (std::size_t i = 0; i < rank; ++i) {
      r.dims.push_back(static_cast<std::uint32_t>(1 + rng() % 5));
      n *= r.dims.back();
    }
    for (std::size_t i = 0; i < n; ++i) {
      const auto bits = static_cast<std::uint32_t>(rng());
      float f;
      std::memcpy(&f, &bits, 4);
      r.payload.push_back(f);
    }
    return r;
  }
  case 1:
    return InferResponse{rng(), static_cast<std::uint32_t>(rng())};
  default:
    return Shutdown{};
  }
}

} // namespace

TEST_CASE("wire: shutdown is seven bytes") {
  const auto f = encode_message(Shutdown{});
  CHECK(f == std::vector<std::uint8_t>{'E', 'C', 'W', 'P', 1, 0, 3});
  CHECK(std::holds_alternative<Shutdown>(decode_message(f)));
}

TEST_CASE("wire: golden request and response frames") {
  const std::vector<std::uint8_t> golden = {
    'E', 'C', 'W', 'P', 0x01, 0x00, 0x01,           // magic, version 1, request
    0x08, 0x07, 0x06, 0x05, 0x04, 0x03, 0x02, 0x01, // id 0x0102030405060708
    0x02, 0x00, 0x00, 0x00,                         // rank 2
    0x02, 0x00, 0x00, 0x00, 0x02, 0x00, 0x00, 0x00, // dims 2, 2
    0x00, 0x00, 0x80, 0x3F,                         // 1.0
    0x00, 0x00, 0x00, 0xC0,                         // -2.0
    0x00, 0x00, 0x00, 0x3F,                         // 0.5
    0x00, 0x00, 0x00, 0x00,                         // 0.0
  };
  const InferRequest expected{0x0102030405060708ULL, {2, 2}, {1.0f, -2.0f, 0.5f, 0.0f}};
  CHECK(std::get<InferRequest>(decode_message(golden)) == expected);
  CHECK(encode_message(expected) == golden);

  const std::vector<std::uint8_t> resp = {'E', 'C', 'W', 'P', 1, 0, 2, 42, 0, 0, 0, 0, 0, 0, 0, 3, 0, 0, 0};
  CHECK(std::get<InferResponse>(decode_message(resp)) == InferResponse{42, 3});
}

TEST_CASE("wire: round trip is bit-exact") {
  std::mt19937_64 rng(1);
  for (int i = 0; i < 1000; ++i) {
    const auto m = random_message(rng);
    const auto bytes = encode_message(m);
    const auto back = decode_message(bytes);
    CHECK(back.index() == m.index());
    CHECK(encode_message(back) == bytes);
    if (const auto *r = std::get_if<InferRequest>(&m)) {
      const auto &b = std::get<InferRequest>(back);
      CHECK(b.request_id == r->request_id);
      CHECK(b.dims == r->dims);
      CHECK(std::memcmp(b.payload.data(), r->payload.data(), r->payload.size() * 4) == 0);
    } else {
      CHECK(back == m);
    }
  }
}

TEST_CASE("wire: malformed frames name the offset") {
  auto good = encode_message(InferRequest{7, {3}, {1, 2, 3}});
  auto bad = good;
  bad[1] = 'X';
  CHECK_THROWS_WITH(decode_message(bad), doctest::Contains("byte offset 0"));
  bad = good;
  bad[4] = 2;
  CHECK_THROWS_WITH(decode_message(bad), doctest::Contains("byte offset 4"));
  bad = good;
  bad[6] = 9;
  CHECK_THROWS_WITH(decode_message(bad), doctest::Contains("byte offset 6"));
  bad = good;
  bad.pop_back();
  CHECK_THROWS_WITH(decode_message(bad), doctest::Contains("byte offset 23"));
  bad = encode_message(Shutdown{});
  bad.push_back(0);
  CHECK_THROWS_WITH(decode_message(bad), doctest::Contains("byte offset 7"));
  CHECK_THROWS_WITH(decode_message(std::vector<std::uint8_t>{'E', 'C'}),
                    doctest::Contains("byte offset 0"));
  try {
    decode_message(bad);
  } catch (const Error &e) {
    CHECK(e.kind() == ErrorKind::Protocol);
  }
  CHECK_THROWS_AS(encode_message(InferRequest{1, {2, 2}, {1, 2, 3}}), Error);
}

TEST_CASE("simulated delay") {
  const auto p = simulated(50.0, 1e6);
  CHECK(simulate_delay(p, 1000000) == doctest::Approx(1.05).epsilon(1e-12));
  CHECK(simulate_delay(p, 0) == 0.05);
  double total = 0.0;
  for (int i = 0; i < 10; ++i)
    total += simulate_delay(p, 256);
  CHECK(total == doctest::Approx(10 * simulate_delay(p, 256)).epsilon(1e-15));
  CHECK_THROWS_AS(simulate_delay(NetProfile{}, 10), Error);
  NetProfile missing;
  missing.mode = NetProfile::Mode::Simulated;
  CHECK_THROWS_AS(missing.validate(), Error);
}

TEST_CASE("cloud server answers like the local teacher") {
  const auto &m = models();
  CloudServer server(m.teacher, kLocal);
  server.start();
  CloudClient client({"127.0.0.1", server.port()});
  const auto local = nn::predict(m.teacher, m.data.samples);
  const std::vector<std::uint32_t> dims{1, 6, 6};
  REQUIRE(m.data.size() >= 48);
  for (std::size_t i = 0; i < 100; ++i) {
    const std::size_t row = i % m.data.size();
    CHECK(client.infer(dims, m.data.samples.row(row)) == local[row]);
  }
  CHECK(server.requests_served() == 100);
  server.stop();
}

TEST_CASE("cloud server keeps pipelined order and isolates bad connections") {
  const auto &m = models();
  CloudServer server(m.teacher, kLocal);
  server.start();
  const Endpoint ep{"127.0.0.1", server.port()};

  Socket bad = connect_to(ep);
  send_frame(bad, std::vector<std::uint8_t>{'J', 'U', 'N', 'K'});
  CHECK_FALSE(recv_frame(bad).has_value());

  Socket s = connect_to(ep);
  const auto row = m.data.samples.row(0);
  for (std::uint64_t id : {11u, 12u})
    send_frame(s, encode_message(InferRequest{id, {1, 6, 6}, {row.begin(), row.end()}}));
  for (std::uint64_t id : {11u, 12u}) {
    const auto f = recv_frame(s);
    REQUIRE(f.has_value());
    CHECK(std::get<InferResponse>(decode_message(*f)).request_id == id);
  }

  send_frame(s, encode_message(InferRequest{13, {2, 3}, {1, 2, 3, 4, 5, 6}}));
  CHECK_FALSE(recv_frame(s).has_value());

  CloudClient other(ep);
  CHECK(other.infer(std::vector<std::uint32_t>{1, 6, 6}, row) ==
        nn::predict(m.teacher, m.data.batch(std::vector<std::size_t>{0}))[0]);
  other.send_shutdown();
  server.stop();
  CHECK_THROWS_AS(CloudClient(ep).infer(std::vector<std::uint32_t>{1, 6, 6}, row), Error);
}

TEST_CASE("shutdown frame ends a foreground run") {
  CloudServer server(models().teacher, kLocal);
  std::thread t([&] { server.run(); });
  CloudClient c({"127.0.0.1", server.port()});
  c.send_shutdown();
  t.join();
  CHECK(server.requests_served() == 0);
}

TEST_CASE("edge runs") {
  const auto &m = models();
  CloudServer server(m.teacher, kLocal);
  server.start();
  CloudClient cloud({"127.0.0.1", server.port()});
  const auto p = simulated();
  const auto n = m.data.size();

  const auto edge = edge_run(m.student, OffloadPolicy::always_local(), m.data, nullptr,
                             Strategy::EdgeOnly, p);
  CHECK(edge.accuracy == nn::evaluate(m.student, m.data));
  CHECK(edge.offload_fraction == 0.0);
  CHECK(edge.samples == n);

  const auto cloud_only = edge_run(m.student, OffloadPolicy::always_local(), m.data, &cloud,
                                   Strategy::CloudOnly, p);
  CHECK(cloud_only.accuracy == nn::evaluate(m.teacher, m.data));
  CHECK(cloud_only.offload_fraction == 1.0);

  SUBCASE("constant-local cooperation reduces to edge only") {
    const auto r = edge_run(m.student, OffloadPolicy::always_local(), m.data, &cloud,
                            Strategy::Cooperation, p);
    CHECK(r.accuracy == edge.accuracy);
    CHECK(r.offload_fraction == 0.0);
    CHECK(r.runtime_s == edge.runtime_s);
  }
  SUBCASE("constant-offload cooperation costs cloud plus student compute") {
    const auto r = edge_run(m.student, OffloadPolicy::always_offload(), m.data, &cloud,
                            Strategy::Cooperation, p);
    CHECK(r.accuracy == cloud_only.accuracy);
    CHECK(r.runtime_s == doctest::Approx(cloud_only.runtime_s + edge.runtime_s).epsilon(1e-12));
  }
  SUBCASE("oracle cooperation equals the both-wrong recount") {
    const auto r = edge_run(m.student, OffloadPolicy::oracle(), m.data, &cloud,
                            Strategy::Cooperation, p);
    const auto ps = nn::predict(m.student, m.data.samples);
    const auto pt = nn::predict(m.teacher, m.data.samples);
    std::size_t both_wrong = 0, student_wrong = 0;
    for (std::size_t i = 0; i < n; ++i) {
      both_wrong += ps[i] != m.data.labels[i] && pt[i] != m.data.labels[i];
      student_wrong += ps[i] != m.data.labels[i];
    }
    CHECK(r.accuracy == 1.0 - static_cast<double>(both_wrong) / static_cast<double>(n));
    CHECK(r.offload_fraction == static_cast<double>(student_wrong) / static_cast<double>(n));
    CHECK(r.accuracy >= std::max(edge.accuracy, cloud_only.accuracy));
  }
  SUBCASE("simulated runtimes are additive and ordered") {
    const auto reports = bench_compare(m.student, OffloadPolicy::oracle(), m.data, cloud, p);
    REQUIRE(reports.size() == 3);
    CHECK(reports[0].runtime_s < reports[2].runtime_s);
    CHECK(reports[2].runtime_s < reports[1].runtime_s);
    const double per_edge = static_cast<double>(m.student.macs_per_sample()) / p.edge_macs_per_s;
    CHECK(reports[0].runtime_s == doctest::Approx(n * per_edge).epsilon(1e-12));
    const auto again = bench_compare(m.student, OffloadPolicy::oracle(), m.data, cloud, p);
    CHECK(bench_csv(again) == bench_csv(reports));
    CHECK(parse_bench_csv(bench_csv(reports)).size() == 3);
  }
  SUBCASE("real mode measures wall time") {
    const auto r = edge_run(m.student, OffloadPolicy::always_local(), m.data, nullptr,
                            Strategy::EdgeOnly, NetProfile{});
    CHECK(r.runtime_s >= 0.0);
    CHECK(r.accuracy == edge.accuracy);
  }
  server.stop();
}

TEST_CASE("edge run failures") {
  const auto &m = models();
  SUBCASE("cloud strategies need an endpoint") {
    CHECK_THROWS_AS(edge_run(m.student, OffloadPolicy::oracle(), m.data, nullptr,
                             Strategy::Cooperation, NetProfile{}),
                    Error);
  }
  SUBCASE("unreachable cloud fails at startup") {
    std::uint16_t port;
    {
      Listener l(kLocal);
      port = l.port();
    }
    try {
      CloudClient c({"127.0.0.1", port});
      FAIL("connected to a closed port");
    } catch (const Error &e) {
      CHECK(e.kind() == ErrorKind::Network);
    }
  }
  SUBCASE("mid-run disconnect reports the partial run") {
    Listener l(kLocal);
    std::thread fake([&] {
      Socket s = l.accept();
      for (std::uint32_t i = 0; i < 3; ++i) {
        const auto f = recv_frame(s);
        const auto req = std::get<InferRequest>(decode_message(*f));
        send_frame(s, encode_message(InferResponse{req.request_id, 0}));
      }
      recv_frame(s);
    });
    CloudClient c({"127.0.0.1", l.port()});
    try {
      edge_run(m.student, OffloadPolicy::always_local(), m.data, &c, Strategy::CloudOnly,
               simulated());
      FAIL("run should not complete");
    } catch (const PartialRunError &e) {
      CHECK(e.partial().samples == 3);
      CHECK(e.partial().offload_fraction == 1.0);
      CHECK(std::string(e.what()).find("after 3 of") != std::string::npos);
    }
    fake.join();
  }
}

TEST_CASE("bench CSV and table") {
  const std::vector<BenchReport> r{{Strategy::EdgeOnly, 0.5, 0.9, 0.0, 10},
                                   {Strategy::CloudOnly, 2.25, 0.95, 1.0, 10},
                                   {Strategy::Cooperation, 0.75, 0.97, 0.2, 10}};
  const auto csv = bench_csv(r);
  CHECK(csv.rfind("strategy,runtime_s,accuracy,offload_fraction,samples\n"
                  "edge_only,0.500000,0.900000,0.000000,10\n",
                  0) == 0);
  CHECK(parse_bench_csv(csv) == r);
  CHECK_THROWS_AS(parse_bench_csv("nope\n"), Error);
  const auto table = bench_table(r);
  CHECK(table.find("cooperation") != std::string::npos);
  CHECK(table.find("97.00%") != std::string::npos);
}
