// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <random>

#include <edgecloud/arch/model_spec.hpp>
#include <edgecloud/error.hpp>
#include <edgecloud/nn/serialize.hpp>
#include <edgecloud/nn/train.hpp>

using namespace edgecloud;
using arch::LayerSpec;
using arch::ModelSpec;
using nn::LayerKind;
using nn::NetworkBuilder;

namespace {

LayerSpec conv(std::size_t k, std::size_t d, std::size_t p, std::size_t o) {
  return {LayerKind::Conv, k, d, p, o};
}
LayerSpec dense(std::size_t o) { return {LayerKind::Dense, 0, 0, 0, o}; }
LayerSpec relu() { return {LayerKind::Relu, 0, 0, 0, 0}; }
LayerSpec flatten() { return {LayerKind::Flatten, 0, 0, 0, 0}; }
LayerSpec pool() { return {LayerKind::Pool, 2, 2, 0, 0}; }

/// Small three-conv teacher used across the realize tests.
nn::Network conv_teacher() {
  return NetworkBuilder({1, 8, 8})
    .conv(8, 3, 1, 1)
    .relu()
    .conv(8, 3, 1, 1)
    .relu()
    .pool()
    .conv(16, 3, 1, 1)
    .relu()
    .flatten()
    .dense(4)
    .build(4, 3);
}

/// Sums tensor lengths directly, without going through Layer::param_count.
std::size_t walk_params(const nn::Network &net) {
  std::size_t n = 0;
  for (const nn::Layer &l : net.layers()) {
    for (float v : l.weight.data()) {
      (void)v;
      ++n;
    }
    for (float v : l.bias.data()) {
      (void)v;
      ++n;
    }
  }
  return n;
}

/// Random valid network grown layer by layer from a random input shape.
nn::Network random_network(std::mt19937_64 &rng) {
  auto pick = [&](std::size_t lo, std::size_t hi) {
    return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
  };
  const bool spatial = pick(0, 3) != 0;
  NetworkBuilder b(spatial ? nn::Shape{pick(1, 3), pick(4, 12), pick(4, 12)}
                           : nn::Shape{pick(2, 20)});
  const std::size_t depth = pick(0, 7);
  for (std::size_t i = 0; i < depth; ++i) {
    const auto kind = static_cast<LayerKind>(pick(0, nn::kLayerKindCount - 1));
    std::size_t k = 0, d = 0, p = 0, o = 0;
    if (kind == LayerKind::Conv) {
      k = pick(1, 5);
      d = pick(1, 3);
      p = pick(0, 2);
      o = pick(1, 8);
    } else if (kind == LayerKind::Dense) {
      o = pick(1, 16);
    } else if (kind == LayerKind::Pool) {
      k = d = 2;
    }
    if (b.can_add(kind, k, d, p, o))
      b.add(kind, k, d, p, o);
  }
  if (b.current_shape().size() == 3)
    b.flatten();
  const std::size_t classes = pick(2, 6);
  b.dense(classes);
  return b.build(classes, rng());
}

} // namespace

TEST_CASE("describe reports each realized layer") {
  auto net = NetworkBuilder({1, 6, 6}).conv(8, 3, 1, 1).relu().flatten().dense(10).build(10, 1);
  const ModelSpec s = arch::describe(net);
  REQUIRE(s.layers.size() == 4);
  CHECK(s.layers[0] == conv(3, 1, 1, 8));
  CHECK(s.layers[1] == relu());
  CHECK(s.layers[2] == flatten());
  CHECK(s.layers[3] == dense(10));
  CHECK(s.input_dims == nn::Shape{1, 6, 6});
  CHECK(s.class_count == 10);
}

TEST_CASE("dense-only teacher matches the hand-written description") {
  auto net = NetworkBuilder({784}).dense(128).relu().dense(64).relu().dense(10).build(10, 2);
  const ModelSpec expected{{dense(128), relu(), dense(64), relu(), dense(10)}, {784}, 10};
  CHECK(arch::describe(net) == expected);
}

TEST_CASE("describe and realize round trip over random specs") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    const auto net = random_network(rng);
    const ModelSpec s = arch::describe(net);
    const auto r = arch::realize(s, 5);
    CHECK(r.skipped.empty());
    CHECK(arch::describe(r.net) == s);
    CHECK(arch::param_count(r.net) == arch::param_count(net));
  }
}

TEST_CASE("state encoding") {
  SUBCASE("relu is one-hot plus zeros") {
    const auto s = arch::encode_state(relu());
    for (std::size_t i = 0; i < arch::kStateWidth; ++i)
      CHECK(s[i] == (i == static_cast<std::size_t>(LayerKind::Relu) ? 1.0 : 0.0));
  }
  SUBCASE("caps map to one and larger values clamp") {
    for (auto l : {conv(11, 4, 5, 512), conv(13, 9, 7, 2048)}) {
      const auto s = arch::encode_state(l);
      CHECK(s[static_cast<std::size_t>(LayerKind::Conv)] == 1.0);
      for (std::size_t i = nn::kLayerKindCount; i < arch::kStateWidth; ++i)
        CHECK(s[i] == 1.0);
    }
  }
  SUBCASE("fields divide by their caps") {
    const auto s = arch::encode_state(conv(3, 1, 1, 8));
    CHECK(s[5] == doctest::Approx(3.0 / 11.0).epsilon(1e-12));
    CHECK(s[5] == doctest::Approx(0.272727).epsilon(1e-5));
    CHECK(s[6] == 0.25);
    CHECK(s[7] == 0.2);
    CHECK(s[8] == 0.015625);
  }
}

TEST_CASE("action pool shape") {
  CHECK(arch::kActionCount == 6);
  CHECK(arch::kActionPool.front() == 0.0);
  CHECK(arch::kActionPool.back() == 1.0);
  for (std::size_t i = 1; i < arch::kActionCount; ++i)
    CHECK(arch::kActionPool[i] > arch::kActionPool[i - 1]);
}

TEST_CASE("apply_action") {
  const ModelSpec s{{conv(5, 2, 2, 64), relu(), pool(), flatten(), dense(32), dense(4)}, {3, 16, 16}, 4};
  s.validate();

  SUBCASE("keep is the identity on every layer") {
    for (std::size_t t = 0; t < s.layers.size(); ++t) {
      const auto r = arch::apply_action(s, t, 1.0);
      CHECK(r.spec == s);
      CHECK_FALSE(r.coerced);
    }
  }
  SUBCASE("remove drops the layer") {
    const auto r = arch::apply_action(s, 1, 0.0);
    REQUIRE(r.spec.layers.size() == s.layers.size() - 1);
    CHECK(r.spec.layers[1] == pool());
  }
  SUBCASE("conv scales with rounding") {
    // k 5*0.4=2, d 2*0.4=0.8->1, p 2*0.4=0.8->1, o 64*0.4=25.6->26
    CHECK(arch::apply_action(s, 0, 0.4).spec.layers[0] == conv(2, 1, 1, 26));
    // floors: k 5*0.2=1, d 0.4->max(1,0), p 0.4->0, o 12.8->13
    CHECK(arch::apply_action(s, 0, 0.2).spec.layers[0] == conv(1, 1, 0, 13));
  }
  SUBCASE("dense scales only outputs") {
    CHECK(arch::apply_action(s, 4, 0.6).spec.layers[4] == dense(19));
  }
  SUBCASE("non-parametric layers are never scaled") {
    for (std::size_t t : {1u, 2u, 3u})
      for (double phi : {0.2, 0.4, 0.6, 0.8})
        CHECK(arch::apply_action(s, t, phi).spec == s);
  }
  SUBCASE("head is protected") {
    for (double phi : {0.0, 0.2, 0.8}) {
      const auto r = arch::apply_action(s, 5, phi);
      CHECK(r.spec == s);
      CHECK(r.coerced);
    }
  }
  SUBCASE("bad inputs") {
    CHECK_THROWS_AS(arch::apply_action(s, 6, 1.0), Error);
    CHECK_THROWS_AS(arch::apply_action(s, 0, 0.5), Error);
  }
}

TEST_CASE("apply_actions folds over the original layer order") {
  const ModelSpec s{{conv(3, 1, 1, 8), relu(), conv(3, 1, 1, 8), relu(), flatten(), dense(4)}, {1, 6, 6}, 4};
  const std::vector<double> phis{0.0, 0.0, 0.4, 1.0, 1.0, 0.0};
  const auto e = arch::apply_actions(s, phis);
  const ModelSpec expected{{conv(1, 1, 0, 3), relu(), flatten(), dense(4)}, {1, 6, 6}, 4};
  CHECK(e.spec == expected);
  CHECK(e.coerced == std::vector<bool>{false, false, false, false, false, true});

  const std::vector<double> keep(s.layers.size(), 1.0);
  CHECK(arch::apply_actions(s, keep).spec == s);
  CHECK_THROWS_AS(arch::apply_actions(s, std::vector<double>{1.0}), Error);
}

TEST_CASE("realize") {
  const auto teacher = conv_teacher();
  const ModelSpec ts = arch::describe(teacher);

  SUBCASE("teacher description realizes to the same size") {
    CHECK(arch::param_count(arch::realize(ts, 9).net) == arch::param_count(teacher));
  }
  SUBCASE("empty body degenerates to flatten plus head") {
    std::vector<double> phis(ts.layers.size(), 0.0);
    const auto e = arch::apply_actions(ts, phis);
    const auto r = arch::realize(e.spec, 1);
    const ModelSpec expected{{flatten(), dense(4)}, {1, 8, 8}, 4};
    CHECK(arch::describe(r.net) == expected);
    CHECK(arch::param_count(r.net) == 64 * 4 + 4);
  }
  SUBCASE("shrunk convs match the per-layer formula") {
    std::vector<double> phis(ts.layers.size(), 1.0);
    for (std::size_t i = 0; i < ts.layers.size(); ++i)
      if (ts.layers[i].type == LayerKind::Conv)
        phis[i] = 0.4;
    const auto r = arch::realize(arch::apply_actions(ts, phis).spec, 1);
    // conv k3 d1 p1 o8 at 0.4 -> k1 d1 p0 o3; o16 -> o6; spatial 8x8 kept.
    // k^2 c_in c_out + c_out: 1*1*3+3, 1*3*3+3, 1*3*6+6; head 6*4*4*4+4.
    CHECK(arch::param_count(r.net) == 6 + 12 + 24 + 388);
    CHECK(r.skipped.empty());
  }
  SUBCASE("dense after spatial input gets a flatten") {
    const ModelSpec s{{conv(3, 1, 0, 2), dense(5), dense(4)}, {1, 6, 6}, 4};
    const auto r = arch::realize(s, 1);
    const ModelSpec expected{{conv(3, 1, 0, 2), flatten(), dense(5), dense(4)}, {1, 6, 6}, 4};
    CHECK(arch::describe(r.net) == expected);
  }
  SUBCASE("collapsing layers are skipped and flagged") {
    const ModelSpec s{{conv(3, 1, 0, 2), pool(), conv(3, 1, 0, 2), flatten(), dense(4)}, {1, 4, 4}, 4};
    // 4x4 -> conv k3 -> 2x2 -> pool -> 1x1 -> conv k3 cannot fit.
    const auto r = arch::realize(s, 1);
    CHECK(r.skipped == std::vector<std::size_t>{2});
    CHECK(r.net.layer_count() == 4);
  }
  SUBCASE("initialization is seeded") {
    CHECK(arch::realize(ts, 4).net == arch::realize(ts, 4).net);
    CHECK_FALSE(arch::realize(ts, 4).net == arch::realize(ts, 5).net);
  }
}

TEST_CASE("realize stays shape-consistent under random action sequences") {
  std::mt19937_64 rng(23);
  std::uniform_int_distribution<std::size_t> action(0, arch::kActionCount - 1);
  for (int trial = 0; trial < 300; ++trial) {
    const auto net = trial % 3 == 0 ? conv_teacher() : random_network(rng);
    const ModelSpec s = arch::describe(net);
    std::vector<double> phis(s.layers.size());
    for (auto &p : phis)
      p = arch::kActionPool[action(rng)];
    const auto e = arch::apply_actions(s, phis);
    nn::Network student = arch::realize(e.spec, rng()).net;
    CHECK(student.class_count() == s.class_count);
    CHECK(student.input_shape() == s.input_dims);
    nn::Shape batch_dims{2};
    batch_dims.insert(batch_dims.end(), s.input_dims.begin(), s.input_dims.end());
    const auto out = nn::forward(student, nn::Tensor(batch_dims, 0.5f));
    CHECK(out.logits.dims() == nn::Shape{2, s.class_count});
  }
}

TEST_CASE("param_count") {
  CHECK(arch::param_count(NetworkBuilder({784}).dense(10).build(10, 1)) == 7850);
  auto c = NetworkBuilder({1, 5, 5}).conv(8, 3).flatten().dense(2).build(2, 1);
  CHECK(c.layers()[0].param_count() == 3 * 3 * 1 * 8 + 8);

  std::mt19937_64 rng(5);
  std::vector<nn::Network> nets{conv_teacher()};
  for (int i = 0; i < 50; ++i)
    nets.push_back(random_network(rng));
  for (const auto &n : nets)
    CHECK(arch::param_count(n) == walk_params(n));
}

TEST_CASE("serialized size covers every parameter") {
  const auto t = conv_teacher();
  CHECK(arch::serialized_size_bytes(t) > 4 * arch::param_count(t));
  CHECK(arch::serialized_size_bytes(t) == nn::serialize(t).size());
}

TEST_CASE("compression ratio") {
  const auto t = conv_teacher();
  CHECK(arch::compression_ratio(t, t) == 0.0);
  CHECK(arch::compression_ratio(4000.0, 1000.0) == 0.75);
  CHECK(arch::compression_ratio(43704.0, 407.0) == doctest::Approx(0.99069).epsilon(1e-4));
  CHECK_THROWS_AS(arch::compression_ratio(0.0, 5.0), Error);

  double prev = 1.0;
  for (double s = 1.0; s <= 5001.0; s += 250.0) {
    const double c = arch::compression_ratio(4000.0, s);
    CHECK(c < 1.0);
    CHECK(c <= prev);
    prev = c;
  }
}

TEST_CASE("text format round trip") {
  const ModelSpec s = arch::describe(conv_teacher());
  const std::string text = arch::format_spec(s);
  CHECK(text.rfind("input 1x8x8 classes 4\nconv 3 1 1 8\nrelu 0 0 0 0\n", 0) == 0);
  CHECK(arch::parse_spec(text) == s);
  CHECK(arch::parse_spec("# comment\ninput 4 classes 2\n\ndense 0 0 0 2\n") ==
        ModelSpec{{dense(2)}, {4}, 2});

  CHECK_THROWS_AS(arch::parse_spec(""), Error);
  CHECK_THROWS_WITH(arch::parse_spec("input 4 classes 2\nlinear 0 0 0 2\n"),
                    doctest::Contains("line 2"));
  CHECK_THROWS_AS(arch::parse_spec("input 4 classes 2\ndense 0 0 0 3\n"), Error);
  CHECK_THROWS_AS(arch::parse_spec("input 4 classes 2\ndense 0 0 2\n"), Error);
}
