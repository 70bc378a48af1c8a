// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <random>

#include <edgecloud/error.hpp>
#include <edgecloud/nn/loss.hpp>
#include <edgecloud/nn/serialize.hpp>
#include <edgecloud/nn/train.hpp>

#include "gradcheck.hpp"

using namespace edgecloud;
using namespace edgecloud::nn;

namespace {

Network with_params(Network net, std::size_t layer, std::vector<float> w,
                    std::vector<float> b) {
  auto &l = net.layers()[layer];
  l.weight = Tensor(l.weight.dims(), std::move(w));
  l.bias = Tensor(l.bias.dims(), std::move(b));
  return net;
}

Dataset blobs(std::size_t per_class, std::vector<std::vector<float>> means,
              float sigma, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> noise(0.0f, sigma);
  const std::size_t dim = means[0].size();
  Dataset d;
  d.class_count = means.size();
  std::vector<float> values;
  for (std::size_t i = 0; i < per_class; ++i)
    for (std::size_t c = 0; c < means.size(); ++c) {
      for (std::size_t k = 0; k < dim; ++k)
        values.push_back(means[c][k] + noise(rng));
      d.labels.push_back(static_cast<Label>(c));
      d.splits.push_back(Split::Train);
    }
  d.samples = Tensor({d.labels.size(), dim}, std::move(values));
  return d;
}

// Plain logistic regression in double, independent of the engine.
double logistic_fit_accuracy(const Dataset &d) {
  double w0 = 0, w1 = 0, b = 0;
  for (int it = 0; it < 500; ++it) {
    double g0 = 0, g1 = 0, gb = 0;
    for (std::size_t i = 0; i < d.size(); ++i) {
      const double x0 = d.samples.row(i)[0], x1 = d.samples.row(i)[1];
      const double p = 1.0 / (1.0 + std::exp(-(w0 * x0 + w1 * x1 + b)));
      const double e = p - d.labels[i];
      g0 += e * x0;
      g1 += e * x1;
      gb += e;
    }
    w0 -= 0.1 * g0 / d.size();
    w1 -= 0.1 * g1 / d.size();
    b -= 0.1 * gb / d.size();
  }
  std::size_t ok = 0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    const double z = w0 * d.samples.row(i)[0] + w1 * d.samples.row(i)[1] + b;
    ok += (z > 0) == (d.labels[i] == 1);
  }
  return static_cast<double>(ok) / d.size();
}

} // namespace

TEST_CASE("forward: identity dense layer passes input through") {
  Network net = with_params(NetworkBuilder({2}).dense(2).build(2, 1), 0,
                            {1, 0, 0, 1}, {0, 0});
  auto out = forward(net, Tensor({1, 2}, {1.0f, 0.0f}));
  CHECK(out.logits.dims() == Shape{1, 2});
  CHECK(out.logits[0] == 1.0f);
  CHECK(out.logits[1] == 0.0f);
}

TEST_CASE("forward: zero weights give zero logits") {
  Network net = NetworkBuilder({3}).dense(4).relu().dense(3).build(3, 9);
  for (auto &l : net.layers())
    if (l.parametric()) {
      std::fill(l.weight.data().begin(), l.weight.data().end(), 0.0f);
      std::fill(l.bias.data().begin(), l.bias.data().end(), 0.0f);
    }
  auto out = forward(net, Tensor({2, 3}, {1, -2, 3, 0.5f, 7, -1}));
  for (float v : out.logits.data())
    CHECK(v == 0.0f);
}

TEST_CASE("forward: two-layer net matches hand-computed matmuls") {
  Network net = NetworkBuilder({2}).dense(3).relu().dense(2).build(2, 5);
  net = with_params(std::move(net), 0, {0.5f, -1.0f, 1.5f, 0.25f, -0.75f, 2.0f},
                    {0.1f, -0.2f, 0.05f});
  net = with_params(std::move(net), 2, {1.0f, -0.5f, 0.25f, -1.25f, 0.75f, 0.5f},
                    {0.0f, 0.3f});
  // h = relu(W1 x + b1) = (1.1, 0.85, 0); y = W2 h + b2 = (0.675, -0.4375)
  auto out = forward(net, Tensor({1, 2}, {0.8f, -0.6f}));
  CHECK(out.logits[0] == doctest::Approx(0.675).epsilon(1e-6));
  CHECK(out.logits[1] == doctest::Approx(-0.4375).epsilon(1e-6));
  CHECK(out.features.dims() == Shape{1, 3});
  CHECK(out.features[2] == 0.0f);
}

TEST_CASE("forward: shape mismatch is a shape error") {
  Network net = NetworkBuilder({4}).dense(2).build(2, 1);
  try {
    forward(net, Tensor({1, 3}));
    FAIL("expected shape error");
  } catch (const Error &e) {
    CHECK(e.kind() == ErrorKind::Shape);
  }
}

TEST_CASE("forward: output dims are always [batch, classes]") {
  std::mt19937_64 rng(3);
  for (const Network &net : gradcheck::fixture_networks(11)) {
    edgecloud::nn::Shape dims{4};
    dims.insert(dims.end(), net.input_shape().begin(), net.input_shape().end());
    auto out = forward(net, gradcheck::random_tensor(dims, rng));
    CHECK(out.logits.dims() == Shape{4, net.class_count()});
  }
}

TEST_CASE("grad: softmax cross-entropy on one dense layer has closed form") {
  Network net = with_params(NetworkBuilder({2}).dense(3).build(3, 1), 0,
                            {0.2f, -0.4f, 0.7f, 0.1f, -0.3f, 0.9f},
                            {0.05f, 0.0f, -0.1f});
  const float x0 = 0.8f, x1 = -0.6f;
  const std::vector<Label> y{1};
  Gradients g = grad(net, Tensor({1, 2}, {x0, x1}), y);
  const double z[3] = {0.2 * x0 - 0.4 * x1 + 0.05, 0.7 * x0 + 0.1 * x1,
                       -0.3 * x0 + 0.9 * x1 - 0.1};
  const double s = std::exp(z[0]) + std::exp(z[1]) + std::exp(z[2]);
  for (int k = 0; k < 3; ++k) {
    const double d = std::exp(z[k]) / s - (k == 1 ? 1.0 : 0.0);
    CHECK(g.layers[0].weight[k * 2 + 0] == doctest::Approx(d * x0).epsilon(1e-5));
    CHECK(g.layers[0].weight[k * 2 + 1] == doctest::Approx(d * x1).epsilon(1e-5));
    CHECK(g.layers[0].bias[k] == doctest::Approx(d).epsilon(1e-5));
  }
}

TEST_CASE("grad: confident correct predictions give near-zero gradient") {
  Network net = with_params(NetworkBuilder({2}).dense(2).build(2, 1), 0,
                            {60, 0, -60, 0}, {0, 0});
  Gradients g = grad(net, Tensor({2, 2}, {1, 0, 1, 0}), std::vector<Label>{0, 0});
  for (float v : g.layers[0].weight.data())
    CHECK(std::abs(v) < 1e-20);
  CHECK(g.loss < 1e-20);
}

TEST_CASE("grad: every layer type matches central differences") {
  std::mt19937_64 rng(2024);
  for (std::uint64_t inst = 0; inst < 20; ++inst) {
    for (const Network &net : gradcheck::fixture_networks(100 + inst)) {
      edgecloud::nn::Shape dims{5};
      dims.insert(dims.end(), net.input_shape().begin(), net.input_shape().end());
      Tensor x = gradcheck::random_tensor(dims, rng);
      auto y = gradcheck::random_labels(5, net.class_count(), rng);
      const double err = gradcheck::max_block_error(net, x, y, rng);
      CHECK(err < 1e-3);
    }
  }
}

TEST_CASE("grad: distillation terms match central differences") {
  std::mt19937_64 rng(77);
  using gradcheck::KdTargets;
  for (std::uint64_t inst = 0; inst < 5; ++inst) {
    Network student = NetworkBuilder({6}).dense(5).relu().dense(3).build(3, inst);
    Network teacher = NetworkBuilder({6}).dense(8).relu().dense(3).build(3, 50 + inst);
    Tensor x = gradcheck::random_tensor({5, 6}, rng);
    auto y = gradcheck::random_labels(5, 3, rng);
    auto t = forward(teacher, x);
    TeacherTargets targets{t.logits, t.features};
    KdConfig kd;
    KdTargets ref;
    ref.temperature = kd.temperature;
    ref.kl_weight = kd.kl_weight;
    ref.sp_weight = kd.sp_weight;
    for (std::size_t b = 0; b < 5; ++b) {
      ref.logits.emplace_back(t.logits.row(b).begin(), t.logits.row(b).end());
      ref.features.emplace_back(t.features.row(b).begin(), t.features.row(b).end());
    }
    const double err =
      gradcheck::max_block_error(student, x, y, rng, LossSpec{&kd, &targets}, &ref);
    CHECK(err < 1e-3);
  }
}

TEST_CASE("grad: non-finite loss reports the layer") {
  Network net = with_params(NetworkBuilder({2}).dense(2).build(2, 1), 0,
                            {INFINITY, 0, 0, 1}, {0, 0});
  try {
    grad(net, Tensor({1, 2}, {1, 1}), std::vector<Label>{0});
    FAIL("expected numeric error");
  } catch (const Error &e) {
    CHECK(e.kind() == ErrorKind::Numeric);
    CHECK(std::string(e.what()).find("layer 0") != std::string::npos);
  }
}

TEST_CASE("train: zero learning rate leaves parameters bit-identical") {
  Dataset d = blobs(20, {{-2, -2}, {2, 2}}, 0.5f, 1);
  Network net = NetworkBuilder({2}).dense(4).relu().dense(2).build(2, 3);
  TrainConfig cfg;
  cfg.epochs = 1;
  cfg.batch_size = 8;
  cfg.learning_rate = 0.0;
  auto r = train(net, d, cfg);
  CHECK(r.net == net);
}

TEST_CASE("train: separable blobs reach 98% training accuracy") {
  Dataset d = blobs(100, {{-2, -2}, {2, 2}}, 0.5f, 42);
  REQUIRE(logistic_fit_accuracy(d) >= 0.98);
  TrainConfig cfg;
  cfg.epochs = 50;
  cfg.batch_size = 16;
  cfg.learning_rate = 0.05;
  cfg.seed = 7;
  auto r = train(NetworkBuilder({2}).dense(2).build(2, 1), d, cfg);
  CHECK(evaluate(r.net, d) >= 0.98);
  CHECK(r.history.back().loss <= r.history.front().loss);
}

TEST_CASE("train: same seed gives identical parameters") {
  Dataset d = blobs(30, {{-1, 0}, {1, 0}, {0, 1.5f}}, 0.7f, 5);
  TrainConfig cfg;
  cfg.epochs = 5;
  cfg.batch_size = 10;
  cfg.seed = 99;
  Network init = NetworkBuilder({2}).dense(6).relu().dense(3).build(3, 4);
  auto a = train(init, d, cfg);
  auto b = train(init, d, cfg);
  CHECK(a.net == b.net);
  CHECK(serialize(a.net) == serialize(b.net));
}

TEST_CASE("train: empty dataset and oversized batch are input errors") {
  Network net = NetworkBuilder({2}).dense(2).build(2, 1);
  Dataset empty;
  empty.class_count = 2;
  empty.samples = Tensor();
  TrainConfig cfg;
  CHECK_THROWS_AS(train(net, empty, cfg), Error);
  Dataset d = blobs(2, {{-1, 0}, {1, 0}}, 0.1f, 1);
  cfg.batch_size = 100;
  CHECK_THROWS_AS(train(net, d, cfg), Error);
}

TEST_CASE("distill: zero-weight distillation terms reduce to cross-entropy") {
  Dataset d = blobs(30, {{-1, 0}, {1, 0}, {0, 1.5f}}, 0.7f, 8);
  Network teacher = NetworkBuilder({2}).dense(8).relu().dense(3).build(3, 1);
  Network student = NetworkBuilder({2}).dense(4).relu().dense(3).build(3, 2);
  TrainConfig plain;
  plain.epochs = 4;
  plain.batch_size = 10;
  plain.seed = 3;
  auto ref = train(student, d, plain);

  TrainConfig kd_cfg = plain;
  kd_cfg.kd = KdConfig{KdMode::SimilarityPreserving, 4.0, 0.5, 0.0};
  CHECK(distill(teacher, student, d, kd_cfg).net == ref.net);
  kd_cfg.kd = KdConfig{KdMode::Combined, 4.0, 0.0, 0.0};
  CHECK(distill(teacher, student, d, kd_cfg).net == ref.net);
}

TEST_CASE("distill: student identical to teacher has zero KD term") {
  Network teacher = NetworkBuilder({3}).dense(5).relu().dense(2).build(2, 6);
  std::mt19937_64 rng(1);
  Tensor x = gradcheck::random_tensor({6, 3}, rng);
  auto t = forward(teacher, x);
  CHECK(distillation_kl(t.logits, t.logits, 4.0).value == doctest::Approx(0.0));
  CHECK(sp_kd_loss(t.features, t.features) == 0.0);
}

TEST_CASE("distill: class mismatch is an input error") {
  Dataset d = blobs(10, {{-1, 0}, {1, 0}}, 0.5f, 1);
  Network teacher = NetworkBuilder({2}).dense(3).build(3, 1);
  Network student = NetworkBuilder({2}).dense(2).build(2, 1);
  TrainConfig cfg;
  cfg.batch_size = 4;
  cfg.kd = KdConfig{};
  try {
    distill(teacher, student, d, cfg);
    FAIL("expected input error");
  } catch (const Error &e) {
    CHECK(e.kind() == ErrorKind::Input);
  }
}

TEST_CASE("distill: toy student lands within 5 points of the teacher") {
  Dataset train_set = blobs(80, {{-2, 0}, {2, 0}, {0, 2}, {0, -2}}, 0.8f, 21);
  Dataset test_set = blobs(50, {{-2, 0}, {2, 0}, {0, 2}, {0, -2}}, 0.8f, 22);
  TrainConfig cfg;
  cfg.epochs = 30;
  cfg.batch_size = 16;
  cfg.learning_rate = 0.05;
  cfg.seed = 5;
  auto teacher = train(NetworkBuilder({2}).dense(32).relu().dense(4).build(4, 1),
                       train_set, cfg);
  cfg.kd = KdConfig{};
  auto student = distill(teacher.net,
                         NetworkBuilder({2}).dense(4).relu().dense(4).build(4, 2),
                         train_set, cfg);
  const double ta = evaluate(teacher.net, test_set);
  const double sa = evaluate(student.net, test_set);
  MESSAGE("teacher " << ta << " student " << sa);
  CHECK(ta - sa <= 0.05);
}

TEST_CASE("sp_kd_loss: worked examples and symmetry") {
  Tensor t({2, 2}, {1, 0, 0, 1});
  Tensor s({2, 2}, {1, 0, 1, 0});
  CHECK(sp_kd_loss(t, t) == 0.0);
  // G_t = I; G_s rows (1,1)/sqrt2  =>  (2(1 - 1/sqrt2)^2 + 2 * 1/2) / 4
  CHECK(sp_kd_loss(t, s) == doctest::Approx(1.0 - std::sqrt(2.0) / 2.0).epsilon(1e-7));
  CHECK(sp_kd_loss(t, s) == sp_kd_loss(s, t));

  std::mt19937_64 rng(4);
  for (int i = 0; i < 50; ++i) {
    Tensor a = gradcheck::random_tensor({4, 3}, rng);
    Tensor b = gradcheck::random_tensor({4, 7}, rng);
    const double ab = sp_kd_loss(a, b);
    CHECK(ab >= 0.0);
    CHECK(ab == doctest::Approx(sp_kd_loss(b, a)).epsilon(1e-12));
  }
}

TEST_CASE("sp_kd_loss: zero feature rows normalize to zero rows") {
  Tensor t({2, 2}, {1, 0, 0, 1});
  Tensor s({2, 2}, {0, 0, 0, 1});
  // G_s_hat = [[0,0],[0,1]]  => loss = 1/4
  CHECK(sp_kd_loss(t, s) == doctest::Approx(0.25));
  auto lg = sp_kd_loss_grad(t, s);
  CHECK(lg.value == doctest::Approx(0.25));
  CHECK(lg.grad.all_finite());
}

TEST_CASE("evaluate: constant predictor and recount") {
  Dataset d;
  d.class_count = 3;
  d.samples = Tensor({10, 1}, 1.0f);
  d.labels = {0, 0, 0, 1, 1, 1, 1, 2, 2, 2};
  d.splits.assign(10, Split::Test);
  Network zero = NetworkBuilder({1}).dense(3).build(3, 1);
  for (auto &l : zero.layers()) {
    std::fill(l.weight.data().begin(), l.weight.data().end(), 0.0f);
    std::fill(l.bias.data().begin(), l.bias.data().end(), 0.0f);
  }
  // all logits tie -> class 0
  CHECK(evaluate(zero, d) == doctest::Approx(0.3));
  CHECK(evaluate(zero, concat(d, d)) == evaluate(zero, d));
}

TEST_CASE("evaluate: lookup net memorizes ten samples") {
  Dataset d;
  d.class_count = 10;
  std::vector<float> x(100, 0.0f);
  for (int i = 0; i < 10; ++i) {
    x[i * 10 + i] = 1.0f;
    d.labels.push_back((i * 3) % 10);
  }
  d.samples = Tensor({10, 10}, x);
  d.splits.assign(10, Split::Train);
  Network net = NetworkBuilder({10}).dense(10).build(10, 1);
  auto &l = net.layers()[0];
  std::fill(l.weight.data().begin(), l.weight.data().end(), 0.0f);
  for (int i = 0; i < 10; ++i)
    l.weight[d.labels[i] * 10 + i] = 1.0f;
  CHECK(evaluate(net, d) == 1.0);
}

TEST_CASE("evaluate: matches a per-sample recount") {
  Dataset d = blobs(25, {{-1, 0}, {1, 0}, {0, 1}}, 1.0f, 8);
  Network net = NetworkBuilder({2}).dense(5).relu().dense(3).build(3, 12);
  std::size_t ok = 0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    std::vector<std::size_t> one{i};
    auto logits = forward(net, d.batch(one)).logits;
    ok += argmax(logits.row(0)) == d.labels[i];
  }
  CHECK(evaluate(net, d) == static_cast<double>(ok) / d.size());
}

TEST_CASE("serialize: round trip is bit-exact") {
  std::mt19937_64 rng(5);
  for (const Network &net : gradcheck::fixture_networks(31)) {
    auto bytes = serialize(net);
    CHECK(std::string(bytes.begin(), bytes.begin() + 4) == "ECNN");
    Network back = deserialize(bytes);
    CHECK(back == net);
    CHECK(serialize(back) == bytes);
  }
}

TEST_CASE("serialize: corrupt input reports the offset") {
  auto bytes = serialize(NetworkBuilder({3}).dense(2).build(2, 1));
  auto truncated = bytes;
  truncated.resize(bytes.size() - 3);
  try {
    deserialize(truncated);
    FAIL("expected parse error");
  } catch (const Error &e) {
    CHECK(e.kind() == ErrorKind::Parse);
    CHECK(std::string(e.what()).find("offset") != std::string::npos);
  }
  bytes[0] = 'X';
  CHECK_THROWS_AS(deserialize(bytes), Error);
}
