// SPDX-License-Identifier: Apache-2.0
#include <edgecloud/nn/train.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include <edgecloud/error.hpp>
#include <edgecloud/nn/loss.hpp>

namespace edgecloud::nn {

namespace {

constexpr std::size_t kEvalChunk = 256;

[[noreturn]] void non_finite(const Network &net, const ForwardPass &pass,
                             const std::string &what) {
  for (std::size_t i = 1; i < pass.activations.size(); ++i)
    if (!pass.activations[i].all_finite())
      fail(ErrorKind::Numeric, what + ": first non-finite activation at layer " +
                                   std::to_string(i - 1) + " (" +
                                   to_string(net.layers()[i - 1].kind) + ")");
  fail(ErrorKind::Numeric, what + " at loss of layer " +
                               std::to_string(net.layer_count() - 1));
}

Tensor gather_rows(const Tensor &all, std::span<const std::size_t> idx) {
  Shape dims = all.dims();
  dims[0] = idx.size();
  const std::size_t n = all.row_size();
  std::vector<float> values(idx.size() * n);
  for (std::size_t i = 0; i < idx.size(); ++i) {
    auto r = all.row(idx[i]);
    std::copy(r.begin(), r.end(), values.begin() + i * n);
  }
  return Tensor(std::move(dims), std::move(values));
}

Gradients grad_on_pass(const Network &net, const ForwardPass &pass,
                       std::span<const Label> labels, const LossSpec &loss);

TrainResult fit(Network net, const Dataset &data, const TrainConfig &cfg,
                const TeacherTargets *targets) {
  cfg.validate();
  data.validate();
  if (data.empty())
    fail(ErrorKind::Input, "training dataset is empty");
  if (cfg.batch_size > data.size())
    fail(ErrorKind::Input, "batch_size " + std::to_string(cfg.batch_size) +
                               " exceeds dataset size " +
                               std::to_string(data.size()));
  if (data.class_count != net.class_count())
    fail(ErrorKind::Input, "dataset has " + std::to_string(data.class_count) +
                               " classes, network " +
                               std::to_string(net.class_count()));

  TrainResult result{std::move(net), {}};
  std::mt19937_64 rng(cfg.seed);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  const KdConfig *kd = targets ? &*cfg.kd : nullptr;

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    std::size_t correct = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      std::span<const std::size_t> idx(order.data() + start, end - start);
      Tensor x = data.batch(idx);
      std::vector<Label> y;
      y.reserve(idx.size());
      for (auto i : idx)
        y.push_back(data.labels[i]);

      TeacherTargets batch_targets;
      LossSpec spec;
      if (kd) {
        batch_targets = {gather_rows(targets->logits, idx),
                         gather_rows(targets->features, idx)};
        spec = {kd, &batch_targets};
      }
      ForwardPass pass = forward_pass(result.net, x);
      for (std::size_t b = 0; b < y.size(); ++b)
        if (argmax(pass.logits().row(b)) == y[b])
          ++correct;
      Gradients g = grad_on_pass(result.net, pass, y, spec);
      loss_sum += g.loss * static_cast<double>(idx.size());
      sgd_step(result.net, g, cfg.learning_rate);
    }
    result.history.push_back(
      {epoch, loss_sum / static_cast<double>(data.size()),
       static_cast<double>(correct) / static_cast<double>(data.size())});
    if (cfg.on_epoch)
      cfg.on_epoch(result.history.back());
  }
  return result;
}

} // namespace

void KdConfig::validate() const {
  if (!(temperature > 0.0))
    fail(ErrorKind::Config, "kd temperature must be positive");
  if (!(kl_weight >= 0.0) || !(sp_weight >= 0.0))
    fail(ErrorKind::Config, "kd weights must be nonnegative");
}

void TrainConfig::validate() const {
  if (epochs == 0)
    fail(ErrorKind::Config, "epochs must be positive");
  if (batch_size == 0)
    fail(ErrorKind::Config, "batch_size must be positive");
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate))
    fail(ErrorKind::Config, "learning_rate must be finite and nonnegative");
  if (kd)
    kd->validate();
}

Gradients grad(const Network &net, const Tensor &batch,
               std::span<const Label> labels, const LossSpec &loss) {
  return grad_on_pass(net, forward_pass(net, batch), labels, loss);
}

namespace {

Gradients grad_on_pass(const Network &net, const ForwardPass &pass,
                       std::span<const Label> labels, const LossSpec &loss) {
  LossGrad ce = softmax_cross_entropy(pass.logits(), labels);
  double total = ce.value;
  Tensor d_logits = std::move(ce.grad);
  Tensor d_feats;
  bool use_feats = false;

  if (loss.kd != nullptr) {
    if (loss.teacher == nullptr)
      fail(ErrorKind::Input, "distillation loss needs teacher targets");
    const KdConfig &kd = *loss.kd;
    const bool kl = kd.mode != KdMode::SimilarityPreserving && kd.kl_weight > 0.0;
    const bool sp = kd.mode != KdMode::LogitKl && kd.sp_weight > 0.0;
    if (kl) {
      LossGrad term =
        distillation_kl(pass.logits(), loss.teacher->logits, kd.temperature);
      total += kd.kl_weight * term.value;
      auto dst = d_logits.data();
      auto src = term.grad.data();
      for (std::size_t i = 0; i < dst.size(); ++i)
        dst[i] += static_cast<float>(kd.kl_weight * src[i]);
    }
    if (sp) {
      LossGrad term = sp_kd_loss_grad(loss.teacher->features, pass.features());
      total += kd.sp_weight * term.value;
      d_feats = std::move(term.grad);
      for (auto &v : d_feats.data())
        v = static_cast<float>(kd.sp_weight * v);
      use_feats = true;
    }
  }
  if (!std::isfinite(total))
    non_finite(net, pass, "non-finite loss");

  Gradients g = backward(net, pass, d_logits, use_feats ? &d_feats : nullptr);
  g.loss = total;
  for (std::size_t i = 0; i < g.layers.size(); ++i)
    if (!g.layers[i].weight.all_finite() || !g.layers[i].bias.all_finite())
      fail(ErrorKind::Numeric,
           "non-finite gradient at layer " + std::to_string(i) + " (" +
             to_string(net.layers()[i].kind) + ")");
  return g;
}

} // namespace

void sgd_step(Network &net, const Gradients &grads, double learning_rate) {
  auto layers = net.layers();
  for (std::size_t i = 0; i < layers.size(); ++i) {
    if (!layers[i].parametric())
      continue;
    auto update = [learning_rate](std::span<float> w, std::span<const float> g) {
      for (std::size_t k = 0; k < w.size(); ++k)
        w[k] = static_cast<float>(w[k] - learning_rate * g[k]);
    };
    update(layers[i].weight.data(), grads.layers[i].weight.data());
    update(layers[i].bias.data(), grads.layers[i].bias.data());
  }
}

TrainResult train(Network net, const Dataset &data, const TrainConfig &cfg) {
  return fit(std::move(net), data, cfg, nullptr);
}

TeacherTargets teacher_targets(const Network &teacher, const Dataset &data) {
  std::vector<float> logits, feats;
  std::size_t feat_width = 0;
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < data.size(); start += kEvalChunk) {
    const std::size_t end = std::min(data.size(), start + kEvalChunk);
    idx.resize(end - start);
    std::iota(idx.begin(), idx.end(), start);
    ForwardResult r = forward(teacher, data.batch(idx));
    logits.insert(logits.end(), r.logits.data().begin(), r.logits.data().end());
    feats.insert(feats.end(), r.features.data().begin(), r.features.data().end());
    feat_width = r.features.row_size();
  }
  return {Tensor({data.size(), teacher.class_count()}, std::move(logits)),
          Tensor({data.size(), feat_width}, std::move(feats))};
}

TrainResult distill(const Network &teacher, Network student,
                    const Dataset &data, const TrainConfig &cfg) {
  if (!cfg.kd)
    fail(ErrorKind::Config, "distill requires a kd configuration");
  if (teacher.class_count() != student.class_count())
    fail(ErrorKind::Input, "teacher has " +
                               std::to_string(teacher.class_count()) +
                               " classes, student " +
                               std::to_string(student.class_count()));
  if (teacher.input_shape() != student.input_shape())
    fail(ErrorKind::Input, "teacher input " +
                               shape_string(teacher.input_shape()) +
                               " differs from student input " +
                               shape_string(student.input_shape()));
  if (data.empty())
    fail(ErrorKind::Input, "training dataset is empty");
  TeacherTargets targets = teacher_targets(teacher, data);
  return fit(std::move(student), data, cfg, &targets);
}

std::vector<Label> predict(const Network &net, const Tensor &batch) {
  Tensor logits = forward(net, batch).logits;
  std::vector<Label> out(logits.rows());
  for (std::size_t b = 0; b < out.size(); ++b)
    out[b] = static_cast<Label>(argmax(logits.row(b)));
  return out;
}

double evaluate(const Network &net, const Dataset &data) {
  if (data.empty())
    fail(ErrorKind::Input, "cannot evaluate on an empty dataset");
  std::size_t correct = 0;
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < data.size(); start += kEvalChunk) {
    const std::size_t end = std::min(data.size(), start + kEvalChunk);
    idx.resize(end - start);
    std::iota(idx.begin(), idx.end(), start);
    auto pred = predict(net, data.batch(idx));
    for (std::size_t i = 0; i < pred.size(); ++i)
      if (pred[i] == data.labels[start + i])
        ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

} // namespace edgecloud::nn
