// SPDX-License-Identifier: Apache-2.0
#include <edgecloud/nn/network.hpp>

#include <cmath>
#include <random>

#include <edgecloud/error.hpp>
#include <edgecloud/seed.hpp>

namespace edgecloud::nn {

const char *to_string(LayerKind kind) noexcept {
  switch (kind) {
  case LayerKind::Conv:
    return "conv";
  case LayerKind::Dense:
    return "dense";
  case LayerKind::Pool:
    return "pool";
  case LayerKind::Relu:
    return "relu";
  case LayerKind::Flatten:
    return "flatten";
  }
  return "?";
}

std::optional<Shape> layer_output_shape(LayerKind kind, const Shape &in,
                                        std::size_t kernel, std::size_t stride,
                                        std::size_t padding,
                                        std::size_t outputs) {
  switch (kind) {
  case LayerKind::Conv: {
    if (in.size() != 3 || kernel == 0 || stride == 0 || outputs == 0)
      return std::nullopt;
    const std::size_t h = in[1] + 2 * padding, w = in[2] + 2 * padding;
    if (h < kernel || w < kernel)
      return std::nullopt;
    return Shape{outputs, (h - kernel) / stride + 1, (w - kernel) / stride + 1};
  }
  case LayerKind::Dense:
    if (in.size() != 1 || outputs == 0)
      return std::nullopt;
    return Shape{outputs};
  case LayerKind::Pool:
    if (in.size() != 3 || in[1] < 2 || in[2] < 2)
      return std::nullopt;
    return Shape{in[0], in[1] / 2, in[2] / 2};
  case LayerKind::Relu:
    if (in.empty())
      return std::nullopt;
    return in;
  case LayerKind::Flatten:
    if (in.empty())
      return std::nullopt;
    return Shape{element_count(in)};
  }
  return std::nullopt;
}

Network::Network(Shape input_shape, std::vector<Layer> layers,
                 std::size_t class_count)
  : input_shape_(std::move(input_shape)), layers_(std::move(layers)),
    class_count_(class_count) {
  if (layers_.empty())
    fail(ErrorKind::Shape, "network has no layers");
  if (class_count_ == 0)
    fail(ErrorKind::Shape, "class_count must be positive");
  Shape shape = input_shape_;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const Layer &l = layers_[i];
    auto out = layer_output_shape(l.kind, shape, l.kernel, l.stride, l.padding,
                                  l.outputs);
    if (!out || l.in_shape != shape || l.out_shape != *out)
      fail(ErrorKind::Shape, "layer " + std::to_string(i) + " (" +
                                 to_string(l.kind) + ") does not accept " +
                                 shape_string(shape));
    if (l.kind == LayerKind::Conv) {
      if (l.weight.dims() != Shape{l.outputs, shape[0], l.kernel, l.kernel} ||
          l.bias.dims() != Shape{l.outputs})
        fail(ErrorKind::Shape,
             "layer " + std::to_string(i) + " conv parameter dims mismatch");
    } else if (l.kind == LayerKind::Dense) {
      if (l.weight.dims() != Shape{l.outputs, shape[0]} ||
          l.bias.dims() != Shape{l.outputs})
        fail(ErrorKind::Shape,
             "layer " + std::to_string(i) + " dense parameter dims mismatch");
    } else if (!l.weight.empty() || !l.bias.empty()) {
      fail(ErrorKind::Shape, "layer " + std::to_string(i) + " (" +
                                 to_string(l.kind) + ") carries parameters");
    }
    shape = *out;
  }
  if (shape != Shape{class_count_})
    fail(ErrorKind::Shape, "network output " + shape_string(shape) +
                               " does not match class_count " +
                               std::to_string(class_count_));
}

std::size_t Network::param_count() const noexcept {
  std::size_t n = 0;
  for (const auto &l : layers_)
    n += l.param_count();
  return n;
}

std::size_t Network::macs_per_sample() const noexcept {
  std::size_t n = 0;
  for (const auto &l : layers_) {
    if (l.kind == LayerKind::Conv)
      n += element_count(l.out_shape) * l.in_shape[0] * l.kernel * l.kernel;
    else if (l.kind == LayerKind::Dense)
      n += l.outputs * l.in_shape[0];
  }
  return n;
}

NetworkBuilder::NetworkBuilder(Shape input_shape)
  : input_shape_(input_shape), shape_(std::move(input_shape)) {
  if (shape_.size() != 1 && shape_.size() != 3)
    fail(ErrorKind::Shape,
         "input shape must be [n] or [c,h,w], got " + shape_string(shape_));
  for (auto d : shape_)
    if (d == 0)
      fail(ErrorKind::Shape, "input dims must be positive");
}

bool NetworkBuilder::can_add(LayerKind kind, std::size_t kernel,
                             std::size_t stride, std::size_t padding,
                             std::size_t outputs) const {
  return layer_output_shape(kind, shape_, kernel, stride, padding, outputs)
    .has_value();
}

NetworkBuilder &NetworkBuilder::add(LayerKind kind, std::size_t kernel,
                                    std::size_t stride, std::size_t padding,
                                    std::size_t outputs) {
  auto out = layer_output_shape(kind, shape_, kernel, stride, padding, outputs);
  if (!out)
    fail(ErrorKind::Shape, std::string(to_string(kind)) + " layer (k=" +
                               std::to_string(kernel) +
                               " d=" + std::to_string(stride) +
                               " p=" + std::to_string(padding) +
                               " o=" + std::to_string(outputs) +
                               ") cannot follow " + shape_string(shape_));
  Layer l;
  l.kind = kind;
  l.in_shape = shape_;
  l.out_shape = *out;
  switch (kind) {
  case LayerKind::Conv:
    l.kernel = kernel;
    l.stride = stride;
    l.padding = padding;
    l.outputs = outputs;
    break;
  case LayerKind::Dense:
    l.outputs = outputs;
    break;
  case LayerKind::Pool:
    l.kernel = 2;
    l.stride = 2;
    break;
  default:
    break;
  }
  layers_.push_back(std::move(l));
  shape_ = *out;
  return *this;
}

NetworkBuilder &NetworkBuilder::conv(std::size_t outputs, std::size_t kernel,
                                     std::size_t stride, std::size_t padding) {
  return add(LayerKind::Conv, kernel, stride, padding, outputs);
}
NetworkBuilder &NetworkBuilder::dense(std::size_t outputs) {
  return add(LayerKind::Dense, 0, 0, 0, outputs);
}
NetworkBuilder &NetworkBuilder::pool() { return add(LayerKind::Pool, 2, 2, 0, 0); }
NetworkBuilder &NetworkBuilder::relu() { return add(LayerKind::Relu, 0, 0, 0, 0); }
NetworkBuilder &NetworkBuilder::flatten() {
  return add(LayerKind::Flatten, 0, 0, 0, 0);
}

Network NetworkBuilder::build(std::size_t class_count,
                              std::uint64_t seed) const {
  std::vector<Layer> layers = layers_;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    Layer &l = layers[i];
    if (!l.parametric())
      continue;
    std::size_t fan_in, fan_out;
    Shape wdims;
    if (l.kind == LayerKind::Conv) {
      const std::size_t area = l.kernel * l.kernel;
      fan_in = l.in_shape[0] * area;
      fan_out = l.outputs * area;
      wdims = {l.outputs, l.in_shape[0], l.kernel, l.kernel};
    } else {
      fan_in = l.in_shape[0];
      fan_out = l.outputs;
      wdims = {l.outputs, l.in_shape[0]};
    }
    const float bound =
      static_cast<float>(std::sqrt(6.0 / static_cast<double>(fan_in + fan_out)));
    std::mt19937_64 rng(derive_seed(seed, i));
    std::uniform_real_distribution<float> dist(-bound, bound);
    l.weight = Tensor(wdims);
    for (auto &w : l.weight.data())
      w = dist(rng);
    l.bias = Tensor(Shape{l.outputs});
  }
  return Network(input_shape_, std::move(layers), class_count);
}

Tensor ForwardPass::features() const {
  const Tensor &in = activations[activations.size() - 2];
  return in.reshaped({in.rows(), in.row_size()});
}

namespace {

Shape batched(std::size_t batch, const Shape &sample) {
  Shape s{batch};
  s.insert(s.end(), sample.begin(), sample.end());
  return s;
}

Tensor conv_forward(const Layer &l, const Tensor &x) {
  const std::size_t B = x.rows();
  const std::size_t C = l.in_shape[0], H = l.in_shape[1], W = l.in_shape[2];
  const std::size_t O = l.outputs, OH = l.out_shape[1], OW = l.out_shape[2];
  const std::size_t K = l.kernel, S = l.stride;
  const auto P = static_cast<std::ptrdiff_t>(l.padding);
  Tensor y(batched(B, l.out_shape));
  const float *wp = l.weight.data().data();
  for (std::size_t b = 0; b < B; ++b) {
    const float *xb = x.row(b).data();
    float *yb = y.row(b).data();
    for (std::size_t o = 0; o < O; ++o)
      for (std::size_t oy = 0; oy < OH; ++oy)
        for (std::size_t ox = 0; ox < OW; ++ox) {
          double acc = l.bias[o];
          for (std::size_t c = 0; c < C; ++c)
            for (std::size_t ky = 0; ky < K; ++ky) {
              const auto iy = static_cast<std::ptrdiff_t>(oy * S + ky) - P;
              if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(H))
                continue;
              for (std::size_t kx = 0; kx < K; ++kx) {
                const auto ix = static_cast<std::ptrdiff_t>(ox * S + kx) - P;
                if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(W))
                  continue;
                acc += static_cast<double>(wp[((o * C + c) * K + ky) * K + kx]) *
                       xb[(c * H + iy) * W + ix];
              }
            }
          yb[(o * OH + oy) * OW + ox] = static_cast<float>(acc);
        }
  }
  return y;
}

Tensor dense_forward(const Layer &l, const Tensor &x) {
  const std::size_t B = x.rows(), N = l.in_shape[0], O = l.outputs;
  Tensor y(Shape{B, O});
  const float *wp = l.weight.data().data();
  for (std::size_t b = 0; b < B; ++b) {
    const float *xb = x.row(b).data();
    for (std::size_t o = 0; o < O; ++o) {
      double acc = l.bias[o];
      const float *wr = wp + o * N;
      for (std::size_t i = 0; i < N; ++i)
        acc += static_cast<double>(wr[i]) * xb[i];
      y.row(b)[o] = static_cast<float>(acc);
    }
  }
  return y;
}

Tensor pool_forward(const Layer &l, const Tensor &x) {
  const std::size_t B = x.rows();
  const std::size_t C = l.in_shape[0], H = l.in_shape[1], W = l.in_shape[2];
  const std::size_t OH = l.out_shape[1], OW = l.out_shape[2];
  Tensor y(batched(B, l.out_shape));
  for (std::size_t b = 0; b < B; ++b) {
    const float *xb = x.row(b).data();
    float *yb = y.row(b).data();
    for (std::size_t c = 0; c < C; ++c)
      for (std::size_t oy = 0; oy < OH; ++oy)
        for (std::size_t ox = 0; ox < OW; ++ox) {
          const float *base = xb + (c * H + 2 * oy) * W + 2 * ox;
          yb[(c * OH + oy) * OW + ox] =
            std::max(std::max(base[0], base[1]), std::max(base[W], base[W + 1]));
        }
  }
  return y;
}

} // namespace

ForwardPass forward_pass(const Network &net, const Tensor &batch) {
  const Shape &in = net.input_shape();
  if (batch.dims().size() != in.size() + 1 ||
      !std::equal(in.begin(), in.end(), batch.dims().begin() + 1))
    fail(ErrorKind::Shape, "batch " + shape_string(batch.dims()) +
                               " does not match network input " +
                               shape_string(in));
  ForwardPass pass;
  pass.activations.reserve(net.layer_count() + 1);
  pass.activations.push_back(batch);
  for (const Layer &l : net.layers()) {
    const Tensor &x = pass.activations.back();
    switch (l.kind) {
    case LayerKind::Conv:
      pass.activations.push_back(conv_forward(l, x));
      break;
    case LayerKind::Dense:
      pass.activations.push_back(dense_forward(l, x));
      break;
    case LayerKind::Pool:
      pass.activations.push_back(pool_forward(l, x));
      break;
    case LayerKind::Relu: {
      Tensor y = x;
      for (auto &v : y.data())
        v = v > 0.0f ? v : 0.0f;
      pass.activations.push_back(std::move(y));
      break;
    }
    case LayerKind::Flatten:
      pass.activations.push_back(x.reshaped(batched(x.rows(), l.out_shape)));
      break;
    }
  }
  return pass;
}

ForwardResult forward(const Network &net, const Tensor &batch) {
  ForwardPass pass = forward_pass(net, batch);
  Tensor features = pass.features();
  return {std::move(pass.activations.back()), std::move(features)};
}

Gradients backward(const Network &net, const ForwardPass &pass,
                   const Tensor &d_logits, const Tensor *d_features) {
  const auto layers = net.layers();
  const std::size_t L = layers.size();
  if (d_logits.dims() != pass.logits().dims())
    fail(ErrorKind::Shape, "d_logits " + shape_string(d_logits.dims()) +
                               " does not match logits " +
                               shape_string(pass.logits().dims()));
  Gradients grads;
  grads.layers.resize(L);
  Tensor dy = d_logits;
  for (std::size_t li = L; li-- > 0;) {
    const Layer &l = layers[li];
    const Tensor &x = pass.activations[li];
    const std::size_t B = x.rows();
    Tensor dx(x.dims());
    switch (l.kind) {
    case LayerKind::Dense: {
      const std::size_t N = l.in_shape[0], O = l.outputs;
      std::vector<double> dw(O * N, 0.0), db(O, 0.0);
      const float *wp = l.weight.data().data();
      for (std::size_t b = 0; b < B; ++b) {
        const float *xb = x.row(b).data();
        const float *gb = dy.row(b).data();
        float *dxb = dx.row(b).data();
        for (std::size_t o = 0; o < O; ++o) {
          const double g = gb[o];
          db[o] += g;
          for (std::size_t i = 0; i < N; ++i)
            dw[o * N + i] += g * xb[i];
        }
        for (std::size_t i = 0; i < N; ++i) {
          double acc = 0.0;
          for (std::size_t o = 0; o < O; ++o)
            acc += static_cast<double>(wp[o * N + i]) * gb[o];
          dxb[i] = static_cast<float>(acc);
        }
      }
      grads.layers[li].weight =
        Tensor(l.weight.dims(), std::vector<float>(dw.begin(), dw.end()));
      grads.layers[li].bias =
        Tensor(l.bias.dims(), std::vector<float>(db.begin(), db.end()));
      break;
    }
    case LayerKind::Conv: {
      const std::size_t C = l.in_shape[0], H = l.in_shape[1], W = l.in_shape[2];
      const std::size_t O = l.outputs, OH = l.out_shape[1], OW = l.out_shape[2];
      const std::size_t K = l.kernel, S = l.stride;
      const auto P = static_cast<std::ptrdiff_t>(l.padding);
      std::vector<double> dw(l.weight.size(), 0.0), db(O, 0.0);
      std::vector<double> dxs(C * H * W);
      const float *wp = l.weight.data().data();
      for (std::size_t b = 0; b < B; ++b) {
        const float *xb = x.row(b).data();
        const float *gb = dy.row(b).data();
        std::fill(dxs.begin(), dxs.end(), 0.0);
        for (std::size_t o = 0; o < O; ++o)
          for (std::size_t oy = 0; oy < OH; ++oy)
            for (std::size_t ox = 0; ox < OW; ++ox) {
              const double g = gb[(o * OH + oy) * OW + ox];
              if (g == 0.0)
                continue;
              db[o] += g;
              for (std::size_t c = 0; c < C; ++c)
                for (std::size_t ky = 0; ky < K; ++ky) {
                  const auto iy = static_cast<std::ptrdiff_t>(oy * S + ky) - P;
                  if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(H))
                    continue;
                  for (std::size_t kx = 0; kx < K; ++kx) {
                    const auto ix = static_cast<std::ptrdiff_t>(ox * S + kx) - P;
                    if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(W))
                      continue;
                    const std::size_t wi = ((o * C + c) * K + ky) * K + kx;
                    const std::size_t xi = (c * H + iy) * W + ix;
                    dw[wi] += g * xb[xi];
                    dxs[xi] += g * wp[wi];
                  }
                }
            }
        float *dxb = dx.row(b).data();
        for (std::size_t i = 0; i < dxs.size(); ++i)
          dxb[i] = static_cast<float>(dxs[i]);
      }
      grads.layers[li].weight =
        Tensor(l.weight.dims(), std::vector<float>(dw.begin(), dw.end()));
      grads.layers[li].bias =
        Tensor(l.bias.dims(), std::vector<float>(db.begin(), db.end()));
      break;
    }
    case LayerKind::Pool: {
      const std::size_t C = l.in_shape[0], H = l.in_shape[1], W = l.in_shape[2];
      const std::size_t OH = l.out_shape[1], OW = l.out_shape[2];
      for (std::size_t b = 0; b < B; ++b) {
        const float *xb = x.row(b).data();
        const float *gb = dy.row(b).data();
        float *dxb = dx.row(b).data();
        for (std::size_t c = 0; c < C; ++c)
          for (std::size_t oy = 0; oy < OH; ++oy)
            for (std::size_t ox = 0; ox < OW; ++ox) {
              // first maximum in row-major window order receives the gradient
              const std::size_t base = (c * H + 2 * oy) * W + 2 * ox;
              const std::size_t cand[4] = {base, base + 1, base + W, base + W + 1};
              std::size_t best = cand[0];
              for (std::size_t k = 1; k < 4; ++k)
                if (xb[cand[k]] > xb[best])
                  best = cand[k];
              dxb[best] += gb[(c * OH + oy) * OW + ox];
            }
      }
      break;
    }
    case LayerKind::Relu: {
      auto xs = x.data();
      auto gs = dy.data();
      auto out = dx.data();
      for (std::size_t i = 0; i < xs.size(); ++i)
        out[i] = xs[i] > 0.0f ? gs[i] : 0.0f;
      break;
    }
    case LayerKind::Flatten:
      dx = dy.reshaped(x.dims());
      break;
    }
    if (li == L - 1 && d_features != nullptr) {
      if (d_features->size() != dx.size())
        fail(ErrorKind::Shape, "d_features " +
                                   shape_string(d_features->dims()) +
                                   " does not match features of " +
                                   shape_string(dx.dims()));
      auto out = dx.data();
      auto add = d_features->data();
      for (std::size_t i = 0; i < out.size(); ++i)
        out[i] += add[i];
    }
    dy = std::move(dx);
  }
  return grads;
}

std::size_t argmax(std::span<const float> values) noexcept {
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i)
    if (values[i] > values[best])
      best = i;
  return best;
}

} // namespace edgecloud::nn
