// SPDX-License-Identifier: Apache-2.0
#include <edgecloud/nn/serialize.hpp>

#include <edgecloud/bytes.hpp>

namespace edgecloud::nn {

std::vector<std::uint8_t> serialize(const Network &net) {
  ByteWriter w;
  w.bytes("ECNN");
  w.u16(kNetworkFormatVersion);
  w.u32(static_cast<std::uint32_t>(net.class_count()));
  w.u8(static_cast<std::uint8_t>(net.input_shape().size()));
  for (auto d : net.input_shape())
    w.u32(static_cast<std::uint32_t>(d));
  w.u32(static_cast<std::uint32_t>(net.layer_count()));
  for (const Layer &l : net.layers()) {
    w.u8(static_cast<std::uint8_t>(l.kind));
    w.u32(static_cast<std::uint32_t>(l.kernel));
    w.u32(static_cast<std::uint32_t>(l.stride));
    w.u32(static_cast<std::uint32_t>(l.padding));
    w.u32(static_cast<std::uint32_t>(l.outputs));
    if (l.parametric()) {
      w.u32(static_cast<std::uint32_t>(l.weight.size()));
      w.f32s(l.weight.data());
      w.u32(static_cast<std::uint32_t>(l.bias.size()));
      w.f32s(l.bias.data());
    }
  }
  return w.take();
}

Network deserialize(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes, ErrorKind::Parse, "network file");
  r.expect_magic("ECNN");
  const auto version_at = r.offset();
  if (r.u16() != kNetworkFormatVersion)
    r.error_at(version_at, "unsupported network format version");
  const std::size_t class_count = r.u32();
  const std::size_t rank = r.u8();
  Shape input(rank);
  for (auto &d : input)
    d = r.u32();
  const std::size_t count = r.u32();

  NetworkBuilder builder(input);
  std::vector<std::pair<Tensor, Tensor>> params;
  for (std::size_t i = 0; i < count; ++i) {
    const auto at = r.offset();
    const auto kind_raw = r.u8();
    if (kind_raw >= kLayerKindCount)
      r.error_at(at, "unknown layer kind " + std::to_string(kind_raw));
    const auto kind = static_cast<LayerKind>(kind_raw);
    const std::size_t k = r.u32(), d = r.u32(), p = r.u32(), o = r.u32();
    if (!builder.can_add(kind, k, d, p, o))
      r.error_at(at, "layer " + std::to_string(i) + " does not fit shape " +
                         shape_string(builder.current_shape()));
    builder.add(kind, k, d, p, o);
    if (kind == LayerKind::Conv || kind == LayerKind::Dense) {
      const Layer &l = builder.back();
      const Shape wdims = kind == LayerKind::Conv
                            ? Shape{o, l.in_shape[0], k, k}
                            : Shape{o, l.in_shape[0]};
      const auto wat = r.offset();
      if (r.u32() != element_count(wdims))
        r.error_at(wat, "weight count mismatch for layer " + std::to_string(i));
      Tensor weight(wdims, r.f32s(element_count(wdims)));
      const auto bat = r.offset();
      if (r.u32() != o)
        r.error_at(bat, "bias count mismatch for layer " + std::to_string(i));
      Tensor bias(Shape{o}, r.f32s(o));
      params.emplace_back(std::move(weight), std::move(bias));
    } else {
      params.emplace_back();
    }
  }
  r.expect_end();

  Network shell = builder.build(class_count, 0);
  std::vector<Layer> layers(shell.layers().begin(), shell.layers().end());
  for (std::size_t i = 0; i < layers.size(); ++i) {
    layers[i].weight = std::move(params[i].first);
    layers[i].bias = std::move(params[i].second);
  }
  return Network(input, std::move(layers), class_count);
}

void save_network(const Network &net, const std::string &path) {
  write_file(path, serialize(net));
}

Network load_network(const std::string &path) {
  return deserialize(read_file(path));
}

} // namespace edgecloud::nn
