// SPDX-License-Identifier: Apache-2.0
#include <edgecloud/bytes.hpp>
#include <edgecloud/error.hpp>
#include <edgecloud/gate/gate.hpp>

namespace edgecloud::gate {

namespace {

constexpr std::uint16_t kVersion = 1;

void put_f64s(ByteWriter &w, std::span<const double> v) {
  for (double x : v)
    w.f64(x);
}

std::vector<double> get_f64s(ByteReader &r, std::size_t n) {
  if (n > r.remaining() / 8)
    r.error_at(r.offset(), "truncated: need " + std::to_string(n * 8) + " bytes");
  std::vector<double> v(n);
  for (auto &x : v)
    x = r.f64();
  return v;
}

GateLabel get_label(ByteReader &r) {
  const std::size_t at = r.offset();
  const auto v = r.u8();
  if (v > 1)
    r.error_at(at, "bad label " + std::to_string(v));
  return static_cast<GateLabel>(v);
}

} // namespace

std::vector<std::uint8_t> serialize_gate(const GateModel &gate) {
  if (!gate.trained())
    fail(ErrorKind::State, "cannot serialize an untrained gate");
  ByteWriter w;
  w.bytes("ECGT");
  w.u16(kVersion);
  w.u8(static_cast<std::uint8_t>(gate.kind));
  w.u32(static_cast<std::uint32_t>(gate.width));
  if (const auto *svm = std::get_if<LinearSvm>(&gate.impl)) {
    put_f64s(w, svm->mean);
    put_f64s(w, svm->scale);
    put_f64s(w, svm->w);
    w.f64(svm->b);
  } else if (const auto *knn = std::get_if<Knn>(&gate.impl)) {
    w.u32(static_cast<std::uint32_t>(knn->k));
    w.u32(static_cast<std::uint32_t>(knn->refs.size()));
    for (std::size_t i = 0; i < knn->refs.size(); ++i) {
      w.u8(static_cast<std::uint8_t>(knn->labels[i]));
      put_f64s(w, knn->refs[i]);
    }
  } else {
    const auto &forest = std::get<RandomForest>(gate.impl);
    w.u32(static_cast<std::uint32_t>(forest.trees.size()));
    for (const auto &t : forest.trees) {
      w.u32(static_cast<std::uint32_t>(t.nodes.size()));
      for (const auto &n : t.nodes) {
        w.u32(static_cast<std::uint32_t>(n.feature));
        w.f64(n.threshold);
        w.u32(n.left);
        w.u32(n.right);
        w.f64(n.p_normal);
      }
    }
  }
  return w.take();
}

GateModel deserialize_gate(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes, ErrorKind::Parse, "gate");
  r.expect_magic("ECGT");
  const std::size_t version_at = r.offset();
  if (const auto v = r.u16(); v != kVersion)
    r.error_at(version_at, "unsupported version " + std::to_string(v));
  const std::size_t kind_at = r.offset();
  const auto kind = r.u8();
  if (kind > 2)
    r.error_at(kind_at, "unknown gate kind " + std::to_string(kind));
  GateModel m;
  m.kind = static_cast<GateKind>(kind);
  m.width = r.u32();
  if (m.width == 0)
    r.error_at(kind_at + 1, "zero feature width");
  switch (m.kind) {
  case GateKind::LinearSvm: {
    LinearSvm s;
    s.mean = get_f64s(r, m.width);
    s.scale = get_f64s(r, m.width);
    s.w = get_f64s(r, m.width);
    s.b = r.f64();
    m.impl = std::move(s);
    break;
  }
  case GateKind::Knn: {
    Knn k;
    const std::size_t k_at = r.offset();
    k.k = r.u32();
    if (k.k == 0)
      r.error_at(k_at, "knn k must be positive");
    const std::size_t count_at = r.offset();
    const std::size_t n = r.u32();
    if (n == 0 || n > r.remaining() / (1 + 8 * m.width))
      r.error_at(count_at, "bad reference count " + std::to_string(n));
    for (std::size_t i = 0; i < n; ++i) {
      k.labels.push_back(get_label(r));
      k.refs.push_back(get_f64s(r, m.width));
    }
    m.impl = std::move(k);
    break;
  }
  case GateKind::RandomForest: {
    RandomForest f;
    const std::size_t trees_at = r.offset();
    const std::size_t trees = r.u32();
    if (trees == 0)
      r.error_at(trees_at, "forest has no trees");
    for (std::size_t t = 0; t < trees; ++t) {
      DecisionTree tree;
      const std::size_t nodes_at = r.offset();
      const std::size_t nodes = r.u32();
      if (nodes == 0 || nodes > r.remaining() / 28)
        r.error_at(nodes_at, "bad node count " + std::to_string(nodes));
      for (std::size_t i = 0; i < nodes; ++i) {
        const std::size_t at = r.offset();
        TreeNode n;
        n.feature = static_cast<std::int32_t>(r.u32());
        n.threshold = r.f64();
        n.left = r.u32();
        n.right = r.u32();
        n.p_normal = r.f64();
        if (n.feature >= static_cast<std::int32_t>(m.width) ||
            (n.feature >= 0 && (n.left <= i || n.right <= i || n.left >= nodes ||
                                n.right >= nodes)))
          r.error_at(at, "malformed tree node " + std::to_string(i));
        tree.nodes.push_back(n);
      }
      f.trees.push_back(std::move(tree));
    }
    m.impl = std::move(f);
    break;
  }
  }
  r.expect_end();
  return m;
}

void save_gate(const GateModel &gate, const std::string &path) {
  write_file(path, serialize_gate(gate));
}

GateModel load_gate(const std::string &path) { return deserialize_gate(read_file(path)); }

} // namespace edgecloud::gate
