// SPDX-License-Identifier: Apache-2.0
#include <edgecloud/io/data.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include <edgecloud/bytes.hpp>
#include <edgecloud/error.hpp>
#include <edgecloud/seed.hpp>

namespace edgecloud::io {

namespace {

std::uint32_t be32(ByteReader &r) {
  const std::uint32_t v = r.u32();
  return (v >> 24) | ((v >> 8) & 0xFF00u) | ((v << 8) & 0xFF0000u) | (v << 24);
}

std::size_t product(const nn::Shape &dims) {
  return std::accumulate(dims.begin(), dims.end(), std::size_t{1}, std::multiplies<>());
}

} // namespace

nn::Dataset parse_idx(std::span<const std::uint8_t> images, std::span<const std::uint8_t> labels) {
  ByteReader ri(images, ErrorKind::Parse, "idx images");
  ri.expect_magic(std::string_view("\x00\x00\x08\x03", 4));
  const std::size_t count_at = ri.offset();
  const std::uint32_t n = be32(ri);
  const std::uint32_t rows = be32(ri);
  const std::uint32_t cols = be32(ri);
  if (rows == 0 || cols == 0)
    ri.error_at(count_at + 4, "zero image dimension");
  if (n == 0)
    ri.error_at(count_at, "no images");
  const std::size_t pixels = static_cast<std::size_t>(rows) * cols;
  if (pixels > ri.remaining() / n)
    ri.error_at(ri.offset(), "truncated: " + std::to_string(n) + " images of " +
                                 std::to_string(rows) + "x" + std::to_string(cols) +
                                 " need " + std::to_string(pixels * n) + " bytes, have " +
                                 std::to_string(ri.remaining()));
  nn::Dataset d;
  d.samples = nn::Tensor({n, 1, rows, cols});
  auto out = d.samples.data();
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = static_cast<float>(ri.u8()) / 255.0f;
  ri.expect_end();

  ByteReader rl(labels, ErrorKind::Parse, "idx labels");
  rl.expect_magic(std::string_view("\x00\x00\x08\x01", 4));
  const std::size_t label_count_at = rl.offset();
  const std::uint32_t ln = be32(rl);
  if (ln != n)
    rl.error_at(label_count_at, "label count " + std::to_string(ln) +
                                    " does not match image count " + std::to_string(n));
  d.labels.reserve(n);
  for (std::uint32_t i = 0; i < n; ++i)
    d.labels.push_back(rl.u8());
  rl.expect_end();
  d.splits.assign(n, nn::Split::Train);
  d.class_count = *std::max_element(d.labels.begin(), d.labels.end()) + 1u;
  return d;
}

nn::Dataset load_idx(const std::string &images_path, const std::string &labels_path) {
  const auto images = read_file(images_path);
  const auto labels = read_file(labels_path);
  return parse_idx(images, labels);
}

void stratified_split(nn::Dataset &data, std::uint64_t seed) {
  data.validate();
  std::mt19937_64 rng(seed);
  std::vector<std::vector<std::size_t>> by_class(data.class_count);
  for (std::size_t i = 0; i < data.size(); ++i)
    by_class[data.labels[i]].push_back(i);
  for (auto &rows : by_class) {
    std::shuffle(rows.begin(), rows.end(), rng);
    const auto n = static_cast<double>(rows.size());
    const auto train = static_cast<std::size_t>(std::llround(0.7 * n));
    const auto val = static_cast<std::size_t>(std::llround(0.1 * n));
    for (std::size_t k = 0; k < rows.size(); ++k)
      data.splits[rows[k]] = k < train         ? nn::Split::Train
                             : k < train + val ? nn::Split::Val
                                               : nn::Split::Test;
  }
}

nn::Dataset gen_synthetic(std::size_t class_count, std::size_t per_class,
                          const nn::Shape &dims, double separation, std::uint64_t seed) {
  if (class_count == 0 || per_class == 0)
    fail(ErrorKind::Input, "synthetic data needs at least one class and one sample per class");
  if (dims.empty() || std::find(dims.begin(), dims.end(), 0) != dims.end())
    fail(ErrorKind::Input, "synthetic sample dims must be nonempty and positive");
  if (!(separation > 0.0) || !std::isfinite(separation))
    fail(ErrorKind::Input, "synthetic separation must be positive");
  const std::size_t width = product(dims);
  if (class_count > width)
    fail(ErrorKind::Input, std::to_string(class_count) + " classes need at least as many " +
                               "features, got " + std::to_string(width));

  // Orthonormal class directions by Gram-Schmidt on Gaussian vectors.
  std::mt19937_64 dir_rng(derive_seed(seed, 0));
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<std::vector<double>> means;
  while (means.size() < class_count) {
    std::vector<double> v(width);
    for (auto &x : v)
      x = gauss(dir_rng);
    for (const auto &u : means) {
      const double dot = std::inner_product(v.begin(), v.end(), u.begin(), 0.0);
      for (std::size_t j = 0; j < width; ++j)
        v[j] -= dot * u[j];
    }
    const double norm = std::sqrt(std::inner_product(v.begin(), v.end(), v.begin(), 0.0));
    if (norm < 1e-6)
      continue;
    for (auto &x : v)
      x /= norm;
    means.push_back(std::move(v));
  }
  const double radius = separation / std::sqrt(2.0);

  const std::size_t n = class_count * per_class;
  nn::Shape shape{n};
  shape.insert(shape.end(), dims.begin(), dims.end());
  nn::Dataset d;
  d.class_count = class_count;
  d.samples = nn::Tensor(shape);
  d.labels.resize(n);
  d.splits.assign(n, nn::Split::Train);
  std::mt19937_64 noise_rng(derive_seed(seed, 1));
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t c = i % class_count;
    d.labels[i] = static_cast<nn::Label>(c);
    auto row = d.samples.row(i);
    for (std::size_t j = 0; j < width; ++j)
      row[j] = static_cast<float>(radius * means[c][j] + gauss(noise_rng));
  }
  stratified_split(d, derive_seed(seed, 2));
  return d;
}

std::vector<std::uint8_t> serialize_dataset(const nn::Dataset &data) {
  data.validate();
  if (data.empty())
    fail(ErrorKind::Input, "cannot save an empty dataset");
  ByteWriter w;
  w.bytes("ECDS");
  w.u16(kDatasetFormatVersion);
  w.u32(static_cast<std::uint32_t>(data.class_count));
  const nn::Shape shape = data.sample_shape();
  w.u8(static_cast<std::uint8_t>(shape.size()));
  for (auto d : shape)
    w.u32(static_cast<std::uint32_t>(d));
  w.u64(data.size());
  w.f32s(data.samples.data());
  for (auto l : data.labels)
    w.u32(l);
  for (auto s : data.splits)
    w.u8(static_cast<std::uint8_t>(s));
  return w.take();
}

nn::Dataset deserialize_dataset(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes, ErrorKind::Parse, "dataset");
  r.expect_magic("ECDS");
  const std::size_t version_at = r.offset();
  if (r.u16() != kDatasetFormatVersion)
    r.error_at(version_at, "unsupported dataset version");
  const std::size_t classes_at = r.offset();
  nn::Dataset d;
  d.class_count = r.u32();
  if (d.class_count == 0)
    r.error_at(classes_at, "class_count must be positive");
  const std::size_t rank_at = r.offset();
  const std::uint8_t rank = r.u8();
  if (rank == 0)
    r.error_at(rank_at, "sample rank must be positive");
  nn::Shape shape{0};
  std::size_t width = 1;
  for (std::uint8_t i = 0; i < rank; ++i) {
    const std::size_t at = r.offset();
    const std::uint32_t dim = r.u32();
    if (dim == 0)
      r.error_at(at, "zero sample dim");
    if (width > (std::size_t{1} << 40) / dim)
      r.error_at(at, "sample size overflow");
    width *= dim;
    shape.push_back(dim);
  }
  const std::size_t n_at = r.offset();
  const std::uint64_t n = r.u64();
  if (n == 0)
    r.error_at(n_at, "empty dataset");
  if (n > r.remaining() / (width * 4 + 5))
    r.error_at(n_at, "sample count " + std::to_string(n) + " exceeds the remaining " +
                         std::to_string(r.remaining()) + " bytes");
  shape[0] = n;
  d.samples = nn::Tensor(shape, r.f32s(n * width));
  d.labels.reserve(n);
  for (std::uint64_t i = 0; i < n; ++i) {
    const std::size_t at = r.offset();
    d.labels.push_back(r.u32());
    if (d.labels.back() >= d.class_count)
      r.error_at(at, "label " + std::to_string(d.labels.back()) + " not below class_count");
  }
  d.splits.reserve(n);
  for (std::uint64_t i = 0; i < n; ++i) {
    const std::size_t at = r.offset();
    const std::uint8_t s = r.u8();
    if (s > static_cast<std::uint8_t>(nn::Split::Test))
      r.error_at(at, "unknown split tag " + std::to_string(s));
    d.splits.push_back(static_cast<nn::Split>(s));
  }
  r.expect_end();
  return d;
}

void save_dataset(const nn::Dataset &data, const std::string &path) {
  write_file(path, serialize_dataset(data));
}

nn::Dataset load_dataset(const std::string &path) { return deserialize_dataset(read_file(path)); }

} // namespace edgecloud::io
