// SPDX-License-Identifier: Apache-2.0
#include <edgecloud/gate/qbc.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>

#include <edgecloud/error.hpp>
#include <edgecloud/nn/train.hpp>
#include <edgecloud/seed.hpp>

namespace edgecloud::gate {

LabeledSamples label_samples(const nn::Network &student, const nn::Dataset &data) {
  data.validate();
  LabeledSamples out;
  constexpr std::size_t kChunk = 256;
  for (std::size_t start = 0; start < data.size(); start += kChunk) {
    std::vector<std::size_t> idx(std::min(kChunk, data.size() - start));
    std::iota(idx.begin(), idx.end(), start);
    const nn::Tensor logits = nn::forward(student, data.batch(idx)).logits;
    for (std::size_t i = 0; i < idx.size(); ++i) {
      const auto row = logits.row(i);
      GateSample s{{row.begin(), row.end()}, GateLabel::Normal, idx[i]};
      const auto pred = static_cast<nn::Label>(
        std::max_element(row.begin(), row.end()) - row.begin());
      if (pred != data.labels[idx[i]]) {
        s.label = GateLabel::Complex;
        out.complex.push_back(std::move(s));
      } else {
        out.normal.push_back(std::move(s));
      }
    }
  }
  return out;
}

double committee_entropy(std::span<const double> probs) {
  double sum = 0.0, e = 0.0;
  for (double p : probs) {
    if (!(p >= 0.0))
      fail(ErrorKind::Input, "negative or non-finite probability");
    sum += p;
    if (p > 0.0)
      e -= p * std::log(p);
  }
  if (std::abs(sum - 1.0) > 1e-6)
    fail(ErrorKind::Input, "probabilities sum to " + std::to_string(sum));
  return e;
}

Committee train_committee(std::span<const GateSample> samples,
                          std::span<const GateKind> kinds,
                          const GateHyper &hyper, std::uint64_t seed) {
  Committee c;
  for (std::size_t i = 0; i < kinds.size(); ++i)
    c.members.push_back(train_gate(samples, kinds[i], hyper, derive_seed(seed, i)));
  return c;
}

double qbc_score(const Committee &committee, std::span<const double> x) {
  if (committee.members.empty())
    fail(ErrorKind::State, "committee has no members");
  double best = 0.0;
  for (const auto &m : committee.members) {
    const auto p = gate_proba(m, x);
    best = std::max(best, committee_entropy(p));
  }
  return best;
}

std::size_t qbc_random_count(std::size_t m, double r) {
  if (m == 0)
    return 0;
  const auto n = static_cast<std::size_t>(std::floor(r * static_cast<double>(m)));
  return std::clamp<std::size_t>(n, 1, m);
}

std::vector<std::size_t> qbc_random_draw(std::size_t pool_size, std::size_t m,
                                         double r, std::mt19937_64 &rng) {
  const std::size_t n = qbc_random_count(m, r);
  if (n > pool_size)
    fail(ErrorKind::Input, "cannot draw " + std::to_string(n) + " from " +
                               std::to_string(pool_size) + " normal samples");
  // Partial Fisher-Yates: the first n slots end up as the draw.
  std::vector<std::size_t> idx(pool_size);
  std::iota(idx.begin(), idx.end(), 0);
  for (std::size_t i = 0; i < n; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, pool_size - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  idx.resize(n);
  return idx;
}

void QbcConfig::validate() const {
  if (!(r > 0.0 && r < 1.0))
    fail(ErrorKind::Config, "qbc r must lie in (0, 1)");
  if (committee.size() < 2)
    fail(ErrorKind::Config, "qbc committee needs at least two members");
  hyper.validate();
}

std::vector<GateSample> qbc_select(std::span<const GateSample> normal,
                                   std::size_t m,
                                   std::span<const GateSample> complex,
                                   const QbcConfig &cfg, std::mt19937_64 &rng) {
  cfg.validate();
  if (m == 0)
    return {};
  if (normal.size() < m)
    fail(ErrorKind::Input, "need " + std::to_string(m) + " normal samples, have " +
                               std::to_string(normal.size()));
  const auto drawn = qbc_random_draw(normal.size(), m, cfg.r, rng);
  std::vector<GateSample> out;
  std::vector<bool> taken(normal.size(), false);
  for (auto i : drawn) {
    out.push_back(normal[i]);
    taken[i] = true;
  }
  const std::size_t rest = m - out.size();
  const std::uint64_t committee_seed = rng();
  if (rest == 0)
    return out;

  std::vector<GateSample> train(complex.begin(), complex.end());
  train.insert(train.end(), out.begin(), out.end());
  const Committee committee = train_committee(train, cfg.committee, cfg.hyper, committee_seed);

  std::vector<std::pair<double, std::size_t>> scored; // (score, position)
  for (std::size_t i = 0; i < normal.size(); ++i)
    if (!taken[i])
      scored.emplace_back(qbc_score(committee, normal[i].features), i);
  auto better = [&](const auto &a, const auto &b) {
    if (a.first != b.first)
      return a.first > b.first;
    return normal[a.second].source_index < normal[b.second].source_index;
  };
  std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(rest),
                    scored.end(), better);
  for (std::size_t i = 0; i < rest; ++i)
    out.push_back(normal[scored[i].second]);
  return out;
}

GateTrainingSet build_training_set(const LabeledSamples &labeled,
                                   const QbcConfig &cfg, std::uint64_t seed) {
  if (labeled.complex.empty() || labeled.normal.empty())
    fail(ErrorKind::Input, "gate training needs both complex (" +
                               std::to_string(labeled.complex.size()) + ") and normal (" +
                               std::to_string(labeled.normal.size()) + ") samples");
  std::mt19937_64 rng(seed);
  GateTrainingSet out;
  out.m = std::min(labeled.complex.size(), labeled.normal.size());
  std::vector<GateSample> complex = labeled.complex;
  if (complex.size() > out.m) {
    std::shuffle(complex.begin(), complex.end(), rng);
    complex.resize(out.m);
    std::sort(complex.begin(), complex.end(), [](const auto &a, const auto &b) {
      return a.source_index < b.source_index;
    });
  }
  auto normal = qbc_select(labeled.normal, out.m, complex, cfg, rng);
  out.samples = std::move(complex);
  out.samples.insert(out.samples.end(), normal.begin(), normal.end());
  return out;
}

} // namespace edgecloud::gate
