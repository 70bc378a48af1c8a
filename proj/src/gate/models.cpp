// SPDX-License-Identifier: Apache-2.0
#include <edgecloud/gate/gate.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>

#include <edgecloud/error.hpp>
#include <edgecloud/seed.hpp>

namespace edgecloud::gate {

namespace {

double sigmoid(double a) { return 1.0 / (1.0 + std::exp(-a)); }

bool is_normal(GateLabel l) { return l == GateLabel::Normal; }

LinearSvm train_svm(std::span<const GateSample> s, std::size_t d,
                    const GateHyper &h, std::uint64_t seed) {
  const std::size_t n = s.size();
  LinearSvm m;
  m.mean.assign(d, 0.0);
  m.scale.assign(d, 0.0);
  for (const auto &x : s)
    for (std::size_t j = 0; j < d; ++j)
      m.mean[j] += x.features[j] / static_cast<double>(n);
  for (const auto &x : s)
    for (std::size_t j = 0; j < d; ++j)
      m.scale[j] += (x.features[j] - m.mean[j]) * (x.features[j] - m.mean[j]) /
                    static_cast<double>(n);
  for (auto &v : m.scale)
    v = v > 1e-24 ? std::sqrt(v) : 1.0;

  // Pegasos over features augmented with a constant 1 for the bias.
  std::vector<std::vector<double>> z(n, std::vector<double>(d + 1, 1.0));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j)
      z[i][j] = (s[i].features[j] - m.mean[j]) / m.scale[j];
  std::vector<double> w(d + 1, 0.0);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  const double radius = 1.0 / std::sqrt(h.svm_lambda);
  std::size_t t = 0;
  for (std::size_t e = 0; e < h.svm_epochs; ++e) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t i : order) {
      ++t;
      const double eta = 1.0 / (h.svm_lambda * static_cast<double>(t));
      const double y = is_normal(s[i].label) ? 1.0 : -1.0;
      double margin = 0.0;
      for (std::size_t j = 0; j <= d; ++j)
        margin += w[j] * z[i][j];
      const double shrink = 1.0 - eta * h.svm_lambda;
      for (std::size_t j = 0; j <= d; ++j)
        w[j] = shrink * w[j] + (y * margin < 1.0 ? eta * y * z[i][j] : 0.0);
      double norm = 0.0;
      for (double v : w)
        norm += v * v;
      norm = std::sqrt(norm);
      if (norm > radius)
        for (double &v : w)
          v *= radius / norm;
    }
  }
  m.b = w[d];
  w.pop_back();
  m.w = std::move(w);
  return m;
}

double svm_margin(const LinearSvm &m, std::span<const double> x) {
  double a = m.b;
  for (std::size_t j = 0; j < m.w.size(); ++j)
    a += m.w[j] * (x[j] - m.mean[j]) / m.scale[j];
  return a;
}

double knn_p_normal(const Knn &m, std::span<const double> x) {
  std::vector<std::pair<double, std::size_t>> dist(m.refs.size());
  for (std::size_t i = 0; i < m.refs.size(); ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < x.size(); ++j)
      acc += (m.refs[i][j] - x[j]) * (m.refs[i][j] - x[j]);
    dist[i] = {acc, i};
  }
  const std::size_t k = std::min(m.k, dist.size());
  std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k),
                    dist.end());
  std::size_t votes = 0;
  for (std::size_t i = 0; i < k; ++i)
    votes += is_normal(m.labels[dist[i].second]);
  return static_cast<double>(votes) / static_cast<double>(k);
}

class TreeBuilder {
public:
  TreeBuilder(std::span<const GateSample> s, std::size_t d, std::size_t depth,
              std::mt19937_64 &rng)
      : s_(s), d_(d), max_depth_(depth), rng_(rng),
        try_(std::max<std::size_t>(1, static_cast<std::size_t>(
                                         std::floor(std::sqrt(static_cast<double>(d)))))) {}

  DecisionTree build(std::vector<std::size_t> rows) {
    DecisionTree t;
    grow(t, std::move(rows), 0);
    return t;
  }

private:
  static double gini(double pos, double n) {
    if (n == 0.0)
      return 0.0;
    const double p = pos / n;
    return 2.0 * p * (1.0 - p);
  }

  std::uint32_t grow(DecisionTree &t, std::vector<std::size_t> rows,
                     std::size_t depth) {
    const auto id = static_cast<std::uint32_t>(t.nodes.size());
    t.nodes.emplace_back();
    double pos = 0.0;
    for (auto r : rows)
      pos += is_normal(s_[r].label);
    const double n = static_cast<double>(rows.size());
    t.nodes[id].p_normal = pos / n;
    if (depth >= max_depth_ || pos == 0.0 || pos == n)
      return id;

    std::vector<std::size_t> feats(d_);
    std::iota(feats.begin(), feats.end(), 0);
    std::shuffle(feats.begin(), feats.end(), rng_);
    feats.resize(try_);

    double best = gini(pos, n) - 1e-12;
    std::int32_t best_f = -1;
    double best_thr = 0.0;
    for (std::size_t f : feats) {
      std::vector<std::size_t> order = rows;
      std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return s_[a].features[f] < s_[b].features[f];
      });
      double left_pos = 0.0;
      for (std::size_t i = 0; i + 1 < order.size(); ++i) {
        left_pos += is_normal(s_[order[i]].label);
        const double a = s_[order[i]].features[f], b = s_[order[i + 1]].features[f];
        if (a == b)
          continue;
        const double nl = static_cast<double>(i + 1), nr = n - nl;
        const double imp = (nl * gini(left_pos, nl) + nr * gini(pos - left_pos, nr)) / n;
        if (imp < best) {
          best = imp;
          best_f = static_cast<std::int32_t>(f);
          best_thr = a + (b - a) / 2.0;
        }
      }
    }
    if (best_f < 0)
      return id;
    std::vector<std::size_t> l, r;
    for (auto row : rows)
      (s_[row].features[static_cast<std::size_t>(best_f)] <= best_thr ? l : r).push_back(row);
    t.nodes[id].feature = best_f;
    t.nodes[id].threshold = best_thr;
    const auto li = grow(t, std::move(l), depth + 1);
    const auto ri = grow(t, std::move(r), depth + 1);
    t.nodes[id].left = li;
    t.nodes[id].right = ri;
    return id;
  }

  std::span<const GateSample> s_;
  std::size_t d_, max_depth_;
  std::mt19937_64 &rng_;
  std::size_t try_;
};

RandomForest train_forest(std::span<const GateSample> s, std::size_t d,
                          const GateHyper &h, std::uint64_t seed) {
  RandomForest f;
  for (std::size_t t = 0; t < h.rf_trees; ++t) {
    std::mt19937_64 rng(derive_seed(seed, t));
    std::uniform_int_distribution<std::size_t> pick(0, s.size() - 1);
    std::vector<std::size_t> rows(s.size());
    for (auto &r : rows)
      r = pick(rng);
    f.trees.push_back(TreeBuilder(s, d, h.rf_depth, rng).build(std::move(rows)));
  }
  return f;
}

double tree_p_normal(const DecisionTree &t, std::span<const double> x) {
  std::size_t i = 0;
  while (t.nodes[i].feature >= 0) {
    const auto &node = t.nodes[i];
    i = x[static_cast<std::size_t>(node.feature)] <= node.threshold ? node.left : node.right;
  }
  return t.nodes[i].p_normal;
}

} // namespace

const char *to_string(GateKind kind) noexcept {
  switch (kind) {
  case GateKind::LinearSvm:
    return "linear_svm";
  case GateKind::Knn:
    return "knn";
  case GateKind::RandomForest:
    return "random_forest";
  }
  return "?";
}

GateKind parse_gate_kind(const std::string &name) {
  if (name == "linear_svm" || name == "svm")
    return GateKind::LinearSvm;
  if (name == "knn")
    return GateKind::Knn;
  if (name == "random_forest" || name == "rf")
    return GateKind::RandomForest;
  fail(ErrorKind::Config, "unknown gate kind \"" + name + "\" (expected svm, knn or rf)");
}

void GateHyper::validate() const {
  if (!(svm_lambda > 0.0) || svm_epochs == 0)
    fail(ErrorKind::Config, "svm lambda and epochs must be positive");
  if (knn_k == 0)
    fail(ErrorKind::Config, "knn k must be positive");
  if (rf_trees == 0 || rf_depth == 0)
    fail(ErrorKind::Config, "forest trees and depth must be positive");
}

GateModel train_gate(std::span<const GateSample> samples, GateKind kind,
                     const GateHyper &hyper, std::uint64_t seed) {
  hyper.validate();
  if (samples.empty())
    fail(ErrorKind::Input, "gate training needs samples");
  const std::size_t d = samples.front().features.size();
  if (d == 0)
    fail(ErrorKind::Input, "gate features must be non-empty");
  bool has[2] = {false, false};
  for (const auto &s : samples) {
    if (s.features.size() != d)
      fail(ErrorKind::Input, "gate sample " + std::to_string(s.source_index) +
                                 " has width " + std::to_string(s.features.size()) +
                                 ", expected " + std::to_string(d));
    has[static_cast<int>(s.label)] = true;
  }
  if (!has[0] || !has[1])
    fail(ErrorKind::Input, "gate training needs both complex and normal samples");

  GateModel m{kind, d, {}};
  switch (kind) {
  case GateKind::LinearSvm:
    m.impl = train_svm(samples, d, hyper, seed);
    break;
  case GateKind::Knn: {
    Knn k;
    k.k = hyper.knn_k;
    for (const auto &s : samples) {
      k.refs.push_back(s.features);
      k.labels.push_back(s.label);
    }
    m.impl = std::move(k);
    break;
  }
  case GateKind::RandomForest:
    m.impl = train_forest(samples, d, hyper, seed);
    break;
  }
  return m;
}

std::array<double, 2> gate_proba(const GateModel &gate,
                                 std::span<const double> features) {
  if (!gate.trained())
    fail(ErrorKind::State, "gate model is untrained");
  if (features.size() != gate.width)
    fail(ErrorKind::Input, "gate expects " + std::to_string(gate.width) +
                               " features, got " + std::to_string(features.size()));
  double p = 0.0;
  if (const auto *svm = std::get_if<LinearSvm>(&gate.impl)) {
    p = sigmoid(svm_margin(*svm, features));
  } else if (const auto *knn = std::get_if<Knn>(&gate.impl)) {
    p = knn_p_normal(*knn, features);
  } else {
    const auto &forest = std::get<RandomForest>(gate.impl);
    for (const auto &t : forest.trees)
      p += tree_p_normal(t, features);
    p /= static_cast<double>(forest.trees.size());
  }
  return {1.0 - p, p};
}

GateLabel gate_predict(const GateModel &gate, std::span<const double> features) {
  return gate_proba(gate, features)[1] > 0.5 ? GateLabel::Normal : GateLabel::Complex;
}

OffloadDecision gate_decide(const GateModel &gate, std::span<const double> logits) {
  return gate_predict(gate, logits) == GateLabel::Normal ? OffloadDecision::Local
                                                         : OffloadDecision::Offload;
}

GateEval evaluate_gate(const GateModel &gate, std::span<const GateSample> samples) {
  GateEval e;
  for (const auto &s : samples) {
    const bool predicted_complex = gate_predict(gate, s.features) == GateLabel::Complex;
    const bool complex = s.label == GateLabel::Complex;
    if (predicted_complex)
      ++(complex ? e.tp : e.fp);
    else
      ++(complex ? e.fn : e.tn);
  }
  if (e.total() > 0)
    e.accuracy = static_cast<double>(e.tp + e.tn) / static_cast<double>(e.total());
  return e;
}

std::string gate_report_csv(std::span<const GateReport> rows) {
  std::string out = "kind,train_M,accuracy,TP,TN,FP,FN,model_bytes\n";
  char buf[160];
  for (const auto &r : rows) {
    std::snprintf(buf, sizeof buf, "%s,%zu,%.6f,%zu,%zu,%zu,%zu,%zu\n",
                  to_string(r.kind), r.train_m, r.eval.accuracy, r.eval.tp,
                  r.eval.tn, r.eval.fp, r.eval.fn, r.model_bytes);
    out += buf;
  }
  return out;
}

} // namespace edgecloud::gate
