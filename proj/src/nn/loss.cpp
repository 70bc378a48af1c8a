// SPDX-License-Identifier: Apache-2.0
#include <edgecloud/nn/loss.hpp>

#include <cmath>
#include <vector>

#include <edgecloud/error.hpp>

namespace edgecloud::nn {

namespace {

void softmax_row(std::span<const float> z, double inv_temp,
                 std::vector<double> &out) {
  out.resize(z.size());
  double mx = -INFINITY;
  for (float v : z)
    mx = std::max(mx, v * inv_temp);
  double sum = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    out[i] = std::exp(z[i] * inv_temp - mx);
    sum += out[i];
  }
  for (auto &p : out)
    p /= sum;
}

void require_matrix(const Tensor &t, const char *what) {
  if (t.dims().size() != 2)
    fail(ErrorKind::Shape, std::string(what) + " must be [batch, n], got " +
                               shape_string(t.dims()));
}

// Row-normalized Gram matrix (b x b, row-major) and the row norms of A A^T.
void normalized_gram(const Tensor &feats, std::vector<double> &gram_hat,
                     std::vector<double> &raw, std::vector<double> &norms) {
  const std::size_t b = feats.rows(), d = feats.row_size();
  raw.assign(b * b, 0.0);
  for (std::size_t i = 0; i < b; ++i)
    for (std::size_t j = 0; j <= i; ++j) {
      double acc = 0.0;
      auto ri = feats.row(i), rj = feats.row(j);
      for (std::size_t k = 0; k < d; ++k)
        acc += static_cast<double>(ri[k]) * rj[k];
      raw[i * b + j] = raw[j * b + i] = acc;
    }
  gram_hat.assign(b * b, 0.0);
  norms.assign(b, 0.0);
  for (std::size_t i = 0; i < b; ++i) {
    double n2 = 0.0;
    for (std::size_t j = 0; j < b; ++j)
      n2 += raw[i * b + j] * raw[i * b + j];
    norms[i] = std::sqrt(n2);
    if (norms[i] > 0.0)
      for (std::size_t j = 0; j < b; ++j)
        gram_hat[i * b + j] = raw[i * b + j] / norms[i];
  }
}

void check_sp_inputs(const Tensor &t, const Tensor &s) {
  require_matrix(t, "teacher features");
  require_matrix(s, "student features");
  if (t.rows() != s.rows())
    fail(ErrorKind::Shape, "teacher and student feature batches differ: " +
                               std::to_string(t.rows()) + " vs " +
                               std::to_string(s.rows()));
  if (t.rows() == 0)
    fail(ErrorKind::Shape, "similarity loss needs a nonempty batch");
}

} // namespace

LossGrad softmax_cross_entropy(const Tensor &logits,
                               std::span<const Label> labels) {
  require_matrix(logits, "logits");
  const std::size_t B = logits.rows(), K = logits.row_size();
  if (labels.size() != B)
    fail(ErrorKind::Shape, "label count " + std::to_string(labels.size()) +
                               " does not match batch " + std::to_string(B));
  LossGrad out{0.0, Tensor(logits.dims())};
  std::vector<double> p;
  for (std::size_t b = 0; b < B; ++b) {
    if (labels[b] >= K)
      fail(ErrorKind::Input, "label " + std::to_string(labels[b]) +
                                 " out of range for " + std::to_string(K) +
                                 " classes");
    softmax_row(logits.row(b), 1.0, p);
    out.value -= std::log(std::max(p[labels[b]], 1e-300));
    auto g = out.grad.row(b);
    for (std::size_t k = 0; k < K; ++k)
      g[k] = static_cast<float>((p[k] - (k == labels[b] ? 1.0 : 0.0)) /
                                static_cast<double>(B));
  }
  out.value /= static_cast<double>(B);
  return out;
}

LossGrad distillation_kl(const Tensor &student_logits,
                         const Tensor &teacher_logits, double temperature) {
  require_matrix(student_logits, "student logits");
  if (student_logits.dims() != teacher_logits.dims())
    fail(ErrorKind::Shape, "student logits " +
                               shape_string(student_logits.dims()) +
                               " vs teacher logits " +
                               shape_string(teacher_logits.dims()));
  if (!(temperature > 0.0))
    fail(ErrorKind::Input, "distillation temperature must be positive");
  const std::size_t B = student_logits.rows(), K = student_logits.row_size();
  const double inv_t = 1.0 / temperature;
  LossGrad out{0.0, Tensor(student_logits.dims())};
  std::vector<double> ps, pt;
  for (std::size_t b = 0; b < B; ++b) {
    softmax_row(student_logits.row(b), inv_t, ps);
    softmax_row(teacher_logits.row(b), inv_t, pt);
    double kl = 0.0;
    for (std::size_t k = 0; k < K; ++k)
      if (pt[k] > 0.0)
        kl += pt[k] * (std::log(pt[k]) - std::log(std::max(ps[k], 1e-300)));
    out.value += kl;
    auto g = out.grad.row(b);
    for (std::size_t k = 0; k < K; ++k)
      g[k] = static_cast<float>(temperature * (ps[k] - pt[k]) /
                                static_cast<double>(B));
  }
  out.value *= temperature * temperature / static_cast<double>(B);
  return out;
}

double sp_kd_loss(const Tensor &teacher_feats, const Tensor &student_feats) {
  check_sp_inputs(teacher_feats, student_feats);
  const std::size_t b = teacher_feats.rows();
  std::vector<double> gt, gs, raw, norms;
  normalized_gram(teacher_feats, gt, raw, norms);
  normalized_gram(student_feats, gs, raw, norms);
  double acc = 0.0;
  for (std::size_t i = 0; i < b * b; ++i)
    acc += (gs[i] - gt[i]) * (gs[i] - gt[i]);
  return acc / static_cast<double>(b * b);
}

LossGrad sp_kd_loss_grad(const Tensor &teacher_feats,
                         const Tensor &student_feats) {
  check_sp_inputs(teacher_feats, student_feats);
  const std::size_t b = teacher_feats.rows(), d = student_feats.row_size();
  const double scale = 1.0 / static_cast<double>(b * b);
  std::vector<double> gt, gs, raw, norms;
  normalized_gram(teacher_feats, gt, raw, norms);
  normalized_gram(student_feats, gs, raw, norms);

  LossGrad out{0.0, Tensor(student_feats.dims())};
  // dL/dG_hat, then through the row normalization to dL/dG.
  std::vector<double> d_raw(b * b, 0.0);
  for (std::size_t i = 0; i < b; ++i) {
    if (norms[i] == 0.0)
      continue;
    double dot = 0.0;
    for (std::size_t j = 0; j < b; ++j) {
      const double diff = gs[i * b + j] - gt[i * b + j];
      out.value += diff * diff;
      dot += gs[i * b + j] * 2.0 * diff * scale;
    }
    for (std::size_t j = 0; j < b; ++j) {
      const double dhat = 2.0 * (gs[i * b + j] - gt[i * b + j]) * scale;
      d_raw[i * b + j] = (dhat - gs[i * b + j] * dot) / norms[i];
    }
  }
  // Zero student rows contribute their teacher row to the loss.
  for (std::size_t i = 0; i < b; ++i)
    if (norms[i] == 0.0)
      for (std::size_t j = 0; j < b; ++j)
        out.value += gt[i * b + j] * gt[i * b + j];
  out.value *= scale;

  // G = A A^T  =>  dA = (dG + dG^T) A
  for (std::size_t i = 0; i < b; ++i) {
    auto gi = out.grad.row(i);
    for (std::size_t k = 0; k < d; ++k) {
      double acc = 0.0;
      for (std::size_t j = 0; j < b; ++j)
        acc += (d_raw[i * b + j] + d_raw[j * b + i]) * student_feats.row(j)[k];
      gi[k] = static_cast<float>(acc);
    }
  }
  return out;
}

} // namespace edgecloud::nn
