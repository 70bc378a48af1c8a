// SPDX-License-Identifier: Apache-2.0
#include <edgecloud/rl/policy.hpp>

#include <algorithm>
#include <cmath>
#include <random>

#include <edgecloud/error.hpp>

namespace edgecloud::rl {

namespace {

using Vec = std::vector<double>;
using Input = std::array<double, kInputWidth>;

double sigmoid(double a) { return 1.0 / (1.0 + std::exp(-a)); }

/// y += M x for row-major M [rows x cols].
void matvec_add(const double *m, std::size_t rows, std::size_t cols,
                const double *x, double *y) {
  for (std::size_t i = 0; i < rows; ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < cols; ++j)
      acc += m[i * cols + j] * x[j];
    y[i] += acc;
  }
}

/// y += M^T x for row-major M [rows x cols].
void matvec_t_add(const double *m, std::size_t rows, std::size_t cols,
                  const double *x, double *y) {
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j)
      y[j] += m[i * cols + j] * x[i];
}

/// G += a b^T.
void outer_add(double *g, const double *a, std::size_t rows, const double *b,
               std::size_t cols) {
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j)
      g[i * cols + j] += a[i] * b[j];
}

struct LayerView {
  std::size_t in, hidden;
  std::size_t w, u, b; // offsets into theta
};

struct Layout {
  std::vector<LayerView> gru;
  std::size_t head_w, head_b, hidden;
};

Layout layout_of(const Policy &p) {
  Layout l;
  l.hidden = p.config().hidden;
  for (std::size_t i = 0; i < p.config().layers; ++i) {
    const std::string pre = "gru" + std::to_string(i);
    l.gru.push_back({i == 0 ? kInputWidth : l.hidden, l.hidden,
                     p.block(pre + ".W").offset, p.block(pre + ".U").offset,
                     p.block(pre + ".b").offset});
  }
  l.head_w = p.block("head.W").offset;
  l.head_b = p.block("head.b").offset;
  return l;
}

/// Activations of one GRU cell at one step, kept for the backward pass.
struct CellCache {
  Vec x, h_prev, z, r, n, h;
};

CellCache cell_forward(const double *theta, const LayerView &v, const Vec &x,
                       const Vec &h_prev) {
  const std::size_t H = v.hidden, I = v.in;
  CellCache c{x, h_prev, Vec(H), Vec(H), Vec(H), Vec(H)};
  Vec gx(3 * H), gh(2 * H);
  std::copy(theta + v.b, theta + v.b + 3 * H, gx.begin());
  matvec_add(theta + v.w, 3 * H, I, x.data(), gx.data());
  matvec_add(theta + v.u, 2 * H, H, h_prev.data(), gh.data());
  for (std::size_t i = 0; i < H; ++i) {
    c.z[i] = sigmoid(gx[i] + gh[i]);
    c.r[i] = sigmoid(gx[H + i] + gh[H + i]);
  }
  Vec rh(H), un(H);
  for (std::size_t i = 0; i < H; ++i)
    rh[i] = c.r[i] * h_prev[i];
  matvec_add(theta + v.u + 2 * H * H, H, H, rh.data(), un.data());
  for (std::size_t i = 0; i < H; ++i) {
    c.n[i] = std::tanh(gx[2 * H + i] + un[i]);
    c.h[i] = (1.0 - c.z[i]) * c.n[i] + c.z[i] * h_prev[i];
  }
  return c;
}

/// Accumulates parameter gradients; returns (dx, dh_prev).
std::pair<Vec, Vec> cell_backward(const double *theta, const LayerView &v,
                                  const CellCache &c, const Vec &dh,
                                  double *grad) {
  const std::size_t H = v.hidden, I = v.in;
  Vec da(3 * H), dh_prev(H), dx(I);
  for (std::size_t i = 0; i < H; ++i) {
    const double dn = dh[i] * (1.0 - c.z[i]);
    const double dz = dh[i] * (c.h_prev[i] - c.n[i]);
    dh_prev[i] = dh[i] * c.z[i];
    da[i] = dz * c.z[i] * (1.0 - c.z[i]);
    da[2 * H + i] = dn * (1.0 - c.n[i] * c.n[i]);
  }
  // Candidate path through U_n (r * h).
  Vec rh(H), drh(H);
  for (std::size_t i = 0; i < H; ++i)
    rh[i] = c.r[i] * c.h_prev[i];
  const double *un = theta + v.u + 2 * H * H;
  matvec_t_add(un, H, H, da.data() + 2 * H, drh.data());
  outer_add(grad + v.u + 2 * H * H, da.data() + 2 * H, H, rh.data(), H);
  for (std::size_t i = 0; i < H; ++i) {
    const double dr = drh[i] * c.h_prev[i];
    dh_prev[i] += drh[i] * c.r[i];
    da[H + i] = dr * c.r[i] * (1.0 - c.r[i]);
  }
  outer_add(grad + v.w, da.data(), 3 * H, c.x.data(), I);
  outer_add(grad + v.u, da.data(), 2 * H, c.h_prev.data(), H);
  for (std::size_t i = 0; i < 3 * H; ++i)
    grad[v.b + i] += da[i];
  matvec_t_add(theta + v.w, 3 * H, I, da.data(), dx.data());
  matvec_t_add(theta + v.u, 2 * H, H, da.data(), dh_prev.data());
  return {std::move(dx), std::move(dh_prev)};
}

Distribution softmax(const double *logits) {
  Distribution p;
  const double mx = *std::max_element(logits, logits + arch::kActionCount);
  double s = 0.0;
  for (std::size_t i = 0; i < arch::kActionCount; ++i)
    s += p[i] = std::exp(logits[i] - mx);
  for (auto &v : p)
    v /= s;
  return p;
}

std::array<double, arch::kActionCount> head_logits(const double *theta,
                                                   const Layout &l,
                                                   const Vec &h) {
  std::array<double, arch::kActionCount> z;
  std::copy(theta + l.head_b, theta + l.head_b + arch::kActionCount, z.begin());
  matvec_add(theta + l.head_w, arch::kActionCount, l.hidden, h.data(), z.data());
  return z;
}

void check_actions(std::span<const arch::StateVector> states,
                   std::span<const std::size_t> actions) {
  if (states.empty())
    fail(ErrorKind::Input, "policy needs at least one state");
  if (actions.size() + 1 < states.size())
    fail(ErrorKind::Input, std::to_string(actions.size()) + " actions for " +
                               std::to_string(states.size()) + " states");
  for (std::size_t a : actions)
    if (a >= arch::kActionCount)
      fail(ErrorKind::Input, "action index " + std::to_string(a) + " out of range");
}

} // namespace

void PolicyConfig::validate() const {
  if (hidden == 0 || layers == 0)
    fail(ErrorKind::Config, "policy hidden width and layer count must be positive");
}

Policy::Policy(PolicyConfig cfg) : cfg_(cfg) {
  cfg_.validate();
  const std::size_t H = cfg_.hidden;
  std::size_t off = 0;
  auto add = [&](std::string name, std::size_t size) {
    blocks_.push_back({std::move(name), off, size});
    off += size;
  };
  for (std::size_t i = 0; i < cfg_.layers; ++i) {
    const std::string pre = "gru" + std::to_string(i);
    add(pre + ".W", 3 * H * (i == 0 ? kInputWidth : H));
    add(pre + ".U", 3 * H * H);
    add(pre + ".b", 3 * H);
  }
  add("head.W", arch::kActionCount * H);
  add("head.b", arch::kActionCount);
  theta_.assign(off, 0.0);
}

const ParamBlock &Policy::block(const std::string &name) const {
  for (const auto &b : blocks_)
    if (b.name == name)
      return b;
  fail(ErrorKind::Input, "unknown policy block \"" + name + "\"");
}

std::span<double> Policy::block_params(const std::string &name) {
  const ParamBlock &b = block(name);
  return std::span<double>(theta_).subspan(b.offset, b.size);
}

Policy make_policy(const PolicyConfig &cfg, std::uint64_t seed) {
  Policy p(cfg);
  std::mt19937_64 rng(seed);
  const double bound = 1.0 / std::sqrt(static_cast<double>(cfg.hidden));
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (double &v : p.params())
    v = dist(rng);
  return p;
}

std::vector<Input> policy_inputs(std::span<const arch::StateVector> states,
                                 std::span<const std::size_t> actions) {
  std::vector<Input> xs(states.size());
  for (std::size_t t = 0; t < states.size(); ++t) {
    xs[t].fill(0.0);
    std::copy(states[t].begin(), states[t].end(), xs[t].begin());
    if (t > 0)
      xs[t][arch::kStateWidth + actions[t - 1]] = 1.0;
  }
  return xs;
}

std::vector<Distribution> policy_forward(const Policy &policy,
                                         std::span<const arch::StateVector> states,
                                         std::span<const std::size_t> actions) {
  check_actions(states, actions);
  PolicyStepper stepper(policy);
  std::vector<Distribution> out;
  for (std::size_t t = 0; t < states.size(); ++t) {
    out.push_back(stepper.step(states[t]));
    if (t + 1 < states.size())
      stepper.take(actions[t]);
  }
  return out;
}

PolicyStepper::PolicyStepper(const Policy &policy)
    : policy_(&policy),
      hidden_(policy.config().layers, Vec(policy.config().hidden, 0.0)) {}

Distribution PolicyStepper::step(const arch::StateVector &state) {
  const Layout l = layout_of(*policy_);
  const double *theta = policy_->params().data();
  Vec x(kInputWidth, 0.0);
  std::copy(state.begin(), state.end(), x.begin());
  if (prev_action_ >= 0)
    x[arch::kStateWidth + static_cast<std::size_t>(prev_action_)] = 1.0;
  for (std::size_t i = 0; i < l.gru.size(); ++i) {
    hidden_[i] = cell_forward(theta, l.gru[i], x, hidden_[i]).h;
    x = hidden_[i];
  }
  const auto z = head_logits(theta, l, x);
  return softmax(z.data());
}

void PolicyStepper::take(std::size_t action) {
  if (action >= arch::kActionCount)
    fail(ErrorKind::Input, "action index " + std::to_string(action) + " out of range");
  prev_action_ = static_cast<std::ptrdiff_t>(action);
}

LogProbGrad logprob_grad(const Policy &policy,
                         std::span<const arch::StateVector> states,
                         std::span<const std::size_t> actions) {
  if (actions.size() != states.size())
    fail(ErrorKind::Input, std::to_string(actions.size()) + " actions for " +
                               std::to_string(states.size()) + " states");
  check_actions(states, actions);
  const Layout l = layout_of(policy);
  const double *theta = policy.params().data();
  const std::size_t T = states.size(), L = l.gru.size(), H = l.hidden;
  const auto inputs = policy_inputs(states, actions);

  std::vector<std::vector<CellCache>> cache(T);
  std::vector<Distribution> probs(T);
  LogProbGrad out;
  out.grad.assign(policy.params().size(), 0.0);
  std::vector<Vec> h(L, Vec(H, 0.0));
  for (std::size_t t = 0; t < T; ++t) {
    Vec x(inputs[t].begin(), inputs[t].end());
    for (std::size_t i = 0; i < L; ++i) {
      cache[t].push_back(cell_forward(theta, l.gru[i], x, h[i]));
      h[i] = cache[t].back().h;
      x = h[i];
    }
    const auto z = head_logits(theta, l, x);
    const double mx = *std::max_element(z.begin(), z.end());
    double s = 0.0;
    for (double v : z)
      s += std::exp(v - mx);
    out.logprob += z[actions[t]] - mx - std::log(s);
    probs[t] = softmax(z.data());
  }

  double *grad = out.grad.data();
  std::vector<Vec> dh_next(L, Vec(H, 0.0));
  for (std::size_t t = T; t-- > 0;) {
    std::array<double, arch::kActionCount> dz;
    for (std::size_t k = 0; k < arch::kActionCount; ++k)
      dz[k] = (k == actions[t] ? 1.0 : 0.0) - probs[t][k];
    const Vec &top = cache[t][L - 1].h;
    outer_add(grad + l.head_w, dz.data(), arch::kActionCount, top.data(), H);
    for (std::size_t k = 0; k < arch::kActionCount; ++k)
      grad[l.head_b + k] += dz[k];
    Vec dh(H, 0.0);
    matvec_t_add(theta + l.head_w, arch::kActionCount, H, dz.data(), dh.data());
    for (std::size_t i = L; i-- > 0;) {
      for (std::size_t j = 0; j < H; ++j)
        dh[j] += dh_next[i][j];
      auto [dx, dprev] = cell_backward(theta, l.gru[i], cache[t][i], dh, grad);
      dh_next[i] = std::move(dprev);
      dh = std::move(dx);
    }
  }
  return out;
}

} // namespace edgecloud::rl
