// SPDX-License-Identifier: Apache-2.0
#include <edgecloud/rl/reinforce.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <future>
#include <limits>
#include <numeric>

#include <edgecloud/error.hpp>
#include <edgecloud/seed.hpp>

namespace edgecloud::rl {

namespace {

double capped_exp(double exponent) {
  return std::exp(std::clamp(exponent, -kRewardExponentCap, kRewardExponentCap));
}

std::size_t sample_index(const Distribution &p, std::mt19937_64 &rng) {
  const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  double cum = 0.0;
  std::size_t last = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] <= 0.0)
      continue;
    last = i;
    cum += p[i];
    if (u < cum)
      return i;
  }
  return last;
}

struct Scored {
  nn::Network net;
  double C, A;
  std::vector<std::size_t> skipped;
};

} // namespace

void RewardParams::validate() const {
  if (!(alpha > 0.0) || !(beta > 0.0))
    fail(ErrorKind::Config, "reward alpha and beta must be positive");
  if (!(c0 >= 0.0 && c0 < 1.0))
    fail(ErrorKind::Config, "reward c0 must lie in [0, 1)");
  if (!(a0 >= 0.0 && a0 <= 1.0))
    fail(ErrorKind::Config, "reward a0 must lie in [0, 1]");
}

double reward(double compression, double accuracy, const RewardParams &p) {
  return capped_exp(p.alpha * (compression - p.c0)) *
         capped_exp(p.beta * (accuracy - p.a0));
}

double baseline_update(double b, std::span<const double> rewards, double decay) {
  if (rewards.empty())
    fail(ErrorKind::Input, "baseline update needs at least one reward");
  if (!(decay > 0.0 && decay < 1.0))
    fail(ErrorKind::Config, "baseline decay must lie in (0, 1)");
  const double mean = std::accumulate(rewards.begin(), rewards.end(), 0.0) /
                      static_cast<double>(rewards.size());
  return decay * b + (1.0 - decay) * mean;
}

std::vector<arch::StateVector> teacher_states(const arch::ModelSpec &teacher) {
  std::vector<arch::StateVector> s;
  for (const auto &l : teacher.layers)
    s.push_back(arch::encode_state(l));
  return s;
}

Episode sample_episode(const Policy &policy, const arch::ModelSpec &teacher,
                       std::mt19937_64 &rng) {
  teacher.validate();
  const auto states = teacher_states(teacher);
  PolicyStepper stepper(policy);
  Episode ep;
  std::vector<double> phis;
  for (const auto &s : states) {
    const Distribution p = stepper.step(s);
    const std::size_t a = sample_index(p, rng);
    stepper.take(a);
    ep.actions.push_back(a);
    ep.logprobs.push_back(std::log(p[a]));
    phis.push_back(arch::kActionPool[a]);
  }
  auto folded = arch::apply_actions(teacher, phis);
  ep.student_spec = std::move(folded.spec);
  ep.coerced = std::move(folded.coerced);
  return ep;
}

void reinforce_update(Policy &policy, std::span<const arch::StateVector> states,
                      std::span<const Episode> episodes, double baseline,
                      double learning_rate) {
  if (episodes.empty())
    fail(ErrorKind::Input, "policy update needs at least one episode");
  if (std::all_of(episodes.begin(), episodes.end(),
                  [&](const Episode &e) { return e.R - baseline == 0.0; }))
    return;
  std::vector<double> g(policy.params().size(), 0.0);
  for (const Episode &e : episodes) {
    const double adv = e.R - baseline;
    if (adv == 0.0)
      continue;
    const auto lp = logprob_grad(policy, states, e.actions);
    for (std::size_t i = 0; i < g.size(); ++i)
      g[i] += adv * lp.grad[i];
  }
  const double scale = learning_rate / static_cast<double>(episodes.size());
  for (const ParamBlock &b : policy.blocks())
    for (std::size_t i = b.offset; i < b.offset + b.size; ++i)
      if (!std::isfinite(g[i] * scale))
        fail(ErrorKind::Numeric,
             "non-finite policy gradient in block " + b.name);
  auto theta = policy.params();
  for (std::size_t i = 0; i < g.size(); ++i)
    theta[i] += scale * g[i];
}

CompressConfig::CompressConfig() {
  distill.epochs = 3;
  distill.kd = nn::KdConfig{};
}

void CompressConfig::validate() const {
  if (episodes == 0)
    fail(ErrorKind::Config, "episodes must be positive");
  if (batch_size == 0 || batch_size > episodes)
    fail(ErrorKind::Config, "batch_size must lie in [1, episodes]");
  if (!(policy_lr > 0.0))
    fail(ErrorKind::Config, "policy learning rate must be positive");
  if (!(baseline_decay > 0.0 && baseline_decay < 1.0))
    fail(ErrorKind::Config, "baseline decay must lie in (0, 1)");
  if (!(val_fraction > 0.0 && val_fraction < 1.0))
    fail(ErrorKind::Config, "validation fraction must lie in (0, 1)");
  if (!distill.kd)
    fail(ErrorKind::Config, "distillation settings are required");
  policy.validate();
  if (initial_policy && initial_policy->config() != policy)
    fail(ErrorKind::Config, "initial policy shape differs from the policy settings");
  distill.validate();
  reward.validate();
}

std::pair<nn::Dataset, nn::Dataset> validation_split(const nn::Dataset &data,
                                                     double val_fraction,
                                                     std::uint64_t seed) {
  nn::Dataset train = data.subset(nn::Split::Train);
  nn::Dataset val = data.subset(nn::Split::Val);
  if (train.empty())
    fail(ErrorKind::Input, "dataset has no training rows");
  if (!val.empty())
    return {std::move(train), std::move(val)};
  std::vector<std::size_t> idx(train.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(idx.begin(), idx.end(), rng);
  const auto n_val = std::max<std::size_t>(
    1, static_cast<std::size_t>(val_fraction * static_cast<double>(idx.size())));
  if (n_val >= idx.size())
    fail(ErrorKind::Input, "training split too small to hold out validation rows");
  std::vector<std::size_t> v(idx.begin(), idx.begin() + n_val);
  std::vector<std::size_t> t(idx.begin() + n_val, idx.end());
  std::sort(v.begin(), v.end());
  std::sort(t.begin(), t.end());
  return {train.select(t), train.select(v)};
}

CompressResult compress(const nn::Network &teacher, const nn::Dataset &data,
                        const CompressConfig &cfg,
                        const EpisodeCallback &on_episode) {
  cfg.validate();
  const arch::ModelSpec teacher_spec = arch::describe(teacher);
  const auto states = teacher_states(teacher_spec);
  const auto [train, val] = validation_split(data, cfg.val_fraction,
                                             derive_seed(cfg.seed, 4));

  CompressResult out{teacher, 0, {},
                     cfg.initial_policy ? *cfg.initial_policy
                                        : make_policy(cfg.policy, derive_seed(cfg.seed, 0))};
  std::mt19937_64 rng(derive_seed(cfg.seed, 1));
  double baseline = 0.0;
  double best_r = -std::numeric_limits<double>::infinity();

  auto score = [&](const Episode &ep, std::size_t index) {
    auto realized = arch::realize(ep.student_spec,
                                  derive_seed(derive_seed(cfg.seed, 2), index));
    nn::TrainConfig dc = cfg.distill;
    dc.seed = derive_seed(derive_seed(cfg.seed, 3), index);
    nn::Network student = nn::distill(teacher, std::move(realized.net), train, dc).net;
    const double a = nn::evaluate(student, val);
    const double c = arch::compression_ratio(teacher, student);
    return Scored{std::move(student), c, a, std::move(realized.skipped)};
  };

  for (std::size_t start = 0; start < cfg.episodes; start += cfg.batch_size) {
    const std::size_t n = std::min(cfg.batch_size, cfg.episodes - start);
    std::vector<Episode> batch;
    for (std::size_t i = 0; i < n; ++i)
      batch.push_back(sample_episode(out.policy, teacher_spec, rng));

    std::vector<Scored> scored;
    if (cfg.parallel && n > 1) {
      std::vector<std::future<Scored>> jobs;
      for (std::size_t i = 0; i < n; ++i)
        jobs.push_back(std::async(std::launch::async, score, std::cref(batch[i]), start + i));
      for (auto &j : jobs)
        scored.push_back(j.get());
    } else {
      for (std::size_t i = 0; i < n; ++i)
        scored.push_back(score(batch[i], start + i));
    }

    std::vector<double> rewards;
    for (std::size_t i = 0; i < n; ++i) {
      Episode &ep = batch[i];
      ep.C = scored[i].C;
      ep.A = scored[i].A;
      ep.R = reward(ep.C, ep.A, cfg.reward);
      ep.skipped = std::move(scored[i].skipped);
      rewards.push_back(ep.R);
      if (ep.R > best_r) {
        best_r = ep.R;
        out.best_student = std::move(scored[i].net);
        out.best_episode = start + i;
      }
      if (on_episode)
        on_episode(start + i, ep);
    }

    if (start == 0)
      baseline = std::accumulate(rewards.begin(), rewards.end(), 0.0) /
                 static_cast<double>(rewards.size());
    reinforce_update(out.policy, states, batch, baseline, cfg.policy_lr);
    baseline = baseline_update(baseline, rewards, cfg.baseline_decay);
    for (auto &ep : batch)
      out.history.push_back(std::move(ep));
  }
  return out;
}

std::string history_csv(std::span<const Episode> history) {
  std::string out = "episode,C,A,R,actions\n";
  char buf[128];
  for (std::size_t i = 0; i < history.size(); ++i) {
    const Episode &e = history[i];
    std::snprintf(buf, sizeof buf, "%zu,%.6f,%.6f,%.6e,", i, e.C, e.A, e.R);
    out += buf;
    for (std::size_t t = 0; t < e.actions.size(); ++t)
      out += (t ? "-" : "") + std::to_string(e.actions[t]);
    out += '\n';
  }
  return out;
}

} // namespace edgecloud::rl
