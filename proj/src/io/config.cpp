// SPDX-License-Identifier: Apache-2.0
#include <edgecloud/io/config.hpp>

#include <charconv>
#include <cmath>
#include <cstdio>
#include <functional>
#include <set>
#include <sstream>
#include <type_traits>

#include <edgecloud/bytes.hpp>
#include <edgecloud/error.hpp>

namespace edgecloud::io {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos)
    return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::size_t to_size(const std::string &v) {
  std::size_t out = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size())
    throw std::invalid_argument("expected a nonnegative integer");
  return out;
}

std::uint64_t to_u64(const std::string &v) {
  std::uint64_t out = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size())
    throw std::invalid_argument("expected a nonnegative integer");
  return out;
}

double to_double(const std::string &v) {
  double out = 0.0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size() || !std::isfinite(out))
    throw std::invalid_argument("expected a finite number");
  return out;
}

bool to_bool(const std::string &v) {
  if (v == "true")
    return true;
  if (v == "false")
    return false;
  throw std::invalid_argument("expected true or false");
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fmt(bool v) { return v ? "true" : "false"; }

template <typename T>
  requires std::is_unsigned_v<T> && (!std::is_same_v<T, bool>)
std::string fmt(T v) {
  return std::to_string(v);
}

const char *kd_name(const std::optional<nn::KdConfig> &kd) {
  if (!kd)
    return "none";
  switch (kd->mode) {
  case nn::KdMode::LogitKl:
    return "logit";
  case nn::KdMode::SimilarityPreserving:
    return "similarity";
  case nn::KdMode::Combined:
    return "combined";
  }
  return "?";
}

void set_kd(std::optional<nn::KdConfig> &kd, const std::string &v) {
  if (v == "none") {
    kd.reset();
    return;
  }
  nn::KdMode mode;
  if (v == "logit")
    mode = nn::KdMode::LogitKl;
  else if (v == "similarity")
    mode = nn::KdMode::SimilarityPreserving;
  else if (v == "combined")
    mode = nn::KdMode::Combined;
  else
    throw std::invalid_argument("expected none, logit, similarity or combined");
  if (!kd)
    kd.emplace();
  kd->mode = mode;
}

nn::KdConfig &kd_params(std::optional<nn::KdConfig> &kd) {
  if (!kd)
    kd.emplace();
  return *kd;
}

const nn::KdConfig &kd_params(const std::optional<nn::KdConfig> &kd) {
  static const nn::KdConfig defaults;
  return kd ? *kd : defaults;
}

std::string committee_text(const std::vector<gate::GateKind> &kinds) {
  std::string out;
  for (auto k : kinds)
    out += (out.empty() ? "" : ",") + std::string(gate::to_string(k));
  return out;
}

std::vector<gate::GateKind> parse_committee(const std::string &v) {
  std::vector<gate::GateKind> out;
  std::istringstream in(v);
  for (std::string item; std::getline(in, item, ',');)
    out.push_back(gate::parse_gate_kind(trim(item)));
  return out;
}

struct Entry {
  const char *section;
  const char *key;
  std::function<void(Config &, const std::string &)> set;
  std::function<std::string(const Config &)> get;
};

#define EC_FIELD(sec, name, path, conv)                                                 \
  Entry {                                                                               \
    sec, name, [](Config &c, const std::string &v) { c.path = conv(v); },              \
      [](const Config &c) { return fmt(c.path); }                                       \
  }

const std::vector<Entry> &entries() {
  static const std::vector<Entry> table = {
    EC_FIELD("train", "epochs", train.epochs, to_size),
    EC_FIELD("train", "batch_size", train.batch_size, to_size),
    EC_FIELD("train", "learning_rate", train.learning_rate, to_double),
    EC_FIELD("train", "seed", train.seed, to_u64),

    EC_FIELD("compress", "episodes", compress.episodes, to_size),
    EC_FIELD("compress", "batch_size", compress.batch_size, to_size),
    EC_FIELD("compress", "policy_lr", compress.policy_lr, to_double),
    EC_FIELD("compress", "baseline_decay", compress.baseline_decay, to_double),
    EC_FIELD("compress", "hidden", compress.policy.hidden, to_size),
    EC_FIELD("compress", "layers", compress.policy.layers, to_size),
    EC_FIELD("compress", "val_fraction", compress.val_fraction, to_double),
    EC_FIELD("compress", "seed", compress.seed, to_u64),
    EC_FIELD("compress", "parallel", compress.parallel, to_bool),
    EC_FIELD("compress", "alpha", compress.reward.alpha, to_double),
    EC_FIELD("compress", "beta", compress.reward.beta, to_double),
    EC_FIELD("compress", "c0", compress.reward.c0, to_double),
    EC_FIELD("compress", "a0", compress.reward.a0, to_double),
    EC_FIELD("compress", "distill_epochs", compress.distill.epochs, to_size),
    EC_FIELD("compress", "distill_batch_size", compress.distill.batch_size, to_size),
    EC_FIELD("compress", "distill_learning_rate", compress.distill.learning_rate, to_double),
    Entry{"compress", "kd", [](Config &c, const std::string &v) { set_kd(c.compress.distill.kd, v); },
          [](const Config &c) { return std::string(kd_name(c.compress.distill.kd)); }},
    Entry{"compress", "temperature",
          [](Config &c, const std::string &v) {
            kd_params(c.compress.distill.kd).temperature = to_double(v);
          },
          [](const Config &c) { return fmt(kd_params(c.compress.distill.kd).temperature); }},
    Entry{"compress", "kl_weight",
          [](Config &c, const std::string &v) {
            kd_params(c.compress.distill.kd).kl_weight = to_double(v);
          },
          [](const Config &c) { return fmt(kd_params(c.compress.distill.kd).kl_weight); }},
    Entry{"compress", "sp_weight",
          [](Config &c, const std::string &v) {
            kd_params(c.compress.distill.kd).sp_weight = to_double(v);
          },
          [](const Config &c) { return fmt(kd_params(c.compress.distill.kd).sp_weight); }},

    Entry{"gate", "kind", [](Config &c, const std::string &v) { c.gate.kind = gate::parse_gate_kind(v); },
          [](const Config &c) { return std::string(gate::to_string(c.gate.kind)); }},
    EC_FIELD("gate", "seed", gate.seed, to_u64),
    EC_FIELD("gate", "r", gate.qbc.r, to_double),
    Entry{"gate", "committee",
          [](Config &c, const std::string &v) { c.gate.qbc.committee = parse_committee(v); },
          [](const Config &c) { return committee_text(c.gate.qbc.committee); }},
    EC_FIELD("gate", "svm_lambda", gate.qbc.hyper.svm_lambda, to_double),
    EC_FIELD("gate", "svm_epochs", gate.qbc.hyper.svm_epochs, to_size),
    EC_FIELD("gate", "knn_k", gate.qbc.hyper.knn_k, to_size),
    EC_FIELD("gate", "rf_trees", gate.qbc.hyper.rf_trees, to_size),
    EC_FIELD("gate", "rf_depth", gate.qbc.hyper.rf_depth, to_size),

    Entry{"bench", "mode", [](Config &c, const std::string &v) { c.bench.mode = runtime::parse_mode(v); },
          [](const Config &c) { return std::string(runtime::to_string(c.bench.mode)); }},
    EC_FIELD("bench", "rtt_ms", bench.rtt_ms, to_double),
    EC_FIELD("bench", "bandwidth_bytes_per_s", bench.bandwidth_bytes_per_s, to_double),
    EC_FIELD("bench", "edge_macs_per_s", bench.edge_macs_per_s, to_double),
  };
  return table;
}

#undef EC_FIELD

} // namespace

void Config::validate() const {
  train.validate();
  compress.validate();
  gate.qbc.validate();
  bench.validate();
}

std::vector<ConfigKey> config_keys() {
  std::vector<ConfigKey> out;
  for (const auto &e : entries())
    out.push_back({e.section, e.key});
  return out;
}

Config parse_config(std::string_view text, const std::string &source) {
  Config cfg;
  std::string section;
  std::set<std::string> seen;
  std::size_t line_no = 0;
  struct Pending {
    const Entry *entry = nullptr;
    std::string value, where;
  } deferred;
  auto apply = [&cfg](const Entry &entry, const std::string &value, const std::string &where) {
    try {
      entry.set(cfg, value);
    } catch (const std::exception &e) {
      fail(ErrorKind::Config, where + "bad value \"" + value + "\" for key \"" + entry.key +
                                  "\": " + e.what());
    }
  };
  std::istringstream in{std::string(text)};
  for (std::string raw; std::getline(in, raw);) {
    ++line_no;
    const std::string where = source + ":" + std::to_string(line_no) + ": ";
    const auto hash = raw.find('#');
    const std::string line = trim(std::string_view(raw).substr(0, hash));
    if (line.empty())
      continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        fail(ErrorKind::Config, where + "malformed section header \"" + line + "\"");
      section = trim(std::string_view(line).substr(1, line.size() - 2));
      bool known = false;
      for (const auto &e : entries())
        known = known || section == e.section;
      if (!known)
        fail(ErrorKind::Config, where + "unknown section [" + section + "]");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      fail(ErrorKind::Config, where + "expected key = value, got \"" + line + "\"");
    const std::string key = trim(std::string_view(line).substr(0, eq));
    const std::string value = trim(std::string_view(line).substr(eq + 1));
    if (section.empty())
      fail(ErrorKind::Config, where + "key \"" + key + "\" outside any section");
    const Entry *entry = nullptr;
    for (const auto &e : entries())
      if (section == e.section && key == e.key)
        entry = &e;
    if (!entry)
      fail(ErrorKind::Config, where + "unknown key \"" + key + "\" in [" + section + "]");
    if (!seen.insert(section + "." + key).second)
      fail(ErrorKind::Config, where + "repeated key \"" + key + "\" in [" + section + "]");
    // kd applies last so "kd = none" is not undone by a later kd weight.
    if (std::string_view(entry->key) == "kd")
      deferred = {entry, value, where};
    else
      apply(*entry, value, where);
  }
  if (deferred.entry)
    apply(*deferred.entry, deferred.value, deferred.where);
  try {
    cfg.validate();
  } catch (const Error &e) {
    fail(ErrorKind::Config, source + ": " + e.what());
  }
  return cfg;
}

Config load_config(const std::string &path) {
  const auto bytes = read_file(path);
  return parse_config(std::string_view(reinterpret_cast<const char *>(bytes.data()), bytes.size()),
                      path);
}

std::string format_config(const Config &cfg) {
  std::string out, section;
  for (const auto &e : entries()) {
    if (section != e.section) {
      section = e.section;
      out += (out.empty() ? "[" : "\n[") + section + "]\n";
    }
    out += std::string(e.key) + " = " + e.get(cfg) + "\n";
  }
  return out;
}

} // namespace edgecloud::io
