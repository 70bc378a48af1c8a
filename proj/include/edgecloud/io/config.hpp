// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <edgecloud/gate/gate.hpp>
#include <edgecloud/gate/qbc.hpp>
#include <edgecloud/nn/train.hpp>
#include <edgecloud/rl/reinforce.hpp>
#include <edgecloud/runtime/profile.hpp>

namespace edgecloud::io {

struct GateSettings {
  gate::GateKind kind = gate::GateKind::LinearSvm;
  gate::QbcConfig qbc;
  std::uint64_t seed = 1;
};

/**
 * @brief Every pipeline setting. Sections [train], [compress], [gate] and
 * [bench]; any key may be omitted and keeps its default.
 */
struct Config {
  nn::TrainConfig train;
  rl::CompressConfig compress;
  GateSettings gate;
  runtime::NetProfile bench;

  /// Config error on the first invalid section.
  void validate() const;
};

/**
 * @brief Parses `[section]` headers and `key = value` lines. `#` starts a
 * comment. Unknown sections or keys, repeated keys and malformed values are
 * config errors naming the source line and the key.
 */
Config parse_config(std::string_view text, const std::string &source = "config");
Config load_config(const std::string &path);

/// Every key with its current value; parse_config(format_config(c)) == c.
std::string format_config(const Config &cfg);

struct ConfigKey {
  std::string section;
  std::string key;
};

/// All recognized keys in canonical order.
std::vector<ConfigKey> config_keys();

} // namespace edgecloud::io
