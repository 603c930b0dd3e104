// Copyright 2026 The EPO Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef EPO_CHECKPOINT_HPP_
#define EPO_CHECKPOINT_HPP_

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

#include "epo/error.hpp"
#include "epo/ledger.hpp"
#include "epo/nn.hpp"
#include "epo/text.hpp"

namespace epo {

inline constexpr std::string_view kCheckpointFormat = "epo-checkpoint/1";

/// Network weights plus enough context to reuse them. Stored as
/// `key=value` lines; weights are written in shortest round-trip decimal so
/// a save/load cycle is bit-exact.
struct Checkpoint {
  std::string environment;
  NetworkSpec spec;
  ParameterVector params;
  std::uint64_t seed = 0;
  LedgerCounts ledger;
};

inline void write_checkpoint(std::ostream& out, const Checkpoint& c) {
  out << "format=" << kCheckpointFormat << '\n';
  out << "environment=" << c.environment << '\n';
  out << "network.input=" << c.spec.input_dim << '\n';
  out << "network.hidden=";
  for (std::size_t i = 0; i < c.spec.hidden.size(); ++i)
    out << (i ? "," : "") << c.spec.hidden[i];
  out << '\n';
  out << "network.actions=" << c.spec.action_count << '\n';
  out << "seed=" << c.seed << '\n';
  out << "ledger.steps_pretrain=" << c.ledger.pretrain << '\n';
  out << "ledger.steps_finetune=" << c.ledger.finetune << '\n';
  out << "ledger.steps_eval=" << c.ledger.eval << '\n';
  out << "ledger.steps_baseline=" << c.ledger.baseline << '\n';
  out << "weights.count=" << c.params.size() << '\n';
  out << "weights=";
  const auto v = c.params.values();
  for (std::size_t i = 0; i < v.size(); ++i)
    out << (i ? " " : "") << text::format_double(v[i]);
  out << '\n';
}

inline Checkpoint read_checkpoint(std::istream& in) {
  std::map<std::string, std::string, std::less<>> kv;
  std::string line;
  while (std::getline(in, line)) {
    const auto t = text::trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string_view::npos)
      throw ConfigError("checkpoint: malformed line '" + std::string(t) + "'");
    kv.emplace(std::string(t.substr(0, eq)), std::string(t.substr(eq + 1)));
  }
  auto get = [&](std::string_view key) -> const std::string& {
    auto it = kv.find(key);
    if (it == kv.end()) throw ConfigError("checkpoint: missing key '" + std::string(key) + "'");
    return it->second;
  };
  if (get("format") != kCheckpointFormat)
    throw ConfigError("checkpoint: unsupported format '" + get("format") + "'");

  Checkpoint c;
  c.environment = get("environment");
  c.spec.input_dim = text::parse_int<std::size_t>(get("network.input"), "network.input");
  c.spec.hidden.clear();
  for (auto h : text::split(get("network.hidden"), ','))
    c.spec.hidden.push_back(text::parse_int<std::size_t>(h, "network.hidden"));
  c.spec.action_count =
      text::parse_int<std::size_t>(get("network.actions"), "network.actions");
  c.seed = text::parse_int<std::uint64_t>(get("seed"), "seed");
  c.ledger.pretrain = text::parse_int<std::uint64_t>(get("ledger.steps_pretrain"));
  c.ledger.finetune = text::parse_int<std::uint64_t>(get("ledger.steps_finetune"));
  c.ledger.eval = text::parse_int<std::uint64_t>(get("ledger.steps_eval"));
  c.ledger.baseline = text::parse_int<std::uint64_t>(get("ledger.steps_baseline"));

  const auto count = text::parse_int<std::size_t>(get("weights.count"), "weights.count");
  std::vector<double> values;
  values.reserve(count);
  std::istringstream ws(get("weights"));
  std::string tok;
  while (ws >> tok) values.push_back(text::parse_double(tok, "weights"));
  if (values.size() != count)
    throw ConfigError("checkpoint: weights.count says " + std::to_string(count) +
                      " but " + std::to_string(values.size()) + " values found");
  c.params = ParameterVector(c.spec.layout(), std::move(values));
  return c;
}

inline void save_checkpoint(const std::filesystem::path& path, const Checkpoint& c) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write checkpoint " + path.string());
  write_checkpoint(out, c);
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read checkpoint " + path.string());
  return read_checkpoint(in);
}

}  // namespace epo

#endif  // EPO_CHECKPOINT_HPP_
