/*
 * Copyright (c) 2026 The CAIR Authors
 *
 * Licensed under the Apache License, Version 2.0;
 * You may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an 'AS IS' BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "cair/run_config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace cair {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const char* what) {
  throw ContractError("config: key '" + key + "': '" + value + "' is not " + what);
}

template <typename I>
I parse_int(const std::string& key, const std::string& v) {
  I out{};
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) bad_value(key, v, "an integer");
  return out;
}

double parse_double(const std::string& key, const std::string& v) {
  double out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) bad_value(key, v, "a number");
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  bad_value(key, v, "a boolean");
}

std::string fmt(double v) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, p);
}

std::string join(const std::vector<int>& xs) {
  std::string s;
  for (size_t i = 0; i < xs.size(); ++i) s += (i ? "," : "") + std::to_string(xs[i]);
  return s;
}

std::vector<int> parse_list(const std::string& key, const std::string& v) {
  std::vector<int> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_int<int>(key, trim(item)));
  if (out.empty()) bad_value(key, v, "a comma-separated list");
  return out;
}

struct Key {
  std::function<void(const std::string&)> set;
  std::function<std::string()> get;
};

// Ordered section -> key table bound to `c`.
std::vector<std::pair<std::string, std::vector<std::pair<std::string, Key>>>> schema(RunConfig& c) {
  auto& m = c.model;
  auto& t = c.train;
  auto& e = c.ensemble;
  using K = std::pair<std::string, Key>;
  auto dbl = [](const std::string& name, double& ref) {
    return K{name, {[&ref, name](const std::string& v) { ref = parse_double(name, v); },
                    [&ref] { return fmt(ref); }}};
  };
  auto i64 = [](const std::string& name, int64_t& ref) {
    return K{name, {[&ref, name](const std::string& v) { ref = parse_int<int64_t>(name, v); },
                    [&ref] { return std::to_string(ref); }}};
  };
  auto i32 = [](const std::string& name, int& ref) {
    return K{name, {[&ref, name](const std::string& v) { ref = parse_int<int>(name, v); },
                    [&ref] { return std::to_string(ref); }}};
  };
  auto str = [](const std::string& name, std::string& ref) {
    return K{name, {[&ref](const std::string& v) { ref = v; }, [&ref] { return ref; }}};
  };
  std::vector<K> model{
      {"network",
       {[&c](const std::string& v) {
          if (v == "cair") c.network = Network::kCair;
          else if (v == "ensemble") c.network = Network::kEnsemble;
          else bad_value("network", v, "cair or ensemble");
        },
        [&c] { return std::string(c.network == Network::kCair ? "cair" : "ensemble"); }}},
      {"variant",
       {[&m](const std::string& v) { m.variant = parse_variant(v); },
        [&m] { return to_string(m.variant); }}},
      i32("levels", m.levels),
      i64("width", m.width),
      {"blocks",
       {[&m](const std::string& v) { m.blocks = parse_list("blocks", v); },
        [&m] { return join(m.blocks); }}},
      i64("ca_width", m.ca_width),
      dbl("blur_sigma", m.blur_sigma),
      i32("blur_radius", m.blur_radius),
      i32("ensemble_inputs", e.inputs),
      i64("ensemble_width", e.width),
      i32("ensemble_blocks", e.blocks),
  };
  std::vector<K> train{
      dbl("lr_init", t.lr_init),
      dbl("lr_final", t.lr_final),
      i64("total_iters", t.total_iters),
      dbl("adam_beta1", t.adam_beta1),
      dbl("adam_beta2", t.adam_beta2),
      dbl("adam_eps", t.adam_eps),
      dbl("weight_decay", t.weight_decay),
      i32("batch_size", t.batch_size),
      i32("patch_size", t.patch_size),
      dbl("aug_prob", t.aug_prob),
      {"seed",
       {[&t](const std::string& v) { t.seed = parse_int<uint64_t>("seed", v); },
        [&t] { return std::to_string(t.seed); }}},
      i64("log_interval", t.log_interval),
      i64("checkpoint_interval", t.checkpoint_interval),
      str("checkpoint_path", t.checkpoint_path),
  };
  std::vector<K> data{
      str("index", c.data.index),
      str("train_split", c.data.train_split),
      str("eval_split", c.data.eval_split),
  };
  std::vector<K> infer{
      {"tta",
       {[&c](const std::string& v) { c.infer.tta = parse_bool("tta", v); },
        [&c] { return std::string(c.infer.tta ? "true" : "false"); }}},
      i32("tlsc_window", c.infer.tlsc_window),
  };
  return {{"model", model}, {"train", train}, {"data", data}, {"infer", infer}};
}

}  // namespace

RunConfig RunConfig::parse(const std::string& text) {
  RunConfig c;
  auto table = schema(c);
  std::vector<std::pair<std::string, Key>>* section = nullptr;
  std::string section_name;
  std::istringstream in(text);
  std::string raw;
  int lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    const auto hash = raw.find('#');
    const std::string line = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (line.empty()) continue;
    const std::string where = "config line " + std::to_string(lineno) + ": ";
    if (line.front() == '[') {
      require(line.back() == ']', where + "malformed section header");
      section_name = trim(line.substr(1, line.size() - 2));
      section = nullptr;
      for (auto& [name, keys] : table)
        if (name == section_name) section = &keys;
      require(section != nullptr, where + "unknown section [" + section_name + "]");
      continue;
    }
    require(section != nullptr, where + "key outside of a section");
    const auto eq = line.find('=');
    require(eq != std::string::npos, where + "expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    bool found = false;
    for (auto& [name, k] : *section)
      if (name == key) {
        k.set(value);
        found = true;
      }
    require(found, where + "unknown key '" + key + "' in [" + section_name + "]");
  }
  c.model.validate();
  c.ensemble.validate();
  c.train.validate();
  require(c.infer.tlsc_window >= 0, "config: tlsc_window must be non-negative");
  return c;
}

RunConfig RunConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

std::string RunConfig::serialize() const {
  RunConfig copy = *this;
  std::string out;
  for (auto& [section, keys] : schema(copy)) {
    if (!out.empty()) out += '\n';
    out += "[" + section + "]\n";
    for (auto& [name, k] : keys) out += name + " = " + k.get() + "\n";
  }
  return out;
}

}  // namespace cair
