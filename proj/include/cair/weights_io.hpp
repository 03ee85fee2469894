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

#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "cair/param_store.hpp"
#include "cair/tensor.hpp"

namespace cair {

enum class DType : uint8_t { kF32 = 0, kF64 = 1 };

/// One named array. Values are held as doubles, which is exact for both dtypes.
struct WeightEntry {
  std::string name;
  Shape shape;
  DType dtype = DType::kF32;
  std::vector<double> values;
};

/// In-memory form of a "CAIRW1" container:
///   magic "CAIRW1" | version u32 | count u64 |
///   entries [name_len u32, name, rank u8, dims u64 x rank, dtype u8, payload] |
///   CRC32 of everything before it.
/// All integers and payloads are little-endian.
class WeightsFile {
 public:
  static constexpr uint32_t kVersion = 1;

  void add(WeightEntry entry);
  const WeightEntry* find(const std::string& name) const;
  const std::vector<WeightEntry>& entries() const { return entries_; }

  std::vector<uint8_t> serialize() const;
  /// Throws IoError("corrupt weights: ...") on bad magic, truncation or CRC mismatch.
  static WeightsFile parse(const std::vector<uint8_t>& bytes);

  void save(const std::string& path) const;
  static WeightsFile load(const std::string& path);

 private:
  std::vector<WeightEntry> entries_;
  std::unordered_map<std::string, size_t> index_;
};

template <typename T>
constexpr DType dtype_of() {
  return sizeof(T) == 4 ? DType::kF32 : DType::kF64;
}

template <typename T>
WeightEntry make_entry(const std::string& name, const Tensor<T>& t) {
  return {name, t.shape(), dtype_of<T>(), std::vector<double>(t.data().begin(), t.data().end())};
}

/// Adds every parameter of `store` under `prefix + name`.
template <typename T>
void append_params(WeightsFile& file, const ParamStore<T>& store, const std::string& prefix = "") {
  for (const auto& [name, t] : store.entries()) file.add(make_entry(prefix + name, t));
}

template <typename T>
WeightsFile to_weights(const ParamStore<T>& store) {
  WeightsFile file;
  append_params(file, store);
  return file;
}

/// Copies `prefix + name` entries into `store`. Every parameter must be
/// present with a matching shape; extra entries are ignored. The error for a
/// shape mismatch names the first offending entry with both dims.
template <typename T>
void load_params(ParamStore<T>& store, const WeightsFile& file, const std::string& prefix = "") {
  for (const auto& [name, t] : store.entries()) {
    const WeightEntry* e = file.find(prefix + name);
    if (e == nullptr) throw ContractError("weights lack entry '" + prefix + name + "'");
    if (e->shape != t.shape())
      throw ContractError("shape mismatch at entry '" + prefix + name + "': expected " +
                          t.shape().str() + ", got " + e->shape.str());
  }
  for (const auto& [name, t] : store.entries()) {
    const WeightEntry* e = file.find(prefix + name);
    Tensor<T> dst = t;
    auto d = dst.mutable_data();
    for (size_t i = 0; i < d.size(); ++i) d[i] = static_cast<T>(e->values[i]);
  }
}

}  // namespace cair
