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

#include "cair/weights_io.hpp"

#include <zlib.h>

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

namespace cair {

namespace {

constexpr char kMagic[6] = {'C', 'A', 'I', 'R', 'W', '1'};

class Writer {
 public:
  void bytes(const void* p, size_t n) {
    const auto* b = static_cast<const uint8_t*>(p);
    out.insert(out.end(), b, b + n);
  }
  template <typename U>
  void uint(U v) {
    for (size_t i = 0; i < sizeof(U); ++i) out.push_back(static_cast<uint8_t>(v >> (8 * i)));
  }
  std::vector<uint8_t> out;
};

class Reader {
 public:
  explicit Reader(const std::vector<uint8_t>& b, size_t end) : buf(b), limit(end) {}
  void need(size_t n) const {
    if (n > limit - pos) throw IoError("corrupt weights: truncated file");
  }
  template <typename U>
  U uint() {
    need(sizeof(U));
    U v = 0;
    for (size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(static_cast<U>(buf[pos + i]) << (8 * i));
    pos += sizeof(U);
    return v;
  }
  std::string str(size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(buf.data() + pos), n);
    pos += n;
    return s;
  }
  const std::vector<uint8_t>& buf;
  size_t limit;
  size_t pos = 0;
};

uint32_t crc_of(const uint8_t* data, size_t n) {
  uLong crc = crc32(0L, Z_NULL, 0);
  // zlib takes uInt lengths; feed in chunks.
  while (n > 0) {
    const uInt chunk = static_cast<uInt>(std::min<size_t>(n, 1u << 30));
    crc = crc32(crc, data, chunk);
    data += chunk;
    n -= chunk;
  }
  return static_cast<uint32_t>(crc);
}

}  // namespace

void WeightsFile::add(WeightEntry entry) {
  require(!index_.contains(entry.name), "duplicate weights entry '" + entry.name + "'");
  require(static_cast<int64_t>(entry.values.size()) == entry.shape.numel(),
          "weights entry '" + entry.name + "': value count does not match shape");
  index_.emplace(entry.name, entries_.size());
  entries_.push_back(std::move(entry));
}

const WeightEntry* WeightsFile::find(const std::string& name) const {
  auto it = index_.find(name);
  return it == index_.end() ? nullptr : &entries_[it->second];
}

std::vector<uint8_t> WeightsFile::serialize() const {
  Writer w;
  w.bytes(kMagic, sizeof(kMagic));
  w.uint<uint32_t>(kVersion);
  w.uint<uint64_t>(entries_.size());
  for (const auto& e : entries_) {
    w.uint<uint32_t>(static_cast<uint32_t>(e.name.size()));
    w.bytes(e.name.data(), e.name.size());
    w.uint<uint8_t>(static_cast<uint8_t>(e.shape.rank()));
    for (int64_t d : e.shape.dims()) w.uint<uint64_t>(static_cast<uint64_t>(d));
    w.uint<uint8_t>(static_cast<uint8_t>(e.dtype));
    if (e.dtype == DType::kF32) {
      for (double v : e.values) w.uint<uint32_t>(std::bit_cast<uint32_t>(static_cast<float>(v)));
    } else {
      for (double v : e.values) w.uint<uint64_t>(std::bit_cast<uint64_t>(v));
    }
  }
  w.uint<uint32_t>(crc_of(w.out.data(), w.out.size()));
  return std::move(w.out);
}

WeightsFile WeightsFile::parse(const std::vector<uint8_t>& bytes) {
  if (bytes.size() < sizeof(kMagic) + 4 + 8 + 4) throw IoError("corrupt weights: file too short");
  if (std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0)
    throw IoError("corrupt weights: bad magic");
  const size_t body = bytes.size() - 4;
  Reader tail(bytes, bytes.size());
  tail.pos = body;
  if (tail.uint<uint32_t>() != crc_of(bytes.data(), body))
    throw IoError("corrupt weights: CRC mismatch");

  Reader r(bytes, body);
  r.pos = sizeof(kMagic);
  const uint32_t version = r.uint<uint32_t>();
  if (version != kVersion)
    throw IoError("corrupt weights: unsupported version " + std::to_string(version));
  const uint64_t count = r.uint<uint64_t>();
  WeightsFile file;
  for (uint64_t i = 0; i < count; ++i) {
    WeightEntry e;
    e.name = r.str(r.uint<uint32_t>());
    if (file.index_.contains(e.name)) throw IoError("corrupt weights: duplicate entry '" + e.name + "'");
    const int rank = r.uint<uint8_t>();
    if (rank > Shape::kMaxRank) throw IoError("corrupt weights: rank " + std::to_string(rank));
    std::vector<int64_t> dims;
    uint64_t numel = 1;
    for (int d = 0; d < rank; ++d) {
      const uint64_t v = r.uint<uint64_t>();
      if (v > (uint64_t{1} << 40)) throw IoError("corrupt weights: extent out of range");
      dims.push_back(static_cast<int64_t>(v));
      numel *= v;
      if (numel > body) throw IoError("corrupt weights: truncated file");
    }
    e.shape = Shape(std::span<const int64_t>(dims));
    const uint8_t dtype = r.uint<uint8_t>();
    if (dtype > 1) throw IoError("corrupt weights: unknown dtype " + std::to_string(dtype));
    e.dtype = static_cast<DType>(dtype);
    r.need(numel * (dtype == 0 ? 4 : 8));
    e.values.resize(numel);
    for (auto& v : e.values)
      v = dtype == 0 ? static_cast<double>(std::bit_cast<float>(r.uint<uint32_t>()))
                     : std::bit_cast<double>(r.uint<uint64_t>());
    file.index_.emplace(e.name, file.entries_.size());
    file.entries_.push_back(std::move(e));
  }
  if (r.pos != body) throw IoError("corrupt weights: trailing bytes");
  return file;
}

void WeightsFile::save(const std::string& path) const {
  const std::vector<uint8_t> bytes = serialize();
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for '" + path + "'");
}

WeightsFile WeightsFile::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse(bytes);
}

}  // namespace cair
