/* Copyright 2026 The lrag Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/
#pragma once

// Named-matrix container in the common checkpoint layout:
//
//   [u64 LE header_len][header_len bytes of JSON][raw little-endian buffer]
//
// The JSON maps tensor names to {"dtype", "shape", "data_offsets"} with
// offsets relative to the buffer start, plus an optional "__metadata__"
// object of string values. F32 and F64 are accepted; everything is widened
// to double in memory.

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "lrag/error.hpp"
#include "lrag/matrix.hpp"

namespace lrag {

enum class Dtype { F32, F64 };

struct TensorStore {
  std::map<std::string, Matrix> entries;
  std::map<std::string, std::string> metadata;

  bool contains(const std::string& name) const { return entries.count(name) != 0; }

  void put(const std::string& name, Matrix m) { entries.insert_or_assign(name, std::move(m)); }

  bool operator==(const TensorStore&) const = default;
};

inline const Matrix& get_matrix(const TensorStore& store, const std::string& name) {
  auto it = store.entries.find(name);
  if (it == store.entries.end()) fail(ErrorCode::NameNotFound, "no tensor named '" + name + "'");
  return it->second;
}

namespace detail {

inline std::uint64_t read_u64_le(const unsigned char* p) {
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | p[i];
  return v;
}

inline void write_u64_le(std::ostream& os, std::uint64_t v) {
  unsigned char bytes[8];
  for (int i = 0; i < 8; ++i) bytes[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
  os.write(reinterpret_cast<const char*>(bytes), 8);
}

template <typename UInt>
UInt byteswap_if_big(UInt v) {
  if constexpr (std::endian::native == std::endian::little) {
    return v;
  } else {
    UInt out = 0;
    for (std::size_t i = 0; i < sizeof(UInt); ++i) out = (out << 8) | ((v >> (8 * i)) & 0xff);
    return out;
  }
}

inline void decode_buffer(const std::vector<unsigned char>& raw, Dtype dtype, std::vector<double>& out) {
  if (dtype == Dtype::F64) {
    for (std::size_t i = 0; i < out.size(); ++i) {
      std::uint64_t bits;
      std::memcpy(&bits, raw.data() + 8 * i, 8);
      out[i] = std::bit_cast<double>(byteswap_if_big(bits));
    }
  } else {
    for (std::size_t i = 0; i < out.size(); ++i) {
      std::uint32_t bits;
      std::memcpy(&bits, raw.data() + 4 * i, 4);
      out[i] = static_cast<double>(std::bit_cast<float>(byteswap_if_big(bits)));
    }
  }
}

inline std::size_t dtype_size(Dtype d) { return d == Dtype::F64 ? 8 : 4; }

}  // namespace detail

using TensorFilter = std::function<bool(const std::string&)>;

/// Loads a tensor file. When `filter` is given, only matching entries are
/// decoded; the rest are still bounds-checked but may use any dtype.
inline TensorStore load_tensor_file(const std::filesystem::path& path, const TensorFilter& filter = {}) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::IoFailure, "cannot open '" + path.string() + "'");
  in.seekg(0, std::ios::end);
  const auto file_size = static_cast<std::uint64_t>(in.tellg());
  in.seekg(0, std::ios::beg);

  if (file_size < 8) fail(ErrorCode::MalformedHeader, "file shorter than the 8-byte length prefix");
  unsigned char prefix[8];
  in.read(reinterpret_cast<char*>(prefix), 8);
  const std::uint64_t header_len = detail::read_u64_le(prefix);
  if (header_len > file_size - 8)
    fail(ErrorCode::MalformedHeader, "header length " + std::to_string(header_len) + " exceeds file size");

  std::string header(static_cast<std::size_t>(header_len), '\0');
  in.read(header.data(), static_cast<std::streamsize>(header_len));
  if (!in) fail(ErrorCode::IoFailure, "short read on header");

  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(header);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::MalformedHeader, std::string("invalid header JSON: ") + e.what());
  }
  if (!doc.is_object()) fail(ErrorCode::MalformedHeader, "header is not a JSON object");

  const std::uint64_t buffer_start = 8 + header_len;
  const std::uint64_t buffer_size = file_size - buffer_start;

  TensorStore store;
  for (const auto& [name, entry] : doc.items()) {
    if (name == "__metadata__") {
      if (!entry.is_object()) fail(ErrorCode::MalformedHeader, "__metadata__ is not an object");
      for (const auto& [k, v] : entry.items()) {
        if (!v.is_string()) fail(ErrorCode::MalformedHeader, "metadata value for '" + k + "' is not a string");
        store.metadata[k] = v.get<std::string>();
      }
      continue;
    }
    if (!entry.is_object() || !entry.contains("dtype") || !entry.contains("shape") ||
        !entry.contains("data_offsets"))
      fail(ErrorCode::MalformedHeader, "entry '" + name + "' lacks dtype/shape/data_offsets");
    const auto& shape_j = entry["shape"];
    const auto& offs_j = entry["data_offsets"];
    if (!entry["dtype"].is_string() || !shape_j.is_array() || !offs_j.is_array() || offs_j.size() != 2 ||
        !offs_j[0].is_number_unsigned() || !offs_j[1].is_number_unsigned())
      fail(ErrorCode::MalformedHeader, "entry '" + name + "' has malformed fields");

    std::vector<std::uint64_t> shape;
    std::uint64_t count = 1;
    for (const auto& d : shape_j) {
      if (!d.is_number_unsigned()) fail(ErrorCode::MalformedHeader, "entry '" + name + "' has a bad dimension");
      const auto dim = d.get<std::uint64_t>();
      if (dim != 0 && count > UINT64_MAX / 8 / dim)
        fail(ErrorCode::ShapeMismatch, "entry '" + name + "' shape overflows");
      count *= dim;
      shape.push_back(dim);
    }
    const auto begin = offs_j[0].get<std::uint64_t>();
    const auto end = offs_j[1].get<std::uint64_t>();
    if (begin > end || end > buffer_size)
      fail(ErrorCode::ShapeMismatch, "entry '" + name + "' byte range [" + std::to_string(begin) + ", " +
                                         std::to_string(end) + ") outside buffer of " +
                                         std::to_string(buffer_size) + " bytes");
    if (filter && !filter(name)) continue;

    const std::string dtype_s = entry["dtype"].get<std::string>();
    Dtype dtype;
    if (dtype_s == "F64") dtype = Dtype::F64;
    else if (dtype_s == "F32") dtype = Dtype::F32;
    else fail(ErrorCode::UnsupportedDtype, "entry '" + name + "' has dtype " + dtype_s);

    if (end - begin != count * detail::dtype_size(dtype))
      fail(ErrorCode::ShapeMismatch, "entry '" + name + "' declares " + std::to_string(count) + " " + dtype_s +
                                         " elements but spans " + std::to_string(end - begin) + " bytes");
    if (count == 0) fail(ErrorCode::ShapeMismatch, "entry '" + name + "' is empty");

    // Rank-0/1 tensors become a single row; higher ranks flatten trailing axes.
    std::size_t rows = 1, cols = 1;
    if (shape.size() == 1) {
      cols = static_cast<std::size_t>(shape[0]);
    } else if (shape.size() >= 2) {
      rows = static_cast<std::size_t>(shape[0]);
      cols = static_cast<std::size_t>(count / shape[0]);
    }

    std::vector<unsigned char> raw(static_cast<std::size_t>(end - begin));
    in.seekg(static_cast<std::streamoff>(buffer_start + begin));
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (!in) fail(ErrorCode::IoFailure, "short read on entry '" + name + "'");

    std::vector<double> values(static_cast<std::size_t>(count));
    detail::decode_buffer(raw, dtype, values);
    store.entries.emplace(name, Matrix(rows, cols, std::move(values)));
  }
  return store;
}

/// Writes `store` in the layout above. Entries are laid out in name order and
/// the header is space-padded to a multiple of 8 bytes.
inline void save_tensor_file(const TensorStore& store, const std::filesystem::path& path,
                             Dtype dtype = Dtype::F64) {
  for (const auto& [name, m] : store.entries) {
    if (m.rows < 1 || m.cols < 1 || m.data.size() != m.rows * m.cols)
      fail(ErrorCode::ShapeMismatch, "entry '" + name + "' has an invalid shape");
    if (!m.all_finite()) fail(ErrorCode::InvalidValue, "entry '" + name + "' contains a non-finite value");
    if (dtype == Dtype::F32) {
      for (double v : m.data)
        if (std::abs(v) > static_cast<double>(std::numeric_limits<float>::max()))
          fail(ErrorCode::InvalidValue, "entry '" + name + "' overflows F32");
    }
  }

  nlohmann::json header = nlohmann::json::object();
  std::uint64_t offset = 0;
  const std::size_t esize = detail::dtype_size(dtype);
  for (const auto& [name, m] : store.entries) {
    const std::uint64_t bytes = m.data.size() * esize;
    header[name] = {{"dtype", dtype == Dtype::F64 ? "F64" : "F32"},
                    {"shape", {m.rows, m.cols}},
                    {"data_offsets", {offset, offset + bytes}}};
    offset += bytes;
  }
  if (!store.metadata.empty()) header["__metadata__"] = store.metadata;

  std::string text = header.dump();
  while (text.size() % 8 != 0) text.push_back(' ');

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::IoFailure, "cannot open '" + path.string() + "' for writing");
  detail::write_u64_le(out, text.size());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));

  std::vector<unsigned char> buf;
  for (const auto& [name, m] : store.entries) {
    buf.resize(m.data.size() * esize);
    for (std::size_t i = 0; i < m.data.size(); ++i) {
      if (dtype == Dtype::F64) {
        const auto bits = detail::byteswap_if_big(std::bit_cast<std::uint64_t>(m.data[i]));
        std::memcpy(buf.data() + 8 * i, &bits, 8);
      } else {
        const auto bits = detail::byteswap_if_big(std::bit_cast<std::uint32_t>(static_cast<float>(m.data[i])));
        std::memcpy(buf.data() + 4 * i, &bits, 4);
      }
    }
    out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  }
  if (!out) fail(ErrorCode::IoFailure, "write to '" + path.string() + "' failed");
}

}  // namespace lrag
