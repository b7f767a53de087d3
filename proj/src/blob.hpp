// Copyright 2026 The DMT Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Little-endian byte streams for the on-disk formats.

#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "common.hpp"

namespace dmt {

static_assert(std::endian::native == std::endian::little, "blob encoding assumes a little-endian host");

class ByteWriter {
 public:
  void bytes(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    buf_.insert(buf_.end(), b, b + n);
  }
  void magic(std::string_view m) { bytes(m.data(), m.size()); }
  void u8(std::uint8_t v) { buf_.push_back(v); }
  void u32(std::uint32_t v) { bytes(&v, 4); }
  void u64(std::uint64_t v) { bytes(&v, 8); }
  void i32(std::int32_t v) { bytes(&v, 4); }
  void f32(float v) { bytes(&v, 4); }
  void f64(double v) { bytes(&v, 8); }
  void str(std::string_view s) {
    u32(static_cast<std::uint32_t>(s.size()));
    bytes(s.data(), s.size());
  }
  template <typename T>
  void array(std::span<const T> v) {
    u64(v.size());
    bytes(v.data(), v.size() * sizeof(T));
  }
  template <typename T>
  void array(const std::vector<T>& v) { array(std::span<const T>(v)); }

  std::vector<std::uint8_t>& buffer() { return buf_; }
  std::vector<std::uint8_t> take() { return std::move(buf_); }

 private:
  std::vector<std::uint8_t> buf_;
};

class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> data) : data_(data) {}

  std::size_t offset() const { return pos_; }
  std::size_t remaining() const { return data_.size() - pos_; }

  void need(std::size_t n, const char* what) const {
    if (remaining() < n) throw FormatError(std::string("truncated payload reading ") + what, pos_);
  }
  void bytes(void* out, std::size_t n, const char* what) {
    need(n, what);
    std::memcpy(out, data_.data() + pos_, n);
    pos_ += n;
  }
  void expect_magic(std::string_view m) {
    need(m.size(), "magic");
    if (std::memcmp(data_.data() + pos_, m.data(), m.size()) != 0)
      throw FormatError("bad magic, expected \"" + std::string(m) + "\"", pos_);
    pos_ += m.size();
  }
  std::uint8_t u8(const char* what) {
    std::uint8_t v;
    bytes(&v, 1, what);
    return v;
  }
  std::uint32_t u32(const char* what) {
    std::uint32_t v;
    bytes(&v, 4, what);
    return v;
  }
  std::uint64_t u64(const char* what) {
    std::uint64_t v;
    bytes(&v, 8, what);
    return v;
  }
  std::int32_t i32(const char* what) {
    std::int32_t v;
    bytes(&v, 4, what);
    return v;
  }
  float f32(const char* what) {
    float v;
    bytes(&v, 4, what);
    return v;
  }
  double f64(const char* what) {
    double v;
    bytes(&v, 8, what);
    return v;
  }
  std::string str(const char* what) {
    const std::uint32_t n = u32(what);
    need(n, what);
    std::string s(reinterpret_cast<const char*>(data_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  template <typename T>
  std::vector<T> array(const char* what) {
    const std::uint64_t n = u64(what);
    if (n > remaining() / sizeof(T)) throw FormatError(std::string("array length overflow in ") + what, pos_);
    std::vector<T> v(n);
    bytes(v.data(), n * sizeof(T), what);
    return v;
  }

 private:
  std::span<const std::uint8_t> data_;
  std::size_t pos_ = 0;
};

}  // namespace dmt
