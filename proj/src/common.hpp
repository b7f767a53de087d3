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

#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>

namespace dmt {

enum class ErrorKind { Argument, Format, Io, Config, Contract, Training, Runtime };

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

struct ArgumentError : Error {
  explicit ArgumentError(const std::string& what) : Error(ErrorKind::Argument, what) {}
};

struct ContractError : Error {
  explicit ContractError(const std::string& what) : Error(ErrorKind::Contract, what) {}
};

struct IoError : Error {
  explicit IoError(const std::string& what) : Error(ErrorKind::Io, what) {}
};

struct TrainingError : Error {
  explicit TrainingError(const std::string& what) : Error(ErrorKind::Training, what) {}
};

// Malformed binary payload; offset is the byte position where decoding failed.
class FormatError : public Error {
 public:
  FormatError(const std::string& what, std::uint64_t offset)
      : Error(ErrorKind::Format, what + " (at byte offset " + std::to_string(offset) + ")"),
        offset_(offset) {}
  std::uint64_t offset() const noexcept { return offset_; }

 private:
  std::uint64_t offset_;
};

// Config schema violation; line is 1-based, 0 when not tied to a line.
class ConfigError : public Error {
 public:
  ConfigError(const std::string& what, int line = 0)
      : Error(ErrorKind::Config, line > 0 ? "line " + std::to_string(line) + ": " + what : what),
        line_(line) {}
  int line() const noexcept { return line_; }

 private:
  int line_;
};

constexpr std::uint64_t fnv1a(std::string_view s, std::uint64_t h = 1469598103934665603ULL) {
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

inline std::uint64_t fnv1a_bytes(const void* data, std::size_t n,
                                 std::uint64_t h = 1469598103934665603ULL) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 1099511628211ULL;
  }
  return h;
}

constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Seed splitting rule: every random stream in the project is keyed by
// (top-level seed, role tag, index) so that streams never depend on the
// order in which work is scheduled.
constexpr std::uint64_t stream_seed(std::uint64_t seed, std::string_view tag,
                                    std::uint64_t index) {
  return mix64(mix64(seed) ^ mix64(fnv1a(tag)) ^ mix64(index * 0x2545f4914f6cdd1dULL + 1));
}

// mt19937_64 with distribution code written out so that draws are identical
// across standard library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  Rng(std::uint64_t seed, std::string_view tag, std::uint64_t index)
      : engine_(stream_seed(seed, tag, index)) {}

  std::uint64_t next() { return engine_(); }

  // Uniform in [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) {
    return static_cast<std::uint64_t>((static_cast<unsigned __int128>(engine_()) * n) >> 64);
  }

  double normal();

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

enum class LogLevel { Error = 0, Info = 1, Debug = 2 };

// Level comes from DMT_LOG={error,info,debug}; default info.
LogLevel log_level();
void log_message(LogLevel level, const std::string& msg);

inline void log_info(const std::string& msg) { log_message(LogLevel::Info, msg); }
inline void log_debug(const std::string& msg) { log_message(LogLevel::Debug, msg); }
inline void log_error(const std::string& msg) { log_message(LogLevel::Error, msg); }

}  // namespace dmt
