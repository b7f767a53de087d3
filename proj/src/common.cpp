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

#include "common.hpp"
#include "parallel.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <mutex>

namespace dmt {

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u = 0.0;
  while (u <= 0.0) u = uniform();
  const double v = uniform();
  const double r = std::sqrt(-2.0 * std::log(u));
  const double theta = 2.0 * M_PI * v;
  spare_ = r * std::sin(theta);
  has_spare_ = true;
  return r * std::cos(theta);
}

LogLevel log_level() {
  static const LogLevel level = [] {
    const char* env = std::getenv("DMT_LOG");
    if (env == nullptr) return LogLevel::Info;
    if (std::strcmp(env, "error") == 0) return LogLevel::Error;
    if (std::strcmp(env, "debug") == 0) return LogLevel::Debug;
    return LogLevel::Info;
  }();
  return level;
}

void log_message(LogLevel level, const std::string& msg) {
  if (static_cast<int>(level) > static_cast<int>(log_level())) return;
  static std::mutex mu;
  static const char* names[] = {"error", "info", "debug"};
  std::lock_guard<std::mutex> lock(mu);
  std::fprintf(stderr, "[dmt %s] %s\n", names[static_cast<int>(level)], msg.c_str());
}

namespace {
std::atomic<unsigned> g_max_jobs{0};
}

void set_max_jobs(unsigned jobs) { g_max_jobs = jobs; }

unsigned max_jobs() {
  const unsigned j = g_max_jobs.load();
  if (j != 0) return j;
  return std::max(1u, std::thread::hardware_concurrency());
}

}  // namespace dmt
