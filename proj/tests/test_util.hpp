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

// Small fixtures shared by the unit tests.

#pragma once

#include <string>
#include <vector>

#include <unistd.h>

#include "common.hpp"
#include "features.hpp"
#include "grid.hpp"

namespace dmt::test {

inline MultiChannelImage random_image(int w, int h, int c, Rng& rng, float lo = 0.0f, float hi = 1.0f) {
  std::vector<float> v(static_cast<std::size_t>(w) * h * c);
  for (auto& x : v) x = static_cast<float>(rng.uniform(lo, hi));
  return MultiChannelImage(w, h, c, std::move(v));
}

inline ProbabilityMap random_probmap(int w, int h, int classes, Rng& rng) {
  ProbabilityMap p(w, h, classes);
  for (std::size_t i = 0; i < p.pixel_count(); ++i)
    for (int k = 0; k < classes; ++k) p.at(k, i) = static_cast<float>(rng.uniform(0.01, 1.0));
  p.normalize();
  return p;
}

inline LabelMap random_labels(int w, int h, int classes, Rng& rng) {
  LabelMap l(w, h, classes);
  for (std::size_t i = 0; i < l.pixel_count(); ++i) l[i] = static_cast<std::uint8_t>(rng.below(classes));
  return l;
}

inline double feature(const FeatureVector& v, const FeatureLayout& layout, const std::string& name) {
  for (std::size_t i = 0; i < layout.names.size(); ++i)
    if (layout.names[i] == name) return v.values.at(i);
  throw ArgumentError("no feature named " + name);
}

inline std::string temp_dir(const std::string& tag) {
  return std::string("/tmp/dmt_test_") + tag + "_" + std::to_string(::getpid());
}

}  // namespace dmt::test
