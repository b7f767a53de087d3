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


#include <cmath>
#include <cstring>

#include "doctest.h"
#include "synth.hpp"
#include "test_util.hpp"

using namespace dmt;

namespace {

PhantomParams noiseless(int size) {
  PhantomParams p;
  p.size = size;
  p.subjects = 3;
  p.noise_sigma = 0.0;
  p.boundary_irregularity = 0.0;
  p.texture_amplitude = 0.0;
  p.contrast_jitter = 0.0;
  p.tissue_contrast = {0.0, 0.0, 0.0};
  p.blur_sigma = 0.0;
  return p;
}

// Pixels of label >= k never touch pixels of label < k - 1.
bool nested(const LabelMap& l) {
  const int w = l.width(), h = l.height();
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const int a = l.at(x, y);
      if (x + 1 < w && std::abs(a - l.at(x + 1, y)) > 1) return false;
      if (y + 1 < h && std::abs(a - l.at(x, y + 1)) > 1) return false;
    }
  return true;
}

}  // namespace

TEST_CASE("noiseless concentric phantom has exact contrasts and disc regions") {
  const auto p = noiseless(64);
  const auto s = generate_subject(p, 0);
  for (int y = 0; y < 64; ++y)
    for (int x = 0; x < 64; ++x)
      for (int c = 0; c < 3; ++c)
        CHECK(s.image.at(c, x, y) == static_cast<float>(p.contrast[c][s.labels.at(x, y)]));
  for (int k = 1; k <= 3; ++k) {
    double cx = 0.0, cy = 0.0;
    int count = 0;
    for (int y = 0; y < 64; ++y)
      for (int x = 0; x < 64; ++x)
        if (s.labels.at(x, y) >= k) cx += x, cy += y, ++count;
    REQUIRE(count > 0);
    cx /= count;
    cy /= count;
    double r_in = 0.0, r_out = 1e9;
    for (int y = 0; y < 64; ++y)
      for (int x = 0; x < 64; ++x) {
        const double r = std::hypot(x - cx, y - cy);
        if (s.labels.at(x, y) >= k)
          r_in = std::max(r_in, r);
        else
          r_out = std::min(r_out, r);
      }
    CHECK(r_in <= r_out + 1.5);
  }
}

TEST_CASE("same seed gives bit-identical subjects") {
  PhantomParams p;
  p.size = 48;
  p.subjects = 2;
  const auto a = generate(p), b = generate(p);
  for (int i = 0; i < 2; ++i) {
    CHECK(std::memcmp(a[i].image.data().data(), b[i].image.data().data(), a[i].image.data().size() * 4) == 0);
    CHECK(a[i].labels.labels() == b[i].labels.labels());
  }
  p.rng_seed = 43;
  CHECK(generate(p)[0].labels.labels() != a[0].labels.labels());
}

TEST_CASE("regions stay nested and shrink inward") {
  PhantomParams p;
  p.size = 64;
  p.subjects = 100;
  for (int i = 0; i < p.subjects; ++i) {
    const auto s = generate_subject(p, i);
    CHECK(nested(s.labels));
    std::size_t counts[4] = {};
    for (auto v : s.labels.labels()) ++counts[v];
    const std::size_t ht = counts[1] + counts[2] + counts[3], ct = counts[2] + counts[3], et = counts[3];
    CHECK(counts[0] > ht);
    CHECK(ht > ct);
    CHECK(ct > et);
    CHECK(et > 0);
  }
}

TEST_CASE("dataset directory round trip") {
  PhantomParams p;
  p.size = 32;
  p.subjects = 2;
  const auto subs = generate(p);
  const auto dir = test::temp_dir("synth");
  write_dataset(dir, p, subs);
  DatasetManifest m;
  const auto back = read_dataset(dir, &m);
  REQUIRE(back.size() == 2);
  CHECK(back[1].labels.labels() == subs[1].labels.labels());
  CHECK(back[0].image.data() == subs[0].image.data());
  CHECK(m.params.size == 32);
  CHECK(m.params.rng_seed == p.rng_seed);
  CHECK(format_manifest(parse_manifest(format_manifest(m))) == format_manifest(m));
  CHECK(std::system(("rm -rf " + dir).c_str()) == 0);
}

TEST_CASE("manifest parsing rejects malformed input") {
  PhantomParams p;
  p.subjects = 1;
  DatasetManifest m{p, {"a.mdi"}, {"a_labels.mdi"}};
  const auto text = format_manifest(m);
  CHECK_THROWS(parse_manifest(text + "bogus_key = 1\n"));
  CHECK_THROWS(parse_manifest("size = 12\n"));
}

TEST_CASE("invalid phantom parameters are rejected") {
  PhantomParams p;
  p.size = 4;
  CHECK_THROWS_AS(p.validate(), ArgumentError);
  p = PhantomParams{};
  p.noise_sigma = -1.0;
  CHECK_THROWS_AS(p.validate(), ArgumentError);
}
