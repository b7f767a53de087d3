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


#include <algorithm>
#include <cmath>
#include <cstring>

#include "doctest.h"
#include "grid.hpp"
#include "test_util.hpp"

using namespace dmt;

namespace {

// Independent clamp-to-edge block copy.
std::vector<float> naive_patch(const MultiChannelImage& img, int cx, int cy, int side) {
  std::vector<float> out;
  const int x0 = cx - side / 2, y0 = cy - side / 2;
  for (int c = 0; c < img.channels(); ++c)
    for (int dy = 0; dy < side; ++dy)
      for (int dx = 0; dx < side; ++dx) {
        int x = x0 + dx, y = y0 + dy;
        if (x < 0) x = 0;
        if (y < 0) y = 0;
        if (x >= img.width()) x = img.width() - 1;
        if (y >= img.height()) y = img.height() - 1;
        out.push_back(img.at(c, x, y));
      }
  return out;
}

}  // namespace

TEST_CASE("extract_patch on a constant image") {
  MultiChannelImage img(7, 6, 1, 5.0f);
  const auto p = extract_patch(img, {3, 2}, 3);
  CHECK(p.size() == 9);
  for (float v : p) CHECK(v == 5.0f);
}

TEST_CASE("extract_patch replicates a single pixel") {
  MultiChannelImage img(1, 1, 2, std::vector<float>{0.25f, 0.75f});
  const auto p = extract_patch(img, {0, 0}, 3);
  REQUIRE(p.size() == 18);
  for (int i = 0; i < 9; ++i) CHECK(p[i] == 0.25f);
  for (int i = 9; i < 18; ++i) CHECK(p[i] == 0.75f);
}

TEST_CASE("extract_patch even side uses the top-left-of-center origin") {
  std::vector<float> v(16);
  for (int i = 0; i < 16; ++i) v[i] = static_cast<float>(i);
  MultiChannelImage img(4, 4, 1, v);
  const auto p = extract_patch(img, {1, 1}, 2);
  CHECK(p == std::vector<float>{0.0f, 1.0f, 4.0f, 5.0f});
  CHECK(patch_origin(5, 10) == 0);
  CHECK(patch_origin(5, 7) == 2);
}

TEST_CASE("extract_patch matches a naive oracle on random triples") {
  Rng rng(7, "test.patch", 0);
  for (int t = 0; t < 1000; ++t) {
    const int w = 1 + static_cast<int>(rng.below(12)), h = 1 + static_cast<int>(rng.below(12));
    const int c = 1 + static_cast<int>(rng.below(3));
    const auto img = test::random_image(w, h, c, rng);
    const int cx = static_cast<int>(rng.below(w)), cy = static_cast<int>(rng.below(h));
    const int side = 1 + static_cast<int>(rng.below(11));
    REQUIRE(extract_patch(img, {cx, cy}, side) == naive_patch(img, cx, cy, side));
  }
}

TEST_CASE("argmax_labels") {
  SUBCASE("clear winner") {
    ProbabilityMap p(1, 1, 2, std::vector<float>{0.1f, 0.9f});
    CHECK(argmax_labels(p)[0] == 1);
  }
  SUBCASE("tie goes to the lowest class") {
    ProbabilityMap p(1, 1, 2, std::vector<float>{0.5f, 0.5f});
    CHECK(argmax_labels(p)[0] == 0);
  }
  SUBCASE("random map against a per-pixel scan") {
    Rng rng(11, "test.argmax", 0);
    const auto p = test::random_probmap(8, 8, 4, rng);
    const auto l = argmax_labels(p);
    for (std::size_t i = 0; i < p.pixel_count(); ++i) {
      int best = 0;
      for (int k = 1; k < 4; ++k)
        if (p.at(k, i) > p.at(best, i)) best = k;
      CHECK(l[i] == best);
    }
  }
}

TEST_CASE("average_maps") {
  Rng rng(3, "test.average", 0);
  SUBCASE("identical maps are a fixed point") {
    const auto a = test::random_probmap(5, 4, 3, rng);
    const auto m = average_maps(std::vector<ProbabilityMap>{a, a});
    for (std::size_t i = 0; i < a.values().size(); ++i) CHECK(m.values()[i] == doctest::Approx(a.values()[i]).epsilon(1e-6));
  }
  SUBCASE("opposite one-hot vectors") {
    ProbabilityMap a(1, 1, 2, std::vector<float>{1.0f, 0.0f});
    ProbabilityMap b(1, 1, 2, std::vector<float>{0.0f, 1.0f});
    const auto m = average_maps(std::vector<ProbabilityMap>{a, b});
    CHECK(m.at(0, 0) == 0.5f);
    CHECK(m.at(1, 0) == 0.5f);
  }
  SUBCASE("three random maps against a scalar loop") {
    std::vector<ProbabilityMap> maps;
    for (int i = 0; i < 3; ++i) maps.push_back(test::random_probmap(6, 7, 4, rng));
    const auto m = average_maps(maps);
    CHECK(m.is_valid());
    for (std::size_t i = 0; i < m.values().size(); ++i) {
      const double oracle =
          (static_cast<double>(maps[0].values()[i]) + maps[1].values()[i] + maps[2].values()[i]) / 3.0;
      CHECK(std::abs(m.values()[i] - oracle) < 1e-6);
    }
  }
  SUBCASE("mismatched shapes are rejected") {
    std::vector<ProbabilityMap> maps{ProbabilityMap::uniform(2, 2, 3), ProbabilityMap::uniform(2, 3, 3)};
    CHECK_THROWS_AS(average_maps(maps), ArgumentError);
  }
}

TEST_CASE("probability map normalization") {
  ProbabilityMap p(2, 1, 3, std::vector<float>{2.0f, 0.0f, 1.0f, 0.0f, 1.0f, 0.0f});
  CHECK_FALSE(p.is_valid());
  p.normalize();
  CHECK(p.is_valid());
  // class-major storage: pixel 0 holds (2, 1, 1), pixel 1 is all zero
  CHECK(p.at(0, 0) == doctest::Approx(0.5));
  CHECK(p.at(1, 0) == doctest::Approx(0.25));
  CHECK(p.at(0, 1) == doctest::Approx(1.0 / 3.0));
  ProbabilityMap bad(1, 1, 2, std::vector<float>{std::nanf(""), 1.0f});
  CHECK_FALSE(bad.is_valid());
  CHECK_THROWS(bad.validate());
}

TEST_CASE("MDI round trips are bit-exact") {
  Rng rng(5, "test.mdi", 0);
  const auto img = test::random_image(9, 5, 3, rng, -2.0f, 3.0f);
  const auto lab = test::random_labels(9, 5, 4, rng);
  const auto pm = test::random_probmap(9, 5, 4, rng);

  const auto img2 = decode_mdi_image(encode_mdi(img));
  CHECK(std::memcmp(img2.data().data(), img.data().data(), img.data().size() * sizeof(float)) == 0);
  CHECK(img2.channels() == 3);
  const auto lab2 = decode_mdi_labels(encode_mdi(lab));
  CHECK(lab2.labels() == lab.labels());
  CHECK(lab2.classes() == 4);
  const auto pm2 = decode_mdi_probmap(encode_mdi(pm));
  CHECK(std::memcmp(pm2.values().data(), pm.values().data(), pm.values().size() * sizeof(float)) == 0);

  const std::string dir = test::temp_dir("mdi");
  REQUIRE(std::system(("mkdir -p " + dir).c_str()) == 0);
  write_mdi(dir + "/i.mdi", img);
  write_mdi(dir + "/l.mdi", lab);
  write_mdi(dir + "/p.mdi", pm);
  CHECK(read_mdi_image(dir + "/i.mdi").data() == img.data());
  CHECK(read_mdi_labels(dir + "/l.mdi").labels() == lab.labels());
  CHECK(read_mdi_probmap(dir + "/p.mdi").values() == pm.values());
  CHECK(std::system(("rm -rf " + dir).c_str()) == 0);
}

TEST_CASE("MDI decoding rejects malformed payloads with offsets") {
  Rng rng(6, "test.mdi", 1);
  const auto bytes = encode_mdi(test::random_labels(4, 4, 3, rng));
  SUBCASE("bad magic") {
    auto b = bytes;
    b[0] = 'X';
    CHECK_THROWS_AS(decode_mdi_labels(b), FormatError);
  }
  SUBCASE("truncated payload") {
    auto b = bytes;
    b.pop_back();
    CHECK_THROWS_AS(decode_mdi_labels(b), FormatError);
  }
  SUBCASE("trailing bytes") {
    auto b = bytes;
    b.push_back(0);
    CHECK_THROWS_AS(decode_mdi_labels(b), FormatError);
  }
  SUBCASE("wrong kind") { CHECK_THROWS_AS(decode_mdi_image(bytes), FormatError); }
  SUBCASE("label out of range reports its offset") {
    auto b = bytes;
    b.back() = 9;
    try {
      decode_mdi_labels(b);
      FAIL("expected a format error");
    } catch (const FormatError& e) {
      CHECK(e.offset() == b.size() - 1);
    }
  }
  CHECK_THROWS_AS(read_mdi_image("/nonexistent/dir/x.mdi"), IoError);
}
