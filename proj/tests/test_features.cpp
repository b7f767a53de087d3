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

#include "doctest.h"
#include "features.hpp"
#include "test_util.hpp"

using namespace dmt;

namespace {

const FeatureConfig kCfg;

FeatureLayout patch_layout(int channels) { return feature_layout(kCfg, channels, FeatureScope::Patch); }
FeatureLayout sp_layout(int channels) { return feature_layout(kCfg, channels, FeatureScope::Superpixel); }

bool is_derivative(const std::string& name) {
  for (const char* s : {"sobel", "gradient", "laplacian", "dog", "curvature", "gabor"})
    if (name.find(s) != std::string::npos) return true;
  return false;
}

}  // namespace

TEST_CASE("feature layout is a pure function of the config") {
  const auto a = patch_layout(3), b = patch_layout(3);
  CHECK(a.names == b.names);
  CHECK(a.fingerprint == b.fingerprint);
  CHECK(a.fingerprint != patch_layout(2).fingerprint);
  const auto ctx = feature_layout(kCfg.with_context(4), 3, FeatureScope::Patch);
  CHECK(ctx.base_size == a.size());
  CHECK(ctx.size() == a.size() + 8);
  CHECK(ctx.fingerprint != a.fingerprint);
}

TEST_CASE("constant patch statistics") {
  const double c = 0.375;
  MultiChannelImage img(16, 16, 1, static_cast<float>(c));
  const auto layout = patch_layout(1);
  const auto v = patch_features(img, nullptr, {8, 8}, 5, kCfg);
  REQUIRE(v.values.size() == layout.size());
  for (const char* n : {"c0.mean", "c0.max", "c0.min", "c0.median"}) CHECK(test::feature(v, layout, n) == doctest::Approx(c));
  for (const char* n : {"c0.std", "c0.entropy", "c0.sobel", "c0.gradient", "c0.laplacian", "c0.skewness", "c0.kurtosis"})
    CHECK(test::feature(v, layout, n) == 0.0);
}

TEST_CASE("mirror-symmetric image has zero symmetry feature on the midline") {
  const int w = 21, h = 9;
  Rng rng(2, "test.sym", 0);
  MultiChannelImage img(w, h, 1);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x <= w / 2; ++x) {
      const float v = static_cast<float>(rng.uniform());
      img.at(0, x, y) = v;
      img.at(0, w - 1 - x, y) = v;
    }
  const auto layout = patch_layout(1);
  const auto v = patch_features(img, nullptr, {w / 2, 4}, 5, kCfg);
  CHECK(test::feature(v, layout, "c0.symmetry") == doctest::Approx(0.0));
}

TEST_CASE("ramp gradient and Laplacian against finite differences") {
  const int n = 15;
  MultiChannelImage img(n, n, 1);
  for (int y = 0; y < n; ++y)
    for (int x = 0; x < n; ++x) img.at(0, x, y) = static_cast<float>(x);
  // Oracle: central differences over the 5x5 window at the image center.
  double grad = 0.0, lap = 0.0;
  for (int y = 5; y < 10; ++y)
    for (int x = 5; x < 10; ++x) {
      const double gx = 0.5 * (img.at(0, x + 1, y) - img.at(0, x - 1, y));
      const double gy = 0.5 * (img.at(0, x, y + 1) - img.at(0, x, y - 1));
      grad += std::hypot(gx, gy);
      lap += img.at(0, x + 1, y) + img.at(0, x - 1, y) + img.at(0, x, y + 1) + img.at(0, x, y - 1) - 4.0 * img.at(0, x, y);
    }
  grad /= 25.0;
  lap /= 25.0;
  const auto layout = patch_layout(1);
  const auto v = patch_features(img, nullptr, {7, 7}, 5, kCfg);
  CHECK(grad == doctest::Approx(1.0));
  CHECK(test::feature(v, layout, "c0.gradient") == doctest::Approx(grad).epsilon(1e-9));
  CHECK(test::feature(v, layout, "c0.laplacian") == doctest::Approx(lap).epsilon(1e-9));
}

TEST_CASE("superpixel features") {
  Rng rng(4, "test.sp", 0);
  const auto layout = sp_layout(1);
  SUBCASE("single pixel") {
    const auto img = test::random_image(10, 10, 1, rng);
    const Pixel px[] = {{3, 4}};
    const auto v = superpixel_features(img, nullptr, px, kCfg);
    CHECK(test::feature(v, layout, "c0.mean") == doctest::Approx(img.at(0, 3, 4)));
    CHECK(test::feature(v, layout, "c0.std") == 0.0);
  }
  SUBCASE("whole constant image") {
    MultiChannelImage img(12, 8, 1, 0.5f);
    std::vector<Pixel> all;
    for (int y = 0; y < 8; ++y)
      for (int x = 0; x < 12; ++x) all.push_back({x, y});
    const auto v = superpixel_features(img, nullptr, all, kCfg);
    CHECK(test::feature(v, layout, "c0.entropy") == 0.0);
    CHECK(test::feature(v, layout, "projection_x") == doctest::Approx(0.5));
    CHECK(test::feature(v, layout, "projection_y") == doctest::Approx(0.5));
  }
  SUBCASE("random 50-pixel set against direct summation") {
    const auto img = test::random_image(20, 20, 1, rng);
    std::vector<Pixel> set;
    std::vector<double> vals;
    std::vector<int> used(400, 0);
    while (set.size() < 50) {
      const int i = static_cast<int>(rng.below(400));
      if (used[i]++) continue;
      set.push_back({i % 20, i / 20});
      vals.push_back(img.at(0, i % 20, i / 20));
    }
    const auto v = superpixel_features(img, nullptr, set, kCfg);
    const double n = 50.0;
    double mean = 0.0;
    for (double x : vals) mean += x;
    mean /= n;
    double m2 = 0.0, m3 = 0.0, m4 = 0.0;
    for (double x : vals) {
      m2 += std::pow(x - mean, 2) / n;
      m3 += std::pow(x - mean, 3) / n;
      m4 += std::pow(x - mean, 4) / n;
    }
    auto sorted = vals;
    std::sort(sorted.begin(), sorted.end());
    CHECK(std::abs(test::feature(v, layout, "c0.mean") - mean) < 1e-9);
    CHECK(std::abs(test::feature(v, layout, "c0.std") - std::sqrt(m2)) < 1e-9);
    CHECK(std::abs(test::feature(v, layout, "c0.skewness") - m3 / std::pow(m2, 1.5)) < 1e-9);
    CHECK(std::abs(test::feature(v, layout, "c0.kurtosis") - (m4 / (m2 * m2) - 3.0)) < 1e-9);
    CHECK(std::abs(test::feature(v, layout, "c0.max") - sorted.back()) < 1e-9);
    CHECK(std::abs(test::feature(v, layout, "c0.min") - sorted.front()) < 1e-9);
    CHECK(std::abs(test::feature(v, layout, "c0.median") - 0.5 * (sorted[24] + sorted[25])) < 1e-9);
  }
}

TEST_CASE("derivative features vanish on constant images") {
  MultiChannelImage img(24, 24, 2, 3.0f);
  const auto layout = patch_layout(2);
  for (Pixel c : {Pixel{0, 0}, Pixel{12, 12}, Pixel{23, 5}}) {
    const auto v = patch_features(img, nullptr, c, 10, kCfg);
    for (std::size_t i = 0; i < layout.size(); ++i)
      if (is_derivative(layout.names[i])) CHECK_MESSAGE(std::abs(v.values[i]) < 1e-12, layout.names[i]);
  }
}

TEST_CASE("intensity offset shifts location statistics only") {
  Rng rng(8, "test.shift", 0);
  const auto img = test::random_image(24, 24, 1, rng);
  std::vector<float> shifted_data = img.data();
  const float k = 2.5f;
  for (auto& x : shifted_data) x += k;
  const MultiChannelImage shifted(24, 24, 1, shifted_data);
  const auto layout = patch_layout(1);
  const auto a = patch_features(img, nullptr, {11, 9}, 7, kCfg);
  const auto b = patch_features(shifted, nullptr, {11, 9}, 7, kCfg);
  for (std::size_t i = 0; i < layout.size(); ++i) {
    const std::string& n = layout.names[i];
    const bool location = n == "c0.mean" || n == "c0.max" || n == "c0.min" || n == "c0.median";
    const bool neighborhood = n == "c0.neighborhood";
    const double expect = a.values[i] + (location || neighborhood ? k : 0.0);
    CHECK_MESSAGE(b.values[i] == doctest::Approx(expect).epsilon(1e-5), n);
  }
}

TEST_CASE("Gabor magnitudes are invariant to a sign flip of a zero-mean image") {
  Rng rng(9, "test.gabor", 0);
  auto img = test::random_image(24, 24, 1, rng, -1.0f, 1.0f);
  std::vector<float> d = img.data();
  double mean = 0.0;
  for (float x : d) mean += x;
  mean /= static_cast<double>(d.size());
  for (auto& x : d) x = static_cast<float>(x - mean);
  std::vector<float> flipped = d;
  for (auto& x : flipped) x = -x;
  const MultiChannelImage a(24, 24, 1, d), b(24, 24, 1, flipped);
  const auto layout = patch_layout(1);
  const auto fa = patch_features(a, nullptr, {12, 12}, 10, kCfg);
  const auto fb = patch_features(b, nullptr, {12, 12}, 10, kCfg);
  for (std::size_t i = 0; i < layout.size(); ++i)
    if (layout.names[i].find("gabor") != std::string::npos)
      CHECK(fb.values[i] == doctest::Approx(fa.values[i]).epsilon(1e-9));
}

TEST_CASE("context block carries center and patch mean per class") {
  Rng rng(10, "test.ctx", 0);
  const auto img = test::random_image(12, 12, 1, rng);
  const auto ctx = test::random_probmap(12, 12, 3, rng);
  const auto cfg = kCfg.with_context(3);
  const auto layout = feature_layout(cfg, 1, FeatureScope::Patch);
  const auto v = patch_features(img, &ctx, {6, 5}, 3, cfg);
  for (int k = 0; k < 3; ++k) {
    double m = 0.0;
    for (int y = 4; y <= 6; ++y)
      for (int x = 5; x <= 7; ++x) m += ctx.at(k, static_cast<std::size_t>(y) * 12 + x);
    CHECK(test::feature(v, layout, "ctx" + std::to_string(k) + ".center") ==
          doctest::Approx(ctx.at(k, 5 * 12 + 6)));
    CHECK(test::feature(v, layout, "ctx" + std::to_string(k) + ".mean") == doctest::Approx(m / 9.0));
  }
}

TEST_CASE("dense features match per-pixel extraction") {
  Rng rng(12, "test.dense", 0);
  const auto img = test::random_image(14, 11, 2, rng);
  const ImageResponses resp(img, kCfg);
  const auto dense = dense_patch_base_features(resp, 6);
  const auto layout = patch_layout(2);
  REQUIRE(dense.cols == layout.base_size);
  for (Pixel p : {Pixel{0, 0}, Pixel{13, 10}, Pixel{7, 3}}) {
    const auto v = patch_features(img, nullptr, p, 6, kCfg);
    const auto row = dense.row(static_cast<std::size_t>(p.y) * 14 + p.x);
    for (std::size_t i = 0; i < dense.cols; ++i)
      CHECK(row[i] == doctest::Approx(v.values[i]).epsilon(1e-5));
  }
}
