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
#include <numeric>

#include "doctest.h"
#include "srf.hpp"
#include "test_util.hpp"

using namespace dmt;

namespace {

// Two-feature samples with single-pixel label patches.
SrfTrainingSet point_set(const std::vector<std::pair<std::vector<float>, int>>& rows, int classes) {
  SrfTrainingSet s;
  s.classes = classes;
  s.label_patch_side = 1;
  s.features.cols = rows.front().first.size();
  for (const auto& [f, l] : rows) {
    s.features.data.insert(s.features.data.end(), f.begin(), f.end());
    s.label_patches.push_back(static_cast<std::uint8_t>(l));
  }
  s.features.rows = rows.size();
  return s;
}

SrfParams small_params(int trees = 3) {
  SrfParams p;
  p.n_trees = trees;
  p.label_patch_side = 1;
  p.feature_patch_side = 5;
  p.min_samples_leaf = 1;
  p.candidate_features_per_node = 2;
  p.rng_seed = 17;
  return p;
}

SrfTrainingSet two_clusters(Rng& rng) {
  std::vector<std::pair<std::vector<float>, int>> rows;
  for (int i = 0; i < 60; ++i) {
    const int l = i % 2;
    rows.push_back({{static_cast<float>(l * 10 + rng.uniform(-1, 1)), static_cast<float>(rng.uniform(-1, 1))}, l});
  }
  return point_set(rows, 2);
}

int predict_point(const SrfForest& f, std::span<const float> x) {
  std::vector<double> acc(f.classes(), 0.0);
  for (int t = 0; t < static_cast<int>(f.trees().size()); ++t) {
    const auto d = f.leaf(t, f.route(t, x));
    for (int l = 0; l < f.classes(); ++l) acc[l] += d[l];
  }
  return static_cast<int>(std::max_element(acc.begin(), acc.end()) - acc.begin());
}

}  // namespace

TEST_CASE("entropy and information gain") {
  const double pure[] = {0, 8, 0};
  CHECK(entropy_bits(pure) == 0.0);
  const double half[] = {4, 4};
  CHECK(entropy_bits(half) == doctest::Approx(1.0));
  const double l[] = {4, 0}, r[] = {0, 4};
  CHECK(information_gain(half, l, r) == doctest::Approx(1.0));
  CHECK(information_gain(pure, pure, std::vector<double>{0, 0, 0}) == 0.0);
  const double quarter[] = {1, 1, 1, 1};
  CHECK(entropy_bits(quarter) == doctest::Approx(2.0));
}

TEST_CASE("a single label patch yields a single certain leaf") {
  const auto s = point_set({{{0.3f, 0.7f}, 1}}, 3);
  const auto f = srf_train(s, small_params(1), 0);
  REQUIRE(f.trees().size() == 1);
  CHECK(f.trees()[0].nodes.size() == 1);
  const auto d = f.leaf(0, 0);
  CHECK(d[0] == 0.0f);
  CHECK(d[1] == 1.0f);
  CHECK(d[2] == 0.0f);
}

TEST_CASE("separable clusters are learned perfectly") {
  Rng rng(3, "test.clusters", 0);
  const auto s = two_clusters(rng);
  const auto f = srf_train(s, small_params(), 0);
  int correct = 0;
  for (std::size_t i = 0; i < s.size(); ++i) correct += predict_point(f, s.features.row(i)) == s.label_patch(i)[0];
  CHECK(correct == static_cast<int>(s.size()));
}

TEST_CASE("depth one trees split on a single threshold") {
  Rng rng(4, "test.depth1", 0);
  const auto s = two_clusters(rng);
  auto p = small_params(2);
  p.max_depth = 1;
  const auto f = srf_train(s, p, 0);
  for (const auto& t : f.trees()) {
    CHECK(t.depth() <= 1);
    CHECK(t.nodes.size() <= 3);
  }
}

TEST_CASE("training is deterministic and order independent") {
  Rng rng(5, "test.perm", 0);
  const auto s = two_clusters(rng);
  const auto p = small_params();
  const auto a = srf_train(s, p, 42).serialize();
  CHECK(a == srf_train(s, p, 42).serialize());

  std::vector<std::size_t> perm(s.size());
  std::iota(perm.begin(), perm.end(), 0);
  Rng shuffle(6, "test.perm.shuffle", 0);
  for (std::size_t i = perm.size() - 1; i > 0; --i) std::swap(perm[i], perm[shuffle.below(i + 1)]);
  SrfTrainingSet q = s;
  for (std::size_t i = 0; i < perm.size(); ++i) {
    std::copy_n(s.features.row(perm[i]).begin(), s.features.cols, q.features.row(i).begin());
    q.label_patches[i] = s.label_patches[perm[i]];
  }
  CHECK(a == srf_train(q, p, 42).serialize());
}

TEST_CASE("leaf distributions are normalized at every position") {
  Rng rng(7, "test.leaves", 0);
  SrfTrainingSet s;
  s.classes = 4;
  s.label_patch_side = 3;
  s.features.cols = 3;
  for (int i = 0; i < 200; ++i) {
    for (int j = 0; j < 3; ++j) s.features.data.push_back(static_cast<float>(rng.uniform()));
    for (int j = 0; j < 9; ++j) s.label_patches.push_back(static_cast<std::uint8_t>(rng.below(4)));
  }
  s.features.rows = 200;
  auto p = small_params();
  p.label_patch_side = 3;
  const auto f = srf_train(s, p, 0);
  for (const auto& t : f.trees()) {
    const std::size_t rows = t.leaves.size() / 4;
    for (std::size_t r = 0; r < rows; ++r) {
      double sum = 0.0;
      for (int l = 0; l < 4; ++l) sum += t.leaves[r * 4 + l];
      CHECK(std::abs(sum - 1.0) < 1e-6);
    }
  }
}

TEST_CASE("a forest of one class-2 leaf predicts class 2 everywhere") {
  SrfTree t;
  t.nodes.push_back({-1, 0.0f, -1, -1, 0});
  t.leaves = {0.0f, 0.0f, 1.0f};
  const FeatureConfig cfg;
  const auto layout = feature_layout(cfg, 1, FeatureScope::Patch);
  const SrfForest f({t}, layout.fingerprint, static_cast<int>(layout.size()), 3, {5, 1, 1});
  Rng rng(8, "test.class2", 0);
  const auto img = test::random_image(9, 7, 1, rng);
  const auto pm = srf_predict(f, img, nullptr, cfg);
  for (std::size_t i = 0; i < pm.pixel_count(); ++i) CHECK(pm.at(2, i) == 1.0f);
}

TEST_CASE("dense prediction equals per-pixel routing for single-pixel labels") {
  const FeatureConfig cfg;
  Rng rng(9, "test.dense", 0);
  const auto img = test::random_image(20, 16, 1, rng);
  const auto labels = test::random_labels(20, 16, 3, rng);
  const ImageResponses resp(img, cfg);
  const auto base = dense_patch_base_features(resp, 5);
  auto p = small_params(1);
  p.samples_per_image = 150;
  p.candidate_features_per_node = 0;
  const SrfImageInput in{&base, nullptr, &labels};
  const auto set = assemble_srf_samples(std::span(&in, 1), p, 3);
  const auto layout = feature_layout(cfg, 1, FeatureScope::Patch);
  const auto forest = srf_train(set, p, layout.fingerprint);
  const auto pm = srf_predict(forest, img, nullptr, cfg);
  const auto& nodes = forest.trees()[0].nodes;
  int mismatches = 0;
  for (int y = 0; y < 16; ++y)
    for (int x = 0; x < 20; ++x) {
      const auto fv = patch_features(img, nullptr, {x, y}, 5, cfg);
      int n = 0;
      while (nodes[n].feature >= 0)
        n = static_cast<float>(fv.values[nodes[n].feature]) < nodes[n].threshold ? nodes[n].left : nodes[n].right;
      const auto d = forest.leaf(0, nodes[n].leaf);
      double s = 0.0;
      for (int l = 0; l < 3; ++l) s += d[l];
      for (int l = 0; l < 3; ++l)
        mismatches += pm.at(l, static_cast<std::size_t>(y) * 20 + x) != static_cast<float>(d[l] / s);
    }
  CHECK(mismatches == 0);
}

TEST_CASE("class-balanced sampling") {
  LabelMap l(10, 10, 3);
  for (int i = 0; i < 100; ++i) l[i] = i < 80 ? 0 : (i < 95 ? 1 : 2);
  Rng rng(10, "test.sample", 0);
  const auto c = sample_patch_centers(l, 30, rng);
  int hist[3] = {};
  for (auto i : c) ++hist[l[i]];
  CHECK(hist[1] == 10);
  CHECK(hist[2] == 5);
  CHECK(hist[0] == 15);
  CHECK(std::is_sorted(c.begin(), c.end()));
  CHECK(std::adjacent_find(c.begin(), c.end()) == c.end());
}

TEST_CASE("forest serialization round trips and rejects damage") {
  Rng rng(11, "test.ser", 0);
  const auto f = srf_train(two_clusters(rng), small_params(), 7);
  const auto bytes = f.serialize();
  CHECK(SrfForest::deserialize(bytes).serialize() == bytes);
  auto cut = bytes;
  cut.pop_back();
  CHECK_THROWS_AS(SrfForest::deserialize(cut), FormatError);
}
