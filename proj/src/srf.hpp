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

// Structured random forest: trees map a patch feature vector to a whole
// label patch. Splits maximise information gain on a derived class that
// pairs the center label with the label at one random patch position.

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "features.hpp"
#include "grid.hpp"

namespace dmt {

struct SrfParams {
  int n_trees = 15;
  int feature_patch_side = 10;
  int label_patch_side = 7;
  int max_depth = 20;
  int min_samples_leaf = 5;
  int candidate_features_per_node = 0;  // 0: ceil(sqrt(feature count))
  int candidate_thresholds = 10;
  double bootstrap_fraction = 1.0;
  int samples_per_image = 2000;
  std::uint64_t rng_seed = 0;

  void validate() const;
  PatchGeometry geometry() const { return {feature_patch_side, label_patch_side, 1}; }
};

// Samples as rows of a feature matrix plus one label patch per row.
struct SrfTrainingSet {
  int classes = 0;
  int label_patch_side = 1;
  FeatureMatrix features;
  std::vector<std::uint8_t> label_patches;  // rows x side^2, row-major inside the patch

  std::size_t size() const { return features.rows; }
  std::span<const std::uint8_t> label_patch(std::size_t r) const {
    const std::size_t a = static_cast<std::size_t>(label_patch_side) * label_patch_side;
    return {label_patches.data() + r * a, a};
  }
};

struct SrfTree {
  struct Node {
    std::int32_t feature = -1;  // -1 marks a leaf
    float threshold = 0.0f;     // value < threshold goes left
    std::int32_t left = -1;
    std::int32_t right = -1;
    std::int32_t leaf = -1;
  };
  std::vector<Node> nodes;
  std::vector<float> leaves;  // leaf_count x side^2 x classes, per-position distributions

  int depth() const;
  std::size_t leaf_count(int side, int classes) const { return leaves.size() / (static_cast<std::size_t>(side) * side * classes); }
};

class SrfForest {
 public:
  SrfForest() = default;
  SrfForest(std::vector<SrfTree> trees, std::uint64_t fingerprint, int feature_count, int classes, PatchGeometry geometry);

  const std::vector<SrfTree>& trees() const { return trees_; }
  std::uint64_t fingerprint() const { return fingerprint_; }
  int feature_count() const { return feature_count_; }
  int classes() const { return classes_; }
  const PatchGeometry& geometry() const { return geometry_; }

  template <typename FeatureAt>
  int route(int tree, FeatureAt&& feature_at) const {
    const auto& nodes = trees_[tree].nodes;
    int n = 0;
    while (nodes[n].feature >= 0) n = feature_at(nodes[n].feature) < nodes[n].threshold ? nodes[n].left : nodes[n].right;
    return nodes[n].leaf;
  }
  int route(int tree, std::span<const float> features) const {
    return route(tree, [&](int f) { return features[f]; });
  }
  // Per-position distributions of one leaf: side^2 x classes.
  std::span<const float> leaf(int tree, int leaf_index) const;

  std::vector<std::uint8_t> serialize() const;
  static SrfForest deserialize(std::span<const std::uint8_t> bytes);

 private:
  std::vector<SrfTree> trees_;
  std::uint64_t fingerprint_ = 0;
  int feature_count_ = 0;
  int classes_ = 0;
  PatchGeometry geometry_;
};

// Shannon entropy in bits of a count histogram.
double entropy_bits(std::span<const double> counts);
// Parent entropy minus the size-weighted child entropies.
double information_gain(std::span<const double> parent, std::span<const double> left, std::span<const double> right);

// Class-balanced patch centers for one training image: an equal quota per
// class present, with the unfilled remainder given to background (class 0).
std::vector<std::int32_t> sample_patch_centers(const LabelMap& labels, int samples, Rng& rng);

struct SrfImageInput {
  const FeatureMatrix* base = nullptr;
  const FeatureMatrix* context = nullptr;  // optional
  const LabelMap* labels = nullptr;
};

SrfTrainingSet assemble_srf_samples(std::span<const SrfImageInput> images, const SrfParams& params, int classes);

SrfForest srf_train(const SrfTrainingSet& samples, const SrfParams& params, std::uint64_t layout_fingerprint);

// Dense prediction from precomputed per-pixel features.
ProbabilityMap srf_predict_dense(const SrfForest& forest, const FeatureMatrix& base, const FeatureMatrix* context,
                                 int width, int height);

// Full prediction: computes features for img (with context when cfg asks for
// it) and checks them against the forest's layout fingerprint.
ProbabilityMap srf_predict(const SrfForest& forest, const MultiChannelImage& img, const ProbabilityMap* context,
                           const FeatureConfig& cfg);

}  // namespace dmt
