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

#include "srf.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "blob.hpp"
#include "parallel.hpp"

namespace dmt {

namespace {

constexpr std::string_view kForestMagic = "SRF1";
constexpr std::uint32_t kForestVersion = 1;
constexpr std::size_t kThresholdSample = 256;

}  // namespace

void SrfParams::validate() const {
  if (n_trees < 1) throw ArgumentError("srf: n_trees must be >= 1");
  if (feature_patch_side < 1 || label_patch_side < 1) throw ArgumentError("srf: patch sides must be >= 1");
  if (label_patch_side > feature_patch_side) throw ArgumentError("srf: label patch side exceeds feature patch side");
  if (max_depth < 0) throw ArgumentError("srf: max_depth must be >= 0");
  if (min_samples_leaf < 1) throw ArgumentError("srf: min_samples_leaf must be >= 1");
  if (candidate_features_per_node < 0) throw ArgumentError("srf: candidate_features_per_node must be >= 0");
  if (candidate_thresholds < 1) throw ArgumentError("srf: candidate_thresholds must be >= 1");
  if (!(bootstrap_fraction > 0.0 && bootstrap_fraction <= 1.0))
    throw ArgumentError("srf: bootstrap_fraction must be in (0, 1]");
  if (samples_per_image < 1) throw ArgumentError("srf: samples_per_image must be >= 1");
}

int SrfTree::depth() const {
  if (nodes.empty()) return 0;
  std::vector<std::pair<int, int>> stack{{0, 0}};
  int deepest = 0;
  while (!stack.empty()) {
    auto [n, d] = stack.back();
    stack.pop_back();
    deepest = std::max(deepest, d);
    if (nodes[n].feature >= 0) {
      stack.emplace_back(nodes[n].left, d + 1);
      stack.emplace_back(nodes[n].right, d + 1);
    }
  }
  return deepest;
}

SrfForest::SrfForest(std::vector<SrfTree> trees, std::uint64_t fingerprint, int feature_count, int classes,
                     PatchGeometry geometry)
    : trees_(std::move(trees)),
      fingerprint_(fingerprint),
      feature_count_(feature_count),
      classes_(classes),
      geometry_(geometry) {}

std::span<const float> SrfForest::leaf(int tree, int leaf_index) const {
  const std::size_t a = static_cast<std::size_t>(geometry_.label_patch_side) * geometry_.label_patch_side * classes_;
  return {trees_[tree].leaves.data() + static_cast<std::size_t>(leaf_index) * a, a};
}

std::vector<std::uint8_t> SrfForest::serialize() const {
  ByteWriter w;
  w.magic(kForestMagic);
  w.u32(kForestVersion);
  w.u64(fingerprint_);
  w.u32(static_cast<std::uint32_t>(feature_count_));
  w.u32(static_cast<std::uint32_t>(classes_));
  w.u32(static_cast<std::uint32_t>(geometry_.feature_patch_side));
  w.u32(static_cast<std::uint32_t>(geometry_.label_patch_side));
  w.u32(static_cast<std::uint32_t>(trees_.size()));
  for (const auto& t : trees_) {
    w.u64(t.nodes.size());
    for (const auto& n : t.nodes) {
      w.i32(n.feature);
      w.f32(n.threshold);
      w.i32(n.left);
      w.i32(n.right);
      w.i32(n.leaf);
    }
    w.array(t.leaves);
  }
  return w.take();
}

SrfForest SrfForest::deserialize(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  r.expect_magic(kForestMagic);
  const std::size_t version_at = r.offset();
  if (r.u32("version") != kForestVersion) throw FormatError("unsupported forest version", version_at);
  const std::uint64_t fingerprint = r.u64("fingerprint");
  const int features = static_cast<int>(r.u32("feature count"));
  const int classes = static_cast<int>(r.u32("classes"));
  PatchGeometry g;
  g.feature_patch_side = static_cast<int>(r.u32("feature side"));
  g.label_patch_side = static_cast<int>(r.u32("label side"));
  const std::size_t ntrees_at = r.offset();
  const std::uint32_t ntrees = r.u32("tree count");
  if (classes < 1 || classes > 256 || g.label_patch_side < 1 || g.label_patch_side > 4096)
    throw FormatError("implausible forest header", ntrees_at);
  const std::size_t leaf_size = static_cast<std::size_t>(g.label_patch_side) * g.label_patch_side * classes;
  std::vector<SrfTree> trees(ntrees);
  for (auto& t : trees) {
    const std::size_t count_at = r.offset();
    const std::uint64_t nn = r.u64("node count");
    if (nn == 0 || nn > r.remaining() / 20) throw FormatError("bad node count", count_at);
    t.nodes.resize(nn);
    for (auto& n : t.nodes) {
      n.feature = r.i32("node");
      n.threshold = r.f32("node");
      n.left = r.i32("node");
      n.right = r.i32("node");
      n.leaf = r.i32("node");
    }
    const std::size_t leaves_at = r.offset();
    t.leaves = r.array<float>("leaves");
    if (t.leaves.size() % leaf_size != 0) throw FormatError("leaf array size mismatch", leaves_at);
    const auto nleaves = static_cast<std::int32_t>(t.leaves.size() / leaf_size);
    for (const auto& n : t.nodes) {
      const bool ok = n.feature < 0 ? (n.leaf >= 0 && n.leaf < nleaves)
                                    : (n.feature < features && n.left > 0 && n.right > 0 &&
                                       n.left < static_cast<std::int32_t>(nn) && n.right < static_cast<std::int32_t>(nn));
      if (!ok) throw FormatError("inconsistent tree node", leaves_at);
    }
  }
  if (r.remaining() != 0) throw FormatError("trailing bytes after forest", r.offset());
  return SrfForest(std::move(trees), fingerprint, features, classes, g);
}

// ---------------------------------------------------------------- entropy

double entropy_bits(std::span<const double> counts) {
  double n = 0.0;
  for (double c : counts) n += c;
  if (n <= 0.0) return 0.0;
  double h = 0.0;
  for (double c : counts)
    if (c > 0.0) h -= (c / n) * std::log2(c / n);
  return std::max(0.0, h);
}

double information_gain(std::span<const double> parent, std::span<const double> left, std::span<const double> right) {
  double nl = 0.0, nr = 0.0;
  for (double c : left) nl += c;
  for (double c : right) nr += c;
  const double n = nl + nr;
  if (n <= 0.0) return 0.0;
  return entropy_bits(parent) - (nl / n) * entropy_bits(left) - (nr / n) * entropy_bits(right);
}

// ---------------------------------------------------------------- sampling

std::vector<std::int32_t> sample_patch_centers(const LabelMap& labels, int samples, Rng& rng) {
  const int classes = labels.classes();
  std::vector<std::vector<std::int32_t>> by_class(classes);
  for (std::size_t i = 0; i < labels.pixel_count(); ++i) by_class[labels[i]].push_back(static_cast<std::int32_t>(i));
  const int quota = samples / classes;
  std::vector<std::int32_t> out;
  // Partial Fisher-Yates: the first k entries become a uniform draw without replacement.
  auto take = [&](std::vector<std::int32_t>& pool, int k) {
    k = std::min<int>(k, static_cast<int>(pool.size()));
    for (int i = 0; i < k; ++i) {
      const auto j = i + static_cast<int>(rng.below(pool.size() - i));
      std::swap(pool[i], pool[j]);
      out.push_back(pool[i]);
    }
    return k;
  };
  int taken = 0;
  for (int l = 1; l < classes; ++l) taken += take(by_class[l], quota);
  take(by_class[0], samples - taken);
  std::sort(out.begin(), out.end());
  return out;
}

SrfTrainingSet assemble_srf_samples(std::span<const SrfImageInput> images, const SrfParams& params, int classes) {
  params.validate();
  if (images.empty()) throw ArgumentError("srf: no training images");
  SrfTrainingSet set;
  set.classes = classes;
  set.label_patch_side = params.label_patch_side;
  const std::size_t base_cols = images[0].base->cols;
  const std::size_t ctx_cols = images[0].context ? images[0].context->cols : 0;
  set.features.cols = base_cols + ctx_cols;
  const int side = params.label_patch_side;
  for (std::size_t i = 0; i < images.size(); ++i) {
    const auto& in = images[i];
    if (in.base->cols != base_cols || (in.context ? in.context->cols : 0) != ctx_cols)
      throw ArgumentError("srf: inconsistent feature widths across training images");
    const LabelMap& lm = *in.labels;
    if (lm.classes() != classes) throw ArgumentError("srf: label map class count mismatch");
    Rng rng(params.rng_seed, "srf.sample", i);
    const auto centers = sample_patch_centers(lm, params.samples_per_image, rng);
    for (auto p : centers) {
      const auto b = in.base->row(p);
      set.features.data.insert(set.features.data.end(), b.begin(), b.end());
      if (in.context) {
        const auto c = in.context->row(p);
        set.features.data.insert(set.features.data.end(), c.begin(), c.end());
      }
      const int cx = p % lm.width(), cy = p / lm.width();
      const int x0 = patch_origin(cx, side), y0 = patch_origin(cy, side);
      for (int dy = 0; dy < side; ++dy)
        for (int dx = 0; dx < side; ++dx)
          set.label_patches.push_back(
              lm.at(std::clamp(x0 + dx, 0, lm.width() - 1), std::clamp(y0 + dy, 0, lm.height() - 1)));
    }
  }
  set.features.rows = set.features.data.size() / set.features.cols;
  return set;
}

// ---------------------------------------------------------------- training

namespace {

struct TreeBuilder {
  const SrfTrainingSet& set;
  const SrfParams& params;
  std::uint64_t tree_seed;
  int classes;
  int positions;
  int center_position;
  int candidate_features;
  SrfTree tree;
  int node_counter = 0;

  std::vector<std::int32_t> scratch_ids;
  std::vector<float> values;
  std::vector<float> sample_values;
  std::vector<float> thresholds;
  std::vector<double> bin_hist, left_hist, right_hist, parent_hist;
  std::vector<int> derived;
  std::vector<int> feature_pool;

  void make_leaf(std::span<const std::int32_t> ids, int node) {
    const std::size_t a = static_cast<std::size_t>(positions) * classes;
    const std::size_t base = tree.leaves.size();
    tree.leaves.resize(base + a, 0.0f);
    std::vector<double> counts(a, 0.0);
    for (auto id : ids) {
      const auto patch = set.label_patch(id);
      for (int p = 0; p < positions; ++p) counts[static_cast<std::size_t>(p) * classes + patch[p]] += 1.0;
    }
    for (int p = 0; p < positions; ++p) {
      double s = 0.0;
      for (int l = 0; l < classes; ++l) s += counts[static_cast<std::size_t>(p) * classes + l];
      for (int l = 0; l < classes; ++l)
        tree.leaves[base + static_cast<std::size_t>(p) * classes + l] =
            static_cast<float>(counts[static_cast<std::size_t>(p) * classes + l] / s);
    }
    tree.nodes[node].feature = -1;
    tree.nodes[node].leaf = static_cast<std::int32_t>(base / a);
  }

  void build(std::vector<std::int32_t> root_ids) {
    struct Work {
      int node;
      int depth;
      std::vector<std::int32_t> ids;
    };
    std::vector<Work> stack;
    tree.nodes.emplace_back();
    stack.push_back({0, 0, std::move(root_ids)});
    while (!stack.empty()) {
      Work w = std::move(stack.back());
      stack.pop_back();
      Rng rng(tree_seed, "srf.node", static_cast<std::uint64_t>(node_counter++));
      const auto& ids = w.ids;
      const std::size_t n = ids.size();
      if (w.depth >= params.max_depth || n < 2 * static_cast<std::size_t>(params.min_samples_leaf)) {
        make_leaf(ids, w.node);
        continue;
      }
      const int position = static_cast<int>(rng.below(positions));
      const int derived_classes = classes * classes;
      derived.resize(n);
      parent_hist.assign(derived_classes, 0.0);
      bool pure = true;
      for (std::size_t i = 0; i < n; ++i) {
        const auto patch = set.label_patch(ids[i]);
        derived[i] = patch[center_position] * classes + patch[position];
        parent_hist[derived[i]] += 1.0;
        pure = pure && derived[i] == derived[0];
      }
      if (pure) {
        make_leaf(ids, w.node);
        continue;
      }
      const double parent_entropy = entropy_bits(parent_hist);

      // Candidate features: partial Fisher-Yates over the feature indices.
      const int d = static_cast<int>(set.features.cols);
      feature_pool.resize(d);
      std::iota(feature_pool.begin(), feature_pool.end(), 0);
      const int m = std::min(candidate_features, d);
      for (int i = 0; i < m; ++i) std::swap(feature_pool[i], feature_pool[i + rng.below(d - i)]);

      double best_gain = 1e-12;
      int best_feature = -1;
      float best_threshold = 0.0f;
      for (int fi = 0; fi < m; ++fi) {
        const int f = feature_pool[fi];
        values.resize(n);
        for (std::size_t i = 0; i < n; ++i) values[i] = set.features.data[static_cast<std::size_t>(ids[i]) * d + f];
        // Quantile thresholds from an evenly strided subsample of the node's values.
        const std::size_t stride = std::max<std::size_t>(1, n / kThresholdSample);
        sample_values.clear();
        for (std::size_t i = 0; i < n; i += stride) sample_values.push_back(values[i]);
        std::sort(sample_values.begin(), sample_values.end());
        thresholds.clear();
        const std::size_t s = sample_values.size();
        for (int k = 0; k < params.candidate_thresholds; ++k) {
          const std::size_t q = std::min(s - 1, (static_cast<std::size_t>(k) + 1) * s / (params.candidate_thresholds + 1));
          const float v = sample_values[q];
          if (!(v > sample_values.front())) continue;
          // Midway between v and the next lower sampled value.
          const float below = *(std::lower_bound(sample_values.begin(), sample_values.end(), v) - 1);
          float t = below + 0.5f * (v - below);
          if (!(t > below)) t = v;
          if (thresholds.empty() || t > thresholds.back()) thresholds.push_back(t);
        }
        if (thresholds.empty()) continue;
        const int bins = static_cast<int>(thresholds.size()) + 1;
        bin_hist.assign(static_cast<std::size_t>(bins) * derived_classes, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
          const int b = static_cast<int>(std::upper_bound(thresholds.begin(), thresholds.end(), values[i]) - thresholds.begin());
          bin_hist[static_cast<std::size_t>(b) * derived_classes + derived[i]] += 1.0;
        }
        left_hist.assign(derived_classes, 0.0);
        double n_left = 0.0;
        for (int k = 0; k + 1 < bins; ++k) {
          for (int c = 0; c < derived_classes; ++c) {
            left_hist[c] += bin_hist[static_cast<std::size_t>(k) * derived_classes + c];
            n_left += bin_hist[static_cast<std::size_t>(k) * derived_classes + c];
          }
          const double n_right = static_cast<double>(n) - n_left;
          if (n_left < params.min_samples_leaf || n_right < params.min_samples_leaf) continue;
          right_hist.resize(derived_classes);
          for (int c = 0; c < derived_classes; ++c) right_hist[c] = parent_hist[c] - left_hist[c];
          const double gain = parent_entropy - (n_left / n) * entropy_bits(left_hist) -
                              (n_right / n) * entropy_bits(right_hist);
          if (gain > best_gain) {
            best_gain = gain;
            best_feature = f;
            best_threshold = thresholds[k];
          }
        }
      }
      if (best_feature < 0) {
        make_leaf(ids, w.node);
        continue;
      }
      std::vector<std::int32_t> left_ids, right_ids;
      for (auto id : ids)
        (set.features.data[static_cast<std::size_t>(id) * d + best_feature] < best_threshold ? left_ids : right_ids)
            .push_back(id);
      const int left = static_cast<int>(tree.nodes.size());
      tree.nodes.emplace_back();
      tree.nodes.emplace_back();
      auto& node = tree.nodes[w.node];
      node.feature = best_feature;
      node.threshold = best_threshold;
      node.left = left;
      node.right = left + 1;
      // Right pushed first so the left subtree is expanded first.
      stack.push_back({left + 1, w.depth + 1, std::move(right_ids)});
      stack.push_back({left, w.depth + 1, std::move(left_ids)});
    }
  }
};

// Sample order sorted by content so training does not depend on input order.
std::vector<std::int32_t> canonical_order(const SrfTrainingSet& set) {
  std::vector<std::int32_t> order(set.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::int32_t a, std::int32_t b) {
    const auto fa = set.features.row(a), fb = set.features.row(b);
    for (std::size_t j = 0; j < fa.size(); ++j)
      if (fa[j] != fb[j]) return fa[j] < fb[j];
    const auto la = set.label_patch(a), lb = set.label_patch(b);
    return std::lexicographical_compare(la.begin(), la.end(), lb.begin(), lb.end());
  });
  return order;
}

}  // namespace

SrfForest srf_train(const SrfTrainingSet& samples, const SrfParams& params, std::uint64_t layout_fingerprint) {
  params.validate();
  if (samples.size() == 0) throw ArgumentError("srf_train: empty sample set");
  if (samples.label_patch_side != params.label_patch_side)
    throw ArgumentError("srf_train: label patch size differs from parameters");
  if (samples.label_patches.size() !=
      samples.size() * static_cast<std::size_t>(samples.label_patch_side) * samples.label_patch_side)
    throw ArgumentError("srf_train: label patch array has the wrong length");
  if (samples.classes < 1) throw ArgumentError("srf_train: class count must be >= 1");
  for (auto l : samples.label_patches)
    if (l >= samples.classes) throw ArgumentError("srf_train: label outside class range");

  const auto order = canonical_order(samples);
  const int side = params.label_patch_side;
  const int d = static_cast<int>(samples.features.cols);
  const int candidates = params.candidate_features_per_node > 0
                             ? params.candidate_features_per_node
                             : static_cast<int>(std::ceil(std::sqrt(static_cast<double>(d))));
  const std::size_t draws = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::llround(params.bootstrap_fraction * static_cast<double>(samples.size()))));

  std::vector<SrfTree> trees(params.n_trees);
  parallel_for(trees.size(), [&](std::size_t t) {
    const std::uint64_t tree_seed = stream_seed(params.rng_seed, "srf.tree", t);
    Rng rng(tree_seed, "srf.bootstrap", 0);
    std::vector<std::int32_t> ids(draws);
    for (auto& id : ids) id = order[rng.below(order.size())];
    TreeBuilder b{samples, params, tree_seed, samples.classes, side * side, (side / 2) * side + side / 2, candidates, {}, 0, {}, {}, {}, {}, {}, {}, {}, {}, {}, {}};
    b.build(std::move(ids));
    trees[t] = std::move(b.tree);
  });
  return SrfForest(std::move(trees), layout_fingerprint, d, samples.classes, params.geometry());
}

// ---------------------------------------------------------------- prediction

ProbabilityMap srf_predict_dense(const SrfForest& forest, const FeatureMatrix& base, const FeatureMatrix* context,
                                 int width, int height) {
  const std::size_t n = static_cast<std::size_t>(width) * height;
  const std::size_t bc = base.cols, cc = context ? context->cols : 0;
  if (base.rows != n || (context && context->rows != n))
    throw ContractError("srf_predict: feature matrix rows do not match image size");
  if (static_cast<int>(bc + cc) != forest.feature_count())
    throw ContractError("srf_predict: feature width does not match the forest");
  const int ntrees = static_cast<int>(forest.trees().size());
  const int classes = forest.classes();
  const int side = forest.geometry().label_patch_side;

  // Route every pixel in parallel; accumulate sequentially so sums are order-stable.
  std::vector<std::int32_t> leaves(n * ntrees);
  const int h = height;
  parallel_for(static_cast<std::size_t>(h), [&](std::size_t y) {
    for (int x = 0; x < width; ++x) {
      const std::size_t i = y * width + x;
      const float* b = base.data.data() + i * bc;
      const float* c = context ? context->data.data() + i * cc : nullptr;
      auto feature_at = [&](int f) { return static_cast<std::size_t>(f) < bc ? b[f] : c[f - bc]; };
      for (int t = 0; t < ntrees; ++t) leaves[i * ntrees + t] = forest.route(t, feature_at);
    }
  });

  std::vector<double> acc(n * classes, 0.0);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * width + x;
      const int x0 = patch_origin(x, side), y0 = patch_origin(y, side);
      for (int t = 0; t < ntrees; ++t) {
        const auto dist = forest.leaf(t, leaves[i * ntrees + t]);
        for (int dy = 0; dy < side; ++dy) {
          const int ty = y0 + dy;
          if (ty < 0 || ty >= height) continue;
          for (int dx = 0; dx < side; ++dx) {
            const int tx = x0 + dx;
            if (tx < 0 || tx >= width) continue;
            const std::size_t target = static_cast<std::size_t>(ty) * width + tx;
            const float* pd = dist.data() + static_cast<std::size_t>(dy * side + dx) * classes;
            for (int l = 0; l < classes; ++l) acc[l * n + target] += pd[l];
          }
        }
      }
    }
  std::vector<float> out(n * classes);
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (int l = 0; l < classes; ++l) s += acc[l * n + i];
    for (int l = 0; l < classes; ++l)
      out[l * n + i] = s > 0.0 ? static_cast<float>(acc[l * n + i] / s) : 1.0f / static_cast<float>(classes);
  }
  return ProbabilityMap(width, height, classes, std::move(out));
}

ProbabilityMap srf_predict(const SrfForest& forest, const MultiChannelImage& img, const ProbabilityMap* context,
                           const FeatureConfig& cfg) {
  const FeatureLayout layout = feature_layout(cfg, img.channels(), FeatureScope::Patch);
  if (layout.fingerprint != forest.fingerprint())
    throw ContractError("srf_predict: feature layout fingerprint does not match the trained forest");
  if (cfg.include_context && context == nullptr) throw ContractError("srf_predict: forest expects a context map");
  const ImageResponses resp(img, cfg);
  const FeatureMatrix base = dense_patch_base_features(resp, forest.geometry().feature_patch_side);
  if (cfg.include_context) {
    const FeatureMatrix ctx = dense_patch_context_features(*context, forest.geometry().feature_patch_side);
    return srf_predict_dense(forest, base, &ctx, img.width(), img.height());
  }
  return srf_predict_dense(forest, base, nullptr, img.width(), img.height());
}

}  // namespace dmt
