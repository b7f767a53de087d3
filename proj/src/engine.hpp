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

// Dynamic multiscale tree. Nodes are SRF or BN classifiers arranged in a full
// binary tree; probability maps flow down (parent map as context or prior),
// up (children maps averaged into the parent's second-phase input) and down
// again. Baseline cascades run through the same flow as unary chains.

#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "bn.hpp"
#include "features.hpp"
#include "grid.hpp"
#include "slic.hpp"
#include "srf.hpp"

namespace dmt {

enum class NodeKind : std::uint8_t { Srf = 0, Bn = 1 };

const char* node_kind_name(NodeKind kind);
NodeKind parse_node_kind(const std::string& s);

// Heap-ordered positions: root 0, children of p at 2p+1 (L) and 2p+2 (R).
std::string node_path(int position);
int parse_node_path(const std::string& path);
int node_level(int position);

struct TreeSpec {
  int depth = 2;
  std::vector<NodeKind> kinds;

  // Root SRF; every parent's children are {SRF, BN}.
  static TreeSpec default_layout(int depth);
  int size() const { return static_cast<int>(kinds.size()); }
  void validate() const;
};

struct ScaleEntry {
  int feature_patch_side = 10;
  int label_patch_side = 7;
  int target_superpixels = 1000;

  bool operator==(const ScaleEntry&) const = default;
};

struct ScaleSchedule {
  std::vector<ScaleEntry> levels;

  // (10, 7, 1000) at levels 0 and 1, (8, 5, 1200) from level 2 on.
  static ScaleSchedule multiscale(int depth);
  // Level-0 entry repeated.
  static ScaleSchedule fixed(int depth);
  void validate(int depth) const;
};

enum class Method : std::uint8_t { Dmt = 0, Srf, Bn, SrfSrf, BnBn, SrfBn };

const char* method_name(Method m);
Method parse_method(const std::string& s);

struct EngineConfig {
  Method method = Method::Dmt;
  TreeSpec tree = TreeSpec::default_layout(2);
  ScaleSchedule schedule = ScaleSchedule::multiscale(2);
  int rounds = 1;
  FeatureConfig features;
  SrfParams srf;
  BnParams bn;
  SlicParams slic;
  int reference_channel = 0;
  std::uint64_t seed = 42;

  void validate() const;
};

// One node of the flow graph. Chains use parent = previous stage.
struct FlowNode {
  int id = 0;
  NodeKind kind = NodeKind::Srf;
  int parent = -1;
  std::vector<int> children;
  int level = 0;
  ScaleEntry scale;
  std::string path;

  bool is_leaf() const { return children.empty(); }
};

std::vector<FlowNode> build_topology(const EngineConfig& cfg);

// Per-image cache of everything that does not depend on a trained model:
// filter responses, dense patch features per patch side, and superpixel
// partitions with their features, edge strengths and majority labels.
class PreparedImage {
 public:
  struct SuperpixelData {
    EdgeMap edge_map;
    SuperpixelFeatures features;
    std::vector<double> strengths;
    std::vector<std::uint8_t> labels;  // empty without ground truth
  };

  PreparedImage(const MultiChannelImage& img, const LabelMap* labels, const EngineConfig& cfg);

  const MultiChannelImage& image() const { return *img_; }
  const LabelMap* labels() const { return labels_; }
  const ImageResponses& responses();
  const FeatureMatrix& dense_features(int side);
  const SuperpixelData& superpixels(int target);
  // Configuration the cache was built for.
  std::uint64_t config_key() const { return key_; }

 private:
  const MultiChannelImage* img_;
  const LabelMap* labels_;
  FeatureConfig features_;
  SlicParams slic_;
  int reference_channel_;
  std::uint64_t key_;
  std::recursive_mutex mu_;
  std::unique_ptr<ImageResponses> responses_;
  std::map<int, std::unique_ptr<FeatureMatrix>> dense_;
  std::map<int, std::unique_ptr<SuperpixelData>> superpixels_;
};

std::uint64_t prepared_config_key(const EngineConfig& cfg);

struct NodeClassifier {
  NodeKind kind = NodeKind::Srf;
  bool has_context = false;
  std::shared_ptr<const SrfForest> srf;
  std::shared_ptr<const BnModel> bn;

  std::uint64_t layout_fingerprint() const;
};

struct TrainedNode {
  FlowNode node;
  NodeClassifier phase_a;
  std::vector<NodeClassifier> phase_b;  // one per round; empty for leaves
};

enum class FlowPhase : std::uint8_t { Descend = 0, Ascend = 1, Redescend = 2 };

struct AuditEvent {
  int round = 0;
  FlowPhase phase = FlowPhase::Descend;
  int node = 0;
  std::string path;
  NodeKind kind = NodeKind::Srf;
  ScaleEntry scale;
  bool has_context = false;
};

struct TrainedModel {
  EngineConfig config;
  int classes = 0;
  int channels = 0;
  std::vector<TrainedNode> nodes;
  std::vector<AuditEvent> audit;
  // Per training image, per leaf (in node order): fingerprint of the final map.
  std::vector<std::vector<std::uint64_t>> train_leaf_fingerprints;

  std::vector<FlowNode> topology() const;
};

// Memo of deterministic fits and their maps, shared between methods trained
// on the same subjects (e.g. all methods of one cross-validation fold).
class FitMemo {
 public:
  std::shared_ptr<const NodeClassifier> find_fit(const std::string& key);
  void store_fit(const std::string& key, std::shared_ptr<const NodeClassifier> c);
  std::shared_ptr<const std::vector<ProbabilityMap>> find_maps(const std::string& key);
  void store_maps(const std::string& key, std::shared_ptr<const std::vector<ProbabilityMap>> maps);
  std::size_t hits() const { return hits_; }

 private:
  std::mutex mu_;
  std::map<std::string, std::shared_ptr<const NodeClassifier>> fits_;
  std::map<std::string, std::shared_ptr<const std::vector<ProbabilityMap>>> maps_;
  std::size_t hits_ = 0;
};

struct TrainOptions {
  FitMemo* memo = nullptr;
  // Identifies the training subject set inside the memo.
  std::string subject_key;
};

TrainedModel dmt_train(std::span<PreparedImage* const> images, const EngineConfig& cfg, int classes,
                       const TrainOptions& opts = {});
TrainedModel dmt_train(std::span<const MultiChannelImage> images, std::span<const LabelMap> labels,
                       const EngineConfig& cfg, int classes);

struct Prediction {
  LabelMap labels;
  ProbabilityMap probabilities;
  std::vector<ProbabilityMap> leaf_maps;
};

Prediction dmt_predict(const TrainedModel& model, PreparedImage& image);
Prediction dmt_predict(const TrainedModel& model, const MultiChannelImage& image);

// Per-pixel majority over the leaves' argmax labels; ties go to the highest
// summed posterior among the tied classes, then to the lowest class id.
// Probabilities are the per-pixel mean of the leaf maps.
std::pair<LabelMap, ProbabilityMap> majority_vote(std::span<const ProbabilityMap* const> leaves);

ProbabilityMap fuse_children(const ProbabilityMap& left, const ProbabilityMap& right);

struct FlowCounts {
  std::size_t descend = 0;
  std::size_t ascend = 0;
  std::size_t redescend = 0;
};
FlowCounts count_events(const std::vector<AuditEvent>& audit);

}  // namespace dmt
