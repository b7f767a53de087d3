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

// Superpixel Bayesian network. Superpixel label nodes carry a prior and a
// GMM likelihood of their features; each edge node couples the two
// superpixels it separates and is observed through its edge strength.
// Marginalising the edge state gives a pairwise potential, and inference is
// damped synchronous sum-product belief propagation.

#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "features.hpp"
#include "gmm.hpp"
#include "grid.hpp"
#include "slic.hpp"

namespace dmt {

struct BnParams {
  int gmm_components = 3;
  int em_iterations = 100;
  double em_tol = 1e-5;
  double var_floor = 1e-6;
  double edge_true_given_diff = 0.8;
  double edge_true_given_same = 0.2;
  int bp_max_iters = 50;
  double bp_damping = 0.5;
  double bp_tol = 1e-4;
  int edge_bins = 16;
  // Exponent applied to the feature likelihood before it meets the prior.
  double likelihood_weight = 0.05;
  std::uint64_t rng_seed = 0;

  void validate() const;
};

// Row-major double matrix, one row per superpixel.
struct SuperpixelFeatures {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  std::span<const double> row(std::size_t r) const { return {data.data() + r * cols, cols}; }
  std::span<double> row(std::size_t r) { return {data.data() + r * cols, cols}; }
};

// Base features of every superpixel; neighborhood is the mean intensity of
// the adjacent superpixels.
SuperpixelFeatures superpixel_feature_matrix(const ImageResponses& resp, const EdgeMap& edge_map);

// Mean absolute intensity step across each edge's boundary pairs, averaged
// over channels after scaling each channel by its range.
std::vector<double> edge_strengths(const EdgeMap& edge_map, const MultiChannelImage& img);

// Histogram likelihoods P(strength | edge state).
struct EdgeEvidence {
  double max_strength = 1.0;
  std::vector<double> given_true;
  std::vector<double> given_false;

  int bin(double strength) const;
  double likelihood(double strength, bool edge_on) const;
};

struct BnModel {
  BnParams params;
  int classes = 0;
  std::uint64_t fingerprint = 0;
  std::vector<double> feature_mean;
  std::vector<double> feature_scale;
  std::vector<DiagGmm> class_models;
  EdgeEvidence evidence;

  int feature_count() const { return static_cast<int>(feature_mean.size()); }
  // Per-class log-likelihood of raw (unstandardized) features.
  std::vector<double> log_likelihoods(std::span<const double> features) const;
  // Row-major L x L pairwise potential for one observed edge strength.
  std::vector<double> pairwise(double strength) const;

  std::vector<std::uint8_t> serialize() const;
  static BnModel deserialize(std::span<const std::uint8_t> bytes);
};

struct BnTrainingImage {
  const EdgeMap* edge_map = nullptr;
  const SuperpixelFeatures* features = nullptr;
  std::span<const std::uint8_t> labels;  // one per superpixel
  std::span<const double> strengths;     // one per edge
};

BnModel bn_train(std::span<const BnTrainingImage> images, const BnParams& params, int classes,
                 std::uint64_t layout_fingerprint);

// Generic pairwise model for belief propagation.
struct PairwiseGraph {
  int nodes = 0;
  int labels = 0;
  std::vector<double> unary;                 // nodes x labels, nonnegative
  std::vector<std::pair<int, int>> edges;    // distinct endpoints
  std::vector<double> potentials;            // edges x labels x labels, [la * labels + lb]
};

struct BpOptions {
  int max_iterations = 50;
  double damping = 0.5;
  double tolerance = 1e-4;
};

struct BpResult {
  std::vector<double> marginals;  // nodes x labels
  int iterations = 0;
  bool converged = false;
};

bool is_acyclic(int nodes, std::span<const std::pair<int, int>> edges);

// Synchronous sum-product. Damping applies only when the graph has a cycle,
// so tree-structured graphs reach exact marginals.
BpResult loopy_bp(const PairwiseGraph& graph, const BpOptions& opts);

// Per-superpixel class means of a pixel map, renormalized.
std::vector<double> superpixel_prior(const EdgeMap& edge_map, const ProbabilityMap& prior);

struct BnInference {
  std::vector<double> prior;      // superpixels x classes
  std::vector<double> posterior;  // superpixels x classes
  int iterations = 0;
  bool converged = false;
};

BnInference bn_infer_superpixels(const BnModel& model, const EdgeMap& edge_map, const SuperpixelFeatures& features,
                                 std::span<const double> strengths, const ProbabilityMap* prior);

ProbabilityMap rasterize_posteriors(const EdgeMap& edge_map, std::span<const double> posterior, int classes);

ProbabilityMap bn_infer(const BnModel& model, const EdgeMap& edge_map, const SuperpixelFeatures& features,
                        std::span<const double> strengths, const ProbabilityMap* prior);

}  // namespace dmt
