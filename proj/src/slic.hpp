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

#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "grid.hpp"

namespace dmt {

struct SlicParams {
  int target_superpixels = 1000;
  double compactness = 10.0;
  int iterations = 10;
  double min_region_fraction = 0.25;

  void validate() const;
};

struct Superpixel {
  int id = 0;
  std::vector<std::int32_t> pixels;  // linear indices, raster order
  double centroid_x = 0.0;
  double centroid_y = 0.0;
};

// Shared boundary between superpixels a < b. Each boundary entry is a
// 4-adjacent pixel pair (pixel in a, pixel in b).
struct EdgeSegment {
  int id = 0;
  int a = 0;
  int b = 0;
  std::vector<std::pair<std::int32_t, std::int32_t>> boundary;
};

struct EdgeMap {
  int width = 0;
  int height = 0;
  std::vector<std::int32_t> assignment;
  std::vector<Superpixel> superpixels;
  std::vector<EdgeSegment> edges;

  std::size_t size() const { return superpixels.size(); }
  // Neighbor superpixel ids per superpixel, ascending.
  std::vector<std::vector<int>> adjacency() const;
  // Checks the full partition / connectivity / edge invariants; throws ContractError.
  void validate() const;
};

// Builds superpixel lists and edges from a per-pixel assignment whose ids are
// already dense in [0, N).
EdgeMap edge_map_from_assignment(int width, int height, std::vector<std::int32_t> assignment);

// SLIC on one reference channel. The channel is rescaled to [0, 100] so the
// compactness weight has its usual meaning.
EdgeMap slic(const MultiChannelImage& img, int reference_channel, const SlicParams& params);

// Reuses the partition on another image of the same size: per-superpixel pixel sets.
std::vector<std::vector<std::int32_t>> apply_partition(const EdgeMap& edge_map, const MultiChannelImage& other);

// Modal label per superpixel; ties go to the lowest label.
std::vector<std::uint8_t> majority_label(const EdgeMap& edge_map, const LabelMap& labels);

}  // namespace dmt
