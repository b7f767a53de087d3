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

// Statistical features over square patches (SRF input) and arbitrary pixel
// sets (superpixels, BN input).
//
// Per channel, in order: mean, std, max, min, median, sobel, gradient,
// laplacian, one DoG per sigma pair, entropy, mean_curvature,
// gaussian_curvature, kurtosis, skewness, one Gabor magnitude per
// (orientation, wavelength), symmetry, neighborhood. Then projection_x,
// projection_y. Then, when context is enabled, per class: ctx.center and
// ctx.mean for patches, ctx.mean only for superpixels.

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "grid.hpp"

namespace dmt {

struct FeatureConfig {
  int gabor_orientations = 4;
  std::vector<double> gabor_wavelengths{4.0, 8.0};
  std::vector<std::pair<double, double>> dog_sigma_pairs{{1.0, 2.0}};
  int entropy_bins = 32;
  bool include_context = false;
  int context_classes = 0;

  void validate() const;
  FeatureConfig with_context(int classes) const;
  FeatureConfig without_context() const;
};

enum class FeatureScope { Patch, Superpixel };

struct FeatureLayout {
  std::vector<std::string> names;
  std::uint64_t fingerprint = 0;
  // Entries before the context block.
  std::size_t base_size = 0;

  std::size_t size() const { return names.size(); }
};

FeatureLayout feature_layout(const FeatureConfig& cfg, int channels, FeatureScope scope);

struct FeatureVector {
  std::vector<double> values;
};

// Filter responses for one image, computed once and shared by every feature
// query against it. Responses are taken on the mean-subtracted channel so that
// constant images produce exact zeros.
class ImageResponses {
 public:
  ImageResponses(const MultiChannelImage& img, const FeatureConfig& cfg);

  const MultiChannelImage& image() const { return *img_; }
  int channels() const { return img_->channels(); }
  int per_channel_planes() const { return planes_per_channel_; }
  std::span<const double> plane(int channel, int index) const {
    const std::size_t n = img_->pixel_count();
    return {planes_.data() + (static_cast<std::size_t>(channel) * planes_per_channel_ + index) * n, n};
  }
  double channel_min(int c) const { return min_[c]; }
  double channel_max(int c) const { return max_[c]; }
  int entropy_bins() const { return entropy_bins_; }
  int dog_count() const { return dog_count_; }
  int gabor_count() const { return gabor_count_; }

 private:
  const MultiChannelImage* img_;
  int planes_per_channel_ = 0;
  int dog_count_ = 0;
  int gabor_count_ = 0;
  int entropy_bins_ = 32;
  std::vector<double> planes_;
  std::vector<double> min_, max_;
};

// Response plane order inside ImageResponses, per channel.
namespace response {
constexpr int kSobel = 0;
constexpr int kGradient = 1;
constexpr int kLaplacian = 2;
constexpr int kMeanCurvature = 3;
constexpr int kGaussianCurvature = 4;
constexpr int kSymmetry = 5;
constexpr int kFirstDog = 6;
}  // namespace response

// Base (context-free) patch features written into out (size = layout.base_size).
void patch_base_features(const ImageResponses& resp, Pixel center, int side, std::span<double> out);

// Context entries for a patch: per class, value at center and patch mean.
void patch_context_features(const ProbabilityMap& context, Pixel center, int side, std::span<double> out);

FeatureVector patch_features(const MultiChannelImage& img, const ProbabilityMap* context, Pixel center, int side,
                             const FeatureConfig& cfg);

// neighborhood: per-channel mean intensity of adjacent superpixels; when
// absent, the set's own per-channel mean is used.
void superpixel_base_features(const ImageResponses& resp, std::span<const std::int32_t> pixels,
                              std::span<const double> neighborhood, std::span<double> out);

FeatureVector superpixel_features(const MultiChannelImage& img, const ProbabilityMap* context,
                                  std::span<const Pixel> pixel_set, const FeatureConfig& cfg,
                                  std::optional<std::vector<double>> neighborhood = std::nullopt);

// Row-major feature matrix, one row per sample.
struct FeatureMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<float> data;

  std::span<const float> row(std::size_t r) const { return {data.data() + r * cols, cols}; }
  std::span<float> row(std::size_t r) { return {data.data() + r * cols, cols}; }
};

// Base patch features for every pixel (raster order).
FeatureMatrix dense_patch_base_features(const ImageResponses& resp, int side);
// Context entries for every pixel (raster order).
FeatureMatrix dense_patch_context_features(const ProbabilityMap& context, int side);

std::string feature_layout_csv(const FeatureLayout& layout);

}  // namespace dmt
