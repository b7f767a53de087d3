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

// Raster types shared by every stage of the pipeline. All three rasters store
// planes: plane k is a row-major width x height block, planes stacked in order
// (channels for images, classes for probability maps).

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "common.hpp"

namespace dmt {

struct Pixel {
  int x = 0;
  int y = 0;
};

class MultiChannelImage {
 public:
  MultiChannelImage() = default;
  MultiChannelImage(int width, int height, int channels, float fill = 0.0f);
  MultiChannelImage(int width, int height, int channels, std::vector<float> data);

  int width() const { return width_; }
  int height() const { return height_; }
  int channels() const { return channels_; }
  std::size_t pixel_count() const { return static_cast<std::size_t>(width_) * height_; }

  float at(int c, int x, int y) const { return data_[(static_cast<std::size_t>(c) * height_ + y) * width_ + x]; }
  float& at(int c, int x, int y) { return data_[(static_cast<std::size_t>(c) * height_ + y) * width_ + x]; }
  // Border-replicated read.
  float clamped(int c, int x, int y) const;

  std::span<const float> plane(int c) const { return {data_.data() + c * pixel_count(), pixel_count()}; }
  std::span<float> plane(int c) { return {data_.data() + c * pixel_count(), pixel_count()}; }
  const std::vector<float>& data() const { return data_; }

  // Throws ArgumentError if dimensions are empty or any intensity is not finite.
  void validate() const;

 private:
  int width_ = 0;
  int height_ = 0;
  int channels_ = 0;
  std::vector<float> data_;
};

class LabelMap {
 public:
  LabelMap() = default;
  LabelMap(int width, int height, int classes, std::uint8_t fill = 0);
  LabelMap(int width, int height, int classes, std::vector<std::uint8_t> labels);

  int width() const { return width_; }
  int height() const { return height_; }
  int classes() const { return classes_; }
  std::size_t pixel_count() const { return labels_.size(); }

  std::uint8_t at(int x, int y) const { return labels_[static_cast<std::size_t>(y) * width_ + x]; }
  std::uint8_t& at(int x, int y) { return labels_[static_cast<std::size_t>(y) * width_ + x]; }
  std::uint8_t operator[](std::size_t i) const { return labels_[i]; }
  std::uint8_t& operator[](std::size_t i) { return labels_[i]; }
  const std::vector<std::uint8_t>& labels() const { return labels_; }

  void validate() const;

 private:
  int width_ = 0;
  int height_ = 0;
  int classes_ = 0;
  std::vector<std::uint8_t> labels_;
};

class ProbabilityMap {
 public:
  static constexpr double kSumTolerance = 1e-6;

  ProbabilityMap() = default;
  ProbabilityMap(int width, int height, int classes, float fill = 0.0f);
  ProbabilityMap(int width, int height, int classes, std::vector<float> values);
  static ProbabilityMap uniform(int width, int height, int classes);

  int width() const { return width_; }
  int height() const { return height_; }
  int classes() const { return classes_; }
  std::size_t pixel_count() const { return static_cast<std::size_t>(width_) * height_; }

  float at(int cls, std::size_t pixel) const { return values_[cls * pixel_count() + pixel]; }
  float& at(int cls, std::size_t pixel) { return values_[cls * pixel_count() + pixel]; }
  std::span<const float> plane(int cls) const { return {values_.data() + cls * pixel_count(), pixel_count()}; }
  std::span<float> plane(int cls) { return {values_.data() + cls * pixel_count(), pixel_count()}; }
  const std::vector<float>& values() const { return values_; }

  // Rescales each pixel's vector to sum to one; an all-zero vector becomes uniform.
  void normalize();
  // Largest |sum - 1| over pixels, or infinity if an entry is outside [0,1] or not finite.
  double max_normalization_error() const;
  bool is_valid() const { return max_normalization_error() <= kSumTolerance; }
  void validate() const;

  std::uint64_t fingerprint() const;

 private:
  int width_ = 0;
  int height_ = 0;
  int classes_ = 0;
  std::vector<float> values_;
};

struct PatchGeometry {
  int feature_patch_side = 10;
  int label_patch_side = 7;
  int stride = 1;

  void validate() const;
};

// Top-left corner of a side x side window around center. Even sides put the
// center at offset (side/2, side/2) from the corner.
constexpr int patch_origin(int center, int side) { return center - side / 2; }

// side x side x C block, channel-major then row-major; outside pixels replicate the border.
std::vector<float> extract_patch(const MultiChannelImage& img, Pixel center, int side);

LabelMap argmax_labels(const ProbabilityMap& p);

// Element-wise mean of equally-shaped maps, renormalized per pixel.
ProbabilityMap average_maps(std::span<const ProbabilityMap* const> maps);
ProbabilityMap average_maps(const std::vector<ProbabilityMap>& maps);

// MDI: little-endian "MDI1" | kind u8 | width u32 | height u32 | channels u32 | payload.
enum class MdiKind : std::uint8_t { Image = 0, Labels = 1, ProbMap = 2 };

std::vector<std::uint8_t> encode_mdi(const MultiChannelImage& img);
std::vector<std::uint8_t> encode_mdi(const LabelMap& labels);
std::vector<std::uint8_t> encode_mdi(const ProbabilityMap& probs);

MdiKind peek_mdi_kind(std::span<const std::uint8_t> bytes);
MultiChannelImage decode_mdi_image(std::span<const std::uint8_t> bytes);
LabelMap decode_mdi_labels(std::span<const std::uint8_t> bytes);
ProbabilityMap decode_mdi_probmap(std::span<const std::uint8_t> bytes);

std::vector<std::uint8_t> read_file(const std::string& path);
void write_file(const std::string& path, std::span<const std::uint8_t> bytes);

void write_mdi(const std::string& path, const MultiChannelImage& img);
void write_mdi(const std::string& path, const LabelMap& labels);
void write_mdi(const std::string& path, const ProbabilityMap& probs);
MultiChannelImage read_mdi_image(const std::string& path);
LabelMap read_mdi_labels(const std::string& path);
ProbabilityMap read_mdi_probmap(const std::string& path);

}  // namespace dmt
