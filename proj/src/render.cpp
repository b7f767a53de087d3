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

#include "render.hpp"

#include <png.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <vector>

namespace dmt {

namespace {

void write_png(const std::string& path, int width, int height, int color_type, const std::vector<std::uint8_t>& pixels) {
  FILE* fp = std::fopen(path.c_str(), "wb");
  if (fp == nullptr) throw IoError("cannot create " + path);
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (png == nullptr || info == nullptr) {
    png_destroy_write_struct(&png, &info);
    std::fclose(fp);
    throw IoError("libpng initialisation failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    std::fclose(fp);
    throw IoError("PNG encoding failed: " + path);
  }
  png_init_io(png, fp);
  png_set_IHDR(png, info, width, height, 8, color_type, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  const int stride = width * (color_type == PNG_COLOR_TYPE_RGB ? 3 : 1);
  for (int y = 0; y < height; ++y)
    png_write_row(png, const_cast<png_bytep>(pixels.data() + static_cast<std::size_t>(y) * stride));
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  std::fclose(fp);
}

std::vector<std::uint8_t> stretch(const MultiChannelImage& img, int channel) {
  if (channel < 0 || channel >= img.channels()) throw ArgumentError("render: channel out of range");
  const auto plane = img.plane(channel);
  const auto [lo, hi] = std::minmax_element(plane.begin(), plane.end());
  const float range = *hi - *lo;
  std::vector<std::uint8_t> out(plane.size());
  for (std::size_t i = 0; i < plane.size(); ++i)
    out[i] = range > 0 ? static_cast<std::uint8_t>(std::lround(255.0f * (plane[i] - *lo) / range)) : 0;
  return out;
}

constexpr std::array<std::array<std::uint8_t, 3>, 8> kPalette{{
    {0, 0, 0},
    {46, 204, 113},
    {241, 196, 15},
    {231, 76, 60},
    {52, 152, 219},
    {155, 89, 182},
    {26, 188, 156},
    {236, 240, 241},
}};

}  // namespace

void render_channel_png(const std::string& path, const MultiChannelImage& img, int channel) {
  write_png(path, img.width(), img.height(), PNG_COLOR_TYPE_GRAY, stretch(img, channel));
}

void render_labels_png(const std::string& path, const LabelMap& labels) {
  std::vector<std::uint8_t> rgb(labels.pixel_count() * 3);
  for (std::size_t i = 0; i < labels.pixel_count(); ++i) {
    const auto& c = kPalette[labels[i] % kPalette.size()];
    std::copy(c.begin(), c.end(), rgb.begin() + 3 * i);
  }
  write_png(path, labels.width(), labels.height(), PNG_COLOR_TYPE_RGB, rgb);
}

void render_probmap_png(const std::string& path, const ProbabilityMap& probs, int cls) {
  if (cls < 0 || cls >= probs.classes()) throw ArgumentError("render: class out of range");
  std::vector<std::uint8_t> gray(probs.pixel_count());
  for (std::size_t i = 0; i < gray.size(); ++i)
    gray[i] = static_cast<std::uint8_t>(std::lround(255.0f * std::clamp(probs.at(cls, i), 0.0f, 1.0f)));
  write_png(path, probs.width(), probs.height(), PNG_COLOR_TYPE_GRAY, gray);
}

void render_edgemap_png(const std::string& path, const MultiChannelImage& img, int channel, const EdgeMap& edges) {
  if (edges.width != img.width() || edges.height != img.height())
    throw ArgumentError("render: edge map does not match image dimensions");
  const auto gray = stretch(img, channel);
  std::vector<std::uint8_t> rgb(gray.size() * 3);
  for (std::size_t i = 0; i < gray.size(); ++i) rgb[3 * i] = rgb[3 * i + 1] = rgb[3 * i + 2] = gray[i];
  for (const auto& e : edges.edges) {
    for (const auto& [p, q] : e.boundary) {
      rgb[3 * static_cast<std::size_t>(p)] = 255;
      rgb[3 * static_cast<std::size_t>(p) + 1] = 0;
      rgb[3 * static_cast<std::size_t>(p) + 2] = 0;
    }
  }
  write_png(path, img.width(), img.height(), PNG_COLOR_TYPE_RGB, rgb);
}

}  // namespace dmt
