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

#include "grid.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include "blob.hpp"

namespace dmt {

namespace {

void check_dims(int width, int height, int planes, const char* what) {
  if (width < 1 || height < 1 || planes < 1)
    throw ArgumentError(std::string(what) + ": width, height and plane count must be >= 1");
}

}  // namespace

// ---------------------------------------------------------------- image

MultiChannelImage::MultiChannelImage(int width, int height, int channels, float fill)
    : width_(width), height_(height), channels_(channels) {
  check_dims(width, height, channels, "image");
  data_.assign(static_cast<std::size_t>(width) * height * channels, fill);
}

MultiChannelImage::MultiChannelImage(int width, int height, int channels, std::vector<float> data)
    : width_(width), height_(height), channels_(channels), data_(std::move(data)) {
  check_dims(width, height, channels, "image");
  if (data_.size() != static_cast<std::size_t>(width) * height * channels)
    throw ArgumentError("image: data size does not match dimensions");
}

float MultiChannelImage::clamped(int c, int x, int y) const {
  return at(c, std::clamp(x, 0, width_ - 1), std::clamp(y, 0, height_ - 1));
}

void MultiChannelImage::validate() const {
  check_dims(width_, height_, channels_, "image");
  for (float v : data_)
    if (!std::isfinite(v)) throw ArgumentError("image: non-finite intensity");
}

// ---------------------------------------------------------------- labels

LabelMap::LabelMap(int width, int height, int classes, std::uint8_t fill)
    : width_(width), height_(height), classes_(classes) {
  check_dims(width, height, classes, "label map");
  if (classes > 256) throw ArgumentError("label map: at most 256 classes");
  labels_.assign(static_cast<std::size_t>(width) * height, fill);
}

LabelMap::LabelMap(int width, int height, int classes, std::vector<std::uint8_t> labels)
    : width_(width), height_(height), classes_(classes), labels_(std::move(labels)) {
  check_dims(width, height, classes, "label map");
  if (classes > 256) throw ArgumentError("label map: at most 256 classes");
  if (labels_.size() != static_cast<std::size_t>(width) * height)
    throw ArgumentError("label map: data size does not match dimensions");
}

void LabelMap::validate() const {
  check_dims(width_, height_, classes_, "label map");
  for (auto l : labels_)
    if (l >= classes_) throw ArgumentError("label map: label " + std::to_string(l) + " >= class count");
}

// ---------------------------------------------------------------- probabilities

ProbabilityMap::ProbabilityMap(int width, int height, int classes, float fill)
    : width_(width), height_(height), classes_(classes) {
  check_dims(width, height, classes, "probability map");
  values_.assign(static_cast<std::size_t>(width) * height * classes, fill);
}

ProbabilityMap::ProbabilityMap(int width, int height, int classes, std::vector<float> values)
    : width_(width), height_(height), classes_(classes), values_(std::move(values)) {
  check_dims(width, height, classes, "probability map");
  if (values_.size() != static_cast<std::size_t>(width) * height * classes)
    throw ArgumentError("probability map: data size does not match dimensions");
}

ProbabilityMap ProbabilityMap::uniform(int width, int height, int classes) {
  return ProbabilityMap(width, height, classes, 1.0f / static_cast<float>(classes));
}

void ProbabilityMap::normalize() {
  const std::size_t n = pixel_count();
  for (std::size_t i = 0; i < n; ++i) {
    double sum = 0.0;
    for (int l = 0; l < classes_; ++l) sum += std::max(0.0f, values_[l * n + i]);
    if (!(sum > 0.0) || !std::isfinite(sum)) {
      for (int l = 0; l < classes_; ++l) values_[l * n + i] = 1.0f / static_cast<float>(classes_);
      continue;
    }
    for (int l = 0; l < classes_; ++l)
      values_[l * n + i] = static_cast<float>(std::max(0.0f, values_[l * n + i]) / sum);
  }
}

double ProbabilityMap::max_normalization_error() const {
  const std::size_t n = pixel_count();
  double worst = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double sum = 0.0;
    for (int l = 0; l < classes_; ++l) {
      const float v = values_[l * n + i];
      if (!std::isfinite(v) || v < 0.0f || v > 1.0f) return std::numeric_limits<double>::infinity();
      sum += v;
    }
    worst = std::max(worst, std::abs(sum - 1.0));
  }
  return worst;
}

void ProbabilityMap::validate() const {
  const double err = max_normalization_error();
  if (!(err <= kSumTolerance))
    throw ContractError("probability map: per-pixel vectors not normalized (max error " + std::to_string(err) + ")");
}

std::uint64_t ProbabilityMap::fingerprint() const {
  std::uint64_t h = fnv1a_bytes(&width_, sizeof width_);
  h = fnv1a_bytes(&height_, sizeof height_, h);
  h = fnv1a_bytes(&classes_, sizeof classes_, h);
  return fnv1a_bytes(values_.data(), values_.size() * sizeof(float), h);
}

void PatchGeometry::validate() const {
  if (feature_patch_side < 1 || label_patch_side < 1 || stride < 1)
    throw ArgumentError("patch geometry: sides and stride must be >= 1");
  if (label_patch_side > feature_patch_side)
    throw ArgumentError("patch geometry: label patch side exceeds feature patch side");
}

// ---------------------------------------------------------------- operations

std::vector<float> extract_patch(const MultiChannelImage& img, Pixel center, int side) {
  if (side < 1) throw ArgumentError("extract_patch: side must be >= 1");
  if (center.x < 0 || center.y < 0 || center.x >= img.width() || center.y >= img.height())
    throw ArgumentError("extract_patch: center outside image");
  const int x0 = patch_origin(center.x, side);
  const int y0 = patch_origin(center.y, side);
  std::vector<float> out;
  out.reserve(static_cast<std::size_t>(side) * side * img.channels());
  for (int c = 0; c < img.channels(); ++c)
    for (int dy = 0; dy < side; ++dy)
      for (int dx = 0; dx < side; ++dx) out.push_back(img.clamped(c, x0 + dx, y0 + dy));
  return out;
}

LabelMap argmax_labels(const ProbabilityMap& p) {
  LabelMap out(p.width(), p.height(), p.classes());
  const std::size_t n = p.pixel_count();
  for (std::size_t i = 0; i < n; ++i) {
    int best = 0;
    float best_v = p.at(0, i);
    for (int l = 1; l < p.classes(); ++l) {
      if (p.at(l, i) > best_v) {
        best_v = p.at(l, i);
        best = l;
      }
    }
    out[i] = static_cast<std::uint8_t>(best);
  }
  return out;
}

ProbabilityMap average_maps(std::span<const ProbabilityMap* const> maps) {
  if (maps.empty()) throw ArgumentError("average_maps: empty map list");
  const ProbabilityMap& first = *maps[0];
  for (const auto* m : maps)
    if (m->width() != first.width() || m->height() != first.height() || m->classes() != first.classes())
      throw ArgumentError("average_maps: dimension or class-count mismatch");
  const std::size_t total = first.values().size();
  std::vector<double> acc(total, 0.0);
  for (const auto* m : maps) {
    const auto& v = m->values();
    for (std::size_t i = 0; i < total; ++i) acc[i] += v[i];
  }
  std::vector<float> out(total);
  const double inv = 1.0 / static_cast<double>(maps.size());
  const std::size_t n = first.pixel_count();
  const int classes = first.classes();
  for (std::size_t i = 0; i < n; ++i) {
    double sum = 0.0;
    for (int l = 0; l < classes; ++l) sum += acc[l * n + i] * inv;
    for (int l = 0; l < classes; ++l)
      out[l * n + i] = sum > 0.0 ? static_cast<float>(acc[l * n + i] * inv / sum)
                                 : 1.0f / static_cast<float>(classes);
  }
  return ProbabilityMap(first.width(), first.height(), classes, std::move(out));
}

ProbabilityMap average_maps(const std::vector<ProbabilityMap>& maps) {
  std::vector<const ProbabilityMap*> ptrs;
  ptrs.reserve(maps.size());
  for (const auto& m : maps) ptrs.push_back(&m);
  return average_maps(std::span<const ProbabilityMap* const>(ptrs));
}

// ---------------------------------------------------------------- MDI

namespace {

constexpr std::string_view kMdiMagic = "MDI1";
constexpr std::uint64_t kMaxMdiElements = std::uint64_t{1} << 32;

void write_header(ByteWriter& w, MdiKind kind, int width, int height, int planes) {
  w.magic(kMdiMagic);
  w.u8(static_cast<std::uint8_t>(kind));
  w.u32(static_cast<std::uint32_t>(width));
  w.u32(static_cast<std::uint32_t>(height));
  w.u32(static_cast<std::uint32_t>(planes));
}

struct MdiHeader {
  MdiKind kind;
  int width;
  int height;
  int planes;
  std::uint64_t elements;
};

MdiHeader read_header(ByteReader& r, MdiKind expected) {
  r.expect_magic(kMdiMagic);
  const std::size_t kind_at = r.offset();
  const std::uint8_t kind = r.u8("kind");
  if (kind > 2) throw FormatError("unknown MDI kind " + std::to_string(kind), kind_at);
  if (static_cast<MdiKind>(kind) != expected)
    throw FormatError("MDI kind " + std::to_string(kind) + " where " +
                          std::to_string(static_cast<int>(expected)) + " was expected",
                      kind_at);
  const std::size_t dims_at = r.offset();
  const std::uint64_t w = r.u32("width");
  const std::uint64_t h = r.u32("height");
  const std::uint64_t c = r.u32("channels");
  if (w == 0 || h == 0 || c == 0) throw FormatError("zero dimension", dims_at);
  if (w > 0x7fffffff || h > 0x7fffffff || c > 0x7fffffff) throw FormatError("dimension overflow", dims_at);
  const std::uint64_t per_plane = w * h;
  if (per_plane > kMaxMdiElements || per_plane * c > kMaxMdiElements)
    throw FormatError("dimension overflow", dims_at);
  const std::uint64_t elements = expected == MdiKind::Labels ? per_plane : per_plane * c;
  return {static_cast<MdiKind>(kind), static_cast<int>(w), static_cast<int>(h), static_cast<int>(c), elements};
}

void expect_end(const ByteReader& r) {
  if (r.remaining() != 0) throw FormatError("trailing bytes after payload", r.offset());
}

}  // namespace

std::vector<std::uint8_t> encode_mdi(const MultiChannelImage& img) {
  ByteWriter w;
  write_header(w, MdiKind::Image, img.width(), img.height(), img.channels());
  w.bytes(img.data().data(), img.data().size() * sizeof(float));
  return w.take();
}

std::vector<std::uint8_t> encode_mdi(const LabelMap& labels) {
  ByteWriter w;
  write_header(w, MdiKind::Labels, labels.width(), labels.height(), labels.classes());
  w.bytes(labels.labels().data(), labels.labels().size());
  return w.take();
}

std::vector<std::uint8_t> encode_mdi(const ProbabilityMap& probs) {
  ByteWriter w;
  write_header(w, MdiKind::ProbMap, probs.width(), probs.height(), probs.classes());
  w.bytes(probs.values().data(), probs.values().size() * sizeof(float));
  return w.take();
}

MdiKind peek_mdi_kind(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  r.expect_magic(kMdiMagic);
  const std::size_t at = r.offset();
  const std::uint8_t kind = r.u8("kind");
  if (kind > 2) throw FormatError("unknown MDI kind " + std::to_string(kind), at);
  return static_cast<MdiKind>(kind);
}

MultiChannelImage decode_mdi_image(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  const MdiHeader h = read_header(r, MdiKind::Image);
  r.need(h.elements * sizeof(float), "image payload");
  std::vector<float> data(h.elements);
  r.bytes(data.data(), h.elements * sizeof(float), "image payload");
  expect_end(r);
  return MultiChannelImage(h.width, h.height, h.planes, std::move(data));
}

LabelMap decode_mdi_labels(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  const MdiHeader h = read_header(r, MdiKind::Labels);
  if (h.planes > 256) throw FormatError("label class count exceeds 256", 13);
  r.need(h.elements, "label payload");
  std::vector<std::uint8_t> data(h.elements);
  const std::size_t payload_at = r.offset();
  r.bytes(data.data(), h.elements, "label payload");
  expect_end(r);
  for (std::size_t i = 0; i < data.size(); ++i)
    if (data[i] >= h.planes) throw FormatError("label value exceeds class count", payload_at + i);
  return LabelMap(h.width, h.height, h.planes, std::move(data));
}

ProbabilityMap decode_mdi_probmap(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  const MdiHeader h = read_header(r, MdiKind::ProbMap);
  r.need(h.elements * sizeof(float), "probability payload");
  std::vector<float> data(h.elements);
  r.bytes(data.data(), h.elements * sizeof(float), "probability payload");
  expect_end(r);
  return ProbabilityMap(h.width, h.height, h.planes, std::move(data));
}

std::vector<std::uint8_t> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("read failed: " + path);
  return bytes;
}

void write_file(const std::string& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot create " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed: " + path);
}

void write_mdi(const std::string& path, const MultiChannelImage& img) { write_file(path, encode_mdi(img)); }
void write_mdi(const std::string& path, const LabelMap& labels) { write_file(path, encode_mdi(labels)); }
void write_mdi(const std::string& path, const ProbabilityMap& probs) { write_file(path, encode_mdi(probs)); }

MultiChannelImage read_mdi_image(const std::string& path) { return decode_mdi_image(read_file(path)); }
LabelMap read_mdi_labels(const std::string& path) { return decode_mdi_labels(read_file(path)); }
ProbabilityMap read_mdi_probmap(const std::string& path) { return decode_mdi_probmap(read_file(path)); }

}  // namespace dmt
