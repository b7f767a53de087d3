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

// Synthetic lesion phantoms: three nested regions (edema, core, enhancing)
// with radially perturbed boundaries over a textured background.

#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "grid.hpp"

namespace dmt {

struct PhantomParams {
  static constexpr int kClasses = 4;
  static constexpr int kChannels = 3;

  int size = 128;
  // contrast[channel][class]
  std::array<std::array<double, kClasses>, kChannels> contrast{{
      {0.4125, 0.4625, 0.4500, 0.4750},
      {0.4375, 0.4750, 0.5125, 0.4875},
      {0.4375, 0.4250, 0.4575, 0.5125},
  }};
  double boundary_irregularity = 0.3;
  double noise_sigma = 0.05;
  // Smooth intensity texture amplitude and per-subject contrast jitter.
  double texture_amplitude = 0.015;
  double contrast_jitter = 0.0075;
  // Background split into two tissue types by a smooth random field; the
  // second type is offset by tissue_contrast per channel.
  std::array<double, kChannels> tissue_contrast{0.0, 0.0, 0.0};
  // Gaussian partial-volume blur of the noiseless intensities, in pixels.
  double blur_sigma = 0.0;
  int subjects = 20;
  std::uint64_t rng_seed = 42;

  void validate() const;
};

struct Subject {
  MultiChannelImage image;
  LabelMap labels;
};

Subject generate_subject(const PhantomParams& params, int index);
std::vector<Subject> generate(const PhantomParams& params);

// Dataset on disk: MDI files plus a key=value manifest.
struct DatasetManifest {
  PhantomParams params;
  std::vector<std::string> image_files;
  std::vector<std::string> label_files;
};

std::string format_manifest(const DatasetManifest& manifest);
DatasetManifest parse_manifest(const std::string& text);

void write_dataset(const std::string& dir, const PhantomParams& params, const std::vector<Subject>& subjects);
std::vector<Subject> read_dataset(const std::string& dir, DatasetManifest* manifest = nullptr);

}  // namespace dmt
