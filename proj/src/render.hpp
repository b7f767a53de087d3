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

// PNG export for inspection only. Nothing in the pipeline reads PNGs back.

#pragma once

#include <string>

#include "grid.hpp"
#include "slic.hpp"

namespace dmt {

// 8-bit grayscale of one channel, linearly stretched over that channel's min-max.
void render_channel_png(const std::string& path, const MultiChannelImage& img, int channel);
// RGB using a fixed palette indexed by label.
void render_labels_png(const std::string& path, const LabelMap& labels);
// 8-bit grayscale of P(class) scaled by 255.
void render_probmap_png(const std::string& path, const ProbabilityMap& probs, int cls);
// Grayscale reference channel with superpixel boundary pixels drawn in red.
void render_edgemap_png(const std::string& path, const MultiChannelImage& img, int channel, const EdgeMap& edges);

}  // namespace dmt
