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

// Trained model directory:
//   config.ini    engine configuration
//   manifest.txt  format, class/channel counts, one entry per classifier blob
//   audit.log     fit events in flow order, then per-image leaf fingerprints
//   node_*.srf / node_*.bn   classifier blobs

#pragma once

#include <string>
#include <vector>

#include "engine.hpp"

namespace dmt {

void save_model(const std::string& dir, const TrainedModel& model);
TrainedModel load_model(const std::string& dir);

std::string format_audit(const TrainedModel& model);
void parse_audit(const std::string& text, TrainedModel& model);

// Blob file names written by save_model, in node order.
std::vector<std::string> model_blob_files(const TrainedModel& model);

}  // namespace dmt
