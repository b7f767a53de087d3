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

// Engine configuration files: `[section]` headers and `key = value` lines,
// `#` or `;` comments. Sections: engine, tree, schedule, features, srf, bn,
// slic. Missing keys keep their defaults; errors carry the line number.
//
//   [engine]   method, depth, rounds, seed, reference_channel
//   [tree]     node.<path>.kind = srf|bn       (path: root, root.L, root.R.L, ...)
//   [schedule] level.<d>.patch / level.<d>.label / level.<d>.superpixels

#pragma once

#include <string>

#include "engine.hpp"

namespace dmt {

EngineConfig parse_config(const std::string& text);
EngineConfig load_config(const std::string& path);
// Every field written out; parse_config(format_config(c)) reproduces c.
std::string format_config(const EngineConfig& cfg);

}  // namespace dmt
