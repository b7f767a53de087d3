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

#include "config.hpp"

#include <charconv>
#include <cstdio>
#include <functional>
#include <map>
#include <sstream>
#include <vector>

#include "common.hpp"
#include "grid.hpp"

namespace dmt {
namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  const auto b = s.find_last_not_of(" \t\r");
  return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::istringstream is(s);
  std::string item;
  while (std::getline(is, item, sep)) out.push_back(trim(item));
  return out;
}

struct Entry {
  std::string value;
  int line = 0;
};

long long to_int(const std::string& key, const Entry& e) {
  long long v = 0;
  const char* end = e.value.data() + e.value.size();
  auto [p, ec] = std::from_chars(e.value.data(), end, v);
  if (ec != std::errc() || p != end) throw ConfigError("'" + key + "' expects an integer, got '" + e.value + "'", e.line);
  return v;
}

std::uint64_t to_u64(const std::string& key, const Entry& e) {
  std::uint64_t v = 0;
  const char* end = e.value.data() + e.value.size();
  auto [p, ec] = std::from_chars(e.value.data(), end, v);
  if (ec != std::errc() || p != end)
    throw ConfigError("'" + key + "' expects an unsigned integer, got '" + e.value + "'", e.line);
  return v;
}

double to_real(const std::string& key, const std::string& s, int line) {
  double v = 0;
  const char* end = s.data() + s.size();
  auto [p, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || p != end) throw ConfigError("'" + key + "' expects a number, got '" + s + "'", line);
  return v;
}

int to_int_in(const std::string& key, const Entry& e, long long lo, long long hi) {
  const long long v = to_int(key, e);
  if (v < lo || v > hi)
    throw ConfigError("'" + key + "' must lie in [" + std::to_string(lo) + ", " + std::to_string(hi) + "]", e.line);
  return static_cast<int>(v);
}

using Setter = std::function<void(EngineConfig&, const std::string&, const Entry&)>;

const std::map<std::string, std::map<std::string, Setter>>& setters() {
  static const std::map<std::string, std::map<std::string, Setter>> table = {
      {"srf",
       {
           {"trees", [](EngineConfig& c, const std::string& k, const Entry& e) { c.srf.n_trees = to_int_in(k, e, 1, 100000); }},
           {"max_depth", [](EngineConfig& c, const std::string& k, const Entry& e) { c.srf.max_depth = to_int_in(k, e, 1, 64); }},
           {"min_samples_leaf",
            [](EngineConfig& c, const std::string& k, const Entry& e) { c.srf.min_samples_leaf = to_int_in(k, e, 1, 1 << 30); }},
           {"candidate_features",
            [](EngineConfig& c, const std::string& k, const Entry& e) {
              c.srf.candidate_features_per_node = to_int_in(k, e, 0, 1 << 30);
            }},
           {"candidate_thresholds",
            [](EngineConfig& c, const std::string& k, const Entry& e) { c.srf.candidate_thresholds = to_int_in(k, e, 1, 1 << 20); }},
           {"bootstrap_fraction",
            [](EngineConfig& c, const std::string& k, const Entry& e) { c.srf.bootstrap_fraction = to_real(k, e.value, e.line); }},
           {"samples_per_image",
            [](EngineConfig& c, const std::string& k, const Entry& e) { c.srf.samples_per_image = to_int_in(k, e, 1, 1 << 30); }},
       }},
      {"bn",
       {
           {"gmm_components", [](EngineConfig& c, const std::string& k, const Entry& e) { c.bn.gmm_components = to_int_in(k, e, 1, 1000); }},
           {"em_iterations", [](EngineConfig& c, const std::string& k, const Entry& e) { c.bn.em_iterations = to_int_in(k, e, 1, 1 << 20); }},
           {"em_tol", [](EngineConfig& c, const std::string& k, const Entry& e) { c.bn.em_tol = to_real(k, e.value, e.line); }},
           {"var_floor", [](EngineConfig& c, const std::string& k, const Entry& e) { c.bn.var_floor = to_real(k, e.value, e.line); }},
           {"edge_true_given_diff",
            [](EngineConfig& c, const std::string& k, const Entry& e) { c.bn.edge_true_given_diff = to_real(k, e.value, e.line); }},
           {"edge_true_given_same",
            [](EngineConfig& c, const std::string& k, const Entry& e) { c.bn.edge_true_given_same = to_real(k, e.value, e.line); }},
           {"bp_max_iters", [](EngineConfig& c, const std::string& k, const Entry& e) { c.bn.bp_max_iters = to_int_in(k, e, 1, 1 << 20); }},
           {"bp_damping", [](EngineConfig& c, const std::string& k, const Entry& e) { c.bn.bp_damping = to_real(k, e.value, e.line); }},
           {"bp_tol", [](EngineConfig& c, const std::string& k, const Entry& e) { c.bn.bp_tol = to_real(k, e.value, e.line); }},
           {"edge_bins", [](EngineConfig& c, const std::string& k, const Entry& e) { c.bn.edge_bins = to_int_in(k, e, 1, 1 << 16); }},
           {"likelihood_weight",
            [](EngineConfig& c, const std::string& k, const Entry& e) { c.bn.likelihood_weight = to_real(k, e.value, e.line); }},
       }},
      {"slic",
       {
           {"compactness", [](EngineConfig& c, const std::string& k, const Entry& e) { c.slic.compactness = to_real(k, e.value, e.line); }},
           {"iterations", [](EngineConfig& c, const std::string& k, const Entry& e) { c.slic.iterations = to_int_in(k, e, 1, 1000); }},
           {"min_region_fraction",
            [](EngineConfig& c, const std::string& k, const Entry& e) { c.slic.min_region_fraction = to_real(k, e.value, e.line); }},
       }},
      {"features",
       {
           {"gabor_orientations",
            [](EngineConfig& c, const std::string& k, const Entry& e) { c.features.gabor_orientations = to_int_in(k, e, 1, 64); }},
           {"gabor_wavelengths",
            [](EngineConfig& c, const std::string& k, const Entry& e) {
              c.features.gabor_wavelengths.clear();
              for (const auto& s : split(e.value, ',')) c.features.gabor_wavelengths.push_back(to_real(k, s, e.line));
            }},
           {"dog_sigmas",
            [](EngineConfig& c, const std::string& k, const Entry& e) {
              c.features.dog_sigma_pairs.clear();
              for (const auto& s : split(e.value, ',')) {
                const auto colon = s.find(':');
                if (colon == std::string::npos) throw ConfigError("'" + k + "' expects s1:s2 pairs", e.line);
                c.features.dog_sigma_pairs.emplace_back(to_real(k, trim(s.substr(0, colon)), e.line),
                                                        to_real(k, trim(s.substr(colon + 1)), e.line));
              }
            }},
           {"entropy_bins", [](EngineConfig& c, const std::string& k, const Entry& e) { c.features.entropy_bins = to_int_in(k, e, 1, 4096); }},
       }},
  };
  return table;
}

void validate_section(const EngineConfig& c, const std::string& section, int line) {
  try {
    if (section == "srf") c.srf.validate();
    if (section == "bn") c.bn.validate();
    if (section == "slic") c.slic.validate();
    if (section == "features") c.features.validate();
  } catch (const ArgumentError& e) {
    throw ConfigError(e.what(), line);
  }
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

EngineConfig parse_config(const std::string& text) {
  // section -> key -> entry
  std::map<std::string, std::map<std::string, Entry>> entries;
  static const char* kSections[] = {"engine", "tree", "schedule", "features", "srf", "bn", "slic"};
  std::istringstream is(text);
  std::string raw, section;
  int lineno = 0;
  while (std::getline(is, raw)) {
    ++lineno;
    const std::string t = trim(raw);
    if (t.empty() || t[0] == '#' || t[0] == ';') continue;
    if (t.front() == '[') {
      if (t.back() != ']') throw ConfigError("unterminated section header", lineno);
      section = trim(t.substr(1, t.size() - 2));
      bool known = false;
      for (const char* s : kSections) known |= section == s;
      if (!known) throw ConfigError("unknown section [" + section + "]", lineno);
      continue;
    }
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw ConfigError("expected key = value", lineno);
    if (section.empty()) throw ConfigError("key outside of any [section]", lineno);
    const std::string key = trim(t.substr(0, eq));
    const std::string value = trim(t.substr(eq + 1));
    if (key.empty()) throw ConfigError("empty key", lineno);
    if (value.empty()) throw ConfigError("empty value for '" + key + "'", lineno);
    auto& sec = entries[section];
    if (sec.count(key)) throw ConfigError("duplicate key '" + key + "' in [" + section + "]", lineno);
    sec[key] = {value, lineno};
  }

  EngineConfig cfg;
  int depth_line = 0;
  for (const auto& [key, e] : entries["engine"]) {
    if (key == "method") {
      try {
        cfg.method = parse_method(e.value);
      } catch (const ArgumentError& err) {
        throw ConfigError(err.what(), e.line);
      }
    } else if (key == "depth") {
      cfg.tree = TreeSpec::default_layout(to_int_in(key, e, 0, 8));
      cfg.schedule = ScaleSchedule::multiscale(cfg.tree.depth);
      depth_line = e.line;
    } else if (key == "rounds") {
      cfg.rounds = to_int_in(key, e, 0, 64);
    } else if (key == "seed") {
      cfg.seed = to_u64(key, e);
    } else if (key == "reference_channel") {
      cfg.reference_channel = to_int_in(key, e, 0, 255);
    } else {
      throw ConfigError("unknown key '" + key + "' in [engine]", e.line);
    }
  }

  for (const auto& [key, e] : entries["tree"]) {
    const auto last = key.rfind('.');
    if (key.rfind("node.", 0) != 0 || last == std::string::npos || key.substr(last) != ".kind" || last <= 5)
      throw ConfigError("unknown key '" + key + "' in [tree] (expected node.<path>.kind)", e.line);
    const std::string path = key.substr(5, last - 5);
    int pos = 0;
    try {
      pos = parse_node_path(path);
    } catch (const ArgumentError& err) {
      throw ConfigError(err.what(), e.line);
    }
    if (pos >= cfg.tree.size())
      throw ConfigError("node '" + path + "' is deeper than the tree depth " + std::to_string(cfg.tree.depth), e.line);
    try {
      cfg.tree.kinds[pos] = parse_node_kind(e.value);
    } catch (const ArgumentError& err) {
      throw ConfigError(err.what(), e.line);
    }
  }

  for (const auto& [key, e] : entries["schedule"]) {
    const auto parts = split(key, '.');
    if (parts.size() != 3 || parts[0] != "level")
      throw ConfigError("unknown key '" + key + "' in [schedule] (expected level.<d>.patch|label|superpixels)", e.line);
    const int level = to_int_in(key, {parts[1], e.line}, 0, 1 << 20);
    if (level > cfg.tree.depth)
      throw ConfigError("level " + parts[1] + " is deeper than the tree depth " + std::to_string(cfg.tree.depth), e.line);
    ScaleEntry& s = cfg.schedule.levels[level];
    if (parts[2] == "patch") s.feature_patch_side = to_int_in(key, e, 1, 255);
    else if (parts[2] == "label") s.label_patch_side = to_int_in(key, e, 1, 255);
    else if (parts[2] == "superpixels") s.target_superpixels = to_int_in(key, e, 1, 1 << 24);
    else throw ConfigError("unknown key '" + key + "' in [schedule]", e.line);
    try {
      PatchGeometry{s.feature_patch_side, s.label_patch_side, 1}.validate();
    } catch (const ArgumentError& err) {
      throw ConfigError(err.what(), e.line);
    }
  }

  for (const auto& [section, table] : setters()) {
    for (const auto& [key, e] : entries[section]) {
      auto it = table.find(key);
      if (it == table.end()) throw ConfigError("unknown key '" + key + "' in [" + section + "]", e.line);
      it->second(cfg, key, e);
      validate_section(cfg, section, e.line);
    }
  }

  try {
    cfg.validate();
  } catch (const ArgumentError& err) {
    throw ConfigError(err.what(), depth_line);
  }
  return cfg;
}

EngineConfig load_config(const std::string& path) {
  const auto bytes = read_file(path);
  return parse_config(std::string(bytes.begin(), bytes.end()));
}

std::string format_config(const EngineConfig& c) {
  std::ostringstream os;
  os << "[engine]\n";
  os << "method = " << method_name(c.method) << "\n";
  os << "depth = " << c.tree.depth << "\n";
  os << "rounds = " << c.rounds << "\n";
  os << "seed = " << c.seed << "\n";
  os << "reference_channel = " << c.reference_channel << "\n";
  os << "\n[tree]\n";
  for (int p = 0; p < c.tree.size(); ++p) os << "node." << node_path(p) << ".kind = " << node_kind_name(c.tree.kinds[p]) << "\n";
  os << "\n[schedule]\n";
  for (std::size_t l = 0; l < c.schedule.levels.size(); ++l) {
    const auto& s = c.schedule.levels[l];
    os << "level." << l << ".patch = " << s.feature_patch_side << "\n";
    os << "level." << l << ".label = " << s.label_patch_side << "\n";
    os << "level." << l << ".superpixels = " << s.target_superpixels << "\n";
  }
  os << "\n[features]\n";
  os << "gabor_orientations = " << c.features.gabor_orientations << "\n";
  os << "gabor_wavelengths =";
  for (std::size_t i = 0; i < c.features.gabor_wavelengths.size(); ++i)
    os << (i ? ", " : " ") << fmt(c.features.gabor_wavelengths[i]);
  os << "\ndog_sigmas =";
  for (std::size_t i = 0; i < c.features.dog_sigma_pairs.size(); ++i)
    os << (i ? ", " : " ") << fmt(c.features.dog_sigma_pairs[i].first) << ":" << fmt(c.features.dog_sigma_pairs[i].second);
  os << "\nentropy_bins = " << c.features.entropy_bins << "\n";
  os << "\n[srf]\n";
  os << "trees = " << c.srf.n_trees << "\n";
  os << "max_depth = " << c.srf.max_depth << "\n";
  os << "min_samples_leaf = " << c.srf.min_samples_leaf << "\n";
  os << "candidate_features = " << c.srf.candidate_features_per_node << "\n";
  os << "candidate_thresholds = " << c.srf.candidate_thresholds << "\n";
  os << "bootstrap_fraction = " << fmt(c.srf.bootstrap_fraction) << "\n";
  os << "samples_per_image = " << c.srf.samples_per_image << "\n";
  os << "\n[bn]\n";
  os << "gmm_components = " << c.bn.gmm_components << "\n";
  os << "em_iterations = " << c.bn.em_iterations << "\n";
  os << "em_tol = " << fmt(c.bn.em_tol) << "\n";
  os << "var_floor = " << fmt(c.bn.var_floor) << "\n";
  os << "edge_true_given_diff = " << fmt(c.bn.edge_true_given_diff) << "\n";
  os << "edge_true_given_same = " << fmt(c.bn.edge_true_given_same) << "\n";
  os << "bp_max_iters = " << c.bn.bp_max_iters << "\n";
  os << "bp_damping = " << fmt(c.bn.bp_damping) << "\n";
  os << "bp_tol = " << fmt(c.bn.bp_tol) << "\n";
  os << "edge_bins = " << c.bn.edge_bins << "\n";
  os << "likelihood_weight = " << fmt(c.bn.likelihood_weight) << "\n";
  os << "\n[slic]\n";
  os << "compactness = " << fmt(c.slic.compactness) << "\n";
  os << "iterations = " << c.slic.iterations << "\n";
  os << "min_region_fraction = " << fmt(c.slic.min_region_fraction) << "\n";
  return os.str();
}

}  // namespace dmt
