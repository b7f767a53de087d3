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

#include "modelio.hpp"

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <map>
#include <sstream>

#include "common.hpp"
#include "config.hpp"
#include "grid.hpp"

namespace dmt {
namespace {

constexpr const char* kModelFormat = "dmt-model-1";

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  const auto b = s.find_last_not_of(" \t\r");
  return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
}

std::string hex64(std::uint64_t v) {
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::uint64_t parse_hex64(const std::string& s, int line) {
  std::uint64_t v = 0;
  const char* end = s.data() + s.size();
  auto [p, ec] = std::from_chars(s.data(), end, v, 16);
  if (ec != std::errc() || p != end || s.empty()) throw ConfigError("expected a hex fingerprint, got '" + s + "'", line);
  return v;
}

long long parse_int(const std::string& s, int line) {
  long long v = 0;
  const char* end = s.data() + s.size();
  auto [p, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || p != end || s.empty()) throw ConfigError("expected an integer, got '" + s + "'", line);
  return v;
}

std::string blob_name(const FlowNode& n, const char* phase, const NodeClassifier& c) {
  char id[16];
  std::snprintf(id, sizeof id, "%03d", n.id);
  return std::string("node_") + id + "_" + n.path + "_" + phase + (c.kind == NodeKind::Srf ? ".srf" : ".bn");
}

std::vector<std::uint8_t> classifier_bytes(const NodeClassifier& c) {
  if (c.kind == NodeKind::Srf) {
    if (!c.srf) throw ContractError("save_model: SRF node without a forest");
    return c.srf->serialize();
  }
  if (!c.bn) throw ContractError("save_model: BN node without a model");
  return c.bn->serialize();
}

const char* phase_word(FlowPhase p) {
  switch (p) {
    case FlowPhase::Descend: return "descend";
    case FlowPhase::Ascend: return "ascend";
    case FlowPhase::Redescend: return "redescend";
  }
  return "?";
}

struct BlobRef {
  int node;
  std::string phase;  // "a" or "b<round>"
  const NodeClassifier* classifier;
};

std::vector<BlobRef> blob_refs(const TrainedModel& m) {
  std::vector<BlobRef> out;
  for (const auto& tn : m.nodes) {
    out.push_back({tn.node.id, "a", &tn.phase_a});
    for (std::size_t r = 0; r < tn.phase_b.size(); ++r)
      out.push_back({tn.node.id, "b" + std::to_string(r + 1), &tn.phase_b[r]});
  }
  return out;
}

}  // namespace

std::vector<std::string> model_blob_files(const TrainedModel& model) {
  std::vector<std::string> out;
  for (const auto& b : blob_refs(model)) out.push_back(blob_name(model.nodes[b.node].node, b.phase.c_str(), *b.classifier));
  return out;
}

std::string format_audit(const TrainedModel& model) {
  std::ostringstream os;
  os << "# round phase node path kind patch label superpixels context\n";
  for (const auto& e : model.audit)
    os << "event " << e.round << ' ' << phase_word(e.phase) << ' ' << e.node << ' ' << e.path << ' '
       << node_kind_name(e.kind) << ' ' << e.scale.feature_patch_side << ' ' << e.scale.label_patch_side << ' '
       << e.scale.target_superpixels << ' ' << (e.has_context ? 1 : 0) << '\n';
  os << "# image leaf fingerprints (leaves in node order)\n";
  for (std::size_t i = 0; i < model.train_leaf_fingerprints.size(); ++i) {
    os << "leaves " << i;
    for (auto fp : model.train_leaf_fingerprints[i]) os << ' ' << hex64(fp);
    os << '\n';
  }
  return os.str();
}

void parse_audit(const std::string& text, TrainedModel& model) {
  model.audit.clear();
  model.train_leaf_fingerprints.clear();
  std::istringstream is(text);
  std::string raw;
  int lineno = 0;
  while (std::getline(is, raw)) {
    ++lineno;
    const std::string t = trim(raw);
    if (t.empty() || t[0] == '#') continue;
    std::istringstream ls(t);
    std::string tag;
    ls >> tag;
    if (tag == "event") {
      AuditEvent e;
      std::string phase, kind;
      int ctx = 0;
      if (!(ls >> e.round >> phase >> e.node >> e.path >> kind >> e.scale.feature_patch_side >> e.scale.label_patch_side >>
            e.scale.target_superpixels >> ctx))
        throw ConfigError("audit: malformed event", lineno);
      if (phase == "descend") e.phase = FlowPhase::Descend;
      else if (phase == "ascend") e.phase = FlowPhase::Ascend;
      else if (phase == "redescend") e.phase = FlowPhase::Redescend;
      else throw ConfigError("audit: unknown phase '" + phase + "'", lineno);
      try {
        e.kind = parse_node_kind(kind);
      } catch (const ArgumentError& err) {
        throw ConfigError(std::string("audit: ") + err.what(), lineno);
      }
      e.has_context = ctx != 0;
      model.audit.push_back(e);
    } else if (tag == "leaves") {
      std::size_t index = 0;
      if (!(ls >> index) || index != model.train_leaf_fingerprints.size())
        throw ConfigError("audit: leaf lines must be numbered consecutively", lineno);
      std::vector<std::uint64_t> fps;
      std::string h;
      while (ls >> h) fps.push_back(parse_hex64(h, lineno));
      model.train_leaf_fingerprints.push_back(std::move(fps));
    } else {
      throw ConfigError("audit: unknown record '" + tag + "'", lineno);
    }
  }
}

void save_model(const std::string& dir, const TrainedModel& model) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create model directory '" + dir + "': " + ec.message());
  auto put_text = [&](const std::string& name, const std::string& text) {
    write_file(dir + "/" + name,
               std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
  };
  std::ostringstream man;
  man << "format = " << kModelFormat << "\n";
  man << "classes = " << model.classes << "\n";
  man << "channels = " << model.channels << "\n";
  man << "nodes = " << model.nodes.size() << "\n";
  for (const auto& b : blob_refs(model)) {
    const FlowNode& n = model.nodes[b.node].node;
    const std::string file = blob_name(n, b.phase.c_str(), *b.classifier);
    const auto bytes = classifier_bytes(*b.classifier);
    write_file(dir + "/" + file, bytes);
    const std::string key = "node." + std::to_string(n.id) + "." + b.phase;
    man << key << ".file = " << file << "\n";
    man << key << ".context = " << (b.classifier->has_context ? 1 : 0) << "\n";
    man << key << ".fingerprint = " << hex64(b.classifier->layout_fingerprint()) << "\n";
    man << key << ".checksum = " << hex64(fnv1a_bytes(bytes.data(), bytes.size())) << "\n";
  }
  put_text("config.ini", format_config(model.config));
  put_text("manifest.txt", man.str());
  put_text("audit.log", format_audit(model));
}

TrainedModel load_model(const std::string& dir) {
  auto text_of = [&](const std::string& name) {
    const auto bytes = read_file(dir + "/" + name);
    return std::string(bytes.begin(), bytes.end());
  };
  TrainedModel model;
  try {
    model.config = parse_config(text_of("config.ini"));
  } catch (const ConfigError& e) {
    throw ConfigError(std::string("config.ini: ") + e.what());
  }

  std::map<std::string, std::pair<std::string, int>> kv;
  {
    std::istringstream is(text_of("manifest.txt"));
    std::string raw;
    int lineno = 0;
    while (std::getline(is, raw)) {
      ++lineno;
      const std::string t = trim(raw);
      if (t.empty() || t[0] == '#') continue;
      const auto eq = t.find('=');
      if (eq == std::string::npos) throw ConfigError("manifest.txt: expected key = value", lineno);
      const std::string key = trim(t.substr(0, eq));
      if (kv.count(key)) throw ConfigError("manifest.txt: duplicate key '" + key + "'", lineno);
      kv[key] = {trim(t.substr(eq + 1)), lineno};
    }
  }
  auto get = [&](const std::string& key) -> const std::pair<std::string, int>& {
    auto it = kv.find(key);
    if (it == kv.end()) throw ConfigError("manifest.txt: missing key '" + key + "'");
    return it->second;
  };
  if (get("format").first != kModelFormat) throw ConfigError("manifest.txt: unsupported format", get("format").second);
  model.classes = static_cast<int>(parse_int(get("classes").first, get("classes").second));
  model.channels = static_cast<int>(parse_int(get("channels").first, get("channels").second));
  if (model.classes < 1 || model.classes > 255) throw ConfigError("manifest.txt: bad class count", get("classes").second);
  if (model.channels < 1) throw ConfigError("manifest.txt: bad channel count", get("channels").second);

  const auto topo = build_topology(model.config);
  if (parse_int(get("nodes").first, get("nodes").second) != static_cast<long long>(topo.size()))
    throw ConfigError("manifest.txt: node count does not match the configured topology", get("nodes").second);
  const int rounds = model.config.method == Method::Dmt ? model.config.rounds : 0;
  for (const auto& n : topo) {
    TrainedNode tn;
    tn.node = n;
    if (!n.is_leaf()) tn.phase_b.resize(rounds);
    model.nodes.push_back(std::move(tn));
  }
  std::size_t used = 4;
  for (auto& tn : model.nodes) {
    auto load_one = [&](const std::string& phase, NodeClassifier& c) {
      const std::string key = "node." + std::to_string(tn.node.id) + "." + phase;
      const auto& [file, line] = get(key + ".file");
      const auto bytes = read_file(dir + "/" + file);
      const auto& [sum, sum_line] = get(key + ".checksum");
      if (fnv1a_bytes(bytes.data(), bytes.size()) != parse_hex64(sum, sum_line))
        throw FormatError("blob '" + file + "' does not match its manifest checksum", 0);
      c.kind = tn.node.kind;
      c.has_context = parse_int(get(key + ".context").first, get(key + ".context").second) != 0;
      if (c.kind == NodeKind::Srf) {
        auto f = std::make_shared<SrfForest>(SrfForest::deserialize(bytes));
        if (f->classes() != model.classes)
          throw FormatError("forest '" + file + "' has a different class count than the model", 0);
        c.srf = std::move(f);
      } else {
        auto b = std::make_shared<BnModel>(BnModel::deserialize(bytes));
        if (b->classes != model.classes) throw FormatError("bn '" + file + "' has a different class count than the model", 0);
        c.bn = std::move(b);
      }
      const auto& [fp, fp_line] = get(key + ".fingerprint");
      if (c.layout_fingerprint() != parse_hex64(fp, fp_line))
        throw ConfigError("manifest.txt: fingerprint mismatch for '" + file + "'", fp_line);
      (void)line;
      used += 4;
    };
    load_one("a", tn.phase_a);
    for (std::size_t r = 0; r < tn.phase_b.size(); ++r) load_one("b" + std::to_string(r + 1), tn.phase_b[r]);
  }
  if (used != kv.size()) throw ConfigError("manifest.txt: entries do not match the configured topology");
  parse_audit(text_of("audit.log"), model);
  return model;
}

}  // namespace dmt
