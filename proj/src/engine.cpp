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

#include "engine.hpp"

#include <algorithm>
#include <cstdio>
#include <functional>
#include <sstream>
#include <tuple>

#include "parallel.hpp"

namespace dmt {

// ---------------------------------------------------------------- names

const char* node_kind_name(NodeKind kind) { return kind == NodeKind::Srf ? "srf" : "bn"; }

NodeKind parse_node_kind(const std::string& s) {
  if (s == "srf") return NodeKind::Srf;
  if (s == "bn") return NodeKind::Bn;
  throw ArgumentError("unknown node kind '" + s + "' (expected srf or bn)");
}

int node_level(int position) {
  int level = 0;
  for (int p = position + 1; p > 1; p >>= 1) ++level;
  return level;
}

std::string node_path(int position) {
  if (position < 0) throw ArgumentError("node position must be >= 0");
  std::string suffix;
  for (int p = position; p > 0; p = (p - 1) / 2) suffix = (p % 2 == 1 ? ".L" : ".R") + suffix;
  return "root" + suffix;
}

int parse_node_path(const std::string& path) {
  if (path.rfind("root", 0) != 0) throw ArgumentError("node path must start with 'root': " + path);
  int p = 0;
  std::size_t i = 4;
  while (i < path.size()) {
    if (i + 1 >= path.size() || path[i] != '.' || (path[i + 1] != 'L' && path[i + 1] != 'R'))
      throw ArgumentError("malformed node path '" + path + "'");
    p = 2 * p + (path[i + 1] == 'L' ? 1 : 2);
    if (p > (1 << 20)) throw ArgumentError("node path too deep: " + path);
    i += 2;
  }
  return p;
}

const char* method_name(Method m) {
  switch (m) {
    case Method::Dmt: return "dmt";
    case Method::Srf: return "srf";
    case Method::Bn: return "bn";
    case Method::SrfSrf: return "srf-srf";
    case Method::BnBn: return "bn-bn";
    case Method::SrfBn: return "srf-bn";
  }
  return "?";
}

Method parse_method(const std::string& s) {
  for (Method m : {Method::Dmt, Method::Srf, Method::Bn, Method::SrfSrf, Method::BnBn, Method::SrfBn})
    if (s == method_name(m)) return m;
  throw ArgumentError("unknown method '" + s + "' (expected dmt, srf, bn, srf-srf, bn-bn or srf-bn)");
}

// ---------------------------------------------------------------- spec

TreeSpec TreeSpec::default_layout(int depth) {
  if (depth < 0 || depth > 16) throw ArgumentError("tree depth must lie in [0, 16]");
  TreeSpec t;
  t.depth = depth;
  t.kinds.assign((std::size_t{1} << (depth + 1)) - 1, NodeKind::Srf);
  for (std::size_t p = 1; p < t.kinds.size(); ++p) t.kinds[p] = p % 2 == 1 ? NodeKind::Srf : NodeKind::Bn;
  return t;
}

void TreeSpec::validate() const {
  if (depth < 0 || depth > 16) throw ArgumentError("tree depth must lie in [0, 16]");
  if (kinds.size() != (std::size_t{1} << (depth + 1)) - 1)
    throw ArgumentError("tree spec must list 2^(depth+1) - 1 node kinds");
}

ScaleSchedule ScaleSchedule::multiscale(int depth) {
  ScaleSchedule s;
  for (int l = 0; l <= depth; ++l) s.levels.push_back(l < 2 ? ScaleEntry{10, 7, 1000} : ScaleEntry{8, 5, 1200});
  return s;
}

ScaleSchedule ScaleSchedule::fixed(int depth) {
  ScaleSchedule s;
  s.levels.assign(depth + 1, ScaleEntry{10, 7, 1000});
  return s;
}

void ScaleSchedule::validate(int depth) const {
  if (static_cast<int>(levels.size()) != depth + 1)
    throw ArgumentError("scale schedule needs one entry per level 0.." + std::to_string(depth));
  for (const auto& e : levels) {
    PatchGeometry{e.feature_patch_side, e.label_patch_side, 1}.validate();
    if (e.target_superpixels < 1) throw ArgumentError("scale schedule: target superpixels must be >= 1");
  }
}

void EngineConfig::validate() const {
  tree.validate();
  schedule.validate(tree.depth);
  if (rounds < 0) throw ArgumentError("rounds must be >= 0");
  features.validate();
  srf.validate();
  bn.validate();
  slic.validate();
  if (reference_channel < 0) throw ArgumentError("reference channel must be >= 0");
}

std::vector<FlowNode> build_topology(const EngineConfig& cfg) {
  cfg.validate();
  std::vector<FlowNode> nodes;
  auto chain = [&](std::initializer_list<NodeKind> kinds) {
    int k = 0;
    for (NodeKind kind : kinds) {
      FlowNode n;
      n.id = k;
      n.kind = kind;
      n.parent = k - 1;
      n.level = k;
      n.scale = cfg.schedule.levels[0];
      n.path = "stage" + std::to_string(k);
      if (k > 0) nodes[k - 1].children.push_back(k);
      nodes.push_back(n);
      ++k;
    }
  };
  switch (cfg.method) {
    case Method::Srf: chain({NodeKind::Srf}); break;
    case Method::Bn: chain({NodeKind::Bn}); break;
    case Method::SrfSrf: chain({NodeKind::Srf, NodeKind::Srf}); break;
    case Method::BnBn: chain({NodeKind::Bn, NodeKind::Bn}); break;
    case Method::SrfBn: chain({NodeKind::Srf, NodeKind::Bn}); break;
    case Method::Dmt: {
      const int size = cfg.tree.size();
      for (int p = 0; p < size; ++p) {
        FlowNode n;
        n.id = p;
        n.kind = cfg.tree.kinds[p];
        n.parent = p == 0 ? -1 : (p - 1) / 2;
        if (2 * p + 2 < size) n.children = {2 * p + 1, 2 * p + 2};
        n.level = node_level(p);
        n.scale = cfg.schedule.levels[n.level];
        n.path = node_path(p);
        nodes.push_back(n);
      }
      break;
    }
  }
  return nodes;
}

namespace {

int effective_rounds(const EngineConfig& cfg) { return cfg.method == Method::Dmt ? cfg.rounds : 0; }

std::string params_signature(const EngineConfig& cfg) {
  std::ostringstream os;
  os.precision(17);
  const auto& f = cfg.features;
  os << "f" << f.gabor_orientations << ";" << f.entropy_bins;
  for (double w : f.gabor_wavelengths) os << "," << w;
  for (const auto& [a, b] : f.dog_sigma_pairs) os << "," << a << ":" << b;
  const auto& s = cfg.srf;
  os << "|s" << s.n_trees << ";" << s.max_depth << ";" << s.min_samples_leaf << ";" << s.candidate_features_per_node
     << ";" << s.candidate_thresholds << ";" << s.bootstrap_fraction << ";" << s.samples_per_image;
  const auto& b = cfg.bn;
  os << "|b" << b.gmm_components << ";" << b.em_iterations << ";" << b.em_tol << ";" << b.var_floor << ";"
     << b.edge_true_given_diff << ";" << b.edge_true_given_same << ";" << b.bp_max_iters << ";" << b.bp_damping << ";"
     << b.bp_tol << ";" << b.edge_bins;
  os << "|p" << cfg.slic.compactness << ";" << cfg.slic.iterations << ";" << cfg.slic.min_region_fraction << ";"
     << cfg.reference_channel << "|seed" << cfg.seed;
  return os.str();
}

const char* phase_tag(FlowPhase p) {
  switch (p) {
    case FlowPhase::Descend: return "A";
    case FlowPhase::Ascend: return "B";
    case FlowPhase::Redescend: return "R";
  }
  return "?";
}

// Fit seeds depend on what the fit is, not on which method asked for it, so
// identical fits in different pipelines coincide.
std::uint64_t fit_seed(const EngineConfig& cfg, const FlowNode& n, FlowPhase phase, int round) {
  const std::string tag = std::string(node_kind_name(n.kind)) + "/" + std::to_string(n.level) + "/" +
                          phase_tag(phase) + "/" + std::to_string(round);
  return stream_seed(cfg.seed, "node.fit", fnv1a(tag));
}

std::uint64_t contexts_hash(std::span<const ProbabilityMap* const> ctx) {
  std::uint64_t h = fnv1a("ctx");
  for (const auto* m : ctx) {
    const std::uint64_t f = m ? m->fingerprint() : 0;
    h = fnv1a_bytes(&f, sizeof f, h);
  }
  return h;
}

FeatureConfig patch_config(const EngineConfig& cfg, bool context, int classes) {
  return context ? cfg.features.with_context(classes) : cfg.features.without_context();
}

NodeClassifier fit_classifier(const FlowNode& n, FlowPhase phase, int round, std::span<PreparedImage* const> images,
                              std::span<const ProbabilityMap* const> contexts, const EngineConfig& cfg, int classes) {
  const bool has_context = !contexts.empty();
  NodeClassifier c;
  c.kind = n.kind;
  c.has_context = has_context;
  const std::uint64_t seed = fit_seed(cfg, n, phase, round);
  const int channels = images.front()->image().channels();
  if (n.kind == NodeKind::Srf) {
    SrfParams p = cfg.srf;
    p.feature_patch_side = n.scale.feature_patch_side;
    p.label_patch_side = n.scale.label_patch_side;
    p.rng_seed = seed;
    const int side = p.feature_patch_side;
    std::vector<FeatureMatrix> ctx_features(has_context ? images.size() : 0);
    parallel_for(ctx_features.size(), [&](std::size_t i) {
      ctx_features[i] = dense_patch_context_features(*contexts[i], side);
    });
    std::vector<SrfImageInput> inputs(images.size());
    for (std::size_t i = 0; i < images.size(); ++i) {
      inputs[i].base = &images[i]->dense_features(side);
      inputs[i].context = has_context ? &ctx_features[i] : nullptr;
      inputs[i].labels = images[i]->labels();
    }
    const SrfTrainingSet set = assemble_srf_samples(inputs, p, classes);
    const auto layout = feature_layout(patch_config(cfg, has_context, classes), channels, FeatureScope::Patch);
    c.srf = std::make_shared<const SrfForest>(srf_train(set, p, layout.fingerprint));
  } else {
    BnParams p = cfg.bn;
    p.rng_seed = seed;
    std::vector<BnTrainingImage> inputs(images.size());
    for (std::size_t i = 0; i < images.size(); ++i) {
      const auto& sp = images[i]->superpixels(n.scale.target_superpixels);
      inputs[i] = {&sp.edge_map, &sp.features, sp.labels, sp.strengths};
    }
    const auto layout = feature_layout(cfg.features.without_context(), channels, FeatureScope::Superpixel);
    c.bn = std::make_shared<const BnModel>(bn_train(inputs, p, classes, layout.fingerprint));
  }
  return c;
}

ProbabilityMap apply_classifier(const NodeClassifier& c, const FlowNode& n, PreparedImage& img,
                                const ProbabilityMap* context, const EngineConfig& cfg, int classes) {
  if (c.has_context != (context != nullptr))
    throw ContractError("node " + n.path + ": classifier context arity does not match the flow");
  const int channels = img.image().channels();
  ProbabilityMap out;
  if (c.kind == NodeKind::Srf) {
    const auto layout = feature_layout(patch_config(cfg, c.has_context, classes), channels, FeatureScope::Patch);
    if (layout.fingerprint != c.srf->fingerprint())
      throw ContractError("node " + n.path + ": feature layout fingerprint mismatch");
    const int side = c.srf->geometry().feature_patch_side;
    const FeatureMatrix& base = img.dense_features(side);
    if (context) {
      const FeatureMatrix ctx = dense_patch_context_features(*context, side);
      out = srf_predict_dense(*c.srf, base, &ctx, img.image().width(), img.image().height());
    } else {
      out = srf_predict_dense(*c.srf, base, nullptr, img.image().width(), img.image().height());
    }
  } else {
    const auto layout = feature_layout(cfg.features.without_context(), channels, FeatureScope::Superpixel);
    if (layout.fingerprint != c.bn->fingerprint)
      throw ContractError("node " + n.path + ": feature layout fingerprint mismatch");
    const auto& sp = img.superpixels(n.scale.target_superpixels);
    out = bn_infer(*c.bn, sp.edge_map, sp.features, sp.strengths, context);
  }
  out.validate();
  return out;
}

// One classifier evaluation in the flow: which node, which phase, and the
// per-image context maps (empty for none).
using StepFn = std::function<std::vector<ProbabilityMap>(const FlowNode&, FlowPhase, int,
                                                         std::span<const ProbabilityMap* const>)>;

// The flow protocol shared by training and prediction. Returns, per node, the
// latest map of every image.
std::vector<std::vector<ProbabilityMap>> run_flow(const std::vector<FlowNode>& nodes, int rounds, std::size_t images,
                                                  const StepFn& step) {
  std::vector<std::vector<ProbabilityMap>> latest(nodes.size());
  int max_level = 0;
  for (const auto& n : nodes) max_level = std::max(max_level, n.level);
  std::vector<std::vector<int>> by_level(max_level + 1);
  for (const auto& n : nodes) by_level[n.level].push_back(n.id);

  auto parent_context = [&](const FlowNode& n) {
    std::vector<const ProbabilityMap*> ctx;
    if (n.parent >= 0)
      for (std::size_t i = 0; i < images; ++i) ctx.push_back(&latest[n.parent][i]);
    return ctx;
  };
  // Nodes of one level only read maps of other levels, so they run in parallel.
  auto run_level = [&](const std::vector<int>& ids, FlowPhase phase, int round) {
    std::vector<std::vector<ProbabilityMap>> fresh(ids.size());
    parallel_for(ids.size(), [&](std::size_t k) {
      const FlowNode& n = nodes[ids[k]];
      if (phase == FlowPhase::Ascend) {
        std::vector<ProbabilityMap> fused(images);
        std::vector<const ProbabilityMap*> ctx(images);
        for (std::size_t i = 0; i < images; ++i) {
          std::vector<const ProbabilityMap*> kids;
          for (int c : n.children) kids.push_back(&latest[c][i]);
          fused[i] = average_maps(kids);
          fused[i].validate();
          ctx[i] = &fused[i];
        }
        fresh[k] = step(n, phase, round, ctx);
      } else {
        const auto ctx = parent_context(n);
        fresh[k] = step(n, phase, round, ctx);
      }
    });
    for (std::size_t k = 0; k < ids.size(); ++k) latest[ids[k]] = std::move(fresh[k]);
  };

  for (int l = 0; l <= max_level; ++l) run_level(by_level[l], FlowPhase::Descend, 0);
  for (int r = 1; r <= rounds; ++r) {
    for (int l = max_level - 1; l >= 0; --l) {
      std::vector<int> internal;
      for (int id : by_level[l])
        if (!nodes[id].is_leaf()) internal.push_back(id);
      run_level(internal, FlowPhase::Ascend, r);
    }
    for (int l = 1; l <= max_level; ++l) run_level(by_level[l], FlowPhase::Redescend, r);
  }
  return latest;
}

}  // namespace

// ---------------------------------------------------------------- prepared images

std::uint64_t prepared_config_key(const EngineConfig& cfg) {
  std::ostringstream os;
  os.precision(17);
  const auto& f = cfg.features;
  os << f.gabor_orientations << ";" << f.entropy_bins;
  for (double w : f.gabor_wavelengths) os << "," << w;
  for (const auto& [a, b] : f.dog_sigma_pairs) os << "," << a << ":" << b;
  os << "|" << cfg.slic.compactness << ";" << cfg.slic.iterations << ";" << cfg.slic.min_region_fraction << ";"
     << cfg.reference_channel;
  return fnv1a(os.str());
}

PreparedImage::PreparedImage(const MultiChannelImage& img, const LabelMap* labels, const EngineConfig& cfg)
    : img_(&img),
      labels_(labels),
      features_(cfg.features.without_context()),
      slic_(cfg.slic),
      reference_channel_(cfg.reference_channel),
      key_(prepared_config_key(cfg)) {
  img.validate();
  if (reference_channel_ >= img.channels()) throw ArgumentError("reference channel exceeds the image channel count");
  if (labels) {
    labels->validate();
    if (labels->width() != img.width() || labels->height() != img.height())
      throw ArgumentError("label map and image sizes differ");
  }
}

const ImageResponses& PreparedImage::responses() {
  std::lock_guard<std::recursive_mutex> lock(mu_);
  if (!responses_) responses_ = std::make_unique<ImageResponses>(*img_, features_);
  return *responses_;
}

const FeatureMatrix& PreparedImage::dense_features(int side) {
  std::lock_guard<std::recursive_mutex> lock(mu_);
  auto& slot = dense_[side];
  if (!slot) slot = std::make_unique<FeatureMatrix>(dense_patch_base_features(responses(), side));
  return *slot;
}

const PreparedImage::SuperpixelData& PreparedImage::superpixels(int target) {
  std::lock_guard<std::recursive_mutex> lock(mu_);
  auto& slot = superpixels_[target];
  if (!slot) {
    auto d = std::make_unique<SuperpixelData>();
    SlicParams p = slic_;
    p.target_superpixels = target;
    d->edge_map = slic(*img_, reference_channel_, p);
    d->features = superpixel_feature_matrix(responses(), d->edge_map);
    d->strengths = edge_strengths(d->edge_map, *img_);
    if (labels_) d->labels = majority_label(d->edge_map, *labels_);
    slot = std::move(d);
  }
  return *slot;
}

// ---------------------------------------------------------------- memo

std::shared_ptr<const NodeClassifier> FitMemo::find_fit(const std::string& key) {
  std::lock_guard<std::mutex> lock(mu_);
  auto it = fits_.find(key);
  if (it == fits_.end()) return nullptr;
  ++hits_;
  return it->second;
}

void FitMemo::store_fit(const std::string& key, std::shared_ptr<const NodeClassifier> c) {
  std::lock_guard<std::mutex> lock(mu_);
  fits_.emplace(key, std::move(c));
}

std::shared_ptr<const std::vector<ProbabilityMap>> FitMemo::find_maps(const std::string& key) {
  std::lock_guard<std::mutex> lock(mu_);
  auto it = maps_.find(key);
  if (it == maps_.end()) return nullptr;
  ++hits_;
  return it->second;
}

void FitMemo::store_maps(const std::string& key, std::shared_ptr<const std::vector<ProbabilityMap>> maps) {
  std::lock_guard<std::mutex> lock(mu_);
  maps_.emplace(key, std::move(maps));
}

// ---------------------------------------------------------------- model

std::uint64_t NodeClassifier::layout_fingerprint() const {
  if (kind == NodeKind::Srf) return srf ? srf->fingerprint() : 0;
  return bn ? bn->fingerprint : 0;
}

std::vector<FlowNode> TrainedModel::topology() const {
  std::vector<FlowNode> out;
  for (const auto& n : nodes) out.push_back(n.node);
  return out;
}

TrainedModel dmt_train(std::span<PreparedImage* const> images, const EngineConfig& cfg, int classes,
                       const TrainOptions& opts) {
  cfg.validate();
  if (images.empty()) throw ArgumentError("dmt_train: empty dataset");
  if (classes < 1 || classes > 255) throw ArgumentError("dmt_train: class count must lie in [1, 255]");
  const int channels = images.front()->image().channels();
  const std::uint64_t key = prepared_config_key(cfg);
  for (auto* im : images) {
    if (im->image().channels() != channels) throw ArgumentError("dmt_train: images differ in channel count");
    if (im->labels() == nullptr) throw ArgumentError("dmt_train: every training image needs a label map");
    if (im->labels()->classes() != classes) throw ArgumentError("dmt_train: label map class count mismatch");
    if (im->config_key() != key) throw ContractError("dmt_train: image cache was prepared for another configuration");
  }

  TrainedModel model;
  model.config = cfg;
  model.classes = classes;
  model.channels = channels;
  const auto topo = build_topology(cfg);
  const int rounds = effective_rounds(cfg);
  for (const auto& n : topo) {
    TrainedNode tn;
    tn.node = n;
    if (!n.is_leaf()) tn.phase_b.resize(rounds);
    model.nodes.push_back(std::move(tn));
  }
  const std::string signature = params_signature(cfg) + "|" + opts.subject_key + "|L" + std::to_string(classes);

  std::mutex audit_mu;
  StepFn step = [&](const FlowNode& n, FlowPhase phase, int round,
                    std::span<const ProbabilityMap* const> ctx) -> std::vector<ProbabilityMap> {
    const bool has_context = !ctx.empty();
    NodeClassifier classifier;
    if (phase == FlowPhase::Redescend) {
      classifier = model.nodes[n.id].phase_a;
    } else {
      std::ostringstream fk;
      fk << signature << "|" << node_kind_name(n.kind) << "/" << n.level << "/" << phase_tag(phase) << "/" << round
         << "/" << n.scale.feature_patch_side << "," << n.scale.label_patch_side << "," << n.scale.target_superpixels
         << "/c" << has_context;
      // BN training never reads the context; SRF training does.
      if (n.kind == NodeKind::Srf && has_context) fk << "/" << contexts_hash(ctx);
      std::shared_ptr<const NodeClassifier> hit = opts.memo ? opts.memo->find_fit(fk.str()) : nullptr;
      if (hit) {
        classifier = *hit;
      } else {
        classifier = fit_classifier(n, phase, round, images, ctx, cfg, classes);
        if (opts.memo) opts.memo->store_fit(fk.str(), std::make_shared<const NodeClassifier>(classifier));
      }
      if (phase == FlowPhase::Descend)
        model.nodes[n.id].phase_a = classifier;
      else
        model.nodes[n.id].phase_b[round - 1] = classifier;
    }
    {
      std::lock_guard<std::mutex> lock(audit_mu);
      model.audit.push_back({round, phase, n.id, n.path, n.kind, n.scale, has_context});
    }

    std::ostringstream mk;
    mk << signature << "|maps|" << classifier.layout_fingerprint() << "|"
       << reinterpret_cast<std::uintptr_t>(classifier.kind == NodeKind::Srf ? static_cast<const void*>(classifier.srf.get())
                                                                             : static_cast<const void*>(classifier.bn.get()))
       << "|" << n.scale.target_superpixels << "|" << contexts_hash(ctx);
    if (opts.memo) {
      if (auto maps = opts.memo->find_maps(mk.str())) return *maps;
    }
    std::vector<ProbabilityMap> out(images.size());
    parallel_for(images.size(), [&](std::size_t i) {
      out[i] = apply_classifier(classifier, n, *images[i], has_context ? ctx[i] : nullptr, cfg, classes);
    });
    if (opts.memo) opts.memo->store_maps(mk.str(), std::make_shared<const std::vector<ProbabilityMap>>(out));
    return out;
  };

  const auto latest = run_flow(topo, rounds, images.size(), step);

  // Level-parallel steps may append audit events out of order; restore flow order.
  std::sort(model.audit.begin(), model.audit.end(), [&](const AuditEvent& a, const AuditEvent& b) {
    auto rank = [&](const AuditEvent& e) {
      const int level = topo[e.node].level;
      return std::make_tuple(e.round, static_cast<int>(e.phase), e.phase == FlowPhase::Ascend ? -level : level, e.node);
    };
    return rank(a) < rank(b);
  });
  model.train_leaf_fingerprints.assign(images.size(), {});
  for (std::size_t i = 0; i < images.size(); ++i)
    for (const auto& n : topo)
      if (n.is_leaf()) model.train_leaf_fingerprints[i].push_back(latest[n.id][i].fingerprint());
  return model;
}

TrainedModel dmt_train(std::span<const MultiChannelImage> images, std::span<const LabelMap> labels,
                       const EngineConfig& cfg, int classes) {
  if (images.size() != labels.size()) throw ArgumentError("dmt_train: image and label counts differ");
  std::vector<std::unique_ptr<PreparedImage>> prepared;
  std::vector<PreparedImage*> ptrs;
  for (std::size_t i = 0; i < images.size(); ++i) {
    prepared.push_back(std::make_unique<PreparedImage>(images[i], &labels[i], cfg));
    ptrs.push_back(prepared.back().get());
  }
  return dmt_train(ptrs, cfg, classes);
}

Prediction dmt_predict(const TrainedModel& model, PreparedImage& image) {
  if (image.image().channels() != model.channels)
    throw ContractError("dmt_predict: image has " + std::to_string(image.image().channels()) +
                        " channels, model expects " + std::to_string(model.channels));
  if (image.config_key() != prepared_config_key(model.config))
    throw ContractError("dmt_predict: image cache was prepared for another configuration");
  const auto topo = model.topology();
  StepFn step = [&](const FlowNode& n, FlowPhase phase, int round,
                    std::span<const ProbabilityMap* const> ctx) -> std::vector<ProbabilityMap> {
    const TrainedNode& tn = model.nodes[n.id];
    const NodeClassifier& c = phase == FlowPhase::Ascend ? tn.phase_b.at(round - 1) : tn.phase_a;
    return {apply_classifier(c, n, image, ctx.empty() ? nullptr : ctx[0], model.config, model.classes)};
  };
  auto latest = run_flow(topo, effective_rounds(model.config), 1, step);
  Prediction p;
  std::vector<const ProbabilityMap*> leaves;
  for (const auto& n : topo)
    if (n.is_leaf()) p.leaf_maps.push_back(std::move(latest[n.id][0]));
  for (const auto& m : p.leaf_maps) leaves.push_back(&m);
  auto [labels, probs] = majority_vote(leaves);
  p.labels = std::move(labels);
  p.probabilities = std::move(probs);
  return p;
}

Prediction dmt_predict(const TrainedModel& model, const MultiChannelImage& image) {
  PreparedImage prepared(image, nullptr, model.config);
  return dmt_predict(model, prepared);
}

// ---------------------------------------------------------------- voting

std::pair<LabelMap, ProbabilityMap> majority_vote(std::span<const ProbabilityMap* const> leaves) {
  if (leaves.empty()) throw ArgumentError("majority_vote: no leaf maps");
  const int w = leaves[0]->width(), h = leaves[0]->height(), L = leaves[0]->classes();
  for (const auto* m : leaves)
    if (m->width() != w || m->height() != h || m->classes() != L)
      throw ArgumentError("majority_vote: leaf maps differ in shape");
  std::vector<LabelMap> hard;
  for (const auto* m : leaves) hard.push_back(argmax_labels(*m));
  LabelMap out(w, h, L);
  const std::size_t n = static_cast<std::size_t>(w) * h;
  std::vector<int> votes(L);
  std::vector<double> mass(L);
  for (std::size_t i = 0; i < n; ++i) {
    std::fill(votes.begin(), votes.end(), 0);
    std::fill(mass.begin(), mass.end(), 0.0);
    for (std::size_t k = 0; k < leaves.size(); ++k) {
      ++votes[hard[k][i]];
      for (int l = 0; l < L; ++l) mass[l] += leaves[k]->at(l, i);
    }
    int best = 0;
    for (int l = 1; l < L; ++l)
      if (votes[l] > votes[best] || (votes[l] == votes[best] && mass[l] > mass[best])) best = l;
    out[i] = static_cast<std::uint8_t>(best);
  }
  return {std::move(out), leaves.size() == 1 ? *leaves[0] : average_maps(leaves)};
}

ProbabilityMap fuse_children(const ProbabilityMap& left, const ProbabilityMap& right) {
  const ProbabilityMap* maps[] = {&left, &right};
  return average_maps(std::span<const ProbabilityMap* const>(maps));
}

FlowCounts count_events(const std::vector<AuditEvent>& audit) {
  FlowCounts c;
  for (const auto& e : audit) {
    if (e.phase == FlowPhase::Descend) ++c.descend;
    if (e.phase == FlowPhase::Ascend) ++c.ascend;
    if (e.phase == FlowPhase::Redescend) ++c.redescend;
  }
  return c;
}

}  // namespace dmt
