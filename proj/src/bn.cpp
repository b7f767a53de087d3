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

#include "bn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "blob.hpp"
#include "parallel.hpp"

namespace dmt {

namespace {

constexpr std::string_view kBnMagic = "BNM1";
constexpr std::uint32_t kBnVersion = 1;
constexpr double kConstantFeature = 1e-12;

bool open_unit(double p) { return p > 0.0 && p < 1.0; }

}  // namespace

void BnParams::validate() const {
  if (gmm_components < 1) throw ArgumentError("bn: gmm_components must be >= 1");
  if (em_iterations < 1) throw ArgumentError("bn: em_iterations must be >= 1");
  if (!(em_tol >= 0.0)) throw ArgumentError("bn: em_tol must be >= 0");
  if (!(var_floor > 0.0)) throw ArgumentError("bn: var_floor must be > 0");
  if (!open_unit(edge_true_given_diff) || !open_unit(edge_true_given_same))
    throw ArgumentError("bn: edge conditionals must lie in (0, 1)");
  if (bp_max_iters < 1) throw ArgumentError("bn: bp_max_iters must be >= 1");
  if (!(bp_damping >= 0.0 && bp_damping < 1.0)) throw ArgumentError("bn: bp_damping must lie in [0, 1)");
  if (!(bp_tol > 0.0)) throw ArgumentError("bn: bp_tol must be > 0");
  if (edge_bins < 1) throw ArgumentError("bn: edge_bins must be >= 1");
  if (!(likelihood_weight > 0.0 && likelihood_weight <= 1.0))
    throw ArgumentError("bn: likelihood_weight must lie in (0, 1]");
}

// ---------------------------------------------------------------- features

SuperpixelFeatures superpixel_feature_matrix(const ImageResponses& resp, const EdgeMap& edge_map) {
  const auto& img = resp.image();
  if (img.width() != edge_map.width || img.height() != edge_map.height)
    throw ContractError("superpixel features: edge map and image sizes differ");
  const int channels = img.channels();
  const std::size_t n = edge_map.size();

  std::vector<double> means(n * channels, 0.0);
  for (std::size_t s = 0; s < n; ++s) {
    const auto& px = edge_map.superpixels[s].pixels;
    for (int c = 0; c < channels; ++c) {
      const auto plane = img.plane(c);
      double acc = 0.0;
      for (auto i : px) acc += plane[i];
      means[s * channels + c] = acc / static_cast<double>(px.size());
    }
  }
  const auto adjacency = edge_map.adjacency();

  const int per_channel = 5 + 3 + resp.dog_count() + 5 + resp.gabor_count() + 2;
  const std::size_t cols = static_cast<std::size_t>(channels) * per_channel + 2;

  SuperpixelFeatures out;
  out.rows = n;
  out.cols = cols;
  out.data.assign(n * cols, 0.0);
  parallel_for(n, [&](std::size_t s) {
    std::vector<double> neighborhood(channels, 0.0);
    const auto& nb = adjacency[s];
    if (nb.empty()) {
      neighborhood.clear();
    } else {
      for (int c = 0; c < channels; ++c) {
        double acc = 0.0;
        for (int t : nb) acc += means[static_cast<std::size_t>(t) * channels + c];
        neighborhood[c] = acc / static_cast<double>(nb.size());
      }
    }
    superpixel_base_features(resp, edge_map.superpixels[s].pixels, neighborhood, out.row(s));
  });
  return out;
}

std::vector<double> edge_strengths(const EdgeMap& edge_map, const MultiChannelImage& img) {
  if (img.width() != edge_map.width || img.height() != edge_map.height)
    throw ContractError("edge strengths: edge map and image sizes differ");
  const int channels = img.channels();
  std::vector<double> inv_range(channels, 0.0);
  for (int c = 0; c < channels; ++c) {
    const auto p = img.plane(c);
    const auto [lo, hi] = std::minmax_element(p.begin(), p.end());
    const double r = static_cast<double>(*hi) - static_cast<double>(*lo);
    inv_range[c] = r > 0.0 ? 1.0 / r : 0.0;
  }
  std::vector<double> out(edge_map.edges.size(), 0.0);
  for (std::size_t e = 0; e < out.size(); ++e) {
    const auto& seg = edge_map.edges[e];
    if (seg.boundary.empty()) continue;
    double acc = 0.0;
    for (const auto& [p, q] : seg.boundary) {
      double step = 0.0;
      for (int c = 0; c < channels; ++c) {
        const auto plane = img.plane(c);
        step += std::abs(static_cast<double>(plane[p]) - static_cast<double>(plane[q])) * inv_range[c];
      }
      acc += step / channels;
    }
    out[e] = acc / static_cast<double>(seg.boundary.size());
  }
  return out;
}

// ---------------------------------------------------------------- evidence

int EdgeEvidence::bin(double strength) const {
  const int bins = static_cast<int>(given_true.size());
  if (!(strength > 0.0)) return 0;
  const int b = static_cast<int>(std::floor(strength / max_strength * bins));
  return std::min(b, bins - 1);
}

double EdgeEvidence::likelihood(double strength, bool edge_on) const {
  return edge_on ? given_true[bin(strength)] : given_false[bin(strength)];
}

// ---------------------------------------------------------------- model

std::vector<double> BnModel::log_likelihoods(std::span<const double> features) const {
  if (static_cast<int>(features.size()) != feature_count())
    throw ContractError("bn: feature width " + std::to_string(features.size()) + " does not match model width " +
                        std::to_string(feature_count()));
  std::vector<double> z(features.size());
  for (std::size_t j = 0; j < z.size(); ++j) z[j] = (features[j] - feature_mean[j]) / feature_scale[j];
  std::vector<double> out(classes);
  for (int l = 0; l < classes; ++l) out[l] = params.likelihood_weight * class_models[l].log_likelihood(z);
  return out;
}

std::vector<double> BnModel::pairwise(double strength) const {
  const double on = evidence.likelihood(strength, true);
  const double off = evidence.likelihood(strength, false);
  const double same = on * params.edge_true_given_same + off * (1.0 - params.edge_true_given_same);
  const double diff = on * params.edge_true_given_diff + off * (1.0 - params.edge_true_given_diff);
  std::vector<double> psi(static_cast<std::size_t>(classes) * classes);
  for (int a = 0; a < classes; ++a)
    for (int b = 0; b < classes; ++b) psi[static_cast<std::size_t>(a) * classes + b] = a == b ? same : diff;
  return psi;
}

std::vector<std::uint8_t> BnModel::serialize() const {
  ByteWriter w;
  w.magic(kBnMagic);
  w.u32(kBnVersion);
  w.u64(fingerprint);
  w.u32(static_cast<std::uint32_t>(classes));
  w.u32(static_cast<std::uint32_t>(params.gmm_components));
  w.u32(static_cast<std::uint32_t>(params.em_iterations));
  w.f64(params.em_tol);
  w.f64(params.var_floor);
  w.f64(params.edge_true_given_diff);
  w.f64(params.edge_true_given_same);
  w.u32(static_cast<std::uint32_t>(params.bp_max_iters));
  w.f64(params.bp_damping);
  w.f64(params.bp_tol);
  w.u32(static_cast<std::uint32_t>(params.edge_bins));
  w.f64(params.likelihood_weight);
  w.u64(params.rng_seed);
  w.array(feature_mean);
  w.array(feature_scale);
  for (const auto& g : class_models) {
    w.u32(static_cast<std::uint32_t>(g.dim));
    w.array(g.weights);
    w.array(g.means);
    w.array(g.variances);
  }
  w.f64(evidence.max_strength);
  w.array(evidence.given_true);
  w.array(evidence.given_false);
  return w.take();
}

BnModel BnModel::deserialize(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  r.expect_magic(kBnMagic);
  const std::size_t version_at = r.offset();
  if (r.u32("version") != kBnVersion) throw FormatError("unsupported bn version", version_at);
  BnModel m;
  m.fingerprint = r.u64("fingerprint");
  const std::size_t classes_at = r.offset();
  m.classes = static_cast<int>(r.u32("classes"));
  if (m.classes < 1 || m.classes > 256) throw FormatError("implausible class count", classes_at);
  m.params.gmm_components = static_cast<int>(r.u32("params"));
  m.params.em_iterations = static_cast<int>(r.u32("params"));
  m.params.em_tol = r.f64("params");
  m.params.var_floor = r.f64("params");
  m.params.edge_true_given_diff = r.f64("params");
  m.params.edge_true_given_same = r.f64("params");
  m.params.bp_max_iters = static_cast<int>(r.u32("params"));
  m.params.bp_damping = r.f64("params");
  m.params.bp_tol = r.f64("params");
  m.params.edge_bins = static_cast<int>(r.u32("params"));
  m.params.likelihood_weight = r.f64("params");
  const std::size_t seed_at = r.offset();
  m.params.rng_seed = r.u64("params");
  try {
    m.params.validate();
  } catch (const ArgumentError& e) {
    throw FormatError(std::string("invalid bn parameters: ") + e.what(), seed_at);
  }
  m.feature_mean = r.array<double>("feature mean");
  const std::size_t scale_at = r.offset();
  m.feature_scale = r.array<double>("feature scale");
  const std::size_t d = m.feature_mean.size();
  if (d == 0 || m.feature_scale.size() != d) throw FormatError("standardization size mismatch", scale_at);
  for (double s : m.feature_scale)
    if (!(s > 0.0)) throw FormatError("non-positive feature scale", scale_at);
  m.class_models.resize(m.classes);
  for (auto& g : m.class_models) {
    const std::size_t at = r.offset();
    g.dim = static_cast<int>(r.u32("gmm"));
    g.weights = r.array<double>("gmm weights");
    g.means = r.array<double>("gmm means");
    g.variances = r.array<double>("gmm variances");
    const std::size_t k = g.weights.size();
    if (static_cast<std::size_t>(g.dim) != d || k == 0 || g.means.size() != k * d || g.variances.size() != k * d)
      throw FormatError("gmm shape mismatch", at);
    double ws = 0.0;
    for (double wgt : g.weights) ws += wgt;
    if (std::abs(ws - 1.0) > 1e-9) throw FormatError("gmm weights do not sum to one", at);
    for (double v : g.variances)
      if (!(v > 0.0)) throw FormatError("non-positive gmm variance", at);
  }
  const std::size_t ev_at = r.offset();
  m.evidence.max_strength = r.f64("edge evidence");
  m.evidence.given_true = r.array<double>("edge evidence");
  m.evidence.given_false = r.array<double>("edge evidence");
  if (!(m.evidence.max_strength > 0.0) || m.evidence.given_true.size() != static_cast<std::size_t>(m.params.edge_bins) ||
      m.evidence.given_false.size() != m.evidence.given_true.size())
    throw FormatError("edge evidence shape mismatch", ev_at);
  if (r.remaining() != 0) throw FormatError("trailing bytes after bn model", r.offset());
  return m;
}

// ---------------------------------------------------------------- training

BnModel bn_train(std::span<const BnTrainingImage> images, const BnParams& params, int classes,
                 std::uint64_t layout_fingerprint) {
  params.validate();
  if (classes < 1) throw ArgumentError("bn_train: class count must be >= 1");
  if (images.empty()) throw ArgumentError("bn_train: no training images");
  const std::size_t d = images.front().features->cols;
  for (const auto& im : images) {
    if (im.edge_map == nullptr || im.features == nullptr) throw ArgumentError("bn_train: missing image input");
    if (im.features->cols != d) throw ArgumentError("bn_train: feature widths differ across images");
    if (im.features->rows != im.edge_map->size() || im.labels.size() != im.edge_map->size())
      throw ContractError("bn_train: features, labels and edge map disagree on superpixel count");
    if (im.strengths.size() != im.edge_map->edges.size())
      throw ContractError("bn_train: one edge strength per edge required");
    for (auto l : im.labels)
      if (l >= classes) throw ArgumentError("bn_train: superpixel label out of range");
  }

  BnModel m;
  m.params = params;
  m.classes = classes;
  m.fingerprint = layout_fingerprint;

  // Standardization.
  std::size_t total = 0;
  m.feature_mean.assign(d, 0.0);
  m.feature_scale.assign(d, 0.0);
  for (const auto& im : images) {
    for (std::size_t s = 0; s < im.features->rows; ++s) {
      const auto row = im.features->row(s);
      for (std::size_t j = 0; j < d; ++j) m.feature_mean[j] += row[j];
    }
    total += im.features->rows;
  }
  for (double& v : m.feature_mean) v /= static_cast<double>(total);
  for (const auto& im : images)
    for (std::size_t s = 0; s < im.features->rows; ++s) {
      const auto row = im.features->row(s);
      for (std::size_t j = 0; j < d; ++j) m.feature_scale[j] += (row[j] - m.feature_mean[j]) * (row[j] - m.feature_mean[j]);
    }
  for (double& v : m.feature_scale) {
    v = std::sqrt(v / static_cast<double>(total));
    if (v < kConstantFeature) v = 1.0;
  }

  // Per-class standardized rows.
  std::vector<std::vector<double>> rows(classes);
  for (const auto& im : images)
    for (std::size_t s = 0; s < im.features->rows; ++s) {
      const auto row = im.features->row(s);
      auto& dst = rows[im.labels[s]];
      for (std::size_t j = 0; j < d; ++j) dst.push_back((row[j] - m.feature_mean[j]) / m.feature_scale[j]);
    }
  for (int l = 0; l < classes; ++l)
    if (rows[l].empty()) throw TrainingError("bn_train: class " + std::to_string(l) + " has no training superpixels");

  GmmFitOptions opts;
  opts.components = params.gmm_components;
  opts.max_iterations = params.em_iterations;
  opts.tolerance = params.em_tol;
  opts.variance_floor = params.var_floor;
  m.class_models.resize(classes);
  parallel_for(static_cast<std::size_t>(classes), [&](std::size_t l) {
    Rng rng(params.rng_seed, "bn.gmm", l);
    m.class_models[l] = fit_diag_gmm(rows[l], static_cast<int>(d), opts, rng).model;
  });

  // Edge evidence histograms with add-one smoothing.
  double max_strength = 0.0;
  for (const auto& im : images)
    for (double s : im.strengths) max_strength = std::max(max_strength, s);
  m.evidence.max_strength = max_strength > 0.0 ? max_strength : 1.0;
  m.evidence.given_true.assign(params.edge_bins, 1.0);
  m.evidence.given_false.assign(params.edge_bins, 1.0);
  for (const auto& im : images)
    for (std::size_t e = 0; e < im.strengths.size(); ++e) {
      const auto& seg = im.edge_map->edges[e];
      const bool on = im.labels[seg.a] != im.labels[seg.b];
      (on ? m.evidence.given_true : m.evidence.given_false)[m.evidence.bin(im.strengths[e])] += 1.0;
    }
  for (auto* h : {&m.evidence.given_true, &m.evidence.given_false}) {
    const double s = std::accumulate(h->begin(), h->end(), 0.0);
    for (double& v : *h) v /= s;
  }
  return m;
}

// ---------------------------------------------------------------- inference

bool is_acyclic(int nodes, std::span<const std::pair<int, int>> edges) {
  std::vector<int> parent(nodes);
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](int x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  for (const auto& [a, b] : edges) {
    const int ra = find(a), rb = find(b);
    if (ra == rb) return false;
    parent[ra] = rb;
  }
  return true;
}

BpResult loopy_bp(const PairwiseGraph& g, const BpOptions& opts) {
  const int L = g.labels;
  if (L < 1 || g.nodes < 0) throw ArgumentError("bp: invalid graph size");
  if (g.unary.size() != static_cast<std::size_t>(g.nodes) * L) throw ArgumentError("bp: unary size mismatch");
  if (g.potentials.size() != g.edges.size() * L * L) throw ArgumentError("bp: potential size mismatch");
  for (const auto& [a, b] : g.edges)
    if (a == b || a < 0 || b < 0 || a >= g.nodes || b >= g.nodes) throw ContractError("bp: edge endpoints invalid");

  const double damping = is_acyclic(g.nodes, g.edges) ? 0.0 : opts.damping;
  const std::size_t ne = g.edges.size();
  // Directed message 2e carries edges[e].first -> second, 2e+1 the reverse.
  std::vector<std::vector<std::size_t>> incoming(g.nodes);
  for (std::size_t e = 0; e < ne; ++e) {
    incoming[g.edges[e].second].push_back(2 * e);
    incoming[g.edges[e].first].push_back(2 * e + 1);
  }
  std::vector<double> msg(2 * ne * L, 1.0 / L), next(msg.size());
  std::vector<double> h(L);

  BpResult res;
  for (int it = 0; it < opts.max_iterations; ++it) {
    double change = 0.0;
    for (std::size_t m = 0; m < 2 * ne; ++m) {
      const std::size_t e = m / 2;
      const bool forward = m % 2 == 0;
      const int src = forward ? g.edges[e].first : g.edges[e].second;
      const std::size_t reverse = m ^ 1;
      for (int l = 0; l < L; ++l) h[l] = g.unary[static_cast<std::size_t>(src) * L + l];
      for (std::size_t in : incoming[src]) {
        if (in == reverse) continue;
        for (int l = 0; l < L; ++l) h[l] *= msg[in * L + l];
      }
      const double* psi = g.potentials.data() + e * L * L;
      double* out = next.data() + m * L;
      double s = 0.0;
      for (int t = 0; t < L; ++t) {
        double acc = 0.0;
        for (int l = 0; l < L; ++l) acc += h[l] * (forward ? psi[l * L + t] : psi[t * L + l]);
        out[t] = acc;
        s += acc;
      }
      for (int t = 0; t < L; ++t) {
        const double fresh = s > 0.0 ? out[t] / s : 1.0 / L;
        const double v = damping * msg[m * L + t] + (1.0 - damping) * fresh;
        change = std::max(change, std::abs(v - msg[m * L + t]));
        out[t] = v;
      }
    }
    msg.swap(next);
    res.iterations = it + 1;
    if (change < opts.tolerance) {
      res.converged = true;
      break;
    }
  }
  if (ne == 0) res.converged = true;

  res.marginals.assign(static_cast<std::size_t>(g.nodes) * L, 0.0);
  for (int v = 0; v < g.nodes; ++v) {
    double* b = res.marginals.data() + static_cast<std::size_t>(v) * L;
    for (int l = 0; l < L; ++l) b[l] = g.unary[static_cast<std::size_t>(v) * L + l];
    for (std::size_t in : incoming[v])
      for (int l = 0; l < L; ++l) b[l] *= msg[in * L + l];
    double s = 0.0;
    for (int l = 0; l < L; ++l) s += b[l];
    for (int l = 0; l < L; ++l) b[l] = s > 0.0 ? b[l] / s : 1.0 / L;
  }
  return res;
}

std::vector<double> superpixel_prior(const EdgeMap& edge_map, const ProbabilityMap& prior) {
  if (prior.width() != edge_map.width || prior.height() != edge_map.height)
    throw ContractError("bn: prior map size differs from the edge map");
  const int L = prior.classes();
  std::vector<double> out(edge_map.size() * L, 0.0);
  for (std::size_t s = 0; s < edge_map.size(); ++s) {
    const auto& px = edge_map.superpixels[s].pixels;
    double total = 0.0;
    for (int l = 0; l < L; ++l) {
      double acc = 0.0;
      for (auto i : px) acc += prior.at(l, i);
      out[s * L + l] = acc / static_cast<double>(px.size());
      total += out[s * L + l];
    }
    for (int l = 0; l < L; ++l) out[s * L + l] = total > 0.0 ? out[s * L + l] / total : 1.0 / L;
  }
  return out;
}

BnInference bn_infer_superpixels(const BnModel& model, const EdgeMap& edge_map, const SuperpixelFeatures& features,
                                 std::span<const double> strengths, const ProbabilityMap* prior) {
  const int L = model.classes;
  const std::size_t n = edge_map.size();
  if (features.rows != n) throw ContractError("bn_infer: feature rows do not match the superpixel count");
  if (strengths.size() != edge_map.edges.size()) throw ContractError("bn_infer: one edge strength per edge required");
  if (prior != nullptr && prior->classes() != L) throw ContractError("bn_infer: prior class count differs from model");
  for (const auto& seg : edge_map.edges)
    if (seg.a == seg.b || seg.a < 0 || seg.b < 0 || static_cast<std::size_t>(seg.a) >= n ||
        static_cast<std::size_t>(seg.b) >= n)
      throw ContractError("bn_infer: edge node without two distinct superpixel parents");

  BnInference out;
  out.prior = prior ? superpixel_prior(edge_map, *prior) : std::vector<double>(n * L, 1.0 / L);

  PairwiseGraph g;
  g.nodes = static_cast<int>(n);
  g.labels = L;
  g.unary.resize(n * L);
  parallel_for(n, [&](std::size_t s) {
    const auto ll = model.log_likelihoods(features.row(s));
    std::vector<double> logu(L);
    double mx = -std::numeric_limits<double>::infinity();
    for (int l = 0; l < L; ++l) {
      const double p = out.prior[s * L + l];
      logu[l] = p > 0.0 ? std::log(p) + ll[l] : -std::numeric_limits<double>::infinity();
      mx = std::max(mx, logu[l]);
    }
    for (int l = 0; l < L; ++l) g.unary[s * L + l] = std::isfinite(mx) ? std::exp(logu[l] - mx) : 1.0;
  });
  g.edges.reserve(edge_map.edges.size());
  g.potentials.reserve(edge_map.edges.size() * L * L);
  for (std::size_t e = 0; e < edge_map.edges.size(); ++e) {
    g.edges.emplace_back(edge_map.edges[e].a, edge_map.edges[e].b);
    const auto psi = model.pairwise(strengths[e]);
    g.potentials.insert(g.potentials.end(), psi.begin(), psi.end());
  }
  BpOptions opts{model.params.bp_max_iters, model.params.bp_damping, model.params.bp_tol};
  BpResult bp = loopy_bp(g, opts);
  out.posterior = std::move(bp.marginals);
  out.iterations = bp.iterations;
  out.converged = bp.converged;
  return out;
}

ProbabilityMap rasterize_posteriors(const EdgeMap& edge_map, std::span<const double> posterior, int classes) {
  if (posterior.size() != edge_map.size() * classes) throw ContractError("rasterize: posterior size mismatch");
  ProbabilityMap map(edge_map.width, edge_map.height, classes);
  for (std::size_t s = 0; s < edge_map.size(); ++s)
    for (auto i : edge_map.superpixels[s].pixels)
      for (int l = 0; l < classes; ++l) map.at(l, i) = static_cast<float>(posterior[s * classes + l]);
  map.normalize();
  return map;
}

ProbabilityMap bn_infer(const BnModel& model, const EdgeMap& edge_map, const SuperpixelFeatures& features,
                        std::span<const double> strengths, const ProbabilityMap* prior) {
  const BnInference r = bn_infer_superpixels(model, edge_map, features, strengths, prior);
  return rasterize_posteriors(edge_map, r.posterior, model.classes);
}

}  // namespace dmt
