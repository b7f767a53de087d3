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

#include "slic.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>

namespace dmt {

void SlicParams::validate() const {
  if (target_superpixels < 1) throw ArgumentError("slic: target_superpixels must be >= 1");
  if (!(compactness > 0.0)) throw ArgumentError("slic: compactness must be > 0");
  if (iterations < 1) throw ArgumentError("slic: iterations must be >= 1");
  if (!(min_region_fraction >= 0.0)) throw ArgumentError("slic: min_region_fraction must be >= 0");
}

namespace {

// Labels 4-connected components of equal assignment; returns component count.
int connected_components(int w, int h, const std::vector<std::int32_t>& assign, std::vector<std::int32_t>& comp) {
  const std::size_t n = assign.size();
  comp.assign(n, -1);
  std::vector<std::int32_t> stack;
  int next = 0;
  for (std::size_t start = 0; start < n; ++start) {
    if (comp[start] >= 0) continue;
    comp[start] = next;
    stack.assign(1, static_cast<std::int32_t>(start));
    while (!stack.empty()) {
      const std::int32_t p = stack.back();
      stack.pop_back();
      const int x = p % w, y = p / w;
      const std::int32_t nb[4] = {x > 0 ? p - 1 : -1, x + 1 < w ? p + 1 : -1, y > 0 ? p - w : -1,
                                  y + 1 < h ? p + w : -1};
      for (std::int32_t q : nb) {
        if (q < 0 || comp[q] >= 0 || assign[q] != assign[p]) continue;
        comp[q] = next;
        stack.push_back(q);
      }
    }
    ++next;
  }
  return next;
}

// Relabels ids by order of first appearance in raster scan.
int compact_ids(std::vector<std::int32_t>& assign) {
  std::map<std::int32_t, std::int32_t> remap;
  for (auto& a : assign) {
    auto [it, inserted] = remap.emplace(a, static_cast<std::int32_t>(remap.size()));
    a = it->second;
  }
  return static_cast<int>(remap.size());
}

void seed_grid(int w, int h, int target, int& nx, int& ny) {
  const double step = std::sqrt(static_cast<double>(w) * h / target);
  nx = std::max(1, static_cast<int>(std::lround(w / step)));
  ny = std::max(1, static_cast<int>(std::lround(h / step)));
  nx = std::min(nx, w);
  ny = std::min(ny, h);
  while (nx * ny < target && (nx < w || ny < h)) {
    const double cell_x = static_cast<double>(w) / nx, cell_y = static_cast<double>(h) / ny;
    if ((cell_x >= cell_y && nx < w) || ny >= h)
      ++nx;
    else
      ++ny;
  }
}

}  // namespace

std::vector<std::vector<int>> EdgeMap::adjacency() const {
  std::vector<std::vector<int>> adj(superpixels.size());
  for (const auto& e : edges) {
    adj[e.a].push_back(e.b);
    adj[e.b].push_back(e.a);
  }
  for (auto& v : adj) std::sort(v.begin(), v.end());
  return adj;
}

void EdgeMap::validate() const {
  const std::size_t n = static_cast<std::size_t>(width) * height;
  if (width < 1 || height < 1 || assignment.size() != n) throw ContractError("edge map: bad dimensions");
  if (superpixels.empty()) throw ContractError("edge map: no superpixels");
  const auto count = static_cast<std::int32_t>(superpixels.size());
  std::vector<int> seen(superpixels.size(), 0);
  for (auto a : assignment) {
    if (a < 0 || a >= count) throw ContractError("edge map: assignment id out of range");
    ++seen[a];
  }
  for (std::size_t s = 0; s < superpixels.size(); ++s) {
    const auto& sp = superpixels[s];
    if (sp.id != static_cast<int>(s)) throw ContractError("edge map: superpixel ids not dense");
    if (sp.pixels.empty() || static_cast<int>(sp.pixels.size()) != seen[s])
      throw ContractError("edge map: superpixel pixel list disagrees with assignment");
    for (auto p : sp.pixels)
      if (assignment[p] != sp.id) throw ContractError("edge map: pixel listed in the wrong superpixel");
  }
  std::vector<std::int32_t> comp;
  const int comps = connected_components(width, height, assignment, comp);
  if (comps != count) throw ContractError("edge map: a superpixel is not 4-connected");

  std::set<std::pair<int, int>> pairs;
  for (std::size_t i = 0; i < edges.size(); ++i) {
    const auto& e = edges[i];
    if (e.id != static_cast<int>(i)) throw ContractError("edge map: edge ids not dense");
    if (e.a == e.b || e.a < 0 || e.b < 0 || e.a >= count || e.b >= count)
      throw ContractError("edge map: edge parents invalid");
    if (!pairs.emplace(std::min(e.a, e.b), std::max(e.a, e.b)).second)
      throw ContractError("edge map: duplicate edge parent pair");
    if (e.boundary.empty()) throw ContractError("edge map: edge without boundary pixels");
    for (const auto& [p, q] : e.boundary) {
      if (assignment[p] != e.a || assignment[q] != e.b) throw ContractError("edge map: boundary pair parents mismatch");
      const int dx = std::abs(p % width - q % width), dy = std::abs(p / width - q / width);
      if (dx + dy != 1) throw ContractError("edge map: boundary pair not 4-adjacent");
    }
  }
}

EdgeMap edge_map_from_assignment(int width, int height, std::vector<std::int32_t> assignment) {
  EdgeMap em;
  em.width = width;
  em.height = height;
  em.assignment = std::move(assignment);
  std::int32_t count = 0;
  for (auto a : em.assignment) count = std::max(count, a + 1);
  em.superpixels.resize(count);
  for (std::int32_t s = 0; s < count; ++s) em.superpixels[s].id = s;
  for (std::size_t p = 0; p < em.assignment.size(); ++p)
    em.superpixels[em.assignment[p]].pixels.push_back(static_cast<std::int32_t>(p));
  for (auto& sp : em.superpixels) {
    double sx = 0.0, sy = 0.0;
    for (auto p : sp.pixels) {
      sx += p % width;
      sy += p / width;
    }
    if (!sp.pixels.empty()) {
      sp.centroid_x = sx / static_cast<double>(sp.pixels.size());
      sp.centroid_y = sy / static_cast<double>(sp.pixels.size());
    }
  }
  std::map<std::pair<int, int>, std::vector<std::pair<std::int32_t, std::int32_t>>> grouped;
  auto visit = [&](std::int32_t p, std::int32_t q) {
    const int ap = em.assignment[p], aq = em.assignment[q];
    if (ap == aq) return;
    if (ap < aq)
      grouped[{ap, aq}].emplace_back(p, q);
    else
      grouped[{aq, ap}].emplace_back(q, p);
  };
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) {
      const std::int32_t p = y * width + x;
      if (x + 1 < width) visit(p, p + 1);
      if (y + 1 < height) visit(p, p + width);
    }
  em.edges.reserve(grouped.size());
  for (auto& [key, boundary] : grouped) {
    EdgeSegment e;
    e.id = static_cast<int>(em.edges.size());
    e.a = key.first;
    e.b = key.second;
    e.boundary = std::move(boundary);
    em.edges.push_back(std::move(e));
  }
  return em;
}

EdgeMap slic(const MultiChannelImage& img, int reference_channel, const SlicParams& params) {
  params.validate();
  if (reference_channel < 0 || reference_channel >= img.channels())
    throw ArgumentError("slic: reference channel out of range");
  const int w = img.width(), h = img.height();
  const std::size_t n = img.pixel_count();
  if (static_cast<std::size_t>(params.target_superpixels) > n)
    throw ArgumentError("slic: target superpixel count exceeds pixel count");

  const auto src = img.plane(reference_channel);
  const auto [lo_it, hi_it] = std::minmax_element(src.begin(), src.end());
  const double lo = *lo_it, range = *hi_it - *lo_it;
  std::vector<double> v(n, 0.0);
  if (range > 0.0)
    for (std::size_t i = 0; i < n; ++i) v[i] = 100.0 * (src[i] - lo) / range;
  auto val = [&](int x, int y) { return v[static_cast<std::size_t>(std::clamp(y, 0, h - 1)) * w + std::clamp(x, 0, w - 1)]; };

  int nx = 1, ny = 1;
  seed_grid(w, h, params.target_superpixels, nx, ny);
  const double cell_x = static_cast<double>(w) / nx, cell_y = static_cast<double>(h) / ny;
  const double step = std::sqrt(static_cast<double>(w) * h / params.target_superpixels);
  const int radius = static_cast<int>(std::ceil(std::max({cell_x, cell_y, step})));

  struct Center {
    double x, y, v;
  };
  std::vector<Center> centers;
  centers.reserve(static_cast<std::size_t>(nx) * ny);
  std::vector<std::int32_t> label(n, 0);
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i) {
      int sx = std::min(w - 1, static_cast<int>((i + 0.5) * cell_x));
      int sy = std::min(h - 1, static_cast<int>((j + 0.5) * cell_y));
      // Move the seed to the lowest-gradient position of its 3x3 neighborhood.
      double best = std::numeric_limits<double>::infinity();
      int bx = sx, by = sy;
      for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx) {
          const int x = sx + dx, y = sy + dy;
          if (x < 0 || y < 0 || x >= w || y >= h) continue;
          const double gx = val(x + 1, y) - val(x - 1, y), gy = val(x, y + 1) - val(x, y - 1);
          const double g = gx * gx + gy * gy;
          if (g < best) {
            best = g;
            bx = x;
            by = y;
          }
        }
      centers.push_back({static_cast<double>(bx), static_cast<double>(by), val(bx, by)});
    }
  // Initial assignment by grid cell covers pixels no window reaches.
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const int i = std::min(nx - 1, static_cast<int>(x / cell_x));
      const int j = std::min(ny - 1, static_cast<int>(y / cell_y));
      label[static_cast<std::size_t>(y) * w + x] = j * nx + i;
    }

  const double spatial_weight = (params.compactness / step) * (params.compactness / step);
  std::vector<double> dist(n);
  std::vector<double> sum_x(centers.size()), sum_y(centers.size()), sum_v(centers.size());
  std::vector<int> members(centers.size());
  for (int iter = 0; iter < params.iterations; ++iter) {
    std::fill(dist.begin(), dist.end(), std::numeric_limits<double>::infinity());
    for (std::size_t k = 0; k < centers.size(); ++k) {
      const auto& c = centers[k];
      const int x0 = std::max(0, static_cast<int>(std::floor(c.x)) - radius);
      const int x1 = std::min(w - 1, static_cast<int>(std::ceil(c.x)) + radius);
      const int y0 = std::max(0, static_cast<int>(std::floor(c.y)) - radius);
      const int y1 = std::min(h - 1, static_cast<int>(std::ceil(c.y)) + radius);
      for (int y = y0; y <= y1; ++y)
        for (int x = x0; x <= x1; ++x) {
          const std::size_t p = static_cast<std::size_t>(y) * w + x;
          const double dv = v[p] - c.v, dx = x - c.x, dy = y - c.y;
          const double d = dv * dv + spatial_weight * (dx * dx + dy * dy);
          if (d < dist[p]) {
            dist[p] = d;
            label[p] = static_cast<std::int32_t>(k);
          }
        }
    }
    std::fill(sum_x.begin(), sum_x.end(), 0.0);
    std::fill(sum_y.begin(), sum_y.end(), 0.0);
    std::fill(sum_v.begin(), sum_v.end(), 0.0);
    std::fill(members.begin(), members.end(), 0);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        const std::size_t p = static_cast<std::size_t>(y) * w + x;
        const auto k = label[p];
        sum_x[k] += x;
        sum_y[k] += y;
        sum_v[k] += v[p];
        ++members[k];
      }
    for (std::size_t k = 0; k < centers.size(); ++k) {
      if (members[k] == 0) continue;
      centers[k] = {sum_x[k] / members[k], sum_y[k] / members[k], sum_v[k] / members[k]};
    }
  }

  // Connectivity: split into 4-connected components, then fold orphans (every
  // component but the largest of its cluster) and small regions into their
  // most similar (closest mean intensity) neighbor.
  std::vector<std::int32_t> comp;
  const int comps = connected_components(w, h, label, comp);
  std::vector<int> size(comps, 0);
  std::vector<double> sum(comps, 0.0);
  std::vector<std::int32_t> cluster(comps, 0);
  std::vector<std::set<int>> adj(comps);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const std::size_t p = static_cast<std::size_t>(y) * w + x;
      const int c = comp[p];
      ++size[c];
      sum[c] += v[p];
      cluster[c] = label[p];
      if (x + 1 < w && comp[p + 1] != c) {
        adj[c].insert(comp[p + 1]);
        adj[comp[p + 1]].insert(c);
      }
      if (y + 1 < h && comp[p + w] != c) {
        adj[c].insert(comp[p + w]);
        adj[comp[p + w]].insert(c);
      }
    }
  const double min_size = params.min_region_fraction * static_cast<double>(n) / params.target_superpixels;
  std::vector<int> parent(comps);
  for (int c = 0; c < comps; ++c) parent[c] = c;
  std::vector<int> principal(centers.size(), -1);
  for (int c = 0; c < comps; ++c) {
    int& pc = principal[cluster[c]];
    if (pc < 0 || size[c] > size[pc]) pc = c;
  }
  std::vector<char> orphan(comps, 0);
  for (int c = 0; c < comps; ++c) orphan[c] = principal[cluster[c]] != c;
  int alive = comps;
  auto merge = [&](int c, int into) {
    parent[c] = into;
    size[into] += size[c];
    sum[into] += sum[c];
    for (int nb : adj[c]) {
      if (nb == into) continue;
      adj[nb].erase(c);
      adj[nb].insert(into);
      adj[into].insert(nb);
    }
    adj[into].erase(c);
    adj[c].clear();
    --alive;
  };
  // Most similar neighbor, restricted to principal components when any exist.
  auto most_similar = [&](int c, bool prefer_principal) {
    const double mean_c = sum[c] / size[c];
    int best = -1;
    bool best_principal = false;
    double best_d = std::numeric_limits<double>::infinity();
    for (int nb : adj[c]) {
      const bool pr = prefer_principal && !orphan[nb];
      const double d = std::abs(sum[nb] / size[nb] - mean_c);
      if ((pr && !best_principal) ||
          (pr == best_principal && (d < best_d || (d == best_d && nb < best)))) {
        best_d = d;
        best = nb;
        best_principal = pr;
      }
    }
    return best;
  };

  std::set<std::pair<int, int>> queue;  // (size, id)
  for (int c = 0; c < comps; ++c)
    if (orphan[c]) queue.emplace(size[c], c);
  while (!queue.empty() && alive > 1) {
    const int c = queue.begin()->second;
    queue.erase(queue.begin());
    const int best = most_similar(c, true);
    if (best < 0) continue;
    queue.erase({size[best], best});
    merge(c, best);
    if (orphan[best]) queue.emplace(size[best], best);
  }
  for (int c = 0; c < comps; ++c)
    if (parent[c] == c && size[c] < min_size) queue.emplace(size[c], c);
  while (!queue.empty() && alive > 1) {
    const int c = queue.begin()->second;
    queue.erase(queue.begin());
    const int best = most_similar(c, false);
    if (best < 0) continue;
    queue.erase({size[best], best});
    merge(c, best);
    if (size[best] < min_size) queue.emplace(size[best], best);
  }
  auto root = [&](int c) {
    while (parent[c] != c) c = parent[c];
    return c;
  };
  for (std::size_t p = 0; p < n; ++p) label[p] = root(comp[p]);
  compact_ids(label);
  return edge_map_from_assignment(w, h, std::move(label));
}

std::vector<std::vector<std::int32_t>> apply_partition(const EdgeMap& edge_map, const MultiChannelImage& other) {
  if (other.width() != edge_map.width || other.height() != edge_map.height)
    throw ArgumentError("apply_partition: image dimensions differ from the edge map");
  std::vector<std::vector<std::int32_t>> sets;
  sets.reserve(edge_map.superpixels.size());
  for (const auto& sp : edge_map.superpixels) sets.push_back(sp.pixels);
  return sets;
}

std::vector<std::uint8_t> majority_label(const EdgeMap& edge_map, const LabelMap& labels) {
  if (labels.width() != edge_map.width || labels.height() != edge_map.height)
    throw ArgumentError("majority_label: label map dimensions differ from the edge map");
  std::vector<std::uint8_t> out(edge_map.superpixels.size(), 0);
  std::vector<int> hist(256);
  for (const auto& sp : edge_map.superpixels) {
    std::fill(hist.begin(), hist.end(), 0);
    for (auto p : sp.pixels) ++hist[labels[p]];
    out[sp.id] = static_cast<std::uint8_t>(std::max_element(hist.begin(), hist.end()) - hist.begin());
  }
  return out;
}

}  // namespace dmt
