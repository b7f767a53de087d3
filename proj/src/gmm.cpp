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

#include "gmm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace dmt {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;
constexpr double kEmptyComponent = 1e-8;

double log_sum_exp(std::span<const double> v) {
  double m = -std::numeric_limits<double>::infinity();
  for (double x : v) m = std::max(m, x);
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (double x : v) s += std::exp(x - m);
  return m + std::log(s);
}

double component_log_density(const DiagGmm& g, int k, std::span<const double> x) {
  const double* mu = g.means.data() + static_cast<std::size_t>(k) * g.dim;
  const double* var = g.variances.data() + static_cast<std::size_t>(k) * g.dim;
  double acc = 0.0;
  for (int j = 0; j < g.dim; ++j) {
    const double d = x[j] - mu[j];
    acc += d * d / var[j] + std::log(var[j]) + kLog2Pi;
  }
  return -0.5 * acc;
}

}  // namespace

double DiagGmm::log_likelihood(std::span<const double> x) const {
  std::vector<double> terms(weights.size());
  for (int k = 0; k < components(); ++k) terms[k] = std::log(weights[k]) + component_log_density(*this, k, x);
  return log_sum_exp(terms);
}

GmmFit fit_diag_gmm(std::span<const double> data, int dim, const GmmFitOptions& opts, Rng& rng) {
  if (dim < 1) throw ArgumentError("gmm: dimension must be >= 1");
  if (opts.components < 1) throw ArgumentError("gmm: component count must be >= 1");
  const std::size_t n = data.size() / dim;
  if (n == 0 || data.size() % dim != 0) throw ArgumentError("gmm: empty or ragged data");
  auto row = [&](std::size_t i) { return data.subspan(i * dim, dim); };
  const int k_count = static_cast<int>(std::min<std::size_t>(opts.components, n));

  // Global variance for reseeding and initial spreads.
  std::vector<double> global_mean(dim, 0.0), global_var(dim, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (int j = 0; j < dim; ++j) global_mean[j] += row(i)[j];
  for (double& m : global_mean) m /= static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i)
    for (int j = 0; j < dim; ++j) global_var[j] += (row(i)[j] - global_mean[j]) * (row(i)[j] - global_mean[j]);
  for (double& v : global_var) v = std::max(v / static_cast<double>(n), opts.variance_floor);

  // k-means++ seeding.
  std::vector<std::size_t> seeds{rng.below(n)};
  std::vector<double> d2(n, std::numeric_limits<double>::infinity());
  while (static_cast<int>(seeds.size()) < k_count) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double d = 0.0;
      const auto s = row(seeds.back());
      for (int j = 0; j < dim; ++j) d += (row(i)[j] - s[j]) * (row(i)[j] - s[j]);
      d2[i] = std::min(d2[i], d);
      total += d2[i];
    }
    std::size_t pick = rng.below(n);
    if (total > 0.0) {
      double u = rng.uniform() * total;
      for (std::size_t i = 0; i < n; ++i) {
        u -= d2[i];
        if (u < 0.0) {
          pick = i;
          break;
        }
      }
    }
    seeds.push_back(pick);
  }

  GmmFit fit;
  DiagGmm& g = fit.model;
  g.dim = dim;
  g.weights.assign(k_count, 1.0 / k_count);
  g.means.resize(static_cast<std::size_t>(k_count) * dim);
  g.variances.resize(static_cast<std::size_t>(k_count) * dim);
  for (int k = 0; k < k_count; ++k)
    for (int j = 0; j < dim; ++j) {
      g.means[static_cast<std::size_t>(k) * dim + j] = row(seeds[k])[j];
      g.variances[static_cast<std::size_t>(k) * dim + j] = global_var[j];
    }

  std::vector<bool> reseeded_once(k_count, false);
  std::vector<double> resp(n * k_count), terms(k_count), sample_ll(n);
  double previous = -std::numeric_limits<double>::infinity();
  for (int iter = 0; iter < opts.max_iterations; ++iter) {
    const int kc = g.components();
    // E step.
    double total_ll = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      for (int k = 0; k < kc; ++k) terms[k] = std::log(g.weights[k]) + component_log_density(g, k, row(i));
      const double lse = log_sum_exp(std::span<const double>(terms.data(), kc));
      sample_ll[i] = lse;
      total_ll += lse;
      for (int k = 0; k < kc; ++k) resp[i * kc + k] = std::exp(terms[k] - lse);
    }
    const double mean_ll = total_ll / static_cast<double>(n);
    if (iter > 0) fit.log_likelihood_trace.push_back(mean_ll);
    if (iter > 1 && mean_ll - previous < opts.tolerance) break;
    previous = mean_ll;

    // M step.
    std::vector<int> empty;
    for (int k = 0; k < kc; ++k) {
      double nk = 0.0;
      for (std::size_t i = 0; i < n; ++i) nk += resp[i * kc + k];
      if (nk < kEmptyComponent * static_cast<double>(n) || nk <= 0.0) {
        empty.push_back(k);
        continue;
      }
      double* mu = g.means.data() + static_cast<std::size_t>(k) * dim;
      double* var = g.variances.data() + static_cast<std::size_t>(k) * dim;
      std::fill(mu, mu + dim, 0.0);
      for (std::size_t i = 0; i < n; ++i)
        for (int j = 0; j < dim; ++j) mu[j] += resp[i * kc + k] * row(i)[j];
      for (int j = 0; j < dim; ++j) mu[j] /= nk;
      std::fill(var, var + dim, 0.0);
      for (std::size_t i = 0; i < n; ++i)
        for (int j = 0; j < dim; ++j) {
          const double d = row(i)[j] - mu[j];
          var[j] += resp[i * kc + k] * d * d;
        }
      for (int j = 0; j < dim; ++j) var[j] = std::max(var[j] / nk, opts.variance_floor);
      g.weights[k] = nk / static_cast<double>(n);
    }
    if (!empty.empty()) {
      // Re-seed an empty component once at the worst-explained sample; drop it if it empties again.
      std::vector<int> drop;
      for (int k : empty) {
        if (reseeded_once[k]) {
          drop.push_back(k);
          continue;
        }
        reseeded_once[k] = true;
        ++fit.reseeded;
        const std::size_t worst = static_cast<std::size_t>(std::min_element(sample_ll.begin(), sample_ll.end()) - sample_ll.begin());
        for (int j = 0; j < dim; ++j) {
          g.means[static_cast<std::size_t>(k) * dim + j] = row(worst)[j];
          g.variances[static_cast<std::size_t>(k) * dim + j] = global_var[j];
        }
        g.weights[k] = 1.0 / static_cast<double>(n);
      }
      for (auto it = drop.rbegin(); it != drop.rend(); ++it) {
        const int k = *it;
        g.weights.erase(g.weights.begin() + k);
        g.means.erase(g.means.begin() + static_cast<std::ptrdiff_t>(k) * dim, g.means.begin() + static_cast<std::ptrdiff_t>(k + 1) * dim);
        g.variances.erase(g.variances.begin() + static_cast<std::ptrdiff_t>(k) * dim,
                          g.variances.begin() + static_cast<std::ptrdiff_t>(k + 1) * dim);
        reseeded_once.erase(reseeded_once.begin() + k);
        ++fit.dropped;
      }
      previous = -std::numeric_limits<double>::infinity();
    }
    double wsum = 0.0;
    for (double w : g.weights) wsum += w;
    for (double& w : g.weights) w /= wsum;
  }
  return fit;
}

}  // namespace dmt
