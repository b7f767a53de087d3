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


#include <algorithm>
#include <cmath>

#include "bn.hpp"
#include "doctest.h"
#include "gmm.hpp"
#include "test_util.hpp"

using namespace dmt;

namespace {

// Brute-force marginals of a pairwise model by full enumeration.
std::vector<double> enumerate_marginals(const PairwiseGraph& g) {
  const int n = g.nodes, L = g.labels;
  std::vector<double> m(static_cast<std::size_t>(n) * L, 0.0);
  std::vector<int> x(n, 0);
  double z = 0.0;
  while (true) {
    double w = 1.0;
    for (int i = 0; i < n; ++i) w *= g.unary[i * L + x[i]];
    for (std::size_t e = 0; e < g.edges.size(); ++e)
      w *= g.potentials[e * L * L + x[g.edges[e].first] * L + x[g.edges[e].second]];
    z += w;
    for (int i = 0; i < n; ++i) m[i * L + x[i]] += w;
    int k = 0;
    while (k < n && ++x[k] == L) x[k++] = 0;
    if (k == n) break;
  }
  for (double& v : m) v /= z;
  return m;
}

// A horizontal strip of single-pixel superpixels.
EdgeMap strip(int n) {
  std::vector<std::int32_t> a(n);
  for (int i = 0; i < n; ++i) a[i] = i;
  return edge_map_from_assignment(n, 1, a);
}

BnModel hand_model(int classes, std::vector<double> means) {
  BnModel m;
  m.classes = classes;
  m.params.likelihood_weight = 1.0;
  m.params.edge_bins = 2;
  m.feature_mean = {0.0};
  m.feature_scale = {1.0};
  for (int l = 0; l < classes; ++l) {
    DiagGmm g;
    g.dim = 1;
    g.weights = {1.0};
    g.means = {means[l]};
    g.variances = {1.0};
    m.class_models.push_back(g);
  }
  m.evidence.max_strength = 1.0;
  m.evidence.given_true = {0.5, 0.5};
  m.evidence.given_false = {0.5, 0.5};
  return m;
}

}  // namespace

TEST_CASE("GMM on constant data") {
  std::vector<double> data(40, 2.5);
  Rng rng(1, "test.gmm", 0);
  GmmFitOptions o;
  o.components = 1;
  o.variance_floor = 1e-4;
  const auto fit = fit_diag_gmm(data, 1, o, rng);
  REQUIRE(fit.model.components() == 1);
  CHECK(fit.model.means[0] == doctest::Approx(2.5));
  CHECK(fit.model.variances[0] == doctest::Approx(1e-4));
}

TEST_CASE("EM log-likelihood never decreases") {
  Rng data_rng(2, "test.em", 0);
  std::vector<double> data;
  for (int i = 0; i < 300; ++i) {
    const double c = (i % 3) * 4.0;
    data.push_back(c + data_rng.normal());
    data.push_back(-c + 0.5 * data_rng.normal());
  }
  Rng rng(3, "test.em.fit", 0);
  GmmFitOptions o;
  o.components = 3;
  o.tolerance = 0.0;
  o.max_iterations = 60;
  const auto fit = fit_diag_gmm(data, 2, o, rng);
  REQUIRE(fit.log_likelihood_trace.size() >= 2);
  for (std::size_t i = 1; i < fit.log_likelihood_trace.size(); ++i)
    CHECK(fit.log_likelihood_trace[i] >= fit.log_likelihood_trace[i - 1] - 1e-9);
  double wsum = 0.0;
  for (double w : fit.model.weights) wsum += w;
  CHECK(wsum == doctest::Approx(1.0));
}

TEST_CASE("well separated classes give confident posteriors") {
  const int n = 40;
  std::vector<std::int32_t> assign(n);
  for (int i = 0; i < n; ++i) assign[i] = i;
  const auto em = edge_map_from_assignment(n, 1, assign);
  SuperpixelFeatures f;
  f.rows = n;
  f.cols = 1;
  std::vector<std::uint8_t> labels(n);
  Rng rng(4, "test.sep", 0);
  for (int i = 0; i < n; ++i) {
    labels[i] = static_cast<std::uint8_t>(i < n / 2 ? 0 : 1);
    f.data.push_back((labels[i] ? 10.0 : -10.0) + rng.uniform(-0.5, 0.5));
  }
  std::vector<double> strengths(em.edges.size());
  for (std::size_t e = 0; e < em.edges.size(); ++e)
    strengths[e] = labels[em.edges[e].a] != labels[em.edges[e].b] ? 0.9 : 0.05;
  const BnTrainingImage img{&em, &f, labels, strengths};
  BnParams p;
  p.gmm_components = 1;
  const auto model = bn_train(std::span(&img, 1), p, 2, 0);
  const auto r = bn_infer_superpixels(model, em, f, strengths, nullptr);
  for (int i = 0; i < n; ++i) CHECK(r.posterior[i * 2 + labels[i]] >= 0.999);
}

TEST_CASE("a class without training superpixels is a training error") {
  const auto em = strip(4);
  SuperpixelFeatures f{4, 1, {0.0, 1.0, 2.0, 3.0}};
  const std::vector<std::uint8_t> labels{0, 0, 1, 1};
  const std::vector<double> strengths(em.edges.size(), 0.1);
  const BnTrainingImage img{&em, &f, labels, strengths};
  CHECK_THROWS_AS(bn_train(std::span(&img, 1), BnParams{}, 3, 0), TrainingError);
}

TEST_CASE("single superpixel with a uniform prior follows the likelihood") {
  const auto em = strip(1);
  const auto m = hand_model(3, {-1.0, 0.0, 2.0});
  const SuperpixelFeatures f{1, 1, {0.4}};
  const auto r = bn_infer_superpixels(m, em, f, {}, nullptr);
  const auto ll = m.log_likelihoods(f.row(0));
  double z = 0.0;
  for (double v : ll) z += std::exp(v);
  for (int l = 0; l < 3; ++l) CHECK(r.posterior[l] == doctest::Approx(std::exp(ll[l]) / z).epsilon(1e-9));
}

TEST_CASE("symmetric superpixels receive equal posteriors") {
  const auto em = strip(2);
  auto m = hand_model(2, {-1.0, 1.0});
  m.evidence.given_true = {0.3, 0.7};
  m.evidence.given_false = {0.8, 0.2};
  const SuperpixelFeatures f{2, 1, {0.25, 0.25}};
  const std::vector<double> s{0.7};
  const auto r = bn_infer_superpixels(m, em, f, s, nullptr);
  for (int l = 0; l < 2; ++l) CHECK(r.posterior[l] == doctest::Approx(r.posterior[2 + l]));
}

TEST_CASE("uninformative edges reduce inference to prior times likelihood") {
  const auto em = strip(3);
  auto m = hand_model(2, {-1.0, 1.0});
  m.params.edge_true_given_diff = 0.4;
  m.params.edge_true_given_same = 0.4;
  m.evidence.given_true = {0.9, 0.1};
  m.evidence.given_false = {0.2, 0.8};
  const SuperpixelFeatures f{3, 1, {-0.3, 0.1, 0.8}};
  ProbabilityMap prior(3, 1, 2, std::vector<float>{0.8f, 0.3f, 0.5f, 0.2f, 0.7f, 0.5f});
  const std::vector<double> s{0.2, 0.9};
  const auto r = bn_infer_superpixels(m, em, f, s, &prior);
  for (int i = 0; i < 3; ++i) {
    const auto ll = m.log_likelihoods(f.row(i));
    const double a = prior.at(0, i) * std::exp(ll[0]), b = prior.at(1, i) * std::exp(ll[1]);
    CHECK(r.posterior[i * 2] == doctest::Approx(a / (a + b)).epsilon(1e-9));
  }
}

TEST_CASE("an overwhelming prior decides the label") {
  const auto em = strip(2);
  const auto m = hand_model(2, {-1.0, 1.0});
  const SuperpixelFeatures f{2, 1, {1.0, 1.0}};  // likelihood favors class 1
  ProbabilityMap prior(2, 1, 2, std::vector<float>{1.0f - 1e-7f, 1.0f - 1e-7f, 1e-7f, 1e-7f});
  const std::vector<double> s{0.1};
  const auto pm = bn_infer(m, em, f, s, &prior);
  CHECK(pm.at(0, 0) > 0.99f);
  CHECK(pm.at(0, 1) > 0.99f);
  CHECK(pm.max_normalization_error() < 1e-6);
}

TEST_CASE("three-node chain matches enumeration") {
  PairwiseGraph g;
  g.nodes = 3;
  g.labels = 2;
  g.unary = {0.7, 0.3, 0.4, 0.6, 0.1, 0.9};
  g.edges = {{0, 1}, {1, 2}};
  g.potentials = {0.9, 0.1, 0.1, 0.9, 0.6, 0.4, 0.4, 0.6};
  const auto bp = loopy_bp(g, {});
  const auto bf = enumerate_marginals(g);
  CHECK(bp.converged);
  for (std::size_t i = 0; i < bf.size(); ++i) CHECK(std::abs(bp.marginals[i] - bf[i]) < 1e-9);
}

TEST_CASE("BP is exact on random trees") {
  for (int trial = 0; trial < 50; ++trial) {
    Rng rng(trial, "test.bptree", 0);
    PairwiseGraph g;
    g.nodes = 1 + static_cast<int>(rng.below(8));
    g.labels = 2 + static_cast<int>(rng.below(3));
    const int L = g.labels;
    for (int i = 0; i < g.nodes * L; ++i) g.unary.push_back(rng.uniform(0.05, 1.0));
    for (int i = 1; i < g.nodes; ++i) {
      g.edges.emplace_back(static_cast<int>(rng.below(i)), i);
      for (int k = 0; k < L * L; ++k) g.potentials.push_back(rng.uniform(0.05, 1.0));
    }
    CHECK(is_acyclic(g.nodes, g.edges));
    const auto bp = loopy_bp(g, {});
    const auto bf = enumerate_marginals(g);
    for (std::size_t i = 0; i < bf.size(); ++i) CHECK(std::abs(bp.marginals[i] - bf[i]) < 1e-6);
  }
}

TEST_CASE("loopy graphs still return normalized marginals") {
  PairwiseGraph g;
  g.nodes = 4;
  g.labels = 3;
  Rng rng(5, "test.loop", 0);
  for (int i = 0; i < 12; ++i) g.unary.push_back(rng.uniform(0.1, 1.0));
  g.edges = {{0, 1}, {1, 2}, {2, 3}, {3, 0}};
  for (int i = 0; i < 36; ++i) g.potentials.push_back(rng.uniform(0.1, 1.0));
  CHECK_FALSE(is_acyclic(4, g.edges));
  const auto bp = loopy_bp(g, {});
  for (int i = 0; i < 4; ++i) {
    double s = 0.0;
    for (int l = 0; l < 3; ++l) s += bp.marginals[i * 3 + l];
    CHECK(s == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("BN model serialization round trips") {
  auto m = hand_model(2, {-1.0, 1.0});
  m.fingerprint = 99;
  const auto bytes = m.serialize();
  CHECK(BnModel::deserialize(bytes).serialize() == bytes);
  auto bad = bytes;
  bad[0] ^= 0xff;
  CHECK_THROWS_AS(BnModel::deserialize(bad), FormatError);
}
