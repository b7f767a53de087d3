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


#include <cstring>
#include <memory>

#include "doctest.h"
#include "engine.hpp"
#include "synth.hpp"
#include "test_util.hpp"

using namespace dmt;

namespace {

const std::vector<Subject>& subjects() {
  static const std::vector<Subject> s = [] {
    PhantomParams p;
    p.size = 64;
    p.subjects = 3;
    p.rng_seed = 7;
    return generate(p);
  }();
  return s;
}

EngineConfig small_config(int depth, Method method = Method::Dmt) {
  EngineConfig cfg;
  cfg.method = method;
  cfg.tree = TreeSpec::default_layout(depth);
  cfg.schedule.levels.clear();
  for (int l = 0; l <= depth; ++l) cfg.schedule.levels.push_back(l < 2 ? ScaleEntry{6, 3, 200} : ScaleEntry{5, 3, 250});
  cfg.srf.n_trees = 2;
  cfg.srf.samples_per_image = 120;
  cfg.srf.max_depth = 8;
  cfg.bn.gmm_components = 1;
  cfg.bn.em_iterations = 10;
  return cfg;
}

struct Fixture {
  EngineConfig cfg;
  std::vector<std::unique_ptr<PreparedImage>> prepared;
  std::vector<PreparedImage*> train;

  explicit Fixture(const EngineConfig& c, int n_train = 2) : cfg(c) {
    for (const auto& s : subjects()) prepared.push_back(std::make_unique<PreparedImage>(s.image, &s.labels, cfg));
    for (int i = 0; i < n_train; ++i) train.push_back(prepared[i].get());
  }
  TrainedModel fit(const TrainOptions& o = {}) { return dmt_train(train, cfg, 4, o); }
  PreparedImage& test() { return *prepared.back(); }
};

bool same_map(const ProbabilityMap& a, const ProbabilityMap& b) {
  return a.classes() == b.classes() && a.values().size() == b.values().size() &&
         std::memcmp(a.values().data(), b.values().data(), a.values().size() * sizeof(float)) == 0;
}

ProbabilityMap map_of(std::initializer_list<float> per_class) {
  return ProbabilityMap(1, 1, static_cast<int>(per_class.size()), std::vector<float>(per_class));
}

}  // namespace

TEST_CASE("default layout and schedules") {
  const auto t = TreeSpec::default_layout(2);
  REQUIRE(t.size() == 7);
  CHECK(t.kinds[0] == NodeKind::Srf);
  CHECK(t.kinds[1] == NodeKind::Srf);
  CHECK(t.kinds[2] == NodeKind::Bn);
  const auto s = ScaleSchedule::multiscale(2);
  CHECK(s.levels[0] == ScaleEntry{10, 7, 1000});
  CHECK(s.levels[1] == ScaleEntry{10, 7, 1000});
  CHECK(s.levels[2] == ScaleEntry{8, 5, 1200});
  CHECK(node_path(0) == "root");
  CHECK(node_path(5) == "root.R.L");
  CHECK(parse_node_path("root.R.L") == 5);
  CHECK(node_level(6) == 2);
  CHECK_THROWS(parse_method("cnn"));
}

TEST_CASE("flow event counts follow the tree shape") {
  for (int depth = 0; depth <= 2; ++depth)
    for (int rounds = 1; rounds <= 2; ++rounds) {
      auto cfg = small_config(depth);
      cfg.rounds = rounds;
      Fixture fx(cfg);
      const auto model = fx.fit();
      const auto c = count_events(model.audit);
      CAPTURE(depth);
      CAPTURE(rounds);
      CHECK(c.descend == (std::size_t{1} << (depth + 1)) - 1);
      CHECK(c.ascend == rounds * ((std::size_t{1} << depth) - 1));
      CHECK(c.redescend == rounds * ((std::size_t{1} << (depth + 1)) - 2));
    }
}

TEST_CASE("depth zero is the plain structured forest") {
  Fixture fx(small_config(0));
  const auto dmt = fx.fit();
  auto srf_cfg = small_config(0, Method::Srf);
  Fixture fs(srf_cfg);
  const auto srf = fs.fit();
  REQUIRE(dmt.nodes.size() == 1);
  REQUIRE(srf.nodes.size() == 1);
  CHECK(dmt.nodes[0].phase_a.srf->serialize() == srf.nodes[0].phase_a.srf->serialize());
  const auto a = dmt_predict(dmt, fx.test());
  const auto b = dmt_predict(srf, fs.test());
  CHECK(same_map(a.probabilities, b.probabilities));
  // The module itself gives the same map.
  const auto direct = srf_predict(*srf.nodes[0].phase_a.srf, fs.test().image(), nullptr, srf_cfg.features);
  CHECK(same_map(direct, b.probabilities));
}

TEST_CASE("depth one with one round fits four classifiers") {
  Fixture fx(small_config(1));
  const auto model = fx.fit();
  REQUIRE(model.nodes.size() == 3);
  std::size_t fits = 0;
  for (const auto& n : model.nodes) fits += 1 + n.phase_b.size();
  CHECK(fits == 4);
  CHECK(model.nodes[0].phase_b.size() == 1);
  CHECK(model.nodes[1].phase_b.empty());
  CHECK(model.nodes[2].phase_a.kind == NodeKind::Bn);
  // Both children are re-run once with the updated root context.
  CHECK(model.audit.size() == 6);
  CHECK(count_events(model.audit).redescend == 2);
}

TEST_CASE("an all-background dataset yields certain background") {
  auto cfg = small_config(1);
  cfg.tree.kinds.assign(3, NodeKind::Srf);
  const auto& s = subjects();
  std::vector<LabelMap> blank(2, LabelMap(s[0].labels.width(), s[0].labels.height(), 4));
  std::vector<std::unique_ptr<PreparedImage>> prep;
  std::vector<PreparedImage*> train;
  for (int i = 0; i < 2; ++i) {
    prep.push_back(std::make_unique<PreparedImage>(s[i].image, &blank[i], cfg));
    train.push_back(prep.back().get());
  }
  const auto model = dmt_train(train, cfg, 4);
  const auto pred = dmt_predict(model, s[2].image);
  for (std::size_t i = 0; i < pred.labels.pixel_count(); ++i) {
    CHECK(pred.labels[i] == 0);
    CHECK(pred.probabilities.at(0, i) == 1.0f);
  }
  // A network node cannot model classes that never occur.
  cfg.tree = TreeSpec::default_layout(1);
  CHECK_THROWS_AS(dmt_train(train, cfg, 4), TrainingError);
}

TEST_CASE("majority vote") {
  SUBCASE("unanimous") {
    const auto a = map_of({0.2f, 0.5f, 0.3f}), b = map_of({0.1f, 0.6f, 0.3f}), c = map_of({0.3f, 0.4f, 0.3f});
    const ProbabilityMap* leaves[] = {&a, &b, &c};
    const auto [l, p] = majority_vote(leaves);
    CHECK(l[0] == 1);
    CHECK(p.at(1, 0) == doctest::Approx(0.5));
  }
  SUBCASE("tie broken by summed posterior") {
    const auto a = map_of({0.6f, 0.4f}), b = map_of({0.3f, 0.7f});
    const ProbabilityMap* leaves[] = {&a, &b};
    CHECK(majority_vote(leaves).first[0] == 1);
    const ProbabilityMap* swapped[] = {&b, &a};
    CHECK(majority_vote(swapped).first[0] == 1);
  }
  SUBCASE("exact tie goes to the lower class") {
    const auto a = map_of({0.6f, 0.4f}), b = map_of({0.4f, 0.6f});
    const ProbabilityMap* leaves[] = {&a, &b};
    CHECK(majority_vote(leaves).first[0] == 0);
  }
  SUBCASE("single leaf passes through") {
    Rng rng(3, "test.vote", 0);
    const auto m = test::random_probmap(6, 5, 4, rng);
    const ProbabilityMap* leaves[] = {&m};
    const auto [l, p] = majority_vote(leaves);
    CHECK(same_map(p, m));
    CHECK(l.labels() == argmax_labels(m).labels());
  }
  SUBCASE("tie oracle on random maps") {
    Rng rng(4, "test.vote.oracle", 0);
    std::vector<ProbabilityMap> maps;
    for (int i = 0; i < 4; ++i) maps.push_back(test::random_probmap(8, 8, 3, rng));
    std::vector<const ProbabilityMap*> ptrs;
    for (const auto& m : maps) ptrs.push_back(&m);
    const auto [l, p] = majority_vote(ptrs);
    for (std::size_t i = 0; i < 64; ++i) {
      int votes[3] = {};
      double post[3] = {};
      for (const auto& m : maps) {
        int best = 0;
        for (int k = 1; k < 3; ++k)
          if (m.at(k, i) > m.at(best, i)) best = k;
        ++votes[best];
        for (int k = 0; k < 3; ++k) post[k] += m.at(k, i);
      }
      int win = 0;
      for (int k = 1; k < 3; ++k)
        if (votes[k] > votes[win] || (votes[k] == votes[win] && post[k] > post[win])) win = k;
      CHECK(l[i] == win);
    }
  }
}

TEST_CASE("fusing children is order independent") {
  Rng rng(5, "test.fuse", 0);
  const auto a = test::random_probmap(7, 9, 4, rng), b = test::random_probmap(7, 9, 4, rng);
  const auto ab = fuse_children(a, b), ba = fuse_children(b, a);
  CHECK(same_map(ab, ba));
  CHECK(ab.max_normalization_error() < 1e-6);
  CHECK(ab.at(2, 11) == doctest::Approx(0.5 * (a.at(2, 11) + b.at(2, 11))).epsilon(1e-6));
}

TEST_CASE("chained networks pass the first posterior as the second prior") {
  auto cfg = small_config(0, Method::BnBn);
  Fixture fx(cfg);
  const auto model = fx.fit();
  REQUIRE(model.nodes.size() == 2);
  const auto& sp0 = fx.test().superpixels(model.nodes[0].node.scale.target_superpixels);
  const auto first = bn_infer(*model.nodes[0].phase_a.bn, sp0.edge_map, sp0.features, sp0.strengths, nullptr);
  const auto& sp1 = fx.test().superpixels(model.nodes[1].node.scale.target_superpixels);
  const auto second = bn_infer(*model.nodes[1].phase_a.bn, sp1.edge_map, sp1.features, sp1.strengths, &first);
  CHECK(same_map(dmt_predict(model, fx.test()).probabilities, second));
  const auto r = bn_infer_superpixels(*model.nodes[1].phase_a.bn, sp1.edge_map, sp1.features, sp1.strengths, &first);
  CHECK(r.prior == superpixel_prior(sp1.edge_map, first));
}

TEST_CASE("every node runs at its level's scale") {
  Fixture fx(small_config(2));
  const auto model = fx.fit();
  for (const auto& e : model.audit) CHECK(e.scale == fx.cfg.schedule.levels[node_level(e.node)]);
  for (const auto& n : model.nodes) {
    const auto& s = fx.cfg.schedule.levels[n.node.level];
    CHECK(n.node.scale == s);
    if (n.phase_a.kind == NodeKind::Srf) {
      CHECK(n.phase_a.srf->geometry().feature_patch_side == s.feature_patch_side);
      CHECK(n.phase_a.srf->geometry().label_patch_side == s.label_patch_side);
    }
  }
}

TEST_CASE("training and prediction are deterministic and normalized") {
  Fixture fx(small_config(2));
  const auto a = fx.fit();
  FitMemo memo;
  const auto b = fx.fit({&memo, "s"});
  REQUIRE(a.nodes.size() == b.nodes.size());
  for (std::size_t i = 0; i < a.nodes.size(); ++i) {
    const auto& x = a.nodes[i].phase_a;
    const auto& y = b.nodes[i].phase_a;
    CHECK((x.srf ? x.srf->serialize() : x.bn->serialize()) == (y.srf ? y.srf->serialize() : y.bn->serialize()));
  }
  const auto pa = dmt_predict(a, fx.test()), pb = dmt_predict(b, fx.test());
  CHECK(same_map(pa.probabilities, pb.probabilities));
  CHECK(pa.leaf_maps.size() == 4);
  CHECK(pa.probabilities.max_normalization_error() < 1e-6);
  for (const auto& m : pa.leaf_maps) CHECK(m.max_normalization_error() < 1e-6);
  CHECK(a.train_leaf_fingerprints == b.train_leaf_fingerprints);
}

TEST_CASE("baseline chains have the expected shapes") {
  const std::pair<Method, std::vector<NodeKind>> cases[] = {
      {Method::Srf, {NodeKind::Srf}},
      {Method::Bn, {NodeKind::Bn}},
      {Method::SrfSrf, {NodeKind::Srf, NodeKind::Srf}},
      {Method::BnBn, {NodeKind::Bn, NodeKind::Bn}},
      {Method::SrfBn, {NodeKind::Srf, NodeKind::Bn}},
  };
  for (const auto& [m, kinds] : cases) {
    const auto topo = build_topology(small_config(2, m));
    REQUIRE(topo.size() == kinds.size());
    for (std::size_t i = 0; i < kinds.size(); ++i) CHECK(topo[i].kind == kinds[i]);
  }
}
