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


#include <cstdlib>
#include <cstring>
#include <fstream>
#include <sstream>

#include "config.hpp"
#include "doctest.h"
#include "modelio.hpp"
#include "synth.hpp"
#include "test_util.hpp"

using namespace dmt;

namespace {

EngineConfig tiny_config() {
  EngineConfig cfg;
  cfg.tree = TreeSpec::default_layout(1);
  cfg.schedule.levels = {{6, 3, 200}, {5, 3, 250}};
  cfg.srf.n_trees = 2;
  cfg.srf.samples_per_image = 100;
  cfg.srf.max_depth = 6;
  cfg.bn.gmm_components = 1;
  cfg.bn.em_iterations = 10;
  return cfg;
}

struct Trained {
  std::vector<Subject> subjects;
  TrainedModel model;
};

const Trained& trained() {
  static const Trained t = [] {
    PhantomParams p;
    p.size = 64;
    p.subjects = 3;
    p.rng_seed = 11;
    Trained out;
    out.subjects = generate(p);
    std::vector<MultiChannelImage> imgs{out.subjects[0].image, out.subjects[1].image};
    std::vector<LabelMap> labs{out.subjects[0].labels, out.subjects[1].labels};
    out.model = dmt_train(imgs, labs, tiny_config(), 4);
    return out;
  }();
  return t;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void spit(const std::string& path, const std::string& text) {
  std::ofstream(path, std::ios::binary) << text;
}

}  // namespace

TEST_CASE("model directory round trip") {
  const auto& t = trained();
  const auto dir = test::temp_dir("model");
  save_model(dir, t.model);
  const auto back = load_model(dir);
  CHECK(back.classes == 4);
  CHECK(back.channels == 3);
  REQUIRE(back.nodes.size() == t.model.nodes.size());
  CHECK(format_config(back.config) == format_config(t.model.config));
  CHECK(format_audit(back) == format_audit(t.model));
  const auto a = dmt_predict(t.model, t.subjects[2].image);
  const auto b = dmt_predict(back, t.subjects[2].image);
  CHECK(a.labels.labels() == b.labels.labels());
  CHECK(std::memcmp(a.probabilities.values().data(), b.probabilities.values().data(),
                    a.probabilities.values().size() * sizeof(float)) == 0);

  // Saving the loaded model reproduces every file byte for byte.
  const auto dir2 = test::temp_dir("model2");
  save_model(dir2, back);
  for (const auto& f : model_blob_files(t.model)) CHECK(slurp(dir + "/" + f) == slurp(dir2 + "/" + f));
  CHECK(slurp(dir + "/manifest.txt") == slurp(dir2 + "/manifest.txt"));
  CHECK(std::system(("rm -rf " + dir + " " + dir2).c_str()) == 0);
}

TEST_CASE("damaged model directories are rejected") {
  const auto& t = trained();
  const auto dir = test::temp_dir("model_bad");
  const auto blobs = model_blob_files(t.model);
  REQUIRE(blobs.size() == 4);

  save_model(dir, t.model);
  std::string blob = slurp(dir + "/" + blobs[1]);
  blob[blob.size() / 2] ^= 0x01;
  spit(dir + "/" + blobs[1], blob);
  CHECK_THROWS_AS(load_model(dir), FormatError);

  save_model(dir, t.model);
  std::remove((dir + "/" + blobs[2]).c_str());
  CHECK_THROWS(load_model(dir));

  save_model(dir, t.model);
  spit(dir + "/manifest.txt", slurp(dir + "/manifest.txt") + "stray = 1\n");
  CHECK_THROWS(load_model(dir));

  save_model(dir, t.model);
  spit(dir + "/config.ini", "[engine]\ndepth = 2\n");
  CHECK_THROWS(load_model(dir));

  CHECK(std::system(("rm -rf " + dir).c_str()) == 0);
  CHECK_THROWS_AS(load_model(dir), IoError);
}

TEST_CASE("audit log round trip") {
  const auto& t = trained();
  TrainedModel m;
  m.config = t.model.config;
  m.nodes = t.model.nodes;
  parse_audit(format_audit(t.model), m);
  REQUIRE(m.audit.size() == t.model.audit.size());
  for (std::size_t i = 0; i < m.audit.size(); ++i) {
    CHECK(m.audit[i].phase == t.model.audit[i].phase);
    CHECK(m.audit[i].node == t.model.audit[i].node);
    CHECK(m.audit[i].scale == t.model.audit[i].scale);
  }
  CHECK(m.train_leaf_fingerprints == t.model.train_leaf_fingerprints);
  CHECK_THROWS(parse_audit("event nonsense\n", m));
}
