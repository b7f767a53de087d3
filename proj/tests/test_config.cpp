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
#include "doctest.h"

using namespace dmt;

namespace {

int error_line(const std::string& text) {
  try {
    parse_config(text);
  } catch (const ConfigError& e) {
    return e.line();
  }
  return -1;
}

}  // namespace

TEST_CASE("empty config gives the default seven-node tree") {
  const auto c = parse_config("");
  CHECK(c.method == Method::Dmt);
  CHECK(c.tree.size() == 7);
  REQUIRE(c.schedule.levels.size() == 3);
  CHECK(c.schedule.levels[0] == ScaleEntry{10, 7, 1000});
  CHECK(c.schedule.levels[1] == ScaleEntry{10, 7, 1000});
  CHECK(c.schedule.levels[2] == ScaleEntry{8, 5, 1200});
  CHECK(c.srf.n_trees == 15);
  CHECK(c.bn.edge_true_given_diff == 0.8);
  CHECK(c.bn.edge_true_given_same == 0.2);
  CHECK(c.slic.compactness == 10.0);
}

TEST_CASE("explicit values override defaults") {
  const auto c = parse_config(R"(
# comment
[engine]
method = srf-bn
depth = 1
rounds = 2
seed = 9
[tree]
; full-line comment
node.root.R.kind = srf
[schedule]
level.1.superpixels = 500
[features]
gabor_wavelengths = 3, 6, 9
dog_sigmas = 1:2, 2:4
[bn]
likelihood_weight = 0.5
)");
  CHECK(c.method == Method::SrfBn);
  CHECK(c.tree.depth == 1);
  CHECK(c.rounds == 2);
  CHECK(c.seed == 9);
  CHECK(c.tree.kinds[2] == NodeKind::Srf);
  CHECK(c.schedule.levels[1].target_superpixels == 500);
  CHECK(c.features.gabor_wavelengths == std::vector<double>{3, 6, 9});
  REQUIRE(c.features.dog_sigma_pairs.size() == 2);
  CHECK(c.features.dog_sigma_pairs[1] == std::pair<double, double>{2, 4});
  CHECK(c.bn.likelihood_weight == 0.5);
}

TEST_CASE("format and parse round trip") {
  auto c = parse_config("[engine]\ndepth = 3\n[srf]\nbootstrap_fraction = 0.7\n[slic]\ncompactness = 12.5\n");
  c.bn.var_floor = 3.25e-7;
  const auto text = format_config(c);
  CHECK(format_config(parse_config(text)) == text);
  CHECK(parse_config(text).tree.size() == 15);
}

TEST_CASE("errors report their line") {
  CHECK(error_line("[engine]\nmethod = cnn\n") == 2);
  CHECK(error_line("[engine]\n\ndepth = -1\n") == 3);
  CHECK(error_line("[nowhere]\n") == 1);
  CHECK(error_line("depth = 2\n") == 1);
  CHECK(error_line("[engine]\nseed = 1\nseed = 2\n") == 3);
  CHECK(error_line("[srf]\ntrees = many\n") == 2);
  CHECK(error_line("[srf]\ntrees =\n") == 2);
  CHECK(error_line("[srf]\ncolour = 2\n") == 2);
  CHECK(error_line("[bn]\nedge_true_given_diff = 1.5\n") == 2);
  CHECK(error_line("[tree]\nnode.root.X.kind = srf\n") == 2);
  CHECK(error_line("[engine]\ndepth = 1\n[schedule]\nlevel.4.patch = 3\n") == 4);
  CHECK(error_line("[tree]\nnode.root.kind = srf # note\n") == 2);
  CHECK(error_line("[engine]\nno equals sign\n") == 2);
}

TEST_CASE("missing config file is an I/O error") {
  CHECK_THROWS_AS(load_config("/nonexistent/dmt.ini"), IoError);
}
