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

// Dice over composite regions, leave-one-subject-out cross-validation and
// method comparison reports.

#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "engine.hpp"
#include "grid.hpp"
#include "synth.hpp"

namespace dmt {

struct RegionSpec {
  std::string name;
  std::vector<int> members;

  bool contains(int label) const;
  void validate(int classes) const;
};

// HT = {1, 2, 3}, CT = {2, 3}, ET = {3}.
std::vector<RegionSpec> default_regions();

// 2|A ∩ B| / (|A| + |B|) over pixels whose label is in the region; 1 when
// both masks are empty.
double dice(const LabelMap& gt, const LabelMap& pred, const RegionSpec& region);

// A method under evaluation: trains on `train` and labels `test`.
struct CvMethod {
  std::string name;
  std::function<LabelMap(std::span<PreparedImage* const> train, PreparedImage& test, const TrainOptions& opts)> run;
};

// dmt (config as given), dmt-fixed, dmt-d<N>, srf, bn, srf-srf, bn-bn, srf-bn.
EngineConfig method_config(const std::string& name, const EngineConfig& base);
CvMethod engine_method(const std::string& name, const EngineConfig& base);

struct CvReport {
  std::vector<std::string> methods;
  std::vector<RegionSpec> regions;
  int folds = 0;
  // dice[m][r][f]; NaN where the fold failed.
  std::vector<std::vector<std::vector<double>>> dice;
  // failure[m][f]: empty on success, else the error message.
  std::vector<std::vector<std::string>> failure;
  // p_values[r][a][b]: paired two-sided sign test between methods a and b.
  std::vector<std::vector<std::vector<double>>> p_values;

  bool any_failed() const;
  double mean(int m, int r) const;
  double stddev(int m, int r) const;
  int completed(int m) const;
};

// Exact two-sided sign test on paired scores; ties are dropped.
double sign_test(std::span<const double> a, std::span<const double> b);

struct CvOptions {
  std::vector<RegionSpec> regions = default_regions();
  // Configuration the per-subject caches are prepared with.
  EngineConfig prepare;
};

CvReport run_cv(std::span<const Subject> subjects, std::vector<CvMethod> methods, const CvOptions& opts);

std::string cv_scores_csv(const CvReport& report);
std::string cv_summary_csv(const CvReport& report);
std::string cv_summary_table(const CvReport& report);
std::string cv_pvalues_csv(const CvReport& report);

}  // namespace dmt
