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

#pragma once

#include <span>
#include <vector>

#include "common.hpp"

namespace dmt {

// Diagonal-covariance Gaussian mixture.
struct DiagGmm {
  int dim = 0;
  std::vector<double> weights;
  std::vector<double> means;      // components x dim
  std::vector<double> variances;  // components x dim

  int components() const { return static_cast<int>(weights.size()); }
  double log_likelihood(std::span<const double> x) const;
};

struct GmmFitOptions {
  int components = 3;
  int max_iterations = 100;
  double tolerance = 1e-5;  // stop when mean per-sample log-likelihood gains less
  double variance_floor = 1e-6;
};

struct GmmFit {
  DiagGmm model;
  std::vector<double> log_likelihood_trace;  // mean per-sample value after each EM step
  int reseeded = 0;
  int dropped = 0;
};

// EM from a k-means++ initialisation. data is rows x dim, row-major.
GmmFit fit_diag_gmm(std::span<const double> data, int dim, const GmmFitOptions& opts, Rng& rng);

}  // namespace dmt
