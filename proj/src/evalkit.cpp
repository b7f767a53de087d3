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

#include "evalkit.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <memory>
#include <set>
#include <sstream>

#include "common.hpp"
#include "parallel.hpp"

namespace dmt {

bool RegionSpec::contains(int label) const {
  return std::find(members.begin(), members.end(), label) != members.end();
}

void RegionSpec::validate(int classes) const {
  if (members.empty()) throw ArgumentError("region '" + name + "' has no member classes");
  for (int m : members)
    if (m < 0 || m >= classes)
      throw ArgumentError("region '" + name + "' member " + std::to_string(m) + " outside [0, " +
                          std::to_string(classes) + ")");
}

std::vector<RegionSpec> default_regions() { return {{"HT", {1, 2, 3}}, {"CT", {2, 3}}, {"ET", {3}}}; }

double dice(const LabelMap& gt, const LabelMap& pred, const RegionSpec& region) {
  if (gt.width() != pred.width() || gt.height() != pred.height())
    throw ArgumentError("dice: label maps differ in size");
  bool in[256] = {};
  for (int m : region.members)
    if (m >= 0 && m < 256) in[m] = true;
  std::size_t a = 0, b = 0, both = 0;
  for (std::size_t i = 0; i < gt.pixel_count(); ++i) {
    const bool x = in[gt[i]];
    const bool y = in[pred[i]];
    a += x;
    b += y;
    both += x && y;
  }
  if (a + b == 0) return 1.0;
  return 2.0 * static_cast<double>(both) / static_cast<double>(a + b);
}

EngineConfig method_config(const std::string& name, const EngineConfig& base) {
  EngineConfig cfg = base;
  if (name == "dmt") {
    cfg.method = Method::Dmt;
  } else if (name == "dmt-fixed") {
    cfg.method = Method::Dmt;
    cfg.schedule.levels.assign(cfg.tree.depth + 1, base.schedule.levels.at(0));
  } else if (name.rfind("dmt-d", 0) == 0 && name.size() > 5 &&
             std::all_of(name.begin() + 5, name.end(), [](char c) { return c >= '0' && c <= '9'; })) {
    const int depth = std::stoi(name.substr(5));
    cfg.method = Method::Dmt;
    cfg.tree = TreeSpec::default_layout(depth);
    cfg.schedule = ScaleSchedule::multiscale(depth);
  } else {
    cfg.method = parse_method(name);
  }
  cfg.validate();
  return cfg;
}

CvMethod engine_method(const std::string& name, const EngineConfig& base) {
  const EngineConfig cfg = method_config(name, base);
  return {name, [cfg](std::span<PreparedImage* const> train, PreparedImage& test, const TrainOptions& opts) {
            const int classes = train.empty() || !train.front()->labels() ? 0 : train.front()->labels()->classes();
            const TrainedModel model = dmt_train(train, cfg, classes, opts);
            return dmt_predict(model, test).labels;
          }};
}

bool CvReport::any_failed() const {
  for (const auto& row : failure)
    for (const auto& f : row)
      if (!f.empty()) return true;
  return false;
}

double CvReport::mean(int m, int r) const {
  double s = 0.0;
  int n = 0;
  for (double d : dice[m][r])
    if (!std::isnan(d)) s += d, ++n;
  return n ? s / n : std::numeric_limits<double>::quiet_NaN();
}

double CvReport::stddev(int m, int r) const {
  const double mu = mean(m, r);
  double s = 0.0;
  int n = 0;
  for (double d : dice[m][r])
    if (!std::isnan(d)) s += (d - mu) * (d - mu), ++n;
  return n > 1 ? std::sqrt(s / (n - 1)) : (n == 1 ? 0.0 : std::numeric_limits<double>::quiet_NaN());
}

int CvReport::completed(int m) const {
  int n = 0;
  for (const auto& f : failure[m]) n += f.empty();
  return n;
}

double sign_test(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ArgumentError("sign_test: sample sizes differ");
  int pos = 0, neg = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (std::isnan(a[i]) || std::isnan(b[i])) continue;
    if (a[i] > b[i]) ++pos;
    else if (a[i] < b[i]) ++neg;
  }
  const int n = pos + neg;
  if (n == 0) return 1.0;
  const int k = std::min(pos, neg);
  // log-space binomial tail at p = 1/2
  double tail = 0.0;
  for (int i = 0; i <= k; ++i)
    tail += std::exp(std::lgamma(n + 1.0) - std::lgamma(i + 1.0) - std::lgamma(n - i + 1.0) - n * std::log(2.0));
  return std::min(1.0, 2.0 * tail);
}

CvReport run_cv(std::span<const Subject> subjects, std::vector<CvMethod> methods, const CvOptions& opts) {
  if (subjects.size() < 2) throw ArgumentError("cross-validation needs at least 2 subjects");
  if (methods.empty()) throw ArgumentError("cross-validation needs at least one method");
  if (opts.regions.empty()) throw ArgumentError("cross-validation needs at least one region");
  const int classes = subjects.front().labels.classes();
  for (const auto& r : opts.regions) r.validate(classes);

  std::vector<CvMethod> unique;
  std::set<std::string> seen;
  for (auto& m : methods) {
    if (!seen.insert(m.name).second) {
      log_info("warning: duplicate method '" + m.name + "' ignored");
      continue;
    }
    unique.push_back(std::move(m));
  }

  CvReport rep;
  rep.regions = opts.regions;
  rep.folds = static_cast<int>(subjects.size());
  for (const auto& m : unique) rep.methods.push_back(m.name);
  const std::size_t nm = unique.size(), nr = rep.regions.size(), nf = subjects.size();
  rep.dice.assign(nm, std::vector<std::vector<double>>(nr, std::vector<double>(nf, std::numeric_limits<double>::quiet_NaN())));
  rep.failure.assign(nm, std::vector<std::string>(nf));

  std::vector<std::unique_ptr<PreparedImage>> prepared;
  for (const auto& s : subjects) prepared.push_back(std::make_unique<PreparedImage>(s.image, &s.labels, opts.prepare));

  parallel_for(nf, [&](std::size_t f) {
    std::vector<PreparedImage*> train;
    for (std::size_t i = 0; i < nf; ++i)
      if (i != f) train.push_back(prepared[i].get());
    FitMemo memo;
    TrainOptions topts;
    topts.memo = &memo;
    topts.subject_key = "loo." + std::to_string(f);
    for (std::size_t m = 0; m < nm; ++m) {
      try {
        const LabelMap pred = unique[m].run(train, *prepared[f], topts);
        for (std::size_t r = 0; r < nr; ++r) rep.dice[m][r][f] = dice(subjects[f].labels, pred, rep.regions[r]);
      } catch (const std::exception& e) {
        rep.failure[m][f] = e.what();
        log_error("fold " + std::to_string(f) + " method " + unique[m].name + " failed: " + e.what());
      }
    }
    log_info("fold " + std::to_string(f + 1) + "/" + std::to_string(nf) + " done");
  });

  rep.p_values.assign(nr, std::vector<std::vector<double>>(nm, std::vector<double>(nm, 1.0)));
  for (std::size_t r = 0; r < nr; ++r)
    for (std::size_t a = 0; a < nm; ++a)
      for (std::size_t b = 0; b < nm; ++b)
        if (a != b) rep.p_values[r][a][b] = sign_test(rep.dice[a][r], rep.dice[b][r]);
  return rep;
}

namespace {

std::string num(double v, int digits = 6) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

}  // namespace

std::string cv_scores_csv(const CvReport& rep) {
  std::ostringstream os;
  os << "method,region,fold,dice\n";
  for (std::size_t m = 0; m < rep.methods.size(); ++m)
    for (std::size_t r = 0; r < rep.regions.size(); ++r)
      for (int f = 0; f < rep.folds; ++f)
        os << rep.methods[m] << ',' << rep.regions[r].name << ',' << f << ','
           << (rep.failure[m][f].empty() ? num(rep.dice[m][r][f], 9) : std::string("failed")) << '\n';
  return os.str();
}

std::string cv_summary_csv(const CvReport& rep) {
  std::ostringstream os;
  os << "method,region,mean,std,folds\n";
  for (std::size_t m = 0; m < rep.methods.size(); ++m)
    for (std::size_t r = 0; r < rep.regions.size(); ++r)
      os << rep.methods[m] << ',' << rep.regions[r].name << ',' << num(rep.mean(m, r)) << ','
         << num(rep.stddev(m, r)) << ',' << rep.completed(m) << '\n';
  return os.str();
}

std::string cv_summary_table(const CvReport& rep) {
  std::size_t w0 = 6;
  for (const auto& m : rep.methods) w0 = std::max(w0, m.size());
  std::ostringstream os;
  char buf[128];
  std::snprintf(buf, sizeof buf, "%-*s", static_cast<int>(w0), "Method");
  os << buf;
  for (const auto& r : rep.regions) {
    std::snprintf(buf, sizeof buf, " | %15s", r.name.c_str());
    os << buf;
  }
  os << " | folds\n" << std::string(w0, '-');
  for (std::size_t r = 0; r < rep.regions.size(); ++r) os << "-+-" << std::string(15, '-');
  os << "-+------\n";
  for (std::size_t m = 0; m < rep.methods.size(); ++m) {
    std::snprintf(buf, sizeof buf, "%-*s", static_cast<int>(w0), rep.methods[m].c_str());
    os << buf;
    for (std::size_t r = 0; r < rep.regions.size(); ++r) {
      std::snprintf(buf, sizeof buf, " | %6.2f +- %5.2f", 100.0 * rep.mean(m, r), 100.0 * rep.stddev(m, r));
      os << buf;
    }
    std::snprintf(buf, sizeof buf, " | %d/%d\n", rep.completed(m), rep.folds);
    os << buf;
  }
  return os.str();
}

std::string cv_pvalues_csv(const CvReport& rep) {
  std::ostringstream os;
  os << "region,method";
  for (const auto& m : rep.methods) os << ',' << m;
  os << '\n';
  for (std::size_t r = 0; r < rep.regions.size(); ++r)
    for (std::size_t a = 0; a < rep.methods.size(); ++a) {
      os << rep.regions[r].name << ',' << rep.methods[a];
      for (std::size_t b = 0; b < rep.methods.size(); ++b) os << ',' << num(rep.p_values[r][a][b]);
      os << '\n';
    }
  return os.str();
}

}  // namespace dmt
