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

#include "dmt/dmt.h"

#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <memory>
#include <new>
#include <sstream>
#include <string>
#include <vector>

#include "common.hpp"
#include "config.hpp"
#include "engine.hpp"
#include "evalkit.hpp"
#include "features.hpp"
#include "grid.hpp"
#include "modelio.hpp"
#include "parallel.hpp"
#include "render.hpp"
#include "slic.hpp"
#include "synth.hpp"

struct dmt_image {
  dmt::MultiChannelImage value;
};
struct dmt_labels {
  dmt::LabelMap value;
};
struct dmt_probmap {
  dmt::ProbabilityMap value;
};
struct dmt_config {
  dmt::EngineConfig value;
};
struct dmt_dataset {
  std::vector<dmt::Subject> subjects;
  std::vector<dmt_image> images;
  std::vector<dmt_labels> labels;
};
struct dmt_model {
  dmt::TrainedModel value;
};

namespace {

thread_local std::string g_last_error;

dmt_status fail(dmt_status s, const std::string& msg) {
  g_last_error = msg;
  return s;
}

dmt_status status_of(dmt::ErrorKind k) {
  switch (k) {
    case dmt::ErrorKind::Argument: return DMT_ERR_ARGUMENT;
    case dmt::ErrorKind::Format: return DMT_ERR_FORMAT;
    case dmt::ErrorKind::Io: return DMT_ERR_IO;
    case dmt::ErrorKind::Config: return DMT_ERR_CONFIG;
    case dmt::ErrorKind::Contract: return DMT_ERR_CONTRACT;
    case dmt::ErrorKind::Training: return DMT_ERR_TRAINING;
    case dmt::ErrorKind::Runtime: return DMT_ERR_RUNTIME;
  }
  return DMT_ERR_RUNTIME;
}

template <typename Fn>
dmt_status guarded(Fn&& fn) {
  try {
    fn();
    return DMT_OK;
  } catch (const dmt::Error& e) {
    return fail(status_of(e.kind()), e.what());
  } catch (const std::bad_alloc&) {
    return fail(DMT_ERR_RUNTIME, "out of memory");
  } catch (const std::exception& e) {
    return fail(DMT_ERR_RUNTIME, e.what());
  }
}

#define DMT_REQUIRE(cond, what) \
  if (!(cond)) return fail(DMT_ERR_ARGUMENT, what)

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

void write_text(const std::string& path, const std::string& text) {
  dmt::write_file(path, std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

}  // namespace

extern "C" {

const char* dmt_version(void) { return "1.0.0"; }
const char* dmt_last_error(void) { return g_last_error.c_str(); }

const char* dmt_status_name(dmt_status s) {
  switch (s) {
    case DMT_OK: return "ok";
    case DMT_ERR_ARGUMENT: return "argument error";
    case DMT_ERR_FORMAT: return "format error";
    case DMT_ERR_IO: return "io error";
    case DMT_ERR_CONFIG: return "config error";
    case DMT_ERR_CONTRACT: return "contract error";
    case DMT_ERR_TRAINING: return "training error";
    case DMT_ERR_RUNTIME: return "runtime error";
  }
  return "unknown status";
}

void dmt_string_free(char* s) { std::free(s); }
void dmt_set_jobs(unsigned jobs) { dmt::set_max_jobs(jobs); }

// ---------------------------------------------------------------- rasters

dmt_status dmt_image_create(int width, int height, int channels, const float* planes, dmt_image** out) {
  DMT_REQUIRE(out && planes, "dmt_image_create: null argument");
  DMT_REQUIRE(width > 0 && height > 0 && channels > 0, "dmt_image_create: dimensions must be positive");
  return guarded([&] {
    const std::size_t n = static_cast<std::size_t>(width) * height * channels;
    dmt::MultiChannelImage img(width, height, channels, std::vector<float>(planes, planes + n));
    img.validate();
    *out = new dmt_image{std::move(img)};
  });
}

dmt_status dmt_image_read(const char* path, dmt_image** out) {
  DMT_REQUIRE(path && out, "dmt_image_read: null argument");
  return guarded([&] { *out = new dmt_image{dmt::read_mdi_image(path)}; });
}

dmt_status dmt_image_write(const dmt_image* image, const char* path) {
  DMT_REQUIRE(image && path, "dmt_image_write: null argument");
  return guarded([&] { dmt::write_mdi(path, image->value); });
}

void dmt_image_free(dmt_image* image) { delete image; }
int dmt_image_width(const dmt_image* image) { return image ? image->value.width() : 0; }
int dmt_image_height(const dmt_image* image) { return image ? image->value.height() : 0; }
int dmt_image_channels(const dmt_image* image) { return image ? image->value.channels() : 0; }

dmt_status dmt_labels_read(const char* path, dmt_labels** out) {
  DMT_REQUIRE(path && out, "dmt_labels_read: null argument");
  return guarded([&] { *out = new dmt_labels{dmt::read_mdi_labels(path)}; });
}

dmt_status dmt_labels_write(const dmt_labels* labels, const char* path) {
  DMT_REQUIRE(labels && path, "dmt_labels_write: null argument");
  return guarded([&] { dmt::write_mdi(path, labels->value); });
}

void dmt_labels_free(dmt_labels* labels) { delete labels; }
int dmt_labels_width(const dmt_labels* l) { return l ? l->value.width() : 0; }
int dmt_labels_height(const dmt_labels* l) { return l ? l->value.height() : 0; }
int dmt_labels_classes(const dmt_labels* l) { return l ? l->value.classes() : 0; }
const uint8_t* dmt_labels_data(const dmt_labels* l) { return l ? l->value.labels().data() : nullptr; }

dmt_status dmt_probmap_read(const char* path, dmt_probmap** out) {
  DMT_REQUIRE(path && out, "dmt_probmap_read: null argument");
  return guarded([&] { *out = new dmt_probmap{dmt::read_mdi_probmap(path)}; });
}

dmt_status dmt_probmap_write(const dmt_probmap* probs, const char* path) {
  DMT_REQUIRE(probs && path, "dmt_probmap_write: null argument");
  return guarded([&] { dmt::write_mdi(path, probs->value); });
}

void dmt_probmap_free(dmt_probmap* probs) { delete probs; }
int dmt_probmap_width(const dmt_probmap* p) { return p ? p->value.width() : 0; }
int dmt_probmap_height(const dmt_probmap* p) { return p ? p->value.height() : 0; }
int dmt_probmap_classes(const dmt_probmap* p) { return p ? p->value.classes() : 0; }
const float* dmt_probmap_data(const dmt_probmap* p) { return p ? p->value.values().data() : nullptr; }

// ---------------------------------------------------------------- config

dmt_status dmt_config_default(dmt_config** out) {
  DMT_REQUIRE(out, "dmt_config_default: null argument");
  return guarded([&] { *out = new dmt_config{}; });
}

dmt_status dmt_config_parse(const char* text, dmt_config** out) {
  DMT_REQUIRE(text && out, "dmt_config_parse: null argument");
  return guarded([&] { *out = new dmt_config{dmt::parse_config(text)}; });
}

dmt_status dmt_config_load(const char* path, dmt_config** out) {
  DMT_REQUIRE(path && out, "dmt_config_load: null argument");
  return guarded([&] { *out = new dmt_config{dmt::load_config(path)}; });
}

void dmt_config_free(dmt_config* config) { delete config; }

dmt_status dmt_config_set_method(dmt_config* config, const char* method) {
  DMT_REQUIRE(config && method, "dmt_config_set_method: null argument");
  return guarded([&] { config->value.method = dmt::parse_method(method); });
}

dmt_status dmt_config_set_seed(dmt_config* config, uint64_t seed) {
  DMT_REQUIRE(config, "dmt_config_set_seed: null argument");
  config->value.seed = seed;
  return DMT_OK;
}

dmt_status dmt_config_format(const dmt_config* config, char** out) {
  DMT_REQUIRE(config && out, "dmt_config_format: null argument");
  return guarded([&] { *out = dup_string(dmt::format_config(config->value)); });
}

int dmt_config_node_count(const dmt_config* config) {
  if (!config) return 0;
  try {
    return static_cast<int>(dmt::build_topology(config->value).size());
  } catch (const std::exception& e) {
    fail(DMT_ERR_CONFIG, e.what());
    return 0;
  }
}

dmt_status dmt_config_feature_layout(const dmt_config* config, int channels, int classes, char** out) {
  DMT_REQUIRE(config && out, "dmt_config_feature_layout: null argument");
  DMT_REQUIRE(channels > 0 && classes > 0, "dmt_config_feature_layout: channels and classes must be positive");
  return guarded([&] {
    std::ostringstream os;
    os << "scope,index,name\n";
    auto emit = [&](const char* scope, const dmt::FeatureLayout& layout) {
      for (std::size_t i = 0; i < layout.names.size(); ++i) os << scope << ',' << i << ',' << layout.names[i] << '\n';
    };
    emit("patch", dmt::feature_layout(config->value.features.with_context(classes), channels, dmt::FeatureScope::Patch));
    emit("superpixel", dmt::feature_layout(config->value.features.without_context(), channels, dmt::FeatureScope::Superpixel));
    *out = dup_string(os.str());
  });
}

// ---------------------------------------------------------------- synth

void dmt_synth_options_default(dmt_synth_options* o) {
  if (!o) return;
  const dmt::PhantomParams p;
  o->size = p.size;
  o->subjects = p.subjects;
  o->seed = p.rng_seed;
  o->noise_sigma = p.noise_sigma;
  o->boundary_irregularity = p.boundary_irregularity;
}

dmt_status dmt_synth(const dmt_synth_options* o, const char* dir) {
  DMT_REQUIRE(o && dir, "dmt_synth: null argument");
  return guarded([&] {
    dmt::PhantomParams p;
    p.size = o->size;
    p.subjects = o->subjects;
    p.rng_seed = o->seed;
    p.noise_sigma = o->noise_sigma;
    p.boundary_irregularity = o->boundary_irregularity;
    p.validate();
    dmt::write_dataset(dir, p, dmt::generate(p));
  });
}

dmt_status dmt_dataset_read(const char* dir, dmt_dataset** out) {
  DMT_REQUIRE(dir && out, "dmt_dataset_read: null argument");
  return guarded([&] {
    auto ds = std::make_unique<dmt_dataset>();
    ds->subjects = dmt::read_dataset(dir);
    for (const auto& s : ds->subjects) {
      ds->images.push_back({s.image});
      ds->labels.push_back({s.labels});
    }
    *out = ds.release();
  });
}

void dmt_dataset_free(dmt_dataset* dataset) { delete dataset; }
int dmt_dataset_size(const dmt_dataset* d) { return d ? static_cast<int>(d->subjects.size()) : 0; }

const dmt_image* dmt_dataset_image(const dmt_dataset* d, int index) {
  if (!d || index < 0 || index >= static_cast<int>(d->images.size())) return nullptr;
  return &d->images[index];
}

const dmt_labels* dmt_dataset_labels(const dmt_dataset* d, int index) {
  if (!d || index < 0 || index >= static_cast<int>(d->labels.size())) return nullptr;
  return &d->labels[index];
}

// ---------------------------------------------------------------- train / predict

dmt_status dmt_train(const dmt_config* config, const dmt_dataset* dataset, dmt_model** out) {
  DMT_REQUIRE(config && dataset && out, "dmt_train: null argument");
  DMT_REQUIRE(!dataset->subjects.empty(), "dmt_train: empty dataset");
  return guarded([&] {
    std::vector<dmt::MultiChannelImage> images;
    std::vector<dmt::LabelMap> labels;
    for (const auto& s : dataset->subjects) {
      images.push_back(s.image);
      labels.push_back(s.labels);
    }
    const int classes = labels.front().classes();
    *out = new dmt_model{dmt::dmt_train(images, labels, config->value, classes)};
  });
}

dmt_status dmt_model_save(const dmt_model* model, const char* dir) {
  DMT_REQUIRE(model && dir, "dmt_model_save: null argument");
  return guarded([&] { dmt::save_model(dir, model->value); });
}

dmt_status dmt_model_load(const char* dir, dmt_model** out) {
  DMT_REQUIRE(dir && out, "dmt_model_load: null argument");
  return guarded([&] { *out = new dmt_model{dmt::load_model(dir)}; });
}

void dmt_model_free(dmt_model* model) { delete model; }
int dmt_model_node_count(const dmt_model* m) { return m ? static_cast<int>(m->value.nodes.size()) : 0; }
int dmt_model_classes(const dmt_model* m) { return m ? m->value.classes : 0; }

dmt_status dmt_model_audit(const dmt_model* model, char** out) {
  DMT_REQUIRE(model && out, "dmt_model_audit: null argument");
  return guarded([&] { *out = dup_string(dmt::format_audit(model->value)); });
}

dmt_status dmt_predict(const dmt_model* model, const dmt_image* image, dmt_labels** labels, dmt_probmap** probs) {
  DMT_REQUIRE(model && image, "dmt_predict: null argument");
  return guarded([&] {
    dmt::Prediction p = dmt::dmt_predict(model->value, image->value);
    if (labels) *labels = new dmt_labels{std::move(p.labels)};
    if (probs) *probs = new dmt_probmap{std::move(p.probabilities)};
  });
}

dmt_status dmt_model_verify(const dmt_model* model, const dmt_dataset* dataset, int* mismatches) {
  DMT_REQUIRE(model && dataset && mismatches, "dmt_model_verify: null argument");
  return guarded([&] {
    const auto& fps = model->value.train_leaf_fingerprints;
    if (fps.size() != dataset->subjects.size())
      throw dmt::ContractError("dmt_model_verify: model was trained on " + std::to_string(fps.size()) +
                               " images, dataset has " + std::to_string(dataset->subjects.size()));
    std::vector<int> bad(fps.size(), 0);
    dmt::parallel_for(fps.size(), [&](std::size_t i) {
      const dmt::Prediction p = dmt::dmt_predict(model->value, dataset->subjects[i].image);
      if (p.leaf_maps.size() != fps[i].size()) {
        bad[i] = static_cast<int>(std::max(p.leaf_maps.size(), fps[i].size()));
        return;
      }
      for (std::size_t k = 0; k < fps[i].size(); ++k) bad[i] += p.leaf_maps[k].fingerprint() != fps[i][k];
    });
    int total = 0;
    for (int b : bad) total += b;
    *mismatches = total;
  });
}

// ---------------------------------------------------------------- eval

dmt_status dmt_eval(const dmt_config* config, const dmt_dataset* dataset, const char* methods, const char* out_dir,
                    int* failed_folds, char** summary_table) {
  DMT_REQUIRE(config && dataset && methods && out_dir, "dmt_eval: null argument");
  return guarded([&] {
    std::vector<dmt::CvMethod> list;
    std::istringstream is(methods);
    std::string name;
    while (std::getline(is, name, ',')) {
      const auto a = name.find_first_not_of(" \t");
      const auto b = name.find_last_not_of(" \t");
      if (a == std::string::npos) throw dmt::ArgumentError("dmt_eval: empty method name");
      list.push_back(dmt::engine_method(name.substr(a, b - a + 1), config->value));
    }
    dmt::CvOptions opts;
    opts.prepare = config->value;
    const dmt::CvReport rep = dmt::run_cv(dataset->subjects, std::move(list), opts);
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) throw dmt::IoError(std::string("cannot create '") + out_dir + "': " + ec.message());
    const std::string dir(out_dir);
    write_text(dir + "/scores.csv", dmt::cv_scores_csv(rep));
    write_text(dir + "/summary.csv", dmt::cv_summary_csv(rep));
    const std::string table = dmt::cv_summary_table(rep);
    write_text(dir + "/summary.txt", table);
    write_text(dir + "/pvalues.csv", dmt::cv_pvalues_csv(rep));
    int failed = 0;
    for (const auto& row : rep.failure)
      for (const auto& f : row) failed += !f.empty();
    if (failed_folds) *failed_folds = failed;
    if (summary_table) *summary_table = dup_string(table);
  });
}

// ---------------------------------------------------------------- render

dmt_status dmt_render_labels(const dmt_labels* labels, const char* path) {
  DMT_REQUIRE(labels && path, "dmt_render_labels: null argument");
  return guarded([&] { dmt::render_labels_png(path, labels->value); });
}

dmt_status dmt_render_probmap(const dmt_probmap* probs, int cls, const char* path) {
  DMT_REQUIRE(probs && path, "dmt_render_probmap: null argument");
  return guarded([&] { dmt::render_probmap_png(path, probs->value, cls); });
}

dmt_status dmt_render_channel(const dmt_image* image, int channel, const char* path) {
  DMT_REQUIRE(image && path, "dmt_render_channel: null argument");
  return guarded([&] { dmt::render_channel_png(path, image->value, channel); });
}

dmt_status dmt_render_edgemap(const dmt_image* image, const dmt_config* config, int target_superpixels,
                              const char* path) {
  DMT_REQUIRE(image && config && path, "dmt_render_edgemap: null argument");
  return guarded([&] {
    dmt::SlicParams sp = config->value.slic;
    if (target_superpixels > 0) sp.target_superpixels = target_superpixels;
    const int ref = config->value.reference_channel;
    const dmt::EdgeMap edges = dmt::slic(image->value, ref, sp);
    dmt::render_edgemap_png(path, image->value, ref, edges);
  });
}

}  // extern "C"
