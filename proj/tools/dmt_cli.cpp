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

// dmt command-line tool. Exit codes: 0 success, 1 runtime failure,
// 2 usage or configuration error.

#include <cstdio>
#include <memory>
#include <string>

#include "CLI11.hpp"
#include "dmt/dmt.h"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

struct Failure {
  int code;
};

void check(dmt_status s) {
  if (s == DMT_OK) return;
  std::fprintf(stderr, "dmt: %s: %s\n", dmt_status_name(s), dmt_last_error());
  throw Failure{s == DMT_ERR_ARGUMENT || s == DMT_ERR_CONFIG ? kExitUsage : kExitRuntime};
}

template <typename T, void (*Free)(T*)>
struct Handle {
  T* p = nullptr;
  Handle() = default;
  Handle(const Handle&) = delete;
  Handle& operator=(const Handle&) = delete;
  ~Handle() { Free(p); }
  T** out() { return &p; }
  T* get() const { return p; }
};

using Config = Handle<dmt_config, dmt_config_free>;
using Dataset = Handle<dmt_dataset, dmt_dataset_free>;
using Model = Handle<dmt_model, dmt_model_free>;
using Image = Handle<dmt_image, dmt_image_free>;
using Labels = Handle<dmt_labels, dmt_labels_free>;
using Probs = Handle<dmt_probmap, dmt_probmap_free>;

struct OwnedString {
  char* s = nullptr;
  ~OwnedString() { dmt_string_free(s); }
};

void load_config(Config& cfg, const std::string& path) {
  if (path.empty())
    check(dmt_config_default(cfg.out()));
  else
    check(dmt_config_load(path.c_str(), cfg.out()));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dynamic multiscale tree segmentation"};
  app.require_subcommand(0, 1);
  unsigned jobs = 0;
  bool dump_layout = false;
  std::string layout_config;
  app.add_option("--jobs", jobs, "Worker thread cap (0: all cores)");
  app.add_flag("--dump-feature-layout", dump_layout, "Print the feature layout as CSV and exit");
  app.add_option("--config", layout_config, "Config used with --dump-feature-layout")->check(CLI::ExistingFile);

  dmt_synth_options so;
  dmt_synth_options_default(&so);
  std::string synth_out;
  auto* synth = app.add_subcommand("synth", "Generate a synthetic phantom dataset");
  synth->add_option("--out", synth_out, "Output directory")->required();
  synth->add_option("--subjects", so.subjects, "Number of subjects")->capture_default_str();
  synth->add_option("--seed", so.seed, "Random seed")->capture_default_str();
  synth->add_option("--size", so.size, "Image side in pixels")->capture_default_str();
  synth->add_option("--noise", so.noise_sigma, "Noise standard deviation")->capture_default_str();
  synth->add_option("--irregularity", so.boundary_irregularity, "Boundary perturbation amplitude")->capture_default_str();

  std::string train_config, train_data, train_out, train_method;
  auto* train = app.add_subcommand("train", "Train a model on a dataset");
  train->add_option("--config", train_config, "Config file (defaults when omitted)")->check(CLI::ExistingFile);
  train->add_option("--data", train_data, "Dataset directory")->required();
  train->add_option("--out", train_out, "Model directory")->required();
  train->add_option("--method", train_method, "Override the configured method");

  std::string pred_model, pred_image, pred_out;
  bool pred_png = false;
  auto* predict = app.add_subcommand("predict", "Segment an image with a trained model");
  predict->add_option("--model", pred_model, "Model directory")->required();
  predict->add_option("--image", pred_image, "Image (MDI)")->required();
  predict->add_option("--out", pred_out, "Output prefix")->required();
  predict->add_flag("--png", pred_png, "Also write a PNG of the label map");

  std::string eval_config, eval_data, eval_methods = "srf,bn,srf-srf,bn-bn,srf-bn,dmt", eval_out = "eval";
  auto* eval = app.add_subcommand("eval", "Leave-one-subject-out comparison of methods");
  eval->add_option("--config", eval_config, "Config file (defaults when omitted)")->check(CLI::ExistingFile);
  eval->add_option("--data", eval_data, "Dataset directory")->required();
  eval->add_option("--methods", eval_methods, "Comma-separated method list")->capture_default_str();
  eval->add_option("--out", eval_out, "Report directory")->capture_default_str();

  std::string verify_model, verify_data;
  auto* verify = app.add_subcommand("verify", "Re-predict the training set and compare with the audit log");
  verify->add_option("--model", verify_model, "Model directory")->required();
  verify->add_option("--data", verify_data, "Training dataset directory")->required();

  std::string r_labels, r_probmap, r_edgemap, r_image, r_out, r_config;
  int r_class = 1, r_channel = 0, r_superpixels = 0;
  auto* render = app.add_subcommand("render", "Write a PNG of a label map, probability map, channel or edge map");
  auto* o_labels = render->add_option("--labels", r_labels, "Label map (MDI)");
  auto* o_probmap = render->add_option("--probmap", r_probmap, "Probability map (MDI)");
  auto* o_edgemap = render->add_option("--edgemap", r_edgemap, "Image (MDI) to oversegment");
  auto* o_image = render->add_option("--image", r_image, "Image (MDI) channel to show");
  o_labels->excludes(o_probmap, o_edgemap, o_image);
  o_probmap->excludes(o_edgemap, o_image);
  o_edgemap->excludes(o_image);
  render->add_option("--class", r_class, "Class for --probmap")->capture_default_str();
  render->add_option("--channel", r_channel, "Channel for --image")->capture_default_str();
  render->add_option("--superpixels", r_superpixels, "Superpixel target for --edgemap (0: config)");
  render->add_option("--config", r_config, "Config for --edgemap")->check(CLI::ExistingFile);
  render->add_option("--out", r_out, "PNG path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  try {
    dmt_set_jobs(jobs);
    if (dump_layout) {
      Config cfg;
      load_config(cfg, layout_config);
      OwnedString csv;
      check(dmt_config_feature_layout(cfg.get(), 3, 4, &csv.s));
      std::fputs(csv.s, stdout);
      return kExitOk;
    }
    if (*synth) {
      check(dmt_synth(&so, synth_out.c_str()));
      std::printf("wrote %d subjects to %s\n", so.subjects, synth_out.c_str());
    } else if (*train) {
      Config cfg;
      load_config(cfg, train_config);
      if (!train_method.empty()) check(dmt_config_set_method(cfg.get(), train_method.c_str()));
      Dataset ds;
      check(dmt_dataset_read(train_data.c_str(), ds.out()));
      Model model;
      check(dmt_train(cfg.get(), ds.get(), model.out()));
      check(dmt_model_save(model.get(), train_out.c_str()));
      std::printf("trained %d nodes on %d subjects into %s\n", dmt_model_node_count(model.get()),
                  dmt_dataset_size(ds.get()), train_out.c_str());
    } else if (*predict) {
      Model model;
      check(dmt_model_load(pred_model.c_str(), model.out()));
      Image img;
      check(dmt_image_read(pred_image.c_str(), img.out()));
      Labels labels;
      Probs probs;
      check(dmt_predict(model.get(), img.get(), labels.out(), probs.out()));
      check(dmt_labels_write(labels.get(), (pred_out + "_labels.mdi").c_str()));
      check(dmt_probmap_write(probs.get(), (pred_out + "_probs.mdi").c_str()));
      if (pred_png) check(dmt_render_labels(labels.get(), (pred_out + "_labels.png").c_str()));
    } else if (*eval) {
      Config cfg;
      load_config(cfg, eval_config);
      Dataset ds;
      check(dmt_dataset_read(eval_data.c_str(), ds.out()));
      int failed = 0;
      OwnedString table;
      check(dmt_eval(cfg.get(), ds.get(), eval_methods.c_str(), eval_out.c_str(), &failed, &table.s));
      std::fputs(table.s, stdout);
      if (failed > 0) {
        std::fprintf(stderr, "dmt: %d (method, fold) cells failed\n", failed);
        return kExitRuntime;
      }
    } else if (*verify) {
      Model model;
      check(dmt_model_load(verify_model.c_str(), model.out()));
      Dataset ds;
      check(dmt_dataset_read(verify_data.c_str(), ds.out()));
      int mismatches = 0;
      check(dmt_model_verify(model.get(), ds.get(), &mismatches));
      std::printf("%d leaf map mismatches\n", mismatches);
      if (mismatches) return kExitRuntime;
    } else if (*render) {
      if (!r_labels.empty()) {
        Labels l;
        check(dmt_labels_read(r_labels.c_str(), l.out()));
        check(dmt_render_labels(l.get(), r_out.c_str()));
      } else if (!r_probmap.empty()) {
        Probs p;
        check(dmt_probmap_read(r_probmap.c_str(), p.out()));
        check(dmt_render_probmap(p.get(), r_class, r_out.c_str()));
      } else if (!r_edgemap.empty()) {
        Config cfg;
        load_config(cfg, r_config);
        Image img;
        check(dmt_image_read(r_edgemap.c_str(), img.out()));
        check(dmt_render_edgemap(img.get(), cfg.get(), r_superpixels, r_out.c_str()));
      } else if (!r_image.empty()) {
        Image img;
        check(dmt_image_read(r_image.c_str(), img.out()));
        check(dmt_render_channel(img.get(), r_channel, r_out.c_str()));
      } else {
        std::fprintf(stderr, "dmt render: one of --labels, --probmap, --edgemap or --image is required\n");
        return kExitUsage;
      }
    } else {
      std::fputs(app.help().c_str(), stderr);
      return kExitUsage;
    }
  } catch (const Failure& f) {
    return f.code;
  }
  return kExitOk;
}
