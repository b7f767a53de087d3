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

#include "synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <map>
#include <sstream>

#include "parallel.hpp"

namespace dmt {

namespace {

constexpr int kHarmonics = 5;
constexpr int kMaxRetries = 10;
constexpr int kAngleSamples = 1440;
constexpr int kTextureWaves = 3;
constexpr int kTissueWaves = 6;
constexpr double kMinRingWidth = 1.5;  // pixels

struct Wave {
  double fx, fy, phase;
};

// Separable Gaussian with border replication, in place on an n x n plane.
void gaussian_blur(std::vector<double>& plane, int n, double sigma) {
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> k(2 * radius + 1);
  double s = 0.0;
  for (int i = -radius; i <= radius; ++i) s += k[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
  for (double& v : k) v /= s;
  std::vector<double> tmp(plane.size());
  for (int y = 0; y < n; ++y)
    for (int x = 0; x < n; ++x) {
      double acc = 0.0;
      for (int i = -radius; i <= radius; ++i) acc += k[i + radius] * plane[static_cast<std::size_t>(y) * n + std::clamp(x + i, 0, n - 1)];
      tmp[static_cast<std::size_t>(y) * n + x] = acc;
    }
  for (int y = 0; y < n; ++y)
    for (int x = 0; x < n; ++x) {
      double acc = 0.0;
      for (int i = -radius; i <= radius; ++i) acc += k[i + radius] * tmp[static_cast<std::size_t>(std::clamp(y + i, 0, n - 1)) * n + x];
      plane[static_cast<std::size_t>(y) * n + x] = acc;
    }
}

struct Boundary {
  double radius = 0.0;
  std::array<double, kHarmonics> amp{};
  std::array<double, kHarmonics> phase{};

  double at(double theta) const {
    double r = 1.0;
    for (int k = 0; k < kHarmonics; ++k) r += amp[k] * std::cos((k + 1) * theta + phase[k]);
    return radius * r;
  }
};

Boundary draw_boundary(Rng& rng, double radius, double irregularity) {
  Boundary b;
  b.radius = radius;
  for (int k = 0; k < kHarmonics; ++k) {
    b.amp[k] = irregularity * rng.uniform() / (k + 1);
    b.phase[k] = rng.uniform(0.0, 2.0 * M_PI);
  }
  return b;
}

bool nested(const Boundary& inner, const Boundary& outer) {
  const double margin = std::min(kMinRingWidth, 0.25 * outer.radius);
  for (int i = 0; i < kAngleSamples; ++i) {
    const double t = 2.0 * M_PI * i / kAngleSamples;
    const double ri = inner.at(t);
    if (ri <= 1.0 || ri + margin >= outer.at(t)) return false;
  }
  return true;
}

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

void PhantomParams::validate() const {
  if (size < 32) throw ArgumentError("phantom: size must be >= 32");
  if (subjects < 0) throw ArgumentError("phantom: subject count must be >= 0");
  if (!(boundary_irregularity >= 0.0) || !(noise_sigma >= 0.0) || !(texture_amplitude >= 0.0) ||
      !(contrast_jitter >= 0.0) || !(blur_sigma >= 0.0))
    throw ArgumentError("phantom: irregularity, noise, texture, jitter and blur must be >= 0");
  for (double t : tissue_contrast)
    if (!std::isfinite(t)) throw ArgumentError("phantom: tissue contrast must be finite");
  for (const auto& ch : contrast) {
    for (int a = 0; a < kClasses; ++a) {
      if (!std::isfinite(ch[a])) throw ArgumentError("phantom: contrast must be finite");
      for (int b = a + 1; b < kClasses; ++b)
        if (ch[a] == ch[b]) throw ArgumentError("phantom: class contrasts must be distinct per channel");
    }
  }
}

Subject generate_subject(const PhantomParams& p, int index) {
  p.validate();
  Rng rng(p.rng_seed, "synth.subject", static_cast<std::uint64_t>(index));
  const int n = p.size;
  const double cx = rng.uniform(0.35, 0.65) * n;
  const double cy = rng.uniform(0.35, 0.65) * n;
  const double r_edema = rng.uniform(0.14, 0.22) * n;
  const double r_core = r_edema * rng.uniform(0.55, 0.70);
  const double r_enh = r_core * rng.uniform(0.45, 0.60);

  Rng shape_rng(p.rng_seed, "synth.shape", static_cast<std::uint64_t>(index));
  double amplitude = p.boundary_irregularity;
  std::array<Boundary, 3> bounds;
  bool ok = false;
  for (int attempt = 0; attempt <= kMaxRetries && !ok; ++attempt) {
    bounds[0] = draw_boundary(shape_rng, r_edema, amplitude);
    bounds[1] = draw_boundary(shape_rng, r_core, amplitude);
    bounds[2] = draw_boundary(shape_rng, r_enh, amplitude);
    ok = nested(bounds[1], bounds[0]) && nested(bounds[2], bounds[1]);
    amplitude *= 0.5;
  }
  if (!ok) throw ArgumentError("phantom: could not generate nested regions for subject " + std::to_string(index));

  std::array<std::array<double, PhantomParams::kClasses>, PhantomParams::kChannels> contrast = p.contrast;
  for (auto& ch : contrast)
    for (double& v : ch) v += p.contrast_jitter * rng.uniform(-1.0, 1.0);

  std::vector<Wave> waves;
  for (int c = 0; c < PhantomParams::kChannels; ++c)
    for (int k = 0; k < kTextureWaves; ++k)
      waves.push_back({rng.uniform(0.5, 4.0), rng.uniform(0.5, 4.0), rng.uniform(0.0, 2.0 * M_PI)});

  LabelMap labels(n, n, PhantomParams::kClasses);
  for (int y = 0; y < n; ++y)
    for (int x = 0; x < n; ++x) {
      const double dx = x - cx, dy = y - cy;
      const double rho = std::hypot(dx, dy);
      const double theta = std::atan2(dy, dx);
      std::uint8_t l = 0;
      for (int k = 0; k < 3; ++k)
        if (rho <= bounds[k].at(theta)) l = static_cast<std::uint8_t>(k + 1);
      labels.at(x, y) = l;
    }

  // Two background tissue types from the sign of a smooth random field.
  std::vector<std::uint8_t> tissue(static_cast<std::size_t>(n) * n, 0);
  if (p.tissue_contrast != std::array<double, PhantomParams::kChannels>{}) {
    Rng tissue_rng(p.rng_seed, "synth.tissue", static_cast<std::uint64_t>(index));
    std::vector<Wave> field;
    for (int k = 0; k < kTissueWaves; ++k)
      field.push_back({tissue_rng.uniform(-6.0, 6.0), tissue_rng.uniform(-6.0, 6.0), tissue_rng.uniform(0.0, 2.0 * M_PI)});
    for (int y = 0; y < n; ++y)
      for (int x = 0; x < n; ++x) {
        double f = 0.0;
        for (const Wave& w : field) f += std::sin(2.0 * M_PI * (w.fx * x + w.fy * y) / n + w.phase);
        tissue[static_cast<std::size_t>(y) * n + x] = f > 0.0 ? 1 : 0;
      }
  }

  Rng noise_rng(p.rng_seed, "synth.noise", static_cast<std::uint64_t>(index));
  MultiChannelImage img(n, n, PhantomParams::kChannels);
  std::vector<double> clean(static_cast<std::size_t>(n) * n);
  for (int c = 0; c < PhantomParams::kChannels; ++c) {
    for (int y = 0; y < n; ++y)
      for (int x = 0; x < n; ++x) {
        const std::size_t i = static_cast<std::size_t>(y) * n + x;
        const int l = labels.at(x, y);
        clean[i] = contrast[c][l] + (l == 0 && tissue[i] ? p.tissue_contrast[c] : 0.0);
      }
    if (p.blur_sigma > 0.0) gaussian_blur(clean, n, p.blur_sigma);
    for (int y = 0; y < n; ++y)
      for (int x = 0; x < n; ++x) {
        double v = clean[static_cast<std::size_t>(y) * n + x];
        if (p.texture_amplitude > 0.0) {
          double t = 0.0;
          for (int k = 0; k < kTextureWaves; ++k) {
            const Wave& w = waves[c * kTextureWaves + k];
            t += std::sin(2.0 * M_PI * (w.fx * x + w.fy * y) / n + w.phase);
          }
          v += p.texture_amplitude * t / kTextureWaves;
        }
        if (p.noise_sigma > 0.0) v += p.noise_sigma * noise_rng.normal();
        img.at(c, x, y) = static_cast<float>(v);
      }
  }
  return {std::move(img), std::move(labels)};
}

std::vector<Subject> generate(const PhantomParams& params) {
  params.validate();
  std::vector<Subject> out(params.subjects);
  parallel_for(out.size(), [&](std::size_t i) { out[i] = generate_subject(params, static_cast<int>(i)); });
  return out;
}

std::string format_manifest(const DatasetManifest& m) {
  std::ostringstream os;
  const auto& p = m.params;
  os << "format = dmt-dataset-1\n";
  os << "size = " << p.size << "\n";
  os << "classes = " << PhantomParams::kClasses << "\n";
  os << "channels = " << PhantomParams::kChannels << "\n";
  os << "seed = " << p.rng_seed << "\n";
  os << "subjects = " << m.image_files.size() << "\n";
  os << "boundary_irregularity = " << fmt_double(p.boundary_irregularity) << "\n";
  os << "noise_sigma = " << fmt_double(p.noise_sigma) << "\n";
  os << "texture_amplitude = " << fmt_double(p.texture_amplitude) << "\n";
  os << "contrast_jitter = " << fmt_double(p.contrast_jitter) << "\n";
  os << "blur_sigma = " << fmt_double(p.blur_sigma) << "\n";
  os << "tissue_contrast =";
  for (int c = 0; c < PhantomParams::kChannels; ++c) os << (c ? ", " : " ") << fmt_double(p.tissue_contrast[c]);
  os << "\n";
  for (int c = 0; c < PhantomParams::kChannels; ++c) {
    os << "contrast." << c << " =";
    for (int l = 0; l < PhantomParams::kClasses; ++l) os << (l ? ", " : " ") << fmt_double(p.contrast[c][l]);
    os << "\n";
  }
  for (std::size_t i = 0; i < m.image_files.size(); ++i) {
    os << "subject." << i << ".image = " << m.image_files[i] << "\n";
    os << "subject." << i << ".labels = " << m.label_files[i] << "\n";
  }
  return os.str();
}

DatasetManifest parse_manifest(const std::string& text) {
  std::map<std::string, std::pair<std::string, int>> kv;
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  auto trim = [](std::string s) {
    const auto a = s.find_first_not_of(" \t\r");
    const auto b = s.find_last_not_of(" \t\r");
    return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
  };
  while (std::getline(is, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw ConfigError("manifest: expected key = value", lineno);
    const std::string key = trim(t.substr(0, eq));
    if (key.empty()) throw ConfigError("manifest: empty key", lineno);
    if (kv.count(key)) throw ConfigError("manifest: duplicate key '" + key + "'", lineno);
    kv[key] = {trim(t.substr(eq + 1)), lineno};
  }
  auto get = [&](const std::string& key) -> const std::pair<std::string, int>& {
    auto it = kv.find(key);
    if (it == kv.end()) throw ConfigError("manifest: missing key '" + key + "'");
    return it->second;
  };
  auto as_int = [&](const std::string& key) {
    const auto& [v, ln] = get(key);
    try {
      std::size_t used = 0;
      const long long x = std::stoll(v, &used);
      if (used != v.size()) throw std::invalid_argument(v);
      return x;
    } catch (const std::exception&) {
      throw ConfigError("manifest: '" + key + "' is not an integer", ln);
    }
  };
  auto as_real = [&](const std::string& v, const std::string& key, int ln) {
    try {
      std::size_t used = 0;
      const double x = std::stod(v, &used);
      if (used != v.size()) throw std::invalid_argument(v);
      return x;
    } catch (const std::exception&) {
      throw ConfigError("manifest: '" + key + "' is not a number", ln);
    }
  };

  if (get("format").first != "dmt-dataset-1") throw ConfigError("manifest: unsupported format", get("format").second);
  DatasetManifest m;
  m.params.size = static_cast<int>(as_int("size"));
  if (as_int("classes") != PhantomParams::kClasses) throw ConfigError("manifest: classes must be 4", get("classes").second);
  if (as_int("channels") != PhantomParams::kChannels) throw ConfigError("manifest: channels must be 3", get("channels").second);
  m.params.rng_seed = static_cast<std::uint64_t>(as_int("seed"));
  const long long subjects = as_int("subjects");
  if (subjects < 0) throw ConfigError("manifest: negative subject count", get("subjects").second);
  m.params.subjects = static_cast<int>(subjects);
  for (const char* k : {"boundary_irregularity", "noise_sigma", "texture_amplitude", "contrast_jitter", "blur_sigma"}) {
    const auto& [v, ln] = get(k);
    const double x = as_real(v, k, ln);
    if (std::string(k) == "boundary_irregularity") m.params.boundary_irregularity = x;
    if (std::string(k) == "noise_sigma") m.params.noise_sigma = x;
    if (std::string(k) == "texture_amplitude") m.params.texture_amplitude = x;
    if (std::string(k) == "contrast_jitter") m.params.contrast_jitter = x;
    if (std::string(k) == "blur_sigma") m.params.blur_sigma = x;
  }
  {
    const auto& [v, ln] = get("tissue_contrast");
    std::istringstream vs(v);
    std::string item;
    int c = 0;
    while (std::getline(vs, item, ',')) {
      if (c >= PhantomParams::kChannels) throw ConfigError("manifest: too many tissue_contrast values", ln);
      m.params.tissue_contrast[c++] = as_real(trim(item), "tissue_contrast", ln);
    }
    if (c != PhantomParams::kChannels) throw ConfigError("manifest: expected 3 tissue_contrast values", ln);
  }
  for (int c = 0; c < PhantomParams::kChannels; ++c) {
    const std::string key = "contrast." + std::to_string(c);
    const auto& [v, ln] = get(key);
    std::istringstream vs(v);
    std::string item;
    int l = 0;
    while (std::getline(vs, item, ',')) {
      if (l >= PhantomParams::kClasses) throw ConfigError("manifest: too many contrast values", ln);
      m.params.contrast[c][l++] = as_real(trim(item), key, ln);
    }
    if (l != PhantomParams::kClasses) throw ConfigError("manifest: expected 4 contrast values", ln);
  }
  for (int i = 0; i < m.params.subjects; ++i) {
    m.image_files.push_back(get("subject." + std::to_string(i) + ".image").first);
    m.label_files.push_back(get("subject." + std::to_string(i) + ".labels").first);
  }
  const std::size_t expected = 12 + PhantomParams::kChannels + 2 * static_cast<std::size_t>(m.params.subjects);
  if (kv.size() != expected) {
    for (const auto& [key, val] : kv) {
      const bool known = key == "format" || key == "size" || key == "classes" || key == "channels" || key == "seed" ||
                         key == "subjects" || key == "boundary_irregularity" || key == "noise_sigma" ||
                         key == "texture_amplitude" || key == "contrast_jitter" || key == "blur_sigma" ||
                         key == "tissue_contrast" || key.rfind("contrast.", 0) == 0 ||
                         key.rfind("subject.", 0) == 0;
      if (!known) throw ConfigError("manifest: unknown key '" + key + "'", val.second);
    }
    throw ConfigError("manifest: subject entries do not match the subject count");
  }
  return m;
}

void write_dataset(const std::string& dir, const PhantomParams& params, const std::vector<Subject>& subjects) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory '" + dir + "': " + ec.message());
  DatasetManifest m;
  m.params = params;
  m.params.subjects = static_cast<int>(subjects.size());
  for (std::size_t i = 0; i < subjects.size(); ++i) {
    char stem[64];
    std::snprintf(stem, sizeof stem, "subject_%03zu", i);
    m.image_files.push_back(std::string(stem) + "_image.mdi");
    m.label_files.push_back(std::string(stem) + "_labels.mdi");
    write_mdi(dir + "/" + m.image_files.back(), subjects[i].image);
    write_mdi(dir + "/" + m.label_files.back(), subjects[i].labels);
  }
  const std::string text = format_manifest(m);
  write_file(dir + "/manifest.txt", std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

std::vector<Subject> read_dataset(const std::string& dir, DatasetManifest* manifest) {
  const auto bytes = read_file(dir + "/manifest.txt");
  const DatasetManifest m = parse_manifest(std::string(bytes.begin(), bytes.end()));
  std::vector<Subject> out(m.image_files.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i].image = read_mdi_image(dir + "/" + m.image_files[i]);
    out[i].labels = read_mdi_labels(dir + "/" + m.label_files[i]);
    if (out[i].image.width() != out[i].labels.width() || out[i].image.height() != out[i].labels.height())
      throw ArgumentError("dataset: image and label sizes differ for subject " + std::to_string(i));
  }
  if (manifest) *manifest = m;
  return out;
}

}  // namespace dmt
