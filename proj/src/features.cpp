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

#include "features.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

namespace dmt {

namespace {

constexpr double kZeroVariance = 1e-12;
constexpr double kGaborSigmaPerWavelength = 0.56;
constexpr double kGaborAspect = 0.5;
constexpr double kGaborSupport = 2.5;  // half-size in envelope sigmas

std::string fmt_real(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

// np.gradient-style derivative: central differences inside, one-sided at the borders.
void derivative_x(const std::vector<double>& f, int w, int h, std::vector<double>& out) {
  out.assign(f.size(), 0.0);
  if (w < 2) return;
  for (int y = 0; y < h; ++y) {
    const double* row = f.data() + static_cast<std::size_t>(y) * w;
    double* o = out.data() + static_cast<std::size_t>(y) * w;
    o[0] = row[1] - row[0];
    for (int x = 1; x < w - 1; ++x) o[x] = 0.5 * (row[x + 1] - row[x - 1]);
    o[w - 1] = row[w - 1] - row[w - 2];
  }
}

void derivative_y(const std::vector<double>& f, int w, int h, std::vector<double>& out) {
  out.assign(f.size(), 0.0);
  if (h < 2) return;
  const auto at = [&](int x, int y) { return f[static_cast<std::size_t>(y) * w + x]; };
  for (int x = 0; x < w; ++x) {
    out[x] = at(x, 1) - at(x, 0);
    for (int y = 1; y < h - 1; ++y) out[static_cast<std::size_t>(y) * w + x] = 0.5 * (at(x, y + 1) - at(x, y - 1));
    out[static_cast<std::size_t>(h - 1) * w + x] = at(x, h - 1) - at(x, h - 2);
  }
}

std::vector<double> gaussian_kernel(double sigma) {
  const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
  std::vector<double> k(2 * radius + 1);
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    k[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
    sum += k[i + radius];
  }
  for (double& v : k) v /= sum;
  return k;
}

std::vector<double> blur(const std::vector<double>& f, int w, int h, double sigma) {
  const auto k = gaussian_kernel(sigma);
  const int r = static_cast<int>(k.size() / 2);
  std::vector<double> tmp(f.size()), out(f.size());
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double s = 0.0;
      for (int i = -r; i <= r; ++i) s += k[i + r] * f[static_cast<std::size_t>(y) * w + std::clamp(x + i, 0, w - 1)];
      tmp[static_cast<std::size_t>(y) * w + x] = s;
    }
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double s = 0.0;
      for (int i = -r; i <= r; ++i) s += k[i + r] * tmp[static_cast<std::size_t>(std::clamp(y + i, 0, h - 1)) * w + x];
      out[static_cast<std::size_t>(y) * w + x] = s;
    }
  return out;
}

// |f * g| for the complex Gabor g with DC-free real part; borders replicated.
std::vector<double> gabor_magnitude(const std::vector<double>& f, int w, int h, double theta, double wavelength) {
  const double sigma = kGaborSigmaPerWavelength * wavelength;
  const int half = static_cast<int>(std::ceil(kGaborSupport * sigma));
  const int side = 2 * half + 1;
  std::vector<double> re(static_cast<std::size_t>(side) * side), im(re.size());
  const double ct = std::cos(theta), st = std::sin(theta);
  double re_mean = 0.0;
  for (int dy = -half; dy <= half; ++dy)
    for (int dx = -half; dx <= half; ++dx) {
      const double xr = dx * ct + dy * st;
      const double yr = -dx * st + dy * ct;
      const double env = std::exp(-(xr * xr + kGaborAspect * kGaborAspect * yr * yr) / (2.0 * sigma * sigma));
      const double phase = 2.0 * M_PI * xr / wavelength;
      const std::size_t k = static_cast<std::size_t>(dy + half) * side + (dx + half);
      re[k] = env * std::cos(phase);
      im[k] = env * std::sin(phase);
      re_mean += re[k];
    }
  re_mean /= static_cast<double>(re.size());
  for (double& v : re) v -= re_mean;

  const int pw = w + 2 * half, ph = h + 2 * half;
  std::vector<double> padded(static_cast<std::size_t>(pw) * ph);
  for (int y = 0; y < ph; ++y)
    for (int x = 0; x < pw; ++x)
      padded[static_cast<std::size_t>(y) * pw + x] =
          f[static_cast<std::size_t>(std::clamp(y - half, 0, h - 1)) * w + std::clamp(x - half, 0, w - 1)];

  std::vector<double> out(f.size());
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double sr = 0.0, si = 0.0;
      for (int ky = 0; ky < side; ++ky) {
        const double* src = padded.data() + static_cast<std::size_t>(y + ky) * pw + x;
        const double* kr = re.data() + static_cast<std::size_t>(ky) * side;
        const double* ki = im.data() + static_cast<std::size_t>(ky) * side;
        for (int kx = 0; kx < side; ++kx) {
          sr += kr[kx] * src[kx];
          si += ki[kx] * src[kx];
        }
      }
      out[static_cast<std::size_t>(y) * w + x] = std::sqrt(sr * sr + si * si);
    }
  return out;
}

// Statistics of a value set. vals is reordered.
struct ValueStats {
  double mean, std, max, min, median, entropy, kurtosis, skewness;
};

ValueStats value_stats(std::span<double> vals, double lo, double hi, int bins, std::vector<int>& hist) {
  const std::size_t n = vals.size();
  ValueStats s{};
  double sum = 0.0;
  s.max = vals[0];
  s.min = vals[0];
  for (double v : vals) {
    sum += v;
    s.max = std::max(s.max, v);
    s.min = std::min(s.min, v);
  }
  s.mean = sum / static_cast<double>(n);
  double m2 = 0.0, m3 = 0.0, m4 = 0.0;
  for (double v : vals) {
    const double d = v - s.mean;
    const double d2 = d * d;
    m2 += d2;
    m3 += d2 * d;
    m4 += d2 * d2;
  }
  m2 /= static_cast<double>(n);
  m3 /= static_cast<double>(n);
  m4 /= static_cast<double>(n);
  s.std = std::sqrt(m2);
  if (s.std < kZeroVariance) {
    s.skewness = 0.0;
    s.kurtosis = 0.0;
  } else {
    s.skewness = m3 / (m2 * s.std);
    s.kurtosis = m4 / (m2 * m2) - 3.0;
  }

  hist.assign(bins, 0);
  const double range = hi - lo;
  for (double v : vals) {
    int b = 0;
    if (range > 0.0) b = std::clamp(static_cast<int>((v - lo) / range * bins), 0, bins - 1);
    ++hist[b];
  }
  s.entropy = 0.0;
  for (int c : hist) {
    if (c == 0) continue;
    const double p = static_cast<double>(c) / static_cast<double>(n);
    s.entropy -= p * std::log2(p);
  }
  // Entropy of a single occupied bin is exactly zero; avoid -0.0.
  s.entropy = std::max(0.0, s.entropy);

  const std::size_t mid = n / 2;
  std::nth_element(vals.begin(), vals.begin() + mid, vals.end());
  const double upper = vals[mid];
  if (n % 2 == 1) {
    s.median = upper;
  } else {
    const double lower = *std::max_element(vals.begin(), vals.begin() + mid);
    s.median = 0.5 * (lower + upper);
  }
  return s;
}

// Mean of plane over a clamped side x side window; rows summed first, then
// accumulated, so every caller reproduces the same rounding.
double box_mean(std::span<const double> plane, int w, int h, int y0, int side, const int* xs) {
  double total = 0.0;
  for (int dy = 0; dy < side; ++dy) {
    const double* row = plane.data() + static_cast<std::size_t>(std::clamp(y0 + dy, 0, h - 1)) * w;
    double acc = 0.0;
    for (int dx = 0; dx < side; ++dx) acc += row[xs[dx]];
    total += acc;
  }
  return total / static_cast<double>(side * side);
}

void clamped_columns(int x0, int side, int w, std::vector<int>& xs) {
  xs.resize(side);
  for (int dx = 0; dx < side; ++dx) xs[dx] = std::clamp(x0 + dx, 0, w - 1);
}

double projection(double coord, int extent) { return extent > 1 ? coord / static_cast<double>(extent - 1) : 0.5; }

}  // namespace

// ---------------------------------------------------------------- config / layout

void FeatureConfig::validate() const {
  if (gabor_orientations < 1) throw ArgumentError("feature config: gabor_orientations must be >= 1");
  if (gabor_wavelengths.empty()) throw ArgumentError("feature config: gabor_wavelengths must be nonempty");
  for (double l : gabor_wavelengths)
    if (!(l > 0.0)) throw ArgumentError("feature config: gabor wavelengths must be > 0");
  if (dog_sigma_pairs.empty()) throw ArgumentError("feature config: dog_sigma_pairs must be nonempty");
  for (const auto& [s1, s2] : dog_sigma_pairs)
    if (!(s1 > 0.0) || !(s1 < s2)) throw ArgumentError("feature config: each DoG pair needs 0 < sigma1 < sigma2");
  if (entropy_bins < 1) throw ArgumentError("feature config: entropy_bins must be >= 1");
  if (include_context && context_classes < 1)
    throw ArgumentError("feature config: context enabled without a class count");
}

FeatureConfig FeatureConfig::with_context(int classes) const {
  FeatureConfig c = *this;
  c.include_context = true;
  c.context_classes = classes;
  return c;
}

FeatureConfig FeatureConfig::without_context() const {
  FeatureConfig c = *this;
  c.include_context = false;
  c.context_classes = 0;
  return c;
}

FeatureLayout feature_layout(const FeatureConfig& cfg, int channels, FeatureScope scope) {
  cfg.validate();
  FeatureLayout layout;
  auto& n = layout.names;
  for (int c = 0; c < channels; ++c) {
    const std::string p = "c" + std::to_string(c) + ".";
    for (const char* s : {"mean", "std", "max", "min", "median", "sobel", "gradient", "laplacian"}) n.push_back(p + s);
    for (const auto& [s1, s2] : cfg.dog_sigma_pairs) n.push_back(p + "dog_" + fmt_real(s1) + "_" + fmt_real(s2));
    for (const char* s : {"entropy", "mean_curvature", "gaussian_curvature", "kurtosis", "skewness"}) n.push_back(p + s);
    for (double lambda : cfg.gabor_wavelengths)
      for (int o = 0; o < cfg.gabor_orientations; ++o)
        n.push_back(p + "gabor_o" + fmt_real(180.0 * o / cfg.gabor_orientations) + "_w" + fmt_real(lambda));
    n.push_back(p + "symmetry");
    n.push_back(p + "neighborhood");
  }
  n.push_back("projection_x");
  n.push_back("projection_y");
  layout.base_size = n.size();
  if (cfg.include_context) {
    for (int l = 0; l < cfg.context_classes; ++l) {
      const std::string p = "ctx" + std::to_string(l) + ".";
      if (scope == FeatureScope::Patch) n.push_back(p + "center");
      n.push_back(p + "mean");
    }
  }
  std::uint64_t h = fnv1a(scope == FeatureScope::Patch ? "patch" : "superpixel");
  for (const auto& name : n) h = fnv1a(name, fnv1a("\n", h));
  layout.fingerprint = h;
  return layout;
}

std::string feature_layout_csv(const FeatureLayout& layout) {
  std::string out = "index,name\n";
  for (std::size_t i = 0; i < layout.names.size(); ++i) out += std::to_string(i) + "," + layout.names[i] + "\n";
  return out;
}

// ---------------------------------------------------------------- responses

ImageResponses::ImageResponses(const MultiChannelImage& img, const FeatureConfig& cfg) : img_(&img) {
  cfg.validate();
  const int w = img.width(), h = img.height();
  const std::size_t n = img.pixel_count();
  dog_count_ = static_cast<int>(cfg.dog_sigma_pairs.size());
  gabor_count_ = cfg.gabor_orientations * static_cast<int>(cfg.gabor_wavelengths.size());
  entropy_bins_ = cfg.entropy_bins;
  planes_per_channel_ = response::kFirstDog + dog_count_ + gabor_count_ + 1;
  planes_.assign(n * planes_per_channel_ * img.channels(), 0.0);
  min_.resize(img.channels());
  max_.resize(img.channels());

  std::vector<double> centered(n), ix, iy, ixx, iyy, ixy;
  for (int c = 0; c < img.channels(); ++c) {
    const auto src = img.plane(c);
    const auto [lo, hi] = std::minmax_element(src.begin(), src.end());
    min_[c] = *lo;
    max_[c] = *hi;
    double mean = 0.0;
    for (float v : src) mean += v;
    mean /= static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) centered[i] = static_cast<double>(src[i]) - mean;

    auto out = [&](int idx) {
      return planes_.begin() + static_cast<std::ptrdiff_t>((static_cast<std::size_t>(c) * planes_per_channel_ + idx) * n);
    };

    // Sobel on raw intensities with replicated borders.
    auto sob = out(response::kSobel);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        auto I = [&](int dx, int dy) { return static_cast<double>(img.clamped(c, x + dx, y + dy)); };
        const double gx = (I(1, -1) + 2.0 * I(1, 0) + I(1, 1)) - (I(-1, -1) + 2.0 * I(-1, 0) + I(-1, 1));
        const double gy = (I(-1, 1) + 2.0 * I(0, 1) + I(1, 1)) - (I(-1, -1) + 2.0 * I(0, -1) + I(1, -1));
        sob[static_cast<std::size_t>(y) * w + x] = std::sqrt(gx * gx + gy * gy);
      }

    derivative_x(centered, w, h, ix);
    derivative_y(centered, w, h, iy);
    derivative_x(ix, w, h, ixx);
    derivative_y(iy, w, h, iyy);
    derivative_y(ix, w, h, ixy);
    auto grad = out(response::kGradient);
    auto lap = out(response::kLaplacian);
    auto mc = out(response::kMeanCurvature);
    auto gc = out(response::kGaussianCurvature);
    for (std::size_t i = 0; i < n; ++i) {
      grad[i] = std::sqrt(ix[i] * ix[i] + iy[i] * iy[i]);
      lap[i] = ixx[i] + iyy[i];
      const double g = 1.0 + ix[i] * ix[i] + iy[i] * iy[i];
      mc[i] = ((1.0 + ix[i] * ix[i]) * iyy[i] - 2.0 * ix[i] * iy[i] * ixy[i] + (1.0 + iy[i] * iy[i]) * ixx[i]) /
              (2.0 * std::pow(g, 1.5));
      gc[i] = (ixx[i] * iyy[i] - ixy[i] * ixy[i]) / (g * g);
    }

    auto sym = out(response::kSymmetry);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        sym[static_cast<std::size_t>(y) * w + x] = std::abs(static_cast<double>(img.at(c, x, y)) - img.at(c, w - 1 - x, y));

    for (int d = 0; d < dog_count_; ++d) {
      const auto b1 = blur(centered, w, h, cfg.dog_sigma_pairs[d].first);
      const auto b2 = blur(centered, w, h, cfg.dog_sigma_pairs[d].second);
      auto dog = out(response::kFirstDog + d);
      for (std::size_t i = 0; i < n; ++i) dog[i] = b1[i] - b2[i];
    }

    int g = 0;
    for (double lambda : cfg.gabor_wavelengths)
      for (int o = 0; o < cfg.gabor_orientations; ++o, ++g) {
        const auto mag = gabor_magnitude(centered, w, h, M_PI * o / cfg.gabor_orientations, lambda);
        std::copy(mag.begin(), mag.end(), out(response::kFirstDog + dog_count_ + g));
      }

    auto raw = out(planes_per_channel_ - 1);
    for (std::size_t i = 0; i < n; ++i) raw[i] = src[i];
  }
}

// ---------------------------------------------------------------- patch features

void patch_base_features(const ImageResponses& resp, Pixel center, int side, std::span<double> out) {
  const auto& img = resp.image();
  const int w = img.width(), h = img.height();
  if (center.x < 0 || center.y < 0 || center.x >= w || center.y >= h)
    throw ArgumentError("patch_features: center outside image");
  if (side < 1) throw ArgumentError("patch_features: side must be >= 1");
  const int x0 = patch_origin(center.x, side), y0 = patch_origin(center.y, side);
  const int dogs = resp.dog_count(), gabors = resp.gabor_count();
  const int raw_plane = resp.per_channel_planes() - 1;

  thread_local std::vector<double> vals;
  thread_local std::vector<int> hist;
  thread_local std::vector<int> xs, ring_xs;
  clamped_columns(x0, side, w, xs);
  vals.resize(static_cast<std::size_t>(side) * side);

  std::size_t k = 0;
  for (int c = 0; c < img.channels(); ++c) {
    std::size_t v = 0;
    for (int dy = 0; dy < side; ++dy) {
      const int y = std::clamp(y0 + dy, 0, h - 1);
      for (int dx = 0; dx < side; ++dx) vals[v++] = img.at(c, xs[dx], y);
    }
    const ValueStats s = value_stats(vals, resp.channel_min(c), resp.channel_max(c), resp.entropy_bins(), hist);
    auto mean_of = [&](int plane) { return box_mean(resp.plane(c, plane), w, h, y0, side, xs.data()); };

    out[k++] = s.mean;
    out[k++] = s.std;
    out[k++] = s.max;
    out[k++] = s.min;
    out[k++] = s.median;
    out[k++] = mean_of(response::kSobel);
    out[k++] = mean_of(response::kGradient);
    out[k++] = mean_of(response::kLaplacian);
    for (int d = 0; d < dogs; ++d) out[k++] = mean_of(response::kFirstDog + d);
    out[k++] = s.entropy;
    out[k++] = mean_of(response::kMeanCurvature);
    out[k++] = mean_of(response::kGaussianCurvature);
    out[k++] = s.kurtosis;
    out[k++] = s.skewness;
    for (int g = 0; g < gabors; ++g) out[k++] = mean_of(response::kFirstDog + dogs + g);
    out[k++] = mean_of(response::kSymmetry);

    // Mean of the eight surrounding patch means (ring at one patch-side offset).
    double ring = 0.0;
    for (int ry = -1; ry <= 1; ++ry)
      for (int rx = -1; rx <= 1; ++rx) {
        if (rx == 0 && ry == 0) continue;
        const int cx = std::clamp(center.x + rx * side, 0, w - 1);
        const int cy = std::clamp(center.y + ry * side, 0, h - 1);
        const int rx0 = patch_origin(cx, side);
        clamped_columns(rx0, side, w, ring_xs);
        ring += box_mean(resp.plane(c, raw_plane), w, h, patch_origin(cy, side), side, ring_xs.data());
      }
    out[k++] = ring / 8.0;
  }
  out[k++] = projection(center.x, w);
  out[k++] = projection(center.y, h);
}

void patch_context_features(const ProbabilityMap& context, Pixel center, int side, std::span<double> out) {
  const int w = context.width(), h = context.height();
  const int x0 = patch_origin(center.x, side), y0 = patch_origin(center.y, side);
  const std::size_t centre_index = static_cast<std::size_t>(center.y) * w + center.x;
  thread_local std::vector<int> xs;
  clamped_columns(x0, side, w, xs);
  std::size_t k = 0;
  for (int l = 0; l < context.classes(); ++l) {
    const auto plane = context.plane(l);
    out[k++] = plane[centre_index];
    double total = 0.0;
    for (int dy = 0; dy < side; ++dy) {
      const float* row = plane.data() + static_cast<std::size_t>(std::clamp(y0 + dy, 0, h - 1)) * w;
      double acc = 0.0;
      for (int dx = 0; dx < side; ++dx) acc += row[xs[dx]];
      total += acc;
    }
    out[k++] = total / static_cast<double>(side * side);
  }
}

FeatureVector patch_features(const MultiChannelImage& img, const ProbabilityMap* context, Pixel center, int side,
                             const FeatureConfig& cfg) {
  const FeatureLayout layout = feature_layout(cfg, img.channels(), FeatureScope::Patch);
  if (cfg.include_context) {
    if (context == nullptr) throw ArgumentError("patch_features: context enabled but no context map given");
    if (context->classes() != cfg.context_classes || context->width() != img.width() ||
        context->height() != img.height())
      throw ArgumentError("patch_features: context map does not match image / config");
  }
  const ImageResponses resp(img, cfg);
  FeatureVector fv;
  fv.values.assign(layout.size(), 0.0);
  patch_base_features(resp, center, side, std::span<double>(fv.values).first(layout.base_size));
  if (cfg.include_context)
    patch_context_features(*context, center, side, std::span<double>(fv.values).subspan(layout.base_size));
  return fv;
}

FeatureMatrix dense_patch_base_features(const ImageResponses& resp, int side) {
  const auto& img = resp.image();
  FeatureMatrix m;
  m.rows = img.pixel_count();
  m.cols = static_cast<std::size_t>(img.channels()) * (resp.per_channel_planes() + 8) + 2;
  m.data.resize(m.rows * m.cols);
  std::vector<double> row(m.cols);
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x) {
      patch_base_features(resp, {x, y}, side, row);
      auto dst = m.row(static_cast<std::size_t>(y) * img.width() + x);
      for (std::size_t j = 0; j < m.cols; ++j) dst[j] = static_cast<float>(row[j]);
    }
  return m;
}

FeatureMatrix dense_patch_context_features(const ProbabilityMap& context, int side) {
  FeatureMatrix m;
  m.rows = context.pixel_count();
  m.cols = 2 * static_cast<std::size_t>(context.classes());
  m.data.resize(m.rows * m.cols);
  std::vector<double> row(m.cols);
  for (int y = 0; y < context.height(); ++y)
    for (int x = 0; x < context.width(); ++x) {
      patch_context_features(context, {x, y}, side, row);
      auto dst = m.row(static_cast<std::size_t>(y) * context.width() + x);
      for (std::size_t j = 0; j < m.cols; ++j) dst[j] = static_cast<float>(row[j]);
    }
  return m;
}

// ---------------------------------------------------------------- superpixel features

void superpixel_base_features(const ImageResponses& resp, std::span<const std::int32_t> pixels,
                              std::span<const double> neighborhood, std::span<double> out) {
  if (pixels.empty()) throw ArgumentError("superpixel_features: empty pixel set");
  const auto& img = resp.image();
  const int w = img.width();
  const std::size_t npix = img.pixel_count();
  const int dogs = resp.dog_count(), gabors = resp.gabor_count();
  const double n = static_cast<double>(pixels.size());

  thread_local std::vector<double> vals;
  thread_local std::vector<int> hist;
  vals.resize(pixels.size());

  std::size_t k = 0;
  for (int c = 0; c < img.channels(); ++c) {
    const auto src = img.plane(c);
    for (std::size_t i = 0; i < pixels.size(); ++i) {
      if (pixels[i] < 0 || static_cast<std::size_t>(pixels[i]) >= npix)
        throw ArgumentError("superpixel_features: pixel outside image");
      vals[i] = src[pixels[i]];
    }
    const ValueStats s = value_stats(vals, resp.channel_min(c), resp.channel_max(c), resp.entropy_bins(), hist);
    auto mean_of = [&](int plane) {
      const auto p = resp.plane(c, plane);
      double acc = 0.0;
      for (auto i : pixels) acc += p[i];
      return acc / n;
    };
    out[k++] = s.mean;
    out[k++] = s.std;
    out[k++] = s.max;
    out[k++] = s.min;
    out[k++] = s.median;
    out[k++] = mean_of(response::kSobel);
    out[k++] = mean_of(response::kGradient);
    out[k++] = mean_of(response::kLaplacian);
    for (int d = 0; d < dogs; ++d) out[k++] = mean_of(response::kFirstDog + d);
    out[k++] = s.entropy;
    out[k++] = mean_of(response::kMeanCurvature);
    out[k++] = mean_of(response::kGaussianCurvature);
    out[k++] = s.kurtosis;
    out[k++] = s.skewness;
    for (int g = 0; g < gabors; ++g) out[k++] = mean_of(response::kFirstDog + dogs + g);
    out[k++] = mean_of(response::kSymmetry);
    out[k++] = neighborhood.empty() ? s.mean : neighborhood[c];
  }
  double sx = 0.0, sy = 0.0;
  for (auto i : pixels) {
    sx += i % w;
    sy += i / w;
  }
  out[k++] = projection(sx / n, w);
  out[k++] = projection(sy / n, img.height());
}

FeatureVector superpixel_features(const MultiChannelImage& img, const ProbabilityMap* context,
                                  std::span<const Pixel> pixel_set, const FeatureConfig& cfg,
                                  std::optional<std::vector<double>> neighborhood) {
  if (pixel_set.empty()) throw ArgumentError("superpixel_features: empty pixel set");
  const FeatureLayout layout = feature_layout(cfg, img.channels(), FeatureScope::Superpixel);
  if (neighborhood && static_cast<int>(neighborhood->size()) != img.channels())
    throw ArgumentError("superpixel_features: neighborhood needs one value per channel");
  std::vector<std::int32_t> idx;
  idx.reserve(pixel_set.size());
  for (const auto& p : pixel_set) {
    if (p.x < 0 || p.y < 0 || p.x >= img.width() || p.y >= img.height())
      throw ArgumentError("superpixel_features: pixel outside image");
    idx.push_back(p.y * img.width() + p.x);
  }
  const ImageResponses resp(img, cfg);
  FeatureVector fv;
  fv.values.assign(layout.size(), 0.0);
  superpixel_base_features(resp, idx, neighborhood ? std::span<const double>(*neighborhood) : std::span<const double>(),
                           std::span<double>(fv.values).first(layout.base_size));
  if (cfg.include_context) {
    if (context == nullptr) throw ArgumentError("superpixel_features: context enabled but no context map given");
    if (context->classes() != cfg.context_classes) throw ArgumentError("superpixel_features: context class mismatch");
    std::size_t k = layout.base_size;
    for (int l = 0; l < context->classes(); ++l) {
      double acc = 0.0;
      for (auto i : idx) acc += context->at(l, i);
      fv.values[k++] = acc / static_cast<double>(idx.size());
    }
  }
  return fv;
}

}  // namespace dmt
