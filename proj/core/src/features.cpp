#include "longtrack/features.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "longtrack/errors.hpp"

namespace longtrack {

namespace {

struct OrientationTable {
  std::span<const double> sin_b;
  std::span<const double> cos_b;

  // Unsigned orientation bin of (gx, gy) in [0, pi).
  std::size_t bin(double gx, double gy) const noexcept {
    if (gy < 0.0 || (gy == 0.0 && gx < 0.0)) {
      gx = -gx;
      gy = -gy;
    }
    std::size_t k = 0;
    for (std::size_t b = 0; b < sin_b.size(); ++b) {
      k += (gx * sin_b[b] - gy * cos_b[b] <= 0.0) ? 1 : 0;
    }
    return k;
  }
};

Tensor3 extract_raw_impl(const ImagePatch& input,
                         const FeatureExtractorSpec& spec,
                         const OrientationTable& table) {
  const std::size_t cell = spec.cell_size;
  if (cell == 0 || input.height() < cell || input.width() < cell) {
    throw ShapeError("extract: patch " + std::to_string(input.height()) + "x" +
                     std::to_string(input.width()) +
                     " is smaller than one cell of " + std::to_string(cell));
  }
  const ImagePatch gray_storage =
      input.channels() == 1 ? ImagePatch{} : to_gray(input);
  const ImagePatch& img = input.channels() == 1 ? input : gray_storage;

  const std::size_t h = img.height();
  const std::size_t w = img.width();
  const std::size_t oh = h / cell;
  const std::size_t ow = w / cell;
  const std::size_t channels = spec.channels();
  Tensor3 out(oh, ow, channels);

  constexpr double kScale = 1.0 / 255.0;
  std::vector<double> px(img.data().begin(), img.data().end());

  // Each pixel votes into the (up to) four nearest cell centres with
  // bilinear weights, which keeps the features stable under sub-cell
  // shifts. Cells are then divided by their accumulated weight.
  const double inv_cell = 1.0 / static_cast<double>(cell);
  struct Tap {
    std::size_t i0, i1;
    double w0, w1;
  };
  const auto taps = [inv_cell](std::size_t n, std::size_t cells) {
    const long last = static_cast<long>(cells) - 1;
    std::vector<Tap> t(n);
    for (std::size_t p = 0; p < n; ++p) {
      const double f = (static_cast<double>(p) + 0.5) * inv_cell - 0.5;
      const long i0 = static_cast<long>(std::floor(f));
      const double frac = f - std::floor(f);
      if (i0 < 0) {
        t[p] = {0, 0, 1.0, 0.0};
      } else if (i0 >= last) {
        const auto l = static_cast<std::size_t>(last);
        t[p] = {l, l, 1.0, 0.0};
      } else {
        const auto i = static_cast<std::size_t>(i0);
        t[p] = {i, i + 1, 1.0 - frac, frac};
      }
    }
    return t;
  };
  const std::vector<Tap> ty = taps(h, oh);
  const std::vector<Tap> tx = taps(w, ow);
  std::vector<double> weight(oh * ow, 0.0);

  for (std::size_t y = 0; y < h; ++y) {
    const std::size_t ym = y == 0 ? 0 : y - 1;
    const std::size_t yp = y + 1 < h ? y + 1 : h - 1;
    const double* row = px.data() + y * w;
    const double* up = px.data() + ym * w;
    const double* down = px.data() + yp * w;
    const Tap& a = ty[y];
    for (std::size_t x = 0; x < w; ++x) {
      const std::size_t xm = x == 0 ? 0 : x - 1;
      const std::size_t xp = x + 1 < w ? x + 1 : w - 1;
      const double gx =
          (static_cast<double>(row[xp]) - static_cast<double>(row[xm])) *
          (0.5 * kScale);
      const double gy =
          (static_cast<double>(down[x]) - static_cast<double>(up[x])) *
          (0.5 * kScale);
      const double mag = std::sqrt(gx * gx + gy * gy);
      const std::size_t bin = mag > 0.0 ? table.bin(gx, gy) : 0;
      const double intensity = static_cast<double>(row[x]) * kScale;
      const Tap& b = tx[x];
      const std::size_t rows[2] = {a.i0, a.i1};
      const double wr[2] = {a.w0, a.w1};
      const std::size_t cols[2] = {b.i0, b.i1};
      const double wc[2] = {b.w0, b.w1};
      for (int i = 0; i < 2; ++i) {
        if (wr[i] == 0.0) {
          continue;
        }
        for (int j = 0; j < 2; ++j) {
          const double wt = wr[i] * wc[j];
          if (wt == 0.0) {
            continue;
          }
          double* cellv = &out(rows[i], cols[j], 0);
          cellv[0] += wt * intensity;
          cellv[1] += wt * mag;
          cellv[2 + bin] += wt * mag;
          weight[rows[i] * ow + cols[j]] += wt;
        }
      }
    }
  }
  for (std::size_t r = 0; r < oh; ++r) {
    for (std::size_t c = 0; c < ow; ++c) {
      const double inv = 1.0 / weight[r * ow + c];
      for (double& val : out.at(r, c)) {
        val *= inv;
      }
    }
  }
  return out;
}

void bin_bounds(std::size_t bins, std::vector<double>& sin_b,
                std::vector<double>& cos_b) {
  sin_b.clear();
  cos_b.clear();
  for (std::size_t k = 1; k < bins; ++k) {
    const double b =
        std::numbers::pi * static_cast<double>(k) / static_cast<double>(bins);
    sin_b.push_back(std::sin(b));
    cos_b.push_back(std::cos(b));
  }
}

}  // namespace

Tensor3 extract_raw(const ImagePatch& patch, const FeatureExtractorSpec& spec) {
  std::vector<double> sin_b;
  std::vector<double> cos_b;
  bin_bounds(spec.orientation_bins, sin_b, cos_b);
  return extract_raw_impl(patch, spec, OrientationTable{sin_b, cos_b});
}

void normalize_channels(Tensor3& features, double variance_floor) {
  const std::size_t ch = features.channels();
  const std::size_t cells = features.height() * features.width();
  if (cells == 0) {
    return;
  }
  auto data = features.data();
  for (std::size_t k = 0; k < ch; ++k) {
    double mean = 0.0;
    for (std::size_t i = k; i < data.size(); i += ch) {
      mean += data[i];
    }
    mean /= static_cast<double>(cells);
    double var = 0.0;
    for (std::size_t i = k; i < data.size(); i += ch) {
      const double d = data[i] - mean;
      var += d * d;
    }
    var /= static_cast<double>(cells);
    // Features are in [0,1]-scaled units; 1e-12 variance is numerically flat.
    if (var < 1e-12) {
      for (std::size_t i = k; i < data.size(); i += ch) {
        data[i] = 0.0;
      }
      continue;
    }
    const double inv_std = 1.0 / std::sqrt(var + variance_floor);
    for (std::size_t i = k; i < data.size(); i += ch) {
      data[i] = (data[i] - mean) * inv_std;
    }
  }
}

Tensor3 extract(const ImagePatch& patch, const FeatureExtractorSpec& spec) {
  Tensor3 out = extract_raw(patch, spec);
  if (spec.normalize) {
    normalize_channels(out, spec.variance_floor);
  }
  return out;
}

GradientChannelExtractor::GradientChannelExtractor(FeatureExtractorSpec spec)
    : spec_(spec) {
  bin_bounds(spec_.orientation_bins, sin_bounds_, cos_bounds_);
}

Tensor3 GradientChannelExtractor::extract(const ImagePatch& patch) const {
  Tensor3 out = extract_raw_impl(patch, spec_,
                                 OrientationTable{sin_bounds_, cos_bounds_});
  if (spec_.normalize) {
    normalize_channels(out, spec_.variance_floor);
  }
  return out;
}

std::shared_ptr<const FeatureExtractor> default_extractor() {
  static const auto instance = std::make_shared<GradientChannelExtractor>();
  return instance;
}

ProjectionParams ProjectionParams::identity(std::size_t channels) {
  ProjectionParams p;
  p.out_channels = channels;
  p.in_channels = channels;
  p.weight.assign(channels * channels, 0.0);
  for (std::size_t k = 0; k < channels; ++k) {
    p.weight[k * channels + k] = 1.0;
  }
  return p;
}

bool ProjectionParams::is_identity() const noexcept {
  if (out_channels != in_channels || bias_logit != 0.0) {
    return false;
  }
  for (std::size_t o = 0; o < out_channels; ++o) {
    for (std::size_t i = 0; i < in_channels; ++i) {
      if (w(o, i) != (o == i ? 1.0 : 0.0)) {
        return false;
      }
    }
  }
  return true;
}

std::vector<double> ProjectionParams::flatten() const {
  std::vector<double> flat(weight);
  flat.push_back(bias_logit);
  return flat;
}

ProjectionParams ProjectionParams::unflatten(std::size_t out_channels,
                                             std::size_t in_channels,
                                             std::span<const double> flat) {
  if (flat.size() != out_channels * in_channels + 1) {
    throw ShapeError("ProjectionParams::unflatten: length mismatch");
  }
  ProjectionParams p;
  p.out_channels = out_channels;
  p.in_channels = in_channels;
  p.weight.assign(flat.begin(), flat.end() - 1);
  p.bias_logit = flat.back();
  return p;
}

Tensor3 project(const Tensor3& features, const ProjectionParams& params) {
  if (features.channels() != params.in_channels ||
      params.weight.size() != params.in_channels * params.out_channels) {
    throw ShapeError("project: features " + features.shape_string() +
                     " incompatible with projection " +
                     std::to_string(params.out_channels) + "x" +
                     std::to_string(params.in_channels));
  }
  Tensor3 out(features.height(), features.width(), params.out_channels);
  const std::size_t cin = params.in_channels;
  const std::size_t cout = params.out_channels;
  const double* w = params.weight.data();
  const double* src = features.data().data();
  double* dst = out.data().data();
  const std::size_t positions = features.height() * features.width();
  for (std::size_t p = 0; p < positions; ++p) {
    const double* x = src + p * cin;
    double* y = dst + p * cout;
    for (std::size_t o = 0; o < cout; ++o) {
      double acc = 0.0;
      for (std::size_t i = 0; i < cin; ++i) {
        acc += w[o * cin + i] * x[i];
      }
      y[o] = acc;
    }
  }
  return out;
}

}  // namespace longtrack
