#include "longtrack/image.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "longtrack/errors.hpp"

namespace longtrack {

bool BoundingBox::valid() const noexcept {
  return std::isfinite(cx) && std::isfinite(cy) && std::isfinite(width) &&
         std::isfinite(height) && width > 0.0 && height > 0.0;
}

double intersection_area(const BoundingBox& a, const BoundingBox& b) noexcept {
  const double w =
      std::min(a.right(), b.right()) - std::max(a.left(), b.left());
  const double h =
      std::min(a.bottom(), b.bottom()) - std::max(a.top(), b.top());
  if (w <= 0.0 || h <= 0.0) {
    return 0.0;
  }
  return w * h;
}

double iou(const BoundingBox& a, const BoundingBox& b) {
  if (!a.valid() || !b.valid()) {
    throw ShapeError("iou: boxes must have positive finite dimensions");
  }
  // Areas from the same corner arithmetic as the intersection, so that
  // iou(a, a) == 1 exactly.
  const auto extent_area = [](const BoundingBox& x) {
    return (x.right() - x.left()) * (x.bottom() - x.top());
  };
  const double inter = intersection_area(a, b);
  const double uni = extent_area(a) + extent_area(b) - inter;
  return std::clamp(inter / uni, 0.0, 1.0);
}

ImagePatch::ImagePatch(std::size_t height, std::size_t width,
                       std::size_t channels, std::uint8_t fill)
    : height_(height),
      width_(width),
      channels_(channels),
      data_(height * width * channels, fill) {
  if (channels != 1 && channels != 3) {
    throw ShapeError("ImagePatch: channels must be 1 or 3, got " +
                     std::to_string(channels));
  }
}

ImagePatch::ImagePatch(std::size_t height, std::size_t width,
                       std::size_t channels, std::vector<std::uint8_t> data)
    : height_(height),
      width_(width),
      channels_(channels),
      data_(std::move(data)) {
  if (channels != 1 && channels != 3) {
    throw ShapeError("ImagePatch: channels must be 1 or 3, got " +
                     std::to_string(channels));
  }
  if (data_.size() != height * width * channels) {
    throw ShapeError("ImagePatch: data length does not match dimensions");
  }
}

namespace {

std::uint8_t quantize(double v) noexcept {
  return static_cast<std::uint8_t>(std::clamp(std::floor(v + 0.5), 0.0, 255.0));
}

long round_half_up(double v) noexcept {
  return static_cast<long>(std::floor(v + 0.5));
}

// Source coordinate for output index i under corner alignment.
double corner_aligned(std::size_t i, std::size_t out_n, std::size_t in_n) {
  if (out_n == 1) {
    return 0.5 * static_cast<double>(in_n - 1);
  }
  return static_cast<double>(i) * static_cast<double>(in_n - 1) /
         static_cast<double>(out_n - 1);
}

struct Tap {
  std::size_t i0;
  std::size_t i1;
  double frac;
};

std::vector<Tap> make_taps(std::size_t out_n, std::size_t in_n) {
  std::vector<Tap> taps(out_n);
  for (std::size_t i = 0; i < out_n; ++i) {
    const double s = corner_aligned(i, out_n, in_n);
    const auto i0 = static_cast<std::size_t>(std::floor(s));
    const std::size_t i1 = std::min(i0 + 1, in_n - 1);
    taps[i] = {i0, i1, s - static_cast<double>(i0)};
  }
  return taps;
}

double lerp2(double p00, double p01, double p10, double p11, double fy,
             double fx) noexcept {
  const double top = p00 + (p01 - p00) * fx;
  const double bottom = p10 + (p11 - p10) * fx;
  return top + (bottom - top) * fy;
}

}  // namespace

ImagePatch to_gray(const ImagePatch& image) {
  if (image.channels() == 1) {
    return image;
  }
  ImagePatch out(image.height(), image.width(), 1);
  for (std::size_t r = 0; r < image.height(); ++r) {
    for (std::size_t c = 0; c < image.width(); ++c) {
      const double y = 0.299 * image(r, c, 0) + 0.587 * image(r, c, 1) +
                       0.114 * image(r, c, 2);
      out(r, c) = quantize(y);
    }
  }
  return out;
}

std::vector<std::uint8_t> mean_intensity(const ImagePatch& image) {
  std::vector<std::uint8_t> means(image.channels(), 0);
  const std::size_t pixels = image.height() * image.width();
  if (pixels == 0) {
    return means;
  }
  for (std::size_t ch = 0; ch < image.channels(); ++ch) {
    std::uint64_t sum = 0;
    const auto data = image.data();
    for (std::size_t k = ch; k < data.size(); k += image.channels()) {
      sum += data[k];
    }
    means[ch] = quantize(static_cast<double>(sum) / static_cast<double>(pixels));
  }
  return means;
}

PixelRect pixel_rect(const BoundingBox& region) {
  if (!region.valid()) {
    throw ShapeError("crop: region must have positive finite dimensions");
  }
  PixelRect rect;
  rect.left = round_half_up(region.left());
  rect.top = round_half_up(region.top());
  rect.width = std::max(1L, round_half_up(region.width));
  rect.height = std::max(1L, round_half_up(region.height));
  return rect;
}

ImagePatch crop_with_padding(const ImagePatch& frame,
                             const BoundingBox& region) {
  const PixelRect rect = pixel_rect(region);
  const auto fill = mean_intensity(frame);
  const std::size_t ch = frame.channels();
  ImagePatch out(static_cast<std::size_t>(rect.height),
                 static_cast<std::size_t>(rect.width), ch);
  const long fh = static_cast<long>(frame.height());
  const long fw = static_cast<long>(frame.width());
  for (long r = 0; r < rect.height; ++r) {
    const long y = rect.top + r;
    for (long c = 0; c < rect.width; ++c) {
      const long x = rect.left + c;
      const bool inside = y >= 0 && y < fh && x >= 0 && x < fw;
      for (std::size_t k = 0; k < ch; ++k) {
        out(static_cast<std::size_t>(r), static_cast<std::size_t>(c), k) =
            inside ? frame(static_cast<std::size_t>(y),
                           static_cast<std::size_t>(x), k)
                   : fill[k];
      }
    }
  }
  return out;
}

ImagePatch resize_bilinear(const ImagePatch& patch, std::size_t out_h,
                           std::size_t out_w) {
  if (out_h == 0 || out_w == 0 || patch.empty()) {
    throw ShapeError("resize_bilinear: output and input dims must be >= 1");
  }
  if (out_h == patch.height() && out_w == patch.width()) {
    return patch;
  }
  const auto ty = make_taps(out_h, patch.height());
  const auto tx = make_taps(out_w, patch.width());
  ImagePatch out(out_h, out_w, patch.channels());
  for (std::size_t r = 0; r < out_h; ++r) {
    for (std::size_t c = 0; c < out_w; ++c) {
      for (std::size_t k = 0; k < patch.channels(); ++k) {
        const double v =
            lerp2(patch(ty[r].i0, tx[c].i0, k), patch(ty[r].i0, tx[c].i1, k),
                  patch(ty[r].i1, tx[c].i0, k), patch(ty[r].i1, tx[c].i1, k),
                  ty[r].frac, tx[c].frac);
        out(r, c, k) = quantize(v);
      }
    }
  }
  return out;
}

GrayFrame::GrayFrame(const ImagePatch& frame)
    : image(to_gray(frame)), mean(mean_intensity(image).front()) {}

ImagePatch sample_region(const GrayFrame& frame, const BoundingBox& region,
                         std::size_t out_h, std::size_t out_w) {
  if (out_h == 0 || out_w == 0) {
    throw ShapeError("sample_region: output dims must be >= 1");
  }
  const PixelRect rect = pixel_rect(region);
  const auto crop_h = static_cast<std::size_t>(rect.height);
  const auto crop_w = static_cast<std::size_t>(rect.width);
  const ImagePatch& img = frame.image;
  const long fh = static_cast<long>(img.height());
  const long fw = static_cast<long>(img.width());

  // Per-axis source positions in frame coordinates, -1 when outside.
  auto map_axis = [](long origin, std::size_t n, long limit) {
    std::vector<long> idx(n);
    for (std::size_t i = 0; i < n; ++i) {
      const long v = origin + static_cast<long>(i);
      idx[i] = (v >= 0 && v < limit) ? v : -1;
    }
    return idx;
  };
  const auto rows = map_axis(rect.top, crop_h, fh);
  const auto cols = map_axis(rect.left, crop_w, fw);
  const double fill = frame.mean;
  auto pixel = [&](std::size_t r, std::size_t c) -> double {
    const long y = rows[r];
    const long x = cols[c];
    if (y < 0 || x < 0) {
      return fill;
    }
    return img(static_cast<std::size_t>(y), static_cast<std::size_t>(x));
  };

  ImagePatch out(out_h, out_w, 1);
  if (out_h == crop_h && out_w == crop_w) {
    for (std::size_t r = 0; r < out_h; ++r) {
      for (std::size_t c = 0; c < out_w; ++c) {
        out(r, c) = static_cast<std::uint8_t>(pixel(r, c));
      }
    }
    return out;
  }
  const auto ty = make_taps(out_h, crop_h);
  const auto tx = make_taps(out_w, crop_w);
  for (std::size_t r = 0; r < out_h; ++r) {
    for (std::size_t c = 0; c < out_w; ++c) {
      const double v =
          lerp2(pixel(ty[r].i0, tx[c].i0), pixel(ty[r].i0, tx[c].i1),
                pixel(ty[r].i1, tx[c].i0), pixel(ty[r].i1, tx[c].i1),
                ty[r].frac, tx[c].frac);
      out(r, c) = quantize(v);
    }
  }
  return out;
}

}  // namespace longtrack
