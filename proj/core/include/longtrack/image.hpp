#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "longtrack/geometry.hpp"

namespace longtrack {

/// 8-bit image, interleaved channels (1 = gray, 3 = RGB), row-major.
class ImagePatch {
 public:
  ImagePatch() = default;
  ImagePatch(std::size_t height, std::size_t width, std::size_t channels = 1,
             std::uint8_t fill = 0);
  ImagePatch(std::size_t height, std::size_t width, std::size_t channels,
             std::vector<std::uint8_t> data);

  std::size_t height() const noexcept { return height_; }
  std::size_t width() const noexcept { return width_; }
  std::size_t channels() const noexcept { return channels_; }
  bool empty() const noexcept { return data_.empty(); }

  std::uint8_t& operator()(std::size_t r, std::size_t c,
                           std::size_t ch = 0) noexcept {
    return data_[(r * width_ + c) * channels_ + ch];
  }
  std::uint8_t operator()(std::size_t r, std::size_t c,
                          std::size_t ch = 0) const noexcept {
    return data_[(r * width_ + c) * channels_ + ch];
  }

  std::span<std::uint8_t> data() noexcept { return data_; }
  std::span<const std::uint8_t> data() const noexcept { return data_; }

  bool operator==(const ImagePatch&) const = default;

 private:
  std::size_t height_ = 0;
  std::size_t width_ = 0;
  std::size_t channels_ = 1;
  std::vector<std::uint8_t> data_;
};

/// ITU-R BT.601 luma, rounded half up. Gray input is returned unchanged.
ImagePatch to_gray(const ImagePatch& image);

/// Per-channel mean rounded half up; the fill value for out-of-frame pixels.
std::vector<std::uint8_t> mean_intensity(const ImagePatch& image);

/// Integer pixel rectangle covered by a box: left/top = round(edge),
/// extent = max(1, round(size)).
struct PixelRect {
  long left = 0;
  long top = 0;
  long width = 0;
  long height = 0;
};
PixelRect pixel_rect(const BoundingBox& region);

/// Crops the region; pixels outside the frame take the frame's mean value.
/// Throws ShapeError on non-positive region dims.
ImagePatch crop_with_padding(const ImagePatch& frame,
                             const BoundingBox& region);

/// Corner-aligned bilinear resampling with round-half-up quantization.
ImagePatch resize_bilinear(const ImagePatch& patch, std::size_t out_h,
                           std::size_t out_w);

/// Gray frame with its cached mean, the unit the search kernels sample from.
struct GrayFrame {
  ImagePatch image;
  std::uint8_t mean = 0;

  explicit GrayFrame(const ImagePatch& frame);
  GrayFrame() = default;
};

/// Equivalent to resize_bilinear(crop_with_padding(frame, region), h, w)
/// bit for bit, without materializing the intermediate crop.
ImagePatch sample_region(const GrayFrame& frame, const BoundingBox& region,
                         std::size_t out_h, std::size_t out_w);

}  // namespace longtrack
