#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace longtrack {

/// Dense height x width x channels tensor, row-major with channels
/// innermost (HWC). Feature maps from the branch network live here.
class Tensor3 {
 public:
  Tensor3() = default;
  Tensor3(std::size_t height, std::size_t width, std::size_t channels,
          double fill = 0.0)
      : height_(height),
        width_(width),
        channels_(channels),
        data_(height * width * channels, fill) {}
  Tensor3(std::size_t height, std::size_t width, std::size_t channels,
          std::vector<double> data);

  std::size_t height() const noexcept { return height_; }
  std::size_t width() const noexcept { return width_; }
  std::size_t channels() const noexcept { return channels_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c, std::size_t ch) noexcept {
    return data_[(r * width_ + c) * channels_ + ch];
  }
  double operator()(std::size_t r, std::size_t c,
                    std::size_t ch) const noexcept {
    return data_[(r * width_ + c) * channels_ + ch];
  }

  /// Channel vector at one spatial position.
  std::span<double> at(std::size_t r, std::size_t c) noexcept {
    return {data_.data() + (r * width_ + c) * channels_, channels_};
  }
  std::span<const double> at(std::size_t r, std::size_t c) const noexcept {
    return {data_.data() + (r * width_ + c) * channels_, channels_};
  }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }

  /// Copy of the sub-volume [r0, r0+h) x [c0, c0+w) across all channels.
  Tensor3 window(std::size_t r0, std::size_t c0, std::size_t h,
                 std::size_t w) const;

  std::string shape_string() const;

  bool operator==(const Tensor3&) const = default;

 private:
  std::size_t height_ = 0;
  std::size_t width_ = 0;
  std::size_t channels_ = 0;
  std::vector<double> data_;
};

/// Row-major 2D grid of reals; similarity maps live here.
class Grid2 {
 public:
  Grid2() = default;
  Grid2(std::size_t height, std::size_t width, double fill = 0.0)
      : height_(height), width_(width), data_(height * width, fill) {}
  Grid2(std::size_t height, std::size_t width, std::vector<double> data);

  std::size_t height() const noexcept { return height_; }
  std::size_t width() const noexcept { return width_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) noexcept {
    return data_[r * width_ + c];
  }
  double operator()(std::size_t r, std::size_t c) const noexcept {
    return data_[r * width_ + c];
  }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }

  bool operator==(const Grid2&) const = default;

 private:
  std::size_t height_ = 0;
  std::size_t width_ = 0;
  std::vector<double> data_;
};

bool all_finite(std::span<const double> values) noexcept;

}  // namespace longtrack
