#include "longtrack/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "longtrack/errors.hpp"

namespace longtrack {

Tensor3::Tensor3(std::size_t height, std::size_t width, std::size_t channels,
                 std::vector<double> data)
    : height_(height),
      width_(width),
      channels_(channels),
      data_(std::move(data)) {
  if (data_.size() != height * width * channels) {
    throw ShapeError("Tensor3: data length " + std::to_string(data_.size()) +
                     " does not match " + shape_string());
  }
}

Tensor3 Tensor3::window(std::size_t r0, std::size_t c0, std::size_t h,
                        std::size_t w) const {
  if (r0 + h > height_ || c0 + w > width_) {
    throw ShapeError("Tensor3::window out of range for " + shape_string());
  }
  Tensor3 out(h, w, channels_);
  for (std::size_t r = 0; r < h; ++r) {
    const double* src = data_.data() + ((r0 + r) * width_ + c0) * channels_;
    std::copy(src, src + w * channels_, out.data_.data() + r * w * channels_);
  }
  return out;
}

std::string Tensor3::shape_string() const {
  std::ostringstream os;
  os << height_ << "x" << width_ << "x" << channels_;
  return os.str();
}

Grid2::Grid2(std::size_t height, std::size_t width, std::vector<double> data)
    : height_(height), width_(width), data_(std::move(data)) {
  if (data_.size() != height * width) {
    throw ShapeError("Grid2: data length " + std::to_string(data_.size()) +
                     " does not match " + std::to_string(height) + "x" +
                     std::to_string(width));
  }
}

bool all_finite(std::span<const double> values) noexcept {
  return std::all_of(values.begin(), values.end(),
                     [](double v) { return std::isfinite(v); });
}

namespace {

void check_xcorr_shapes(const Tensor3& query, const Tensor3& probe) {
  if (query.empty() || query.height() > probe.height() ||
      query.width() > probe.width() ||
      query.channels() != probe.channels()) {
    throw ShapeError("xcorr: query " + query.shape_string() +
                     " incompatible with probe " + probe.shape_string());
  }
}

}  // namespace

Grid2 xcorr_valid(const Tensor3& query, const Tensor3& probe,
                  OpCounter* counter) {
  check_xcorr_shapes(query, probe);
  const std::size_t qh = query.height();
  const std::size_t row_len = query.width() * query.channels();
  const std::size_t probe_row = probe.width() * probe.channels();
  const std::size_t ch = probe.channels();
  const std::size_t oh = probe.height() - qh + 1;
  const std::size_t ow = probe.width() - query.width() + 1;

  Grid2 out(oh, ow);
  const double* q = query.data().data();
  const double* p = probe.data().data();
  for (std::size_t i = 0; i < oh; ++i) {
    for (std::size_t j = 0; j < ow; ++j) {
      double acc = 0.0;
      for (std::size_t r = 0; r < qh; ++r) {
        const double* qr = q + r * row_len;
        const double* pr = p + (i + r) * probe_row + j * ch;
        for (std::size_t k = 0; k < row_len; ++k) {
          acc += qr[k] * pr[k];
        }
      }
      out(i, j) = acc;
    }
  }
  if (counter != nullptr) {
    counter->multiplies += oh * ow * qh * row_len;
  }
  return out;
}

namespace fft {

std::size_t next_pow2(std::size_t n) noexcept {
  std::size_t p = 1;
  while (p < n) {
    p <<= 1;
  }
  return p;
}

void transform(std::span<std::complex<double>> data, bool inverse,
               OpCounter* counter) {
  const std::size_t n = data.size();
  if (n == 0 || (n & (n - 1)) != 0) {
    throw ShapeError("fft::transform: length " + std::to_string(n) +
                     " is not a power of two");
  }
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; (j & bit) != 0; bit >>= 1) {
      j ^= bit;
    }
    j ^= bit;
    if (i < j) {
      std::swap(data[i], data[j]);
    }
  }
  std::uint64_t mults = 0;
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double angle =
        (inverse ? 2.0 : -2.0) * std::numbers::pi / static_cast<double>(len);
    const std::size_t half = len / 2;
    for (std::size_t i = 0; i < n; i += len) {
      for (std::size_t k = 0; k < half; ++k) {
        const double a = angle * static_cast<double>(k);
        const std::complex<double> w(std::cos(a), std::sin(a));
        const std::complex<double> u = data[i + k];
        const std::complex<double> v = data[i + k + half] * w;
        data[i + k] = u + v;
        data[i + k + half] = u - v;
      }
    }
    mults += 4 * (n / 2);
  }
  if (inverse) {
    const double scale = 1.0 / static_cast<double>(n);
    for (auto& x : data) {
      x *= scale;
    }
    mults += 2 * n;
  }
  if (counter != nullptr) {
    counter->multiplies += mults;
  }
}

void transform_2d(std::span<std::complex<double>> data, std::size_t rows,
                  std::size_t cols, bool inverse, OpCounter* counter) {
  if (data.size() != rows * cols) {
    throw ShapeError("fft::transform_2d: buffer size mismatch");
  }
  for (std::size_t r = 0; r < rows; ++r) {
    transform(data.subspan(r * cols, cols), inverse, counter);
  }
  std::vector<std::complex<double>> column(rows);
  for (std::size_t c = 0; c < cols; ++c) {
    for (std::size_t r = 0; r < rows; ++r) {
      column[r] = data[r * cols + c];
    }
    transform(column, inverse, counter);
    for (std::size_t r = 0; r < rows; ++r) {
      data[r * cols + c] = column[r];
    }
  }
}

}  // namespace fft

Grid2 xcorr_valid_fft(const Tensor3& query, const Tensor3& probe,
                      OpCounter* counter) {
  check_xcorr_shapes(query, probe);
  const std::size_t rows = fft::next_pow2(probe.height());
  const std::size_t cols = fft::next_pow2(probe.width());
  const std::size_t n = rows * cols;
  const std::size_t channels = probe.channels();

  // Circular correlation of length >= probe extent never wraps for the
  // valid output region, so the first oh x ow cells are exact.
  std::vector<std::complex<double>> acc(n);
  std::vector<std::complex<double>> qbuf(n);
  std::vector<std::complex<double>> pbuf(n);
  for (std::size_t ch = 0; ch < channels; ++ch) {
    std::fill(qbuf.begin(), qbuf.end(), std::complex<double>{});
    std::fill(pbuf.begin(), pbuf.end(), std::complex<double>{});
    for (std::size_t r = 0; r < query.height(); ++r) {
      for (std::size_t c = 0; c < query.width(); ++c) {
        qbuf[r * cols + c] = query(r, c, ch);
      }
    }
    for (std::size_t r = 0; r < probe.height(); ++r) {
      for (std::size_t c = 0; c < probe.width(); ++c) {
        pbuf[r * cols + c] = probe(r, c, ch);
      }
    }
    fft::transform_2d(qbuf, rows, cols, false, counter);
    fft::transform_2d(pbuf, rows, cols, false, counter);
    for (std::size_t k = 0; k < n; ++k) {
      acc[k] += pbuf[k] * std::conj(qbuf[k]);
    }
    if (counter != nullptr) {
      counter->multiplies += 4 * n;
    }
  }
  fft::transform_2d(acc, rows, cols, true, counter);

  const std::size_t oh = probe.height() - query.height() + 1;
  const std::size_t ow = probe.width() - query.width() + 1;
  Grid2 out(oh, ow);
  for (std::size_t i = 0; i < oh; ++i) {
    for (std::size_t j = 0; j < ow; ++j) {
      out(i, j) = acc[i * cols + j].real();
    }
  }
  return out;
}

SgdMomentumState::SgdMomentumState(std::size_t n, double lr, double mu)
    : velocity(n, 0.0), learning_rate(lr), momentum(mu) {
  if (!(lr >= 0.0) || !(mu >= 0.0 && mu < 1.0)) {
    throw ConfigError("SGD: learning rate must be >= 0 and momentum in [0,1)");
  }
}

void sgd_momentum_step_inplace(std::span<double> params,
                               std::span<const double> grads,
                               SgdMomentumState& state) {
  if (params.size() != grads.size() ||
      params.size() != state.velocity.size()) {
    throw ShapeError("sgd_momentum_step: length mismatch (params " +
                     std::to_string(params.size()) + ", grads " +
                     std::to_string(grads.size()) + ", velocity " +
                     std::to_string(state.velocity.size()) + ")");
  }
  for (std::size_t k = 0; k < params.size(); ++k) {
    state.velocity[k] = state.momentum * state.velocity[k] + grads[k];
    params[k] -= state.learning_rate * state.velocity[k];
  }
}

SgdStepResult sgd_momentum_step(std::span<const double> params,
                                std::span<const double> grads,
                                const SgdMomentumState& state) {
  SgdStepResult result{{params.begin(), params.end()}, state};
  sgd_momentum_step_inplace(result.params, grads, result.state);
  return result;
}

double finite_diff_check(const ScalarFunction& f,
                         std::span<const double> params,
                         std::span<const double> analytic_grad, double eps) {
  if (params.size() != analytic_grad.size()) {
    throw ShapeError("finite_diff_check: gradient length mismatch");
  }
  if (!(eps > 0.0)) {
    throw NumericError("finite_diff_check: eps must be positive");
  }
  std::vector<double> x(params.begin(), params.end());
  double worst = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double saved = x[k];
    x[k] = saved + eps;
    const double fp = f(x);
    x[k] = saved - eps;
    const double fm = f(x);
    x[k] = saved;
    if (!std::isfinite(fp) || !std::isfinite(fm)) {
      throw NumericError("finite_diff_check: non-finite function value at "
                         "coordinate " +
                         std::to_string(k));
    }
    const double fd = (fp - fm) / (2.0 * eps);
    const double an = analytic_grad[k];
    const double err =
        std::abs(fd - an) / std::max(1e-8, std::abs(fd) + std::abs(an));
    worst = std::max(worst, err);
  }
  return worst;
}

std::uint64_t Rng::next_u64() noexcept {
  // splitmix64
  std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

double Rng::uniform() noexcept {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

std::uint64_t Rng::below(std::uint64_t n) noexcept {
  if (n == 0) {
    return 0;
  }
  return next_u64() % n;
}

double Rng::normal() noexcept {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u1 = uniform();
  while (u1 <= 0.0) {
    u1 = uniform();
  }
  const double u2 = uniform();
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * std::numbers::pi * u2;
  spare_ = radius * std::sin(theta);
  has_spare_ = true;
  return radius * std::cos(theta);
}

}  // namespace longtrack
