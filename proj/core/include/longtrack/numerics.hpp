#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "longtrack/tensor.hpp"

namespace longtrack {

/// Tallies scalar (real) multiplications performed by the correlation
/// kernels. Pass one in to instrument a call; nullptr disables counting.
struct OpCounter {
  std::uint64_t multiplies = 0;
};

/// Valid-mode 2D cross-correlation summed over channels:
/// out[i,j] = sum_{r,c,ch} query[r,c,ch] * probe[i+r, j+c, ch].
/// Throws ShapeError when the query does not fit inside the probe or the
/// channel counts differ.
Grid2 xcorr_valid(const Tensor3& query, const Tensor3& probe,
                  OpCounter* counter = nullptr);

/// Same contract as xcorr_valid, evaluated with zero-padded radix-2 FFTs.
/// Each axis is padded to the next power of two >= the probe extent.
Grid2 xcorr_valid_fft(const Tensor3& query, const Tensor3& probe,
                      OpCounter* counter = nullptr);

namespace fft {

/// In-place iterative radix-2 transform. data.size() must be a power of two.
void transform(std::span<std::complex<double>> data, bool inverse,
               OpCounter* counter = nullptr);

/// Row-column 2D transform over a rows x cols buffer (both powers of two).
void transform_2d(std::span<std::complex<double>> data, std::size_t rows,
                  std::size_t cols, bool inverse, OpCounter* counter = nullptr);

std::size_t next_pow2(std::size_t n) noexcept;

}  // namespace fft

/// Classical momentum SGD: v <- momentum * v + g; theta <- theta - lr * v.
struct SgdMomentumState {
  std::vector<double> velocity;
  double learning_rate = 0.01;
  double momentum = 0.9;

  SgdMomentumState() = default;
  SgdMomentumState(std::size_t n, double lr, double mu);
};

struct SgdStepResult {
  std::vector<double> params;
  SgdMomentumState state;
};

SgdStepResult sgd_momentum_step(std::span<const double> params,
                                std::span<const double> grads,
                                const SgdMomentumState& state);

/// In-place variant used inside training loops.
void sgd_momentum_step_inplace(std::span<double> params,
                               std::span<const double> grads,
                               SgdMomentumState& state);

using ScalarFunction = std::function<double(std::span<const double>)>;

/// Central-difference gradient check. Returns
/// max_k |g_fd - g_an| / max(1e-8, |g_fd| + |g_an|).
double finite_diff_check(const ScalarFunction& f,
                         std::span<const double> params,
                         std::span<const double> analytic_grad, double eps);

inline double logistic(double x) noexcept {
  if (x >= 0.0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

/// Deterministic RNG with portable distributions: libstdc++ and libc++
/// disagree on std::uniform_real_distribution output, so the mapping from
/// raw 64-bit draws to reals is done here.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) noexcept : state_(seed) {}

  std::uint64_t next_u64() noexcept;
  /// Uniform in [0, 1).
  double uniform() noexcept;
  double uniform(double lo, double hi) noexcept {
    return lo + (hi - lo) * uniform();
  }
  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) noexcept;
  double normal() noexcept;

 private:
  std::uint64_t state_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace longtrack
