#include <gtest/gtest.h>

#include <longtrack/errors.hpp>
#include <longtrack/numerics.hpp>

#include <cmath>
#include <complex>
#include <limits>

#include "test_support.hpp"

namespace lt = longtrack;
using lt::testing::direct_xcorr;
using lt::testing::random_tensor;

namespace {

double max_abs_diff(const lt::Grid2& a, const lt::Grid2& b) {
  EXPECT_EQ(a.height(), b.height());
  EXPECT_EQ(a.width(), b.width());
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    worst = std::max(worst, std::abs(a.data()[i] - b.data()[i]));
  }
  return worst;
}

}  // namespace

TEST(Xcorr, AllOnesTwoByTwo) {
  lt::Tensor3 q(2, 2, 1, 1.0);
  const auto out = lt::xcorr_valid(q, q);
  ASSERT_EQ(out.height(), 1u);
  ASSERT_EQ(out.width(), 1u);
  EXPECT_DOUBLE_EQ(out(0, 0), 4.0);
}

TEST(Xcorr, ScalarQueryScalesProbe) {
  lt::Tensor3 q(1, 1, 1, 2.0);
  lt::Tensor3 p(1, 3, 1, std::vector<double>{1.0, 0.0, 3.0});
  const auto out = lt::xcorr_valid(q, p);
  ASSERT_EQ(out.width(), 3u);
  EXPECT_DOUBLE_EQ(out(0, 0), 2.0);
  EXPECT_DOUBLE_EQ(out(0, 1), 0.0);
  EXPECT_DOUBLE_EQ(out(0, 2), 6.0);
}

TEST(Xcorr, MatchesDirectOracle) {
  lt::Rng rng(7);
  const auto q = random_tensor(rng, 4, 4, 8);
  const auto p = random_tensor(rng, 8, 8, 8);
  const auto out = lt::xcorr_valid(q, p);
  ASSERT_EQ(out.height(), 5u);
  ASSERT_EQ(out.width(), 5u);
  EXPECT_LT(max_abs_diff(out, direct_xcorr(q, p)), 1e-9);
}

TEST(Xcorr, ShapeErrorsNameBothShapes) {
  lt::Tensor3 q(5, 5, 8);
  lt::Tensor3 p(4, 4, 8);
  try {
    lt::xcorr_valid(q, p);
    FAIL() << "expected ShapeError";
  } catch (const lt::ShapeError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("5x5x8"), std::string::npos) << msg;
    EXPECT_NE(msg.find("4x4x8"), std::string::npos) << msg;
  }
  EXPECT_THROW(lt::xcorr_valid(lt::Tensor3(2, 2, 3), lt::Tensor3(4, 4, 8)),
               lt::ShapeError);
  EXPECT_THROW(lt::xcorr_valid_fft(q, p), lt::ShapeError);
}

TEST(Xcorr, Bilinear) {
  lt::Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const auto q1 = random_tensor(rng, 3, 4, 5);
    const auto q2 = random_tensor(rng, 3, 4, 5);
    const auto p = random_tensor(rng, 9, 7, 5);
    const double a = rng.uniform(-2, 2);
    const double b = rng.uniform(-2, 2);
    lt::Tensor3 mix(3, 4, 5);
    for (std::size_t i = 0; i < mix.size(); ++i) {
      mix.data()[i] = a * q1.data()[i] + b * q2.data()[i];
    }
    const auto lhs = lt::xcorr_valid(mix, p);
    const auto r1 = lt::xcorr_valid(q1, p);
    const auto r2 = lt::xcorr_valid(q2, p);
    for (std::size_t i = 0; i < lhs.size(); ++i) {
      EXPECT_NEAR(lhs.data()[i], a * r1.data()[i] + b * r2.data()[i], 1e-9);
    }
  }
}

TEST(XcorrFft, AgreesWithDirectOnRandomShapes) {
  lt::Rng rng(2024);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t c = 1 + rng.below(6);
    const std::size_t qh = 1 + rng.below(6);
    const std::size_t qw = 1 + rng.below(6);
    const std::size_t ph = qh + rng.below(12);
    const std::size_t pw = qw + rng.below(12);
    const auto q = random_tensor(rng, qh, qw, c);
    const auto p = random_tensor(rng, ph, pw, c);
    EXPECT_LT(max_abs_diff(lt::xcorr_valid_fft(q, p), lt::xcorr_valid(q, p)),
              1e-6);
  }
}

TEST(XcorrFft, ZeroProbeGivesZeroGrid) {
  lt::Rng rng(3);
  const auto q = random_tensor(rng, 3, 3, 4);
  const auto out = lt::xcorr_valid_fft(q, lt::Tensor3(10, 12, 4));
  for (double v : out.data()) {
    EXPECT_NEAR(v, 0.0, 1e-12);
  }
}

TEST(XcorrFft, FewerMultipliesOnLargeInputs) {
  lt::Rng rng(5);
  const auto q = random_tensor(rng, 16, 16, 8);
  const auto p = random_tensor(rng, 64, 64, 8);
  lt::OpCounter direct;
  lt::OpCounter fast;
  lt::xcorr_valid(q, p, &direct);
  lt::xcorr_valid_fft(q, p, &fast);
  EXPECT_EQ(direct.multiplies, 49ull * 49 * 16 * 16 * 8);
  EXPECT_GT(fast.multiplies, 0u);
  EXPECT_LT(fast.multiplies, direct.multiplies);
}

TEST(Fft, RoundTripAndKnownSpectrum) {
  std::vector<std::complex<double>> x{1, 0, 0, 0, 0, 0, 0, 0};
  lt::fft::transform(x, false);
  for (const auto& v : x) {
    EXPECT_NEAR(v.real(), 1.0, 1e-15);
    EXPECT_NEAR(v.imag(), 0.0, 1e-15);
  }
  lt::Rng rng(9);
  std::vector<std::complex<double>> y(16);
  for (auto& v : y) {
    v = {rng.uniform(), rng.uniform()};
  }
  auto z = y;
  lt::fft::transform(z, false);
  lt::fft::transform(z, true);
  for (std::size_t i = 0; i < y.size(); ++i) {
    EXPECT_NEAR(std::abs(z[i] - y[i]), 0.0, 1e-12);
  }
  EXPECT_EQ(lt::fft::next_pow2(1), 1u);
  EXPECT_EQ(lt::fft::next_pow2(5), 8u);
  EXPECT_EQ(lt::fft::next_pow2(64), 64u);
}

TEST(Sgd, VanillaStep) {
  lt::SgdMomentumState s(1, 0.01, 0.0);
  const std::vector<double> p{1.0};
  const std::vector<double> g{10.0};
  const auto r = lt::sgd_momentum_step(p, g, s);
  EXPECT_DOUBLE_EQ(r.params[0], 0.9);
}

TEST(Sgd, ZeroGradientLeavesParams) {
  lt::SgdMomentumState s(3, 0.5, 0.9);
  const std::vector<double> p{1.0, -2.0, 3.5};
  const std::vector<double> g(3, 0.0);
  const auto r = lt::sgd_momentum_step(p, g, s);
  EXPECT_EQ(r.params, p);
  EXPECT_EQ(r.state.velocity, std::vector<double>(3, 0.0));
}

TEST(Sgd, MomentumRecurrence) {
  lt::SgdMomentumState s(1, 0.01, 0.9);
  std::vector<double> p{0.0};
  const std::vector<double> g{1.0};
  auto r1 = lt::sgd_momentum_step(p, g, s);
  EXPECT_NEAR(p[0] - r1.params[0], 0.01, 1e-15);
  auto r2 = lt::sgd_momentum_step(r1.params, g, r1.state);
  EXPECT_NEAR(r1.params[0] - r2.params[0], 0.019, 1e-15);
}

TEST(Sgd, ZeroMomentumIsPlainDescent) {
  lt::Rng rng(1);
  std::vector<double> p(12);
  for (auto& v : p) v = rng.uniform(-1, 1);
  lt::SgdMomentumState s(p.size(), 0.3, 0.0);
  for (int step = 0; step < 5; ++step) {
    std::vector<double> g(p.size());
    for (auto& v : g) v = rng.uniform(-1, 1);
    std::vector<double> expected(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) expected[i] = p[i] - 0.3 * g[i];
    lt::sgd_momentum_step_inplace(p, g, s);
    EXPECT_EQ(p, expected);
  }
}

TEST(Sgd, LengthMismatchThrows) {
  lt::SgdMomentumState s(2, 0.1, 0.9);
  const std::vector<double> p{1.0, 2.0};
  const std::vector<double> g{1.0};
  EXPECT_ANY_THROW(lt::sgd_momentum_step(p, g, s));
  lt::SgdMomentumState short_state(1, 0.1, 0.9);
  EXPECT_ANY_THROW(lt::sgd_momentum_step(p, std::vector<double>{1, 1},
                                         short_state));
}

TEST(FiniteDiff, Square) {
  const lt::ScalarFunction f = [](std::span<const double> x) {
    return x[0] * x[0];
  };
  const std::vector<double> at{3.0};
  EXPECT_LT(lt::finite_diff_check(f, at, std::vector<double>{6.0}, 1e-5),
            1e-8);
  EXPECT_NEAR(lt::finite_diff_check(f, at, std::vector<double>{5.0}, 1e-5),
              1.0 / 11.0, 1e-6);
}

TEST(FiniteDiff, NonFiniteThrows) {
  const lt::ScalarFunction f = [](std::span<const double> x) {
    return x[0] > 0 ? std::numeric_limits<double>::quiet_NaN() : 0.0;
  };
  EXPECT_THROW(lt::finite_diff_check(f, std::vector<double>{0.0},
                                     std::vector<double>{0.0}, 1e-3),
               lt::NumericError);
}

TEST(Logistic, LimitsAndSymmetry) {
  EXPECT_DOUBLE_EQ(lt::logistic(0.0), 0.5);
  EXPECT_NEAR(lt::logistic(3.0) + lt::logistic(-3.0), 1.0, 1e-15);
  EXPECT_GT(lt::logistic(800.0), 0.999);
  EXPECT_LT(lt::logistic(-800.0), 1e-300 + 1e-12);
  double prev = 0.0;
  for (double x = -30; x <= 30; x += 0.5) {
    const double v = lt::logistic(x);
    EXPECT_GE(v, prev);
    prev = v;
  }
}

TEST(Rng, DeterministicAndInRange) {
  lt::Rng a(42);
  lt::Rng b(42);
  for (int i = 0; i < 100; ++i) {
    const double u = a.uniform();
    EXPECT_EQ(u, b.uniform());
    EXPECT_GE(u, 0.0);
    EXPECT_LT(u, 1.0);
    EXPECT_LT(a.below(7), 7u);
    b.below(7);
  }
}

TEST(Tensor, WindowAndFinite) {
  lt::Rng rng(4);
  const auto t = random_tensor(rng, 5, 6, 3);
  const auto w = t.window(1, 2, 3, 2);
  EXPECT_EQ(w.shape_string(), "3x2x3");
  for (std::size_t r = 0; r < 3; ++r)
    for (std::size_t c = 0; c < 2; ++c)
      for (std::size_t ch = 0; ch < 3; ++ch)
        EXPECT_EQ(w(r, c, ch), t(r + 1, c + 2, ch));
  EXPECT_TRUE(lt::all_finite(t.data()));
  std::vector<double> bad{1.0, std::numeric_limits<double>::infinity()};
  EXPECT_FALSE(lt::all_finite(bad));
  EXPECT_ANY_THROW(lt::Tensor3(2, 2, 2, std::vector<double>(7)));
}
