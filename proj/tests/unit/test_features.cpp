#include <gtest/gtest.h>

#include <longtrack/errors.hpp>
#include <longtrack/features.hpp>
#include <longtrack/image.hpp>

#include <cmath>

#include "test_support.hpp"

namespace lt = longtrack;
using lt::testing::random_image;
using lt::testing::random_tensor;

TEST(Extract, ShapeFollowsStride) {
  const auto f32 = lt::extract(random_image(1, 32, 32));
  EXPECT_EQ(f32.shape_string(), "4x4x8");
  const auto f64 = lt::extract(random_image(2, 64, 64));
  EXPECT_EQ(f64.shape_string(), "8x8x8");
  const auto odd = lt::extract(random_image(3, 37, 70));
  EXPECT_EQ(odd.shape_string(), "4x8x8");
  EXPECT_EQ(lt::default_extractor()->stride(), 8u);
  EXPECT_EQ(lt::default_extractor()->channels(), 8u);
}

TEST(Extract, TooSmallThrows) {
  EXPECT_THROW(lt::extract(lt::ImagePatch(7, 32)), lt::ShapeError);
  EXPECT_THROW(lt::extract(lt::ImagePatch(32, 7)), lt::ShapeError);
}

TEST(Extract, ConstantPatchHasNoGradientEnergy) {
  const auto raw = lt::extract_raw(lt::ImagePatch(32, 40, 1, 173));
  for (std::size_t r = 0; r < raw.height(); ++r) {
    for (std::size_t c = 0; c < raw.width(); ++c) {
      EXPECT_NEAR(raw(r, c, 0), 173.0 / 255.0, 1e-12);
      for (std::size_t ch = 1; ch < 8; ++ch) {
        EXPECT_EQ(raw(r, c, ch), 0.0);
      }
    }
  }
  // Normalization maps flat channels to zero rather than NaN.
  const auto norm = lt::extract(lt::ImagePatch(32, 40, 1, 173));
  for (double v : norm.data()) {
    EXPECT_EQ(v, 0.0);
  }
}

TEST(Extract, Deterministic) {
  const auto img = random_image(8, 48, 48);
  EXPECT_EQ(lt::extract(img), lt::extract(img));
}

TEST(Extract, NormalizedChannelsAreStandardized) {
  lt::FeatureExtractorSpec spec;
  spec.variance_floor = 0.0;
  const auto f = lt::extract(random_image(12, 64, 64), spec);
  for (std::size_t ch = 0; ch < f.channels(); ++ch) {
    double mean = 0.0;
    double sq = 0.0;
    const double n = static_cast<double>(f.height() * f.width());
    for (std::size_t r = 0; r < f.height(); ++r) {
      for (std::size_t c = 0; c < f.width(); ++c) {
        mean += f(r, c, ch);
        sq += f(r, c, ch) * f(r, c, ch);
      }
    }
    EXPECT_NEAR(mean / n, 0.0, 1e-9);
    EXPECT_NEAR(sq / n, 1.0, 1e-9);
  }
}

TEST(Extract, VarianceFloorShrinksLowContrastChannels) {
  const auto img = random_image(12, 64, 64);
  const auto raw = lt::extract_raw(img);
  const auto f = lt::extract(img);
  const double floor = lt::FeatureExtractorSpec{}.variance_floor;
  const double n = static_cast<double>(f.height() * f.width());
  for (std::size_t ch = 0; ch < f.channels(); ++ch) {
    double mean = 0.0;
    for (std::size_t r = 0; r < raw.height(); ++r) {
      for (std::size_t c = 0; c < raw.width(); ++c) {
        mean += raw(r, c, ch);
      }
    }
    mean /= n;
    double var = 0.0;
    double sq = 0.0;
    for (std::size_t r = 0; r < raw.height(); ++r) {
      for (std::size_t c = 0; c < raw.width(); ++c) {
        var += (raw(r, c, ch) - mean) * (raw(r, c, ch) - mean);
        sq += f(r, c, ch) * f(r, c, ch);
      }
    }
    var /= n;
    EXPECT_NEAR(sq / n, var / (var + floor), 1e-9);
  }
}

TEST(Extract, ColourUsesLuma) {
  auto rgb = random_image(5, 32, 32, 3);
  EXPECT_EQ(lt::extract(rgb), lt::extract(lt::to_gray(rgb)));
}

TEST(Extract, TranslationCovariantByOneCell) {
  const auto big = random_image(77, 64, 80);
  lt::ImagePatch a(64, 64);
  lt::ImagePatch b(64, 64);
  for (std::size_t r = 0; r < 64; ++r) {
    for (std::size_t c = 0; c < 64; ++c) {
      a(r, c) = big(r, c);
      b(r, c) = big(r, c + 8);
    }
  }
  const auto fa = lt::extract_raw(a);
  const auto fb = lt::extract_raw(b);
  // Skip cells whose support touches either patch border.
  for (std::size_t r = 1; r + 1 < 8; ++r) {
    for (std::size_t c = 1; c + 2 < 8; ++c) {
      for (std::size_t ch = 0; ch < 8; ++ch) {
        EXPECT_NEAR(fb(r, c, ch), fa(r, c + 1, ch), 1e-12)
            << r << "," << c << "," << ch;
      }
    }
  }
}

TEST(Extract, CropThenExtractIsFinite) {
  const auto frame = random_image(4, 120, 160);
  lt::Rng rng(4);
  for (int i = 0; i < 50; ++i) {
    const lt::BoundingBox region{rng.uniform(-100, 260), rng.uniform(-100, 220),
                                 rng.uniform(8, 200), rng.uniform(8, 200)};
    auto patch = lt::resize_bilinear(lt::crop_with_padding(frame, region), 32,
                                     32);
    EXPECT_TRUE(lt::all_finite(lt::extract(patch).data()));
  }
}

TEST(Project, IdentityAndScaling) {
  lt::Rng rng(6);
  const auto f = random_tensor(rng, 4, 4, 8);
  const auto id = lt::ProjectionParams::identity(8);
  EXPECT_TRUE(id.is_identity());
  EXPECT_EQ(id.bias_logit, 0.0);
  EXPECT_EQ(lt::project(f, id), f);
  auto twice = id;
  for (double& w : twice.weight) w *= 2.0;
  const auto g = lt::project(f, twice);
  for (std::size_t i = 0; i < f.size(); ++i) {
    EXPECT_EQ(g.data()[i], 2.0 * f.data()[i]);
  }
}

TEST(Project, MatchesMatrixVectorOracle) {
  lt::Rng rng(10);
  const auto f = random_tensor(rng, 4, 4, 8);
  lt::ProjectionParams p = lt::ProjectionParams::identity(8);
  for (double& w : p.weight) w = rng.uniform(-1, 1);
  const auto out = lt::project(f, p);
  for (std::size_t r = 0; r < 4; ++r) {
    for (std::size_t c = 0; c < 4; ++c) {
      for (std::size_t o = 0; o < 8; ++o) {
        double acc = 0.0;
        for (std::size_t i = 0; i < 8; ++i) acc += p.w(o, i) * f(r, c, i);
        EXPECT_NEAR(out(r, c, o), acc, 1e-12);
      }
    }
  }
}

TEST(Project, LinearInFeaturesAndWeight) {
  lt::Rng rng(13);
  const auto f1 = random_tensor(rng, 3, 3, 8);
  const auto f2 = random_tensor(rng, 3, 3, 8);
  auto p1 = lt::ProjectionParams::identity(8);
  auto p2 = lt::ProjectionParams::identity(8);
  for (double& w : p1.weight) w = rng.uniform(-1, 1);
  for (double& w : p2.weight) w = rng.uniform(-1, 1);
  lt::Tensor3 fsum(3, 3, 8);
  for (std::size_t i = 0; i < fsum.size(); ++i)
    fsum.data()[i] = f1.data()[i] + f2.data()[i];
  auto psum = p1;
  for (std::size_t i = 0; i < psum.weight.size(); ++i)
    psum.weight[i] += p2.weight[i];
  const auto a = lt::project(fsum, p1);
  const auto b1 = lt::project(f1, p1);
  const auto b2 = lt::project(f2, p1);
  const auto c = lt::project(f1, psum);
  const auto c2 = lt::project(f1, p2);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_NEAR(a.data()[i], b1.data()[i] + b2.data()[i], 1e-12);
    EXPECT_NEAR(c.data()[i], b1.data()[i] + c2.data()[i], 1e-12);
  }
}

TEST(Project, ChannelMismatchThrows) {
  EXPECT_THROW(lt::project(lt::Tensor3(2, 2, 6),
                           lt::ProjectionParams::identity(8)),
               lt::ShapeError);
}

TEST(Project, FlattenRoundTrip) {
  auto p = lt::ProjectionParams::identity(8);
  p.weight[3] = 0.25;
  p.bias_logit = -1.5;
  const auto flat = p.flatten();
  ASSERT_EQ(flat.size(), p.parameter_count());
  EXPECT_EQ(flat.size(), 65u);
  EXPECT_EQ(flat.back(), -1.5);
  EXPECT_EQ(lt::ProjectionParams::unflatten(8, 8, flat), p);
}

TEST(Crop, InsideIsExactCopy) {
  const auto frame = random_image(21, 40, 50);
  const auto box = lt::BoundingBox::from_corners(10, 5, 30, 25);
  const auto patch = lt::crop_with_padding(frame, box);
  ASSERT_EQ(patch.height(), 20u);
  ASSERT_EQ(patch.width(), 20u);
  for (std::size_t r = 0; r < 20; ++r)
    for (std::size_t c = 0; c < 20; ++c)
      EXPECT_EQ(patch(r, c), frame(5 + r, 10 + c));
}

TEST(Crop, OutsideIsMeanFilled) {
  const auto frame = random_image(22, 40, 50);
  const auto mean = lt::mean_intensity(frame);
  ASSERT_EQ(mean.size(), 1u);
  double acc = 0.0;
  for (auto v : frame.data()) acc += v;
  EXPECT_EQ(mean[0], static_cast<int>(std::floor(acc / 2000.0 + 0.5)));
  const auto patch =
      lt::crop_with_padding(frame, lt::BoundingBox::from_corners(100, 100, 116, 112));
  ASSERT_EQ(patch.height(), 12u);
  ASSERT_EQ(patch.width(), 16u);
  for (auto v : patch.data()) EXPECT_EQ(v, mean[0]);
}

TEST(Crop, HalfOutsidePerPixel) {
  const auto frame = random_image(23, 30, 30);
  const auto mean = lt::mean_intensity(frame)[0];
  const auto patch =
      lt::crop_with_padding(frame, lt::BoundingBox::from_corners(20, 4, 40, 14));
  ASSERT_EQ(patch.width(), 20u);
  for (std::size_t r = 0; r < 10; ++r) {
    for (std::size_t c = 0; c < 20; ++c) {
      const std::size_t x = 20 + c;
      EXPECT_EQ(patch(r, c), x < 30 ? frame(4 + r, x) : mean);
    }
  }
}

TEST(Crop, DegenerateRegionThrows) {
  const auto frame = random_image(1, 16, 16);
  EXPECT_THROW(lt::crop_with_padding(frame, {8, 8, 0, 4}), lt::ShapeError);
  EXPECT_THROW(lt::crop_with_padding(frame, {8, 8, 4, -1}), lt::ShapeError);
}

TEST(Resize, IdentityDims) {
  const auto img = random_image(31, 17, 23, 3);
  EXPECT_EQ(lt::resize_bilinear(img, 17, 23), img);
}

TEST(Resize, CheckerboardCentreRoundsHalfUp) {
  lt::ImagePatch cb(2, 2);
  cb(0, 0) = 0;
  cb(0, 1) = 255;
  cb(1, 0) = 255;
  cb(1, 1) = 0;
  const auto out = lt::resize_bilinear(cb, 3, 3);
  EXPECT_EQ(out(1, 1), 128);
  EXPECT_EQ(out(0, 0), 0);
  EXPECT_EQ(out(0, 2), 255);
  EXPECT_EQ(out(0, 1), 128);
}

TEST(Resize, ConstantStaysConstant) {
  const lt::ImagePatch img(50, 70, 1, 91);
  const auto out = lt::resize_bilinear(img, 13, 9);
  for (auto v : out.data()) EXPECT_EQ(v, 91);
}

TEST(Resize, SampleRegionMatchesCropThenResize) {
  const auto img = random_image(41, 60, 80);
  const lt::GrayFrame gf(img);
  lt::Rng rng(41);
  for (int i = 0; i < 30; ++i) {
    const lt::BoundingBox region{rng.uniform(-30, 110), rng.uniform(-30, 90),
                                 rng.uniform(4, 120), rng.uniform(4, 120)};
    EXPECT_EQ(lt::sample_region(gf, region, 32, 32),
              lt::resize_bilinear(lt::crop_with_padding(img, region), 32, 32));
  }
}

TEST(Gray, LumaWeights) {
  lt::ImagePatch rgb(1, 3, 3);
  const std::uint8_t px[3][3] = {{255, 0, 0}, {0, 255, 0}, {10, 20, 30}};
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t k = 0; k < 3; ++k) rgb(0, c, k) = px[c][k];
  const auto g = lt::to_gray(rgb);
  for (std::size_t c = 0; c < 3; ++c) {
    const double y = 0.299 * px[c][0] + 0.587 * px[c][1] + 0.114 * px[c][2];
    EXPECT_EQ(g(0, c), static_cast<int>(std::floor(y + 0.5)));
  }
}
