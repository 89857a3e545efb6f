#include <gtest/gtest.h>

#include <longtrack/errors.hpp>
#include <longtrack/search.hpp>
#include <longtrack/selfeval.hpp>

#include <cmath>

#include "test_support.hpp"

namespace lt = longtrack;
using lt::testing::separable_dataset;

namespace {

std::vector<lt::Grid2> random_maps(lt::Rng& rng, std::size_t k,
                                   std::size_t side) {
  std::vector<lt::Grid2> maps;
  for (std::size_t t = 0; t < k; ++t) {
    lt::Grid2 m(side, side);
    for (double& v : m.data()) v = rng.uniform(-2, 2);
    maps.push_back(std::move(m));
  }
  return maps;
}

lt::SelfEvalDims tiny_dims() {
  lt::SelfEvalDims d;
  d.sequence_length = 3;
  d.map_side = 4;
  d.kernel = 2;
  d.conv1_channels = 2;
  d.conv2_channels = 3;
  d.hidden = 4;
  d.mlp_hidden = 3;
  return d;
}

// Parameter block boundaries of the flat layout, in order.
std::vector<std::pair<std::string, std::size_t>> blocks(
    const lt::SelfEvalDims& d) {
  const std::size_t k2 = d.kernel * d.kernel;
  const std::size_t h = d.hidden;
  return {{"conv1", d.conv1_channels * k2 + d.conv1_channels},
          {"conv2", d.conv2_channels * d.conv1_channels * k2 + d.conv2_channels},
          {"lstm1", 4 * h * d.encoding_size() + 4 * h * h + 4 * h},
          {"lstm2", 4 * h * h + 4 * h * h + 4 * h},
          {"mlp", d.mlp_hidden * h + d.mlp_hidden + d.mlp_hidden + 1}};
}

}  // namespace

TEST(SelfEvalNet, ParameterCount) {
  const lt::SelfEvalDims d;
  std::size_t total = 0;
  for (const auto& b : blocks(d)) total += b.second;
  EXPECT_EQ(d.parameter_count(), total);
  EXPECT_EQ(lt::SelfEvalNet(d).params().size(), total);
  EXPECT_EQ(d.encoding_size(), 16u * 5 * 5);
}

TEST(SelfEvalNet, ZeroMapsGiveHalf) {
  const lt::SelfEvalDims d;
  const std::vector<lt::Grid2> zeros(10, lt::Grid2(9, 9));
  EXPECT_EQ(lt::SelfEvalNet(d).forward(zeros), 0.5);
  EXPECT_EQ(lt::SelfEvalNet::initialized(d, 3).forward(zeros), 0.5);
}

TEST(SelfEvalNet, ForwardDeterministicAndBounded) {
  lt::Rng rng(1);
  const auto net = lt::SelfEvalNet::initialized({}, 1);
  for (int i = 0; i < 20; ++i) {
    const auto maps = random_maps(rng, 10, 9);
    const double a = net.forward(maps);
    EXPECT_EQ(a, net.forward(maps));
    EXPECT_GT(a, 0.0);
    EXPECT_LT(a, 1.0);
  }
}

TEST(SelfEvalNet, OrderSensitive) {
  int changed = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    lt::Rng rng(seed + 1000);
    const auto net = lt::SelfEvalNet::initialized({}, seed);
    auto maps = random_maps(rng, 10, 9);
    const double a = net.forward(maps);
    std::reverse(maps.begin(), maps.end());
    if (net.forward(maps) != a) ++changed;
  }
  EXPECT_GE(changed, 95);
}

TEST(SelfEvalNet, ShapeErrors) {
  const lt::SelfEvalNet net;
  EXPECT_THROW(net.forward(std::vector<lt::Grid2>(9, lt::Grid2(9, 9))),
               lt::ShapeError);
  EXPECT_THROW(net.forward(std::vector<lt::Grid2>(10, lt::Grid2(5, 5))),
               lt::ShapeError);
  lt::SelfEvalDims bad;
  bad.map_side = 4;
  EXPECT_THROW(bad.validate(), lt::ConfigError);
}

TEST(SelfEvalSample, LabelFromIou) {
  std::vector<lt::Grid2> maps(10, lt::Grid2(9, 9));
  EXPECT_EQ(lt::EvalSample::make(maps, 0.5).label, 0);
  EXPECT_EQ(lt::EvalSample::make(maps, 0.5000001).label, 1);
  EXPECT_EQ(lt::EvalSample::make(maps, 0.0).label, 0);
}

TEST(SelfEvalWeights, Bands) {
  const lt::SampleWeights w;
  EXPECT_EQ(w.low, 1.0);
  EXPECT_EQ(w.mid, 0.05);
  EXPECT_EQ(w.high, 0.3);
  EXPECT_EQ(w.for_iou(0.29), 1.0);
  EXPECT_EQ(w.for_iou(0.3), 0.05);
  EXPECT_EQ(w.for_iou(0.5), 0.05);
  EXPECT_EQ(w.for_iou(0.51), 0.3);
}

TEST(SelfEvalLoss, HalfProbabilityIsLn2) {
  const lt::SelfEvalNet net;
  const std::vector<lt::EvalSample> batch{
      lt::EvalSample::make(std::vector<lt::Grid2>(10, lt::Grid2(9, 9)), 0.1)};
  EXPECT_NEAR(lt::loss(net, batch), std::log(2.0), 1e-15);
}

TEST(SelfEvalLoss, ConfidentCorrectApproachesZero) {
  lt::SelfEvalNet net;
  net.params().back() = 40.0;  // output bias
  const std::vector<lt::EvalSample> batch{
      lt::EvalSample::make(std::vector<lt::Grid2>(10, lt::Grid2(9, 9)), 0.9)};
  EXPECT_LT(lt::loss(net, batch), 1e-6);
  net.params().back() = -1000.0;  // confidently wrong, clamped
  const double l = lt::loss(net, batch);
  EXPECT_TRUE(std::isfinite(l));
  EXPECT_NEAR(l, -0.3 * std::log(lt::kProbabilityClamp), 1e-9);
}

TEST(SelfEvalLoss, MidBandWeighsOneTwentieth) {
  lt::Rng rng(5);
  const auto net = lt::SelfEvalNet::initialized({}, 5);
  const auto maps = random_maps(rng, 10, 9);
  const std::vector<lt::EvalSample> low{lt::EvalSample::make(maps, 0.2)};
  const std::vector<lt::EvalSample> mid{lt::EvalSample::make(maps, 0.4)};
  EXPECT_NEAR(lt::loss(net, mid), 0.05 * lt::loss(net, low), 1e-15);
}

TEST(SelfEvalLoss, UnitWeightsGivePlainBce) {
  lt::Rng rng(6);
  const auto net = lt::SelfEvalNet::initialized({}, 6);
  std::vector<lt::EvalSample> batch;
  double expected = 0.0;
  for (double iou : {0.1, 0.4, 0.7, 0.9}) {
    batch.push_back(lt::EvalSample::make(random_maps(rng, 10, 9), iou));
    const double g = net.forward(batch.back().maps);
    expected -= batch.back().label == 1 ? std::log(g) : std::log(1 - g);
  }
  EXPECT_NEAR(lt::loss(net, batch, {1.0, 1.0, 1.0}), expected / 4, 1e-12);
}

TEST(SelfEvalBackward, FiniteDifferencePerBlock) {
  const auto d = tiny_dims();
  lt::Rng rng(7);
  auto net = lt::SelfEvalNet::initialized(d, 7);
  for (double& p : net.params()) p += rng.uniform(-0.3, 0.3);
  std::vector<lt::EvalSample> batch;
  for (double iou : {0.1, 0.4, 0.8}) {
    batch.push_back(lt::EvalSample::make(random_maps(rng, 3, 4), iou));
  }
  const auto lg = lt::backward(net, batch);
  EXPECT_NEAR(lg.loss, lt::loss(net, batch), 1e-12);
  const std::vector<double> theta(net.params().begin(), net.params().end());
  std::size_t offset = 0;
  for (const auto& [name, size] : blocks(d)) {
    const lt::ScalarFunction f = [&](std::span<const double> x) {
      auto probe = net;
      std::copy(x.begin(), x.end(), probe.params().begin() + offset);
      return lt::loss(probe, batch);
    };
    const std::span<const double> sub(theta.data() + offset, size);
    const std::span<const double> g(lg.gradient.data() + offset, size);
    EXPECT_LT(lt::finite_diff_check(f, sub, g, 1e-5), 1e-4) << name;
    offset += size;
  }
  EXPECT_EQ(offset, theta.size());
}

TEST(SelfEvalBackward, ZeroWeightsZeroGradient) {
  lt::Rng rng(8);
  const auto net = lt::SelfEvalNet::initialized({}, 8);
  std::vector<lt::EvalSample> batch{lt::EvalSample::make(random_maps(rng, 10, 9), 0.1),
                                    lt::EvalSample::make(random_maps(rng, 10, 9), 0.9)};
  const auto lg = lt::backward(net, batch, {0.0, 0.0, 0.0});
  for (double g : lg.gradient) EXPECT_EQ(g, 0.0);
}

TEST(SelfEvalBackward, DuplicateSampleMatchesSingle) {
  lt::Rng rng(9);
  const auto net = lt::SelfEvalNet::initialized({}, 9);
  const auto s = lt::EvalSample::make(random_maps(rng, 10, 9), 0.7);
  const std::vector<lt::EvalSample> one{s};
  const std::vector<lt::EvalSample> two{s, s};
  const auto a = lt::backward(net, one);
  const auto b = lt::backward(net, two);
  ASSERT_EQ(a.gradient.size(), b.gradient.size());
  for (std::size_t i = 0; i < a.gradient.size(); ++i) {
    EXPECT_NEAR(a.gradient[i], b.gradient[i], 1e-15 + 1e-12 * std::abs(a.gradient[i]));
  }
}

TEST(SelfEvalTrain, SeparableSetIsLearnedAndDeterministic) {
  const auto data = separable_dataset(240, 11);
  lt::TrainConfig cfg;
  cfg.epochs = 12;
  cfg.seed = 4;
  const auto a = lt::train(data, cfg);
  EXPECT_GE(a.best_validation_accuracy, 0.9);
  EXPECT_EQ(a.history.size(), 12u);
  EXPECT_EQ(a.train_size + a.validation_size, data.size());
  EXPECT_EQ(a.validation_size, 40u);  // 2 of 12 groups
  const auto b = lt::train(data, cfg);
  EXPECT_EQ(a.net, b.net);
  // Training loss falls epoch over epoch at the start.
  for (std::size_t e = 1; e < 10 && e < a.history.size(); ++e) {
    EXPECT_LT(a.history[e].train_loss, a.history[e - 1].train_loss) << e;
  }
  const auto fresh = separable_dataset(100, 12);
  EXPECT_GE(lt::accuracy(a.net, fresh), 0.9);
}

TEST(SelfEvalTrain, SingleClassThrows) {
  auto data = separable_dataset(24, 1);
  for (auto& s : data) s.label = 1;
  EXPECT_THROW(lt::train(data, {}), lt::DataError);
}

TEST(SelfEvalApprove, ColdStartAndBoundary) {
  const lt::SelfEvalNet zero;  // outputs exactly 0.5
  lt::TrackerState state;
  state.history_capacity = 10;
  for (int i = 0; i < 9; ++i) {
    state.push_map(lt::Grid2(9, 9, 1.0));
    EXPECT_FALSE(lt::approve(zero, state));
  }
  state.push_map(lt::Grid2(9, 9, 1.0));
  EXPECT_TRUE(lt::approve(zero, state));
}

TEST(SelfEvalApprove, AgreesWithLabelsAfterTraining) {
  lt::TrainConfig cfg;
  cfg.epochs = 10;
  const auto net = lt::train(separable_dataset(240, 21), cfg).net;
  const auto test = separable_dataset(100, 22);
  int agree = 0;
  for (const auto& s : test) {
    lt::TrackerState state;
    for (const auto& m : s.maps) state.push_map(m);
    agree += (lt::approve(net, state) ? 1 : 0) == s.label ? 1 : 0;
  }
  EXPECT_GE(agree, 90);
}

TEST(SelfEvalMaps, CanonicalizeAndDihedral) {
  lt::Grid2 m(5, 5);
  for (std::size_t r = 0; r < 5; ++r)
    for (std::size_t c = 0; c < 5; ++c) m(r, c) = 10.0 * r + c;
  EXPECT_EQ(lt::canonicalize_map(m, 5), m);
  const auto big = lt::canonicalize_map(m, 9);
  EXPECT_EQ(big.height(), 9u);
  EXPECT_DOUBLE_EQ(big(0, 0), m(0, 0));
  EXPECT_DOUBLE_EQ(big(8, 8), m(4, 4));
  EXPECT_DOUBLE_EQ(big(4, 4), m(2, 2));
  EXPECT_EQ(lt::dihedral(m, 0), m);
  EXPECT_EQ(lt::dihedral(m, 1)(0, 0), m(4, 0));
  EXPECT_EQ(lt::dihedral(m, 2)(0, 0), m(0, 4));
  EXPECT_EQ(lt::dihedral(m, 4)(1, 3), m(3, 1));
  for (unsigned k = 0; k < 8; ++k) {
    auto sorted = lt::dihedral(m, k);
    std::vector<double> a(sorted.data().begin(), sorted.data().end());
    std::vector<double> b(m.data().begin(), m.data().end());
    std::sort(a.begin(), a.end());
    EXPECT_EQ(a, b) << k;
  }
}

TEST(SelfEvalModel, SaveLoadRoundTrip) {
  lt::testing::TempDir dir("model");
  const auto net = lt::SelfEvalNet::initialized(tiny_dims(), 3);
  lt::save_model(net, dir.path() / "m.bin");
  EXPECT_EQ(lt::load_model(dir.path() / "m.bin"), net);
  EXPECT_THROW(lt::load_model(dir.path() / "missing.bin"), lt::DataError);
}
