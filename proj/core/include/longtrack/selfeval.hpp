#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "longtrack/tensor.hpp"

namespace longtrack {

struct TrackerState;

/// Layer sizes of the self-evaluation classifier. Two valid (unpadded)
/// stride-1 convolutions with ReLU encode each map; a two-layer LSTM runs
/// over the sequence; a two-layer MLP reads the last hidden state.
struct SelfEvalDims {
  std::size_t sequence_length = 10;  // K
  std::size_t map_side = 9;
  std::size_t kernel = 3;
  std::size_t conv1_channels = 8;
  std::size_t conv2_channels = 16;
  std::size_t hidden = 32;
  std::size_t mlp_hidden = 16;

  std::size_t conv1_side() const noexcept { return map_side - kernel + 1; }
  std::size_t conv2_side() const noexcept { return conv1_side() - kernel + 1; }
  std::size_t encoding_size() const noexcept {
    return conv2_channels * conv2_side() * conv2_side();
  }
  std::size_t parameter_count() const noexcept;
  /// Throws ConfigError when the maps are too small for the kernels.
  void validate() const;

  bool operator==(const SelfEvalDims&) const = default;
};

class SelfEvalNet {
 public:
  /// All parameters zero.
  explicit SelfEvalNet(SelfEvalDims dims = {});
  /// Seeded Xavier/He initialization; biases zero except LSTM forget
  /// gates, which start at 1.
  static SelfEvalNet initialized(SelfEvalDims dims, std::uint64_t seed);

  /// Probability that the current prediction is correct, in (0, 1).
  /// Throws ShapeError on a wrong sequence length or map size.
  double forward(std::span<const Grid2> maps) const;

  const SelfEvalDims& dims() const noexcept { return dims_; }
  std::span<const double> params() const noexcept { return params_; }
  std::span<double> params() noexcept { return params_; }

  bool operator==(const SelfEvalNet&) const = default;

 private:
  SelfEvalDims dims_;
  std::vector<double> params_;
};

/// Weights by IoU band: below 0.3, within [0.3, 0.5], above 0.5.
struct SampleWeights {
  double low = 1.0;
  double mid = 0.05;
  double high = 0.3;

  double for_iou(double iou) const noexcept {
    if (iou < 0.3) {
      return low;
    }
    if (iou <= 0.5) {
      return mid;
    }
    return high;
  }
};

struct EvalSample {
  std::vector<Grid2> maps;
  int label = 0;      // 1 iff iou > 0.5
  double iou = 0.0;
  std::size_t group = 0;  // source video, used for the train/val split

  static EvalSample make(std::vector<Grid2> maps, double iou,
                         std::size_t group = 0);
};

/// Probabilities are clamped to [1e-7, 1 - 1e-7] before the log.
inline constexpr double kProbabilityClamp = 1e-7;

/// -(1/n) sum w_i [y_i log g_i + (1 - y_i) log(1 - g_i)].
double loss(const SelfEvalNet& net, std::span<const EvalSample> batch,
            const SampleWeights& weights = {});

struct LossAndGradient {
  double loss = 0.0;
  std::vector<double> gradient;
};

/// Exact gradient of `loss` with respect to every parameter
/// (backpropagation through time across the K steps).
LossAndGradient backward(const SelfEvalNet& net,
                         std::span<const EvalSample> batch,
                         const SampleWeights& weights = {});

struct TrainConfig {
  SampleWeights weights;
  std::size_t epochs = 30;
  std::size_t batch_size = 16;
  double learning_rate = 0.01;
  double momentum = 0.9;
  double validation_fraction = 1.0 / 6.0;
  double weight_decay = 1e-4;
  // Random flips/rotations applied to the whole map sequence of a sample.
  bool augment = true;
  std::uint64_t seed = 1;
  SelfEvalDims dims;
};

struct EpochMetrics {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double train_accuracy = 0.0;
  double validation_loss = 0.0;
  double validation_accuracy = 0.0;
};

struct TrainResult {
  SelfEvalNet net;
  std::vector<EpochMetrics> history;
  std::size_t best_epoch = 0;
  double best_validation_accuracy = 0.0;
  std::size_t train_size = 0;
  std::size_t validation_size = 0;
};

/// Offline training with momentum SGD. Groups (source videos) are split
/// 5/6 train, 1/6 validation; the parameters with the best validation
/// accuracy are returned. Throws DataError when only one class is present.
TrainResult train(std::span<const EvalSample> dataset,
                  const TrainConfig& config);

/// Fraction of samples where (forward >= 0.5) matches the label.
double accuracy(const SelfEvalNet& net, std::span<const EvalSample> samples);

/// Approves the current prediction iff the history holds K maps and the
/// classifier output is >= 0.5.
bool approve(const SelfEvalNet& net, const TrackerState& state);

/// One of the 8 symmetries of the square (k in [0, 8)); k = 0 is identity.
Grid2 dihedral(const Grid2& map, unsigned k);

/// Bilinear resample of a map to side x side (identity when already so).

Grid2 canonicalize_map(const Grid2& map, std::size_t side);

/// Model file: one JSON header line, then little-endian float64 params.
void save_model(const SelfEvalNet& net, const std::filesystem::path& path);
SelfEvalNet load_model(const std::filesystem::path& path);

}  // namespace longtrack
