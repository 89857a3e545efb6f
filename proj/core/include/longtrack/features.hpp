#pragma once

#include <cstddef>
#include <memory>
#include <vector>

#include "longtrack/image.hpp"
#include "longtrack/tensor.hpp"

namespace longtrack {

/// Layout of the default hand-crafted branch features: per 8x8 cell,
/// 1 intensity + 1 gradient magnitude + 6 unsigned orientation bins.
struct FeatureExtractorSpec {
  std::size_t cell_size = 8;
  std::size_t orientation_bins = 6;
  bool normalize = true;
  // Added to each channel variance before dividing. Without it, upsampled
  // low-contrast probes get stretched to unit variance and over-score.
  double variance_floor = 3e-6;

  std::size_t channels() const noexcept { return 2 + orientation_bins; }
};

/// Branch network interface. Implementations map an image patch to an
/// (h / stride) x (w / stride) x channels tensor.
class FeatureExtractor {
 public:
  virtual ~FeatureExtractor() = default;
  virtual Tensor3 extract(const ImagePatch& patch) const = 0;
  virtual std::size_t stride() const noexcept = 0;
  virtual std::size_t channels() const noexcept = 0;
};

class GradientChannelExtractor final : public FeatureExtractor {
 public:
  explicit GradientChannelExtractor(FeatureExtractorSpec spec = {});

  Tensor3 extract(const ImagePatch& patch) const override;
  std::size_t stride() const noexcept override { return spec_.cell_size; }
  std::size_t channels() const noexcept override { return spec_.channels(); }
  const FeatureExtractorSpec& spec() const noexcept { return spec_; }

 private:
  FeatureExtractorSpec spec_;
  std::vector<double> sin_bounds_;
  std::vector<double> cos_bounds_;
};

/// Cell-pooled channels before per-patch normalization. RGB input is
/// converted to luma first. Throws ShapeError if the patch is smaller than
/// one cell in either axis.
Tensor3 extract_raw(const ImagePatch& patch,
                    const FeatureExtractorSpec& spec = {});

/// extract_raw followed by per-channel zero-mean unit-variance
/// normalization over all cells, scaled by 1 / sqrt(var + variance_floor).
/// Channels with (near) zero variance become all-zero.
Tensor3 extract(const ImagePatch& patch, const FeatureExtractorSpec& spec = {});

void normalize_channels(Tensor3& features, double variance_floor = 0.0);

std::shared_ptr<const FeatureExtractor> default_extractor();

/// Learnable per-position channel mixing applied to both branches of the
/// stage-2 similarity, plus the logit offset used to squash raw scores.
struct ProjectionParams {
  std::size_t out_channels = 0;
  std::size_t in_channels = 0;
  std::vector<double> weight;  // out x in, row-major
  double bias_logit = 0.0;

  static ProjectionParams identity(std::size_t channels);

  double w(std::size_t o, std::size_t i) const noexcept {
    return weight[o * in_channels + i];
  }
  bool is_identity() const noexcept;
  std::size_t parameter_count() const noexcept { return weight.size() + 1; }

  /// Flat layout: weight entries row-major, then bias_logit.
  std::vector<double> flatten() const;
  static ProjectionParams unflatten(std::size_t out_channels,
                                    std::size_t in_channels,
                                    std::span<const double> flat);

  bool operator==(const ProjectionParams&) const = default;
};

/// out[i,j,:] = weight * features[i,j,:]. Throws ShapeError on channel
/// mismatch.
Tensor3 project(const Tensor3& features, const ProjectionParams& params);

}  // namespace longtrack
