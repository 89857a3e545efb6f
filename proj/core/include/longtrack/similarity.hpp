#pragma once

#include <cstddef>

#include "longtrack/features.hpp"
#include "longtrack/geometry.hpp"
#include "longtrack/image.hpp"
#include "longtrack/tensor.hpp"

namespace longtrack {

/// Resolution configuration of one similarity evaluation: the query is an
/// l x l patch, probes are resized to (t * l) x (t * l).
struct SimilarityConfig {
  std::size_t query_side = 32;
  std::size_t probe_factor = 2;
  /// true: stage-2 similarity with the live ProjectionParams.
  bool use_projection = false;

  std::size_t probe_side() const noexcept { return probe_factor * query_side; }
  /// Side of the square similarity map for a given feature stride.
  std::size_t map_side(std::size_t stride) const noexcept {
    return (probe_side() - query_side) / stride + 1;
  }
};

/// Affine calibration from correlation to an unbounded raw score:
/// raw = gain * (corr / D - center), D = number of query feature elements.
/// corr / D is the mean channel product, 1 for a perfect match of
/// normalized features.
struct ScoreCalibration {
  double gain = 8.0;
  double center = 0.6;

  double raw(double correlation, std::size_t query_elements) const noexcept {
    return gain * (correlation / static_cast<double>(query_elements) - center);
  }
};

struct ScoredBox {
  BoundingBox box;
  double raw_score = 0.0;
  double normalized_score = 0.5;
};

/// logistic(raw + bias_logit).
double normalize_score(double raw_score, double bias_logit) noexcept;

/// Cross-correlation of query and probe features. With a projection, both
/// branches are mixed by it first (the two branches share parameters).
Grid2 correlate(const Tensor3& query_feats, const Tensor3& probe_feats,
                const ProjectionParams* projection = nullptr);

/// Full similarity map for an already-resized probe patch. The probe must
/// be (t * l) pixels per side. `projection` is used only when
/// config.use_projection is set.
Grid2 similarity_map(const Tensor3& query_feats, const ImagePatch& probe_patch,
                     const SimilarityConfig& config,
                     const ProjectionParams* projection = nullptr,
                     const FeatureExtractor& extractor = *default_extractor());

struct MapCell {
  std::size_t row = 0;
  std::size_t col = 0;
  bool operator==(const MapCell&) const = default;
};

/// Frame-coordinate box of the candidate window at `cell` of a map
/// computed over `probe_region`. Throws ShapeError when the cell lies
/// outside the map.
BoundingBox map_cell_to_box(MapCell cell, const BoundingBox& probe_region,
                            const SimilarityConfig& config,
                            std::size_t stride = 8);

/// Normalized similarity in [0,1] between the query and one candidate
/// patch resized to the query side.
double score_pair(const Tensor3& query_feats, const ImagePatch& candidate_patch,
                  const ProjectionParams& params,
                  const ScoreCalibration& calibration = {},
                  const FeatureExtractor& extractor = *default_extractor());

/// Same as score_pair for candidate features that are already extracted.
double score_features(const Tensor3& query_feats,
                      const Tensor3& candidate_feats,
                      const ProjectionParams& params,
                      const ScoreCalibration& calibration = {});

}  // namespace longtrack
