#include "longtrack/similarity.hpp"

#include <string>

#include "longtrack/errors.hpp"
#include "longtrack/numerics.hpp"

namespace longtrack {

double normalize_score(double raw_score, double bias_logit) noexcept {
  return logistic(raw_score + bias_logit);
}

Grid2 correlate(const Tensor3& query_feats, const Tensor3& probe_feats,
                const ProjectionParams* projection) {
  if (projection == nullptr || projection->is_identity()) {
    return xcorr_valid(query_feats, probe_feats);
  }
  return xcorr_valid(project(query_feats, *projection),
                     project(probe_feats, *projection));
}

Grid2 similarity_map(const Tensor3& query_feats, const ImagePatch& probe_patch,
                     const SimilarityConfig& config,
                     const ProjectionParams* projection,
                     const FeatureExtractor& extractor) {
  const std::size_t side = config.probe_side();
  if (probe_patch.height() != side || probe_patch.width() != side) {
    throw ShapeError("similarity_map: probe must be " + std::to_string(side) +
                     "x" + std::to_string(side) + ", got " +
                     std::to_string(probe_patch.height()) + "x" +
                     std::to_string(probe_patch.width()));
  }
  const std::size_t qcells = config.query_side / extractor.stride();
  if (query_feats.height() != qcells || query_feats.width() != qcells) {
    throw ShapeError("similarity_map: query features " +
                     query_feats.shape_string() + " do not match l=" +
                     std::to_string(config.query_side));
  }
  const Tensor3 probe_feats = extractor.extract(probe_patch);
  return correlate(query_feats, probe_feats,
                   config.use_projection ? projection : nullptr);
}

BoundingBox map_cell_to_box(MapCell cell, const BoundingBox& probe_region,
                            const SimilarityConfig& config,
                            std::size_t stride) {
  const std::size_t side = config.map_side(stride);
  if (cell.row >= side || cell.col >= side) {
    throw ShapeError("map_cell_to_box: cell (" + std::to_string(cell.row) +
                     "," + std::to_string(cell.col) + ") outside " +
                     std::to_string(side) + "x" + std::to_string(side) +
                     " map");
  }
  const double probe_side = static_cast<double>(config.probe_side());
  const double sx = probe_region.width / probe_side;
  const double sy = probe_region.height / probe_side;
  const double half_query = 0.5 * static_cast<double>(config.query_side);
  const double step = static_cast<double>(stride);
  BoundingBox box;
  box.cx = probe_region.left() +
           (half_query + static_cast<double>(cell.col) * step) * sx;
  box.cy = probe_region.top() +
           (half_query + static_cast<double>(cell.row) * step) * sy;
  box.width = static_cast<double>(config.query_side) * sx;
  box.height = static_cast<double>(config.query_side) * sy;
  return box;
}

double score_features(const Tensor3& query_feats,
                      const Tensor3& candidate_feats,
                      const ProjectionParams& params,
                      const ScoreCalibration& calibration) {
  if (query_feats.height() != candidate_feats.height() ||
      query_feats.width() != candidate_feats.width()) {
    throw ShapeError("score_pair: query " + query_feats.shape_string() +
                     " vs candidate " + candidate_feats.shape_string());
  }
  const Grid2 cell = correlate(query_feats, candidate_feats, &params);
  const double raw = calibration.raw(cell(0, 0), query_feats.size());
  return normalize_score(raw, params.bias_logit);
}

double score_pair(const Tensor3& query_feats, const ImagePatch& candidate_patch,
                  const ProjectionParams& params,
                  const ScoreCalibration& calibration,
                  const FeatureExtractor& extractor) {
  return score_features(query_feats, extractor.extract(candidate_patch), params,
                        calibration);
}

}  // namespace longtrack
