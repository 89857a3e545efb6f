#pragma once

#include <cstddef>
#include <deque>
#include <memory>
#include <vector>

#include "longtrack/features.hpp"
#include "longtrack/geometry.hpp"
#include "longtrack/image.hpp"
#include "longtrack/similarity.hpp"
#include "longtrack/tensor.hpp"

namespace longtrack {

enum class SearchMode { global, local };

/// Three-stage global search parameters.
struct GlobalSearchConfig {
  std::size_t num_locations = 10;     // N
  std::vector<double> stage2_scales;  // M entries
  std::vector<double> stage3_scales;  // L entries
  std::size_t probe_factor = 2;       // t
  std::size_t query_side = 32;        // l, stages 1 and 2
  std::size_t fine_query_side = 64;   // l~, stage 3
  std::size_t nms_min_separation = 2; // map cells, Chebyshev distance

  GlobalSearchConfig();

  /// 2^{linspace(-2, 2, M)}; M = 9 gives 2^{-2:0.5:2}.
  static std::vector<double> stage2_grid(std::size_t count);
  /// 2^{linspace(-0.4, 0.4, L)}; L = 11 gives 2^{-0.4:0.08:0.4}.
  static std::vector<double> stage3_grid(std::size_t count);
};

struct LocalSearchConfig {
  std::vector<double> scales{0.9509, 0.9751, 1.0, 1.0255, 1.0517};
  std::size_t query_side = 64;  // l'
  std::size_t probe_factor = 2;
};

/// Time clock: global search fires on frames whose index since init is a
/// multiple of the period. The init frame is frame 0.
struct SchedulerState {
  std::size_t period = 15;
  std::size_t frame_counter = 0;

  bool is_global(std::size_t frame) const noexcept {
    return period != 0 && frame % period == 0;
  }
  /// Advances to the next frame and reports whether it is a global frame.
  bool tick() noexcept {
    ++frame_counter;
    return is_global(frame_counter);
  }
};

struct SearchSettings {
  GlobalSearchConfig global;
  LocalSearchConfig local;
  ScoreCalibration calibration;
  std::shared_ptr<const FeatureExtractor> extractor = default_extractor();
  std::size_t history_length = 10;  // K
};

struct TrackerState {
  Tensor3 query_feats_coarse;  // from the l-sided query
  Tensor3 query_feats_fine;    // from the l~-sided query
  double init_width = 0.0;     // w0
  double init_height = 0.0;    // h0
  ProjectionParams stage2_params;
  BoundingBox last_box;
  Grid2 last_map;
  std::deque<Grid2> map_history;
  std::size_t history_capacity = 10;
  std::size_t frame_index = 0;
  bool absent = false;

  void push_map(Grid2 map);
};

TrackerState init_tracker(const ImagePatch& first_frame,
                          const BoundingBox& target,
                          const SearchSettings& settings);

/// Rescale factor that maps the target's geometric-mean side to l.
double stage1_scale(const TrackerState& state,
                    const GlobalSearchConfig& config) noexcept;

/// N candidate boxes (u_i, v_i, w0, h0), best first. Depends only on the
/// frame and the query, never on the previous prediction.
std::vector<BoundingBox> global_stage1(const GrayFrame& frame,
                                       const TrackerState& state,
                                       const SearchSettings& settings);

/// Greedy top-N cell selection: local maxima in score order separated by
/// at least `min_separation` cells, then padding with the next-highest
/// remaining cells. Never returns duplicates.
std::vector<MapCell> select_top_cells(const Grid2& map, std::size_t count,
                                      std::size_t min_separation);

/// One stage-2 probe region with the features it was scored on.
struct Stage2Probe {
  std::size_t location = 0;
  std::size_t scale_index = 0;
  BoundingBox region;
  Tensor3 features;  // unprojected probe features
  Grid2 map;         // correlation map under the live stage-2 params
};

struct Stage2Result {
  ScoredBox best;
  std::size_t best_location = 0;
  std::size_t best_scale = 0;
  MapCell best_cell;
  std::vector<Stage2Probe> probes;
};

Stage2Result global_stage2(const GrayFrame& frame,
                           const std::vector<BoundingBox>& locations,
                           const TrackerState& state,
                           const SearchSettings& settings);

/// Outcome of a final-stage search (stage 3 or local search).
struct FinalStageResult {
  ScoredBox best;
  std::size_t scale_index = 0;
  MapCell cell;
  /// Winning-scale map in calibrated raw-score units.
  Grid2 map;
};

FinalStageResult global_stage3(const GrayFrame& frame, const ScoredBox& coarse,
                               const TrackerState& state,
                               const SearchSettings& settings);

FinalStageResult local_search(const GrayFrame& frame, const TrackerState& state,
                              const SearchSettings& settings);

/// Index of the scale closest to 1, the preferred scale under ties.
std::size_t unit_scale_index(const std::vector<double>& scales) noexcept;

}  // namespace longtrack
