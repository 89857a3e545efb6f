#include "longtrack/search.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <tuple>

#include "longtrack/errors.hpp"
#include "longtrack/numerics.hpp"

namespace longtrack {

namespace {

std::vector<double> pow2_linspace(double lo, double hi, std::size_t count) {
  std::vector<double> grid;
  grid.reserve(count);
  if (count == 1) {
    grid.push_back(1.0);
    return grid;
  }
  for (std::size_t k = 0; k < count; ++k) {
    const double e = lo + (hi - lo) * static_cast<double>(k) /
                              static_cast<double>(count - 1);
    grid.push_back(std::exp2(e));
  }
  return grid;
}

// Ordering of candidate cells: higher score first, then the scale closest
// to 1, then the lower location rank, then the cell closest to the map
// center, then row-major order.
struct CandidateKey {
  double score = 0.0;
  std::size_t scale_distance = 0;
  std::size_t location = 0;
  double center_distance = 0.0;
  std::size_t row = 0;
  std::size_t col = 0;

  bool better_than(const CandidateKey& o) const noexcept {
    if (score != o.score) {
      return score > o.score;
    }
    return std::tie(scale_distance, location, center_distance, row, col) <
           std::tie(o.scale_distance, o.location, o.center_distance, o.row,
                    o.col);
  }
};

double center_distance(const Grid2& map, std::size_t r, std::size_t c) {
  const double dr =
      static_cast<double>(r) - 0.5 * static_cast<double>(map.height() - 1);
  const double dc =
      static_cast<double>(c) - 0.5 * static_cast<double>(map.width() - 1);
  return dr * dr + dc * dc;
}

std::size_t index_distance(std::size_t a, std::size_t b) noexcept {
  return a > b ? a - b : b - a;
}

SimilarityConfig make_config(std::size_t query_side, std::size_t t,
                             bool projection) {
  SimilarityConfig c;
  c.query_side = query_side;
  c.probe_factor = t;
  c.use_projection = projection;
  return c;
}

// Best candidate over maps computed at several scales around one center.
FinalStageResult final_stage(const GrayFrame& frame, const BoundingBox& around,
                             const std::vector<double>& scales,
                             std::size_t query_side, std::size_t t,
                             const Tensor3& query, const SearchSettings& s) {
  if (!around.valid()) {
    throw ShapeError("final-stage search: invalid anchor box");
  }
  const SimilarityConfig config = make_config(query_side, t, false);
  const std::size_t side = config.probe_side();
  const std::size_t unit = unit_scale_index(scales);

  FinalStageResult result;
  CandidateKey best_key;
  bool have_best = false;
  Grid2 best_map;
  BoundingBox best_region;
  for (std::size_t j = 0; j < scales.size(); ++j) {
    const double st = scales[j] * static_cast<double>(t);
    const BoundingBox region{around.cx, around.cy, around.width * st,
                             around.height * st};
    const ImagePatch probe = sample_region(frame, region, side, side);
    Grid2 map = correlate(query, s.extractor->extract(probe));
    for (std::size_t r = 0; r < map.height(); ++r) {
      for (std::size_t c = 0; c < map.width(); ++c) {
        const CandidateKey key{map(r, c), index_distance(j, unit), 0,
                               center_distance(map, r, c), r, c};
        if (!have_best || key.better_than(best_key)) {
          best_key = key;
          have_best = true;
          result.scale_index = j;
          result.cell = {r, c};
          best_region = region;
        }
      }
    }
    if (result.scale_index == j) {
      best_map = std::move(map);
    }
  }
  result.best.box =
      map_cell_to_box(result.cell, best_region, config, s.extractor->stride());
  result.best.raw_score = s.calibration.raw(best_key.score, query.size());
  result.best.normalized_score = normalize_score(result.best.raw_score, 0.0);
  // The history stores calibrated scores so the self-evaluation input is
  // centred near zero.
  for (double& v : best_map.data()) {
    v = s.calibration.raw(v, query.size());
  }
  result.map = std::move(best_map);
  return result;
}

}  // namespace

GlobalSearchConfig::GlobalSearchConfig()
    : stage2_scales(stage2_grid(9)), stage3_scales(stage3_grid(11)) {}

std::vector<double> GlobalSearchConfig::stage2_grid(std::size_t count) {
  return pow2_linspace(-2.0, 2.0, count);
}

std::vector<double> GlobalSearchConfig::stage3_grid(std::size_t count) {
  return pow2_linspace(-0.4, 0.4, count);
}

std::size_t unit_scale_index(const std::vector<double>& scales) noexcept {
  std::size_t best = 0;
  for (std::size_t k = 1; k < scales.size(); ++k) {
    if (std::abs(std::log(scales[k])) < std::abs(std::log(scales[best]))) {
      best = k;
    }
  }
  return best;
}

void TrackerState::push_map(Grid2 map) {
  last_map = map;
  map_history.push_back(std::move(map));
  while (map_history.size() > history_capacity) {
    map_history.pop_front();
  }
}

TrackerState init_tracker(const ImagePatch& first_frame,
                          const BoundingBox& target,
                          const SearchSettings& settings) {
  if (!target.valid()) {
    throw ShapeError("init: target box must have positive finite size");
  }
  if (target.cx < 0.0 || target.cy < 0.0 ||
      target.cx >= static_cast<double>(first_frame.width()) ||
      target.cy >= static_cast<double>(first_frame.height())) {
    throw ShapeError("init: target center lies outside the first frame");
  }
  const GrayFrame frame(first_frame);
  const auto& g = settings.global;
  TrackerState state;
  state.query_feats_coarse = settings.extractor->extract(
      sample_region(frame, target, g.query_side, g.query_side));
  state.query_feats_fine = settings.extractor->extract(
      sample_region(frame, target, g.fine_query_side, g.fine_query_side));
  if (settings.local.query_side != g.fine_query_side) {
    throw ConfigError("local search resolution must equal the stage-3 "
                      "resolution (shared fine query)");
  }
  state.init_width = target.width;
  state.init_height = target.height;
  state.stage2_params =
      ProjectionParams::identity(settings.extractor->channels());
  state.last_box = target;
  state.history_capacity = settings.history_length;
  return state;
}

double stage1_scale(const TrackerState& state,
                    const GlobalSearchConfig& config) noexcept {
  return static_cast<double>(config.query_side) /
         std::sqrt(state.init_width * state.init_height);
}

std::vector<MapCell> select_top_cells(const Grid2& map, std::size_t count,
                                      std::size_t min_separation) {
  std::vector<MapCell> all;
  all.reserve(map.size());
  for (std::size_t r = 0; r < map.height(); ++r) {
    for (std::size_t c = 0; c < map.width(); ++c) {
      all.push_back({r, c});
    }
  }
  std::stable_sort(all.begin(), all.end(), [&](MapCell a, MapCell b) {
    return map(a.row, a.col) > map(b.row, b.col);
  });

  auto is_local_max = [&](MapCell m) {
    const double v = map(m.row, m.col);
    for (long dr = -1; dr <= 1; ++dr) {
      for (long dc = -1; dc <= 1; ++dc) {
        const long r = static_cast<long>(m.row) + dr;
        const long c = static_cast<long>(m.col) + dc;
        if ((dr == 0 && dc == 0) || r < 0 || c < 0 ||
            r >= static_cast<long>(map.height()) ||
            c >= static_cast<long>(map.width())) {
          continue;
        }
        if (map(static_cast<std::size_t>(r), static_cast<std::size_t>(c)) > v) {
          return false;
        }
      }
    }
    return true;
  };
  auto separated = [&](MapCell m, const std::vector<MapCell>& chosen) {
    return std::all_of(chosen.begin(), chosen.end(), [&](MapCell o) {
      return std::max(index_distance(m.row, o.row),
                      index_distance(m.col, o.col)) >= min_separation;
    });
  };

  std::vector<MapCell> chosen;
  for (const MapCell m : all) {
    if (chosen.size() == count) {
      break;
    }
    if (is_local_max(m) && separated(m, chosen)) {
      chosen.push_back(m);
    }
  }
  for (const MapCell m : all) {
    if (chosen.size() == count) {
      break;
    }
    if (std::find(chosen.begin(), chosen.end(), m) == chosen.end()) {
      chosen.push_back(m);
    }
  }
  return chosen;
}

std::vector<BoundingBox> global_stage1(const GrayFrame& frame,
                                       const TrackerState& state,
                                       const SearchSettings& settings) {
  const auto& g = settings.global;
  const double s = stage1_scale(state, g);
  const std::size_t fh = frame.image.height();
  const std::size_t fw = frame.image.width();
  const auto rh = static_cast<std::size_t>(
      std::max(1.0, std::floor(static_cast<double>(fh) * s + 0.5)));
  const auto rw = static_cast<std::size_t>(
      std::max(1.0, std::floor(static_cast<double>(fw) * s + 0.5)));
  if (rh < g.query_side || rw < g.query_side) {
    throw ShapeError("global_stage1: rescaled frame " + std::to_string(rh) +
                     "x" + std::to_string(rw) + " smaller than query side " +
                     std::to_string(g.query_side));
  }
  const ImagePatch rescaled =
      (rh == fh && rw == fw) ? frame.image
                             : resize_bilinear(frame.image, rh, rw);
  const Grid2 map =
      correlate(state.query_feats_coarse, settings.extractor->extract(rescaled));
  const auto cells =
      select_top_cells(map, g.num_locations, g.nms_min_separation);

  // Corner-aligned resize: resized pixel index i sits at frame index
  // i * (fw - 1) / (rw - 1).
  const double ax = rw > 1 ? static_cast<double>(fw - 1) /
                                 static_cast<double>(rw - 1)
                           : 1.0;
  const double ay = rh > 1 ? static_cast<double>(fh - 1) /
                                 static_cast<double>(rh - 1)
                           : 1.0;
  const double stride = static_cast<double>(settings.extractor->stride());
  const double half = 0.5 * static_cast<double>(g.query_side - 1);
  std::vector<BoundingBox> locations;
  locations.reserve(cells.size());
  for (const MapCell m : cells) {
    const double x = (static_cast<double>(m.col) * stride + half) * ax + 0.5;
    const double y = (static_cast<double>(m.row) * stride + half) * ay + 0.5;
    locations.push_back({x, y, state.init_width, state.init_height});
  }
  return locations;
}

Stage2Result global_stage2(const GrayFrame& frame,
                           const std::vector<BoundingBox>& locations,
                           const TrackerState& state,
                           const SearchSettings& settings) {
  const auto& g = settings.global;
  if (locations.empty()) {
    throw ShapeError("global_stage2: no candidate locations");
  }
  const SimilarityConfig config = make_config(g.query_side, g.probe_factor, true);
  const std::size_t side = config.probe_side();
  const std::size_t unit = unit_scale_index(g.stage2_scales);
  const ProjectionParams& params = state.stage2_params;
  const bool identity = params.is_identity();
  const Tensor3 query = identity ? state.query_feats_coarse
                                 : project(state.query_feats_coarse, params);
  const double t = static_cast<double>(g.probe_factor);

  Stage2Result result;
  result.probes.reserve(locations.size() * g.stage2_scales.size());
  CandidateKey best_key;
  bool have_best = false;
  for (std::size_t i = 0; i < locations.size(); ++i) {
    for (std::size_t j = 0; j < g.stage2_scales.size(); ++j) {
      const double sigma = g.stage2_scales[j];
      Stage2Probe probe;
      probe.location = i;
      probe.scale_index = j;
      probe.region = {locations[i].cx, locations[i].cy,
                      state.init_width * sigma * t,
                      state.init_height * sigma * t};
      probe.features = settings.extractor->extract(
          sample_region(frame, probe.region, side, side));
      probe.map = xcorr_valid(
          query, identity ? probe.features : project(probe.features, params));
      for (std::size_t r = 0; r < probe.map.height(); ++r) {
        for (std::size_t c = 0; c < probe.map.width(); ++c) {
          const CandidateKey key{probe.map(r, c), index_distance(j, unit), i,
                                 center_distance(probe.map, r, c), r, c};
          if (!have_best || key.better_than(best_key)) {
            best_key = key;
            have_best = true;
            result.best_location = i;
            result.best_scale = j;
            result.best_cell = {r, c};
          }
        }
      }
      result.probes.push_back(std::move(probe));
    }
  }
  const Stage2Probe& win =
      result.probes[result.best_location * g.stage2_scales.size() +
                    result.best_scale];
  result.best.box = map_cell_to_box(result.best_cell, win.region, config,
                                    settings.extractor->stride());
  result.best.raw_score =
      settings.calibration.raw(best_key.score, state.query_feats_coarse.size());
  result.best.normalized_score =
      normalize_score(result.best.raw_score, params.bias_logit);
  return result;
}

FinalStageResult global_stage3(const GrayFrame& frame, const ScoredBox& coarse,
                               const TrackerState& state,
                               const SearchSettings& settings) {
  const auto& g = settings.global;
  return final_stage(frame, coarse.box, g.stage3_scales, g.fine_query_side,
                     g.probe_factor, state.query_feats_fine, settings);
}

FinalStageResult local_search(const GrayFrame& frame, const TrackerState& state,
                              const SearchSettings& settings) {
  const auto& l = settings.local;
  return final_stage(frame, state.last_box, l.scales, l.query_side,
                     l.probe_factor, state.query_feats_fine, settings);
}

}  // namespace longtrack
