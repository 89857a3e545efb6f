#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "longtrack/annotations.hpp"
#include "longtrack/geometry.hpp"
#include "longtrack/search.hpp"

namespace longtrack {

/// One tracker output. An empty box is an explicit absence prediction.
struct FramePrediction {
  std::size_t frame_index = 0;
  std::optional<BoundingBox> box;
  double score = 0.0;
  SearchMode search_mode = SearchMode::global;
  bool update_applied = false;

  bool absent() const noexcept { return !box.has_value(); }
  bool operator==(const FramePrediction&) const = default;
};

struct SuccessCurve {
  std::vector<double> thresholds;
  std::vector<double> success_rate;
  double auc = 0.0;
  std::size_t frames = 0;  // annotated frames that contributed
};

/// The 101 thresholds k / 100, k = 0..100.
std::vector<double> threshold_grid();

/// Overlap credited to one frame, or nullopt when the frame is
/// unannotated. Absent/absent scores 1, any box/absence mismatch 0.
std::optional<double> frame_overlap(const FramePrediction& pred,
                                    const AnnotationEntry* gt);

/// Success rate at every grid threshold (overlap strictly above the
/// threshold) and its mean as the AUC. Throws DataError on an empty set.
SuccessCurve success_curve(std::span<const double> overlaps);

/// Overlaps of annotated frames in [first_frame, end_frame). Throws
/// DataError when an annotated frame in range has no prediction or when
/// prediction indices are not strictly increasing.
std::vector<double> collect_overlaps(std::span<const FramePrediction> preds,
                                     const AnnotationTrack& gt,
                                     std::size_t first_frame = 0,
                                     std::size_t end_frame = SIZE_MAX);

SuccessCurve modified_auc(std::span<const FramePrediction> preds,
                          const AnnotationTrack& gt);

/// modified_auc over the final ceil(window_seconds * fps) frames of the
/// result set. Throws ConfigError if the window exceeds the sequence.
SuccessCurve last_window_auc(std::span<const FramePrediction> preds,
                             const AnnotationTrack& gt, double window_seconds,
                             double fps);

/// One curve per loop of a repetitive sequence. Throws DataError unless
/// the result set has exactly loop_length * num_loops frames.
std::vector<SuccessCurve> per_loop_auc(std::span<const FramePrediction> preds,
                                       const AnnotationTrack& gt,
                                       std::size_t loop_length,
                                       std::size_t num_loops);

}  // namespace longtrack
