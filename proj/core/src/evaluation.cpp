#include "longtrack/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "longtrack/errors.hpp"

namespace longtrack {

AnnotationTrack::AnnotationTrack(std::vector<AnnotationEntry> entries) {
  entries_.reserve(entries.size());
  for (AnnotationEntry& e : entries) {
    append(std::move(e));
  }
}

void AnnotationTrack::append(AnnotationEntry entry) {
  if (!entries_.empty() && entry.frame_index <= entries_.back().frame_index) {
    throw DataError("annotation frame " + std::to_string(entry.frame_index) +
                    " does not follow frame " +
                    std::to_string(entries_.back().frame_index));
  }
  entries_.push_back(std::move(entry));
}

const AnnotationEntry* AnnotationTrack::find(
    std::size_t frame_index) const noexcept {
  const auto it = std::lower_bound(
      entries_.begin(), entries_.end(), frame_index,
      [](const AnnotationEntry& e, std::size_t f) { return e.frame_index < f; });
  if (it == entries_.end() || it->frame_index != frame_index) {
    return nullptr;
  }
  return &*it;
}

AnnotationTrack AnnotationTrack::sparsified(std::size_t every) const {
  if (every == 0) {
    throw ConfigError("sparsify interval must be positive");
  }
  AnnotationTrack out;
  for (const AnnotationEntry& e : entries_) {
    if (e.frame_index % every == 0) {
      out.entries_.push_back(e);
    }
  }
  return out;
}

std::vector<double> threshold_grid() {
  std::vector<double> grid(101);
  for (std::size_t k = 0; k <= 100; ++k) {
    grid[k] = static_cast<double>(k) / 100.0;
  }
  return grid;
}

std::optional<double> frame_overlap(const FramePrediction& pred,
                                    const AnnotationEntry* gt) {
  if (gt == nullptr) {
    return std::nullopt;
  }
  if (gt->absent()) {
    return pred.absent() ? 1.0 : 0.0;
  }
  if (pred.absent()) {
    return 0.0;
  }
  return iou(*pred.box, *gt->box);
}

SuccessCurve success_curve(std::span<const double> overlaps) {
  if (overlaps.empty()) {
    throw DataError("no annotated frames to evaluate");
  }
  SuccessCurve curve;
  curve.thresholds = threshold_grid();
  curve.frames = overlaps.size();
  curve.success_rate.reserve(curve.thresholds.size());
  const double n = static_cast<double>(overlaps.size());
  double sum = 0.0;
  for (const double tau : curve.thresholds) {
    std::size_t hits = 0;
    for (const double o : overlaps) {
      hits += o > tau ? 1 : 0;
    }
    const double rate = static_cast<double>(hits) / n;
    curve.success_rate.push_back(rate);
    sum += rate;
  }
  curve.auc = sum / static_cast<double>(curve.thresholds.size());
  return curve;
}

std::vector<double> collect_overlaps(std::span<const FramePrediction> preds,
                                     const AnnotationTrack& gt,
                                     std::size_t first_frame,
                                     std::size_t end_frame) {
  for (std::size_t i = 1; i < preds.size(); ++i) {
    if (preds[i].frame_index <= preds[i - 1].frame_index) {
      throw DataError("prediction frame indices must be strictly increasing "
                      "(frame " + std::to_string(preds[i].frame_index) + ")");
    }
  }
  std::vector<double> overlaps;
  for (const AnnotationEntry& e : gt.entries()) {
    if (e.frame_index < first_frame || e.frame_index >= end_frame) {
      continue;
    }
    const auto it = std::lower_bound(
        preds.begin(), preds.end(), e.frame_index,
        [](const FramePrediction& p, std::size_t f) {
          return p.frame_index < f;
        });
    if (it == preds.end() || it->frame_index != e.frame_index) {
      throw DataError("annotated frame " + std::to_string(e.frame_index) +
                      " has no prediction");
    }
    overlaps.push_back(*frame_overlap(*it, &e));
  }
  return overlaps;
}

SuccessCurve modified_auc(std::span<const FramePrediction> preds,
                          const AnnotationTrack& gt) {
  return success_curve(collect_overlaps(preds, gt));
}

SuccessCurve last_window_auc(std::span<const FramePrediction> preds,
                             const AnnotationTrack& gt, double window_seconds,
                             double fps) {
  if (!(window_seconds > 0.0) || !(fps > 0.0)) {
    throw ConfigError("window length and fps must be positive");
  }
  const std::size_t total = preds.empty() ? 0 : preds.back().frame_index + 1;
  // Tolerance keeps window = duration from rounding up one frame.
  const auto frames =
      static_cast<std::size_t>(std::ceil(window_seconds * fps - 1e-9));
  if (frames > total) {
    throw ConfigError("evaluation window of " + std::to_string(frames) +
                      " frames exceeds the " + std::to_string(total) +
                      "-frame sequence");
  }
  return success_curve(collect_overlaps(preds, gt, total - frames, total));
}

std::vector<SuccessCurve> per_loop_auc(std::span<const FramePrediction> preds,
                                       const AnnotationTrack& gt,
                                       std::size_t loop_length,
                                       std::size_t num_loops) {
  if (loop_length == 0 || num_loops == 0 ||
      preds.size() != loop_length * num_loops) {
    throw DataError("result set has " + std::to_string(preds.size()) +
                    " frames, expected " + std::to_string(loop_length) +
                    " x " + std::to_string(num_loops));
  }
  std::vector<SuccessCurve> curves;
  curves.reserve(num_loops);
  for (std::size_t k = 0; k < num_loops; ++k) {
    curves.push_back(success_curve(collect_overlaps(
        preds, gt, k * loop_length, (k + 1) * loop_length)));
  }
  return curves;
}

}  // namespace longtrack
