#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "longtrack/geometry.hpp"

namespace longtrack {

/// Ground truth for one frame: a box, or an explicit absence marker.
struct AnnotationEntry {
  std::size_t frame_index = 0;
  std::optional<BoundingBox> box;  // empty = target marked absent

  bool absent() const noexcept { return !box.has_value(); }
  bool operator==(const AnnotationEntry&) const = default;
};

/// Sparse per-frame ground truth. Frames without an entry are unannotated.
class AnnotationTrack {
 public:
  AnnotationTrack() = default;
  /// Throws DataError unless frame indices are strictly increasing.
  explicit AnnotationTrack(std::vector<AnnotationEntry> entries);

  /// Throws DataError when the index does not exceed the last one.
  void append(AnnotationEntry entry);

  const AnnotationEntry* find(std::size_t frame_index) const noexcept;
  const std::vector<AnnotationEntry>& entries() const noexcept {
    return entries_;
  }
  std::size_t size() const noexcept { return entries_.size(); }
  bool empty() const noexcept { return entries_.empty(); }

  /// Keeps every entry whose index is a multiple of `every`.
  AnnotationTrack sparsified(std::size_t every) const;

  bool operator==(const AnnotationTrack&) const = default;

 private:
  std::vector<AnnotationEntry> entries_;
};

}  // namespace longtrack
