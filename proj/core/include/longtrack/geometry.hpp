#pragma once

namespace longtrack {

/// Axis-aligned box in continuous frame coordinates, center format.
struct BoundingBox {
  double cx = 0.0;
  double cy = 0.0;
  double width = 0.0;
  double height = 0.0;

  double left() const noexcept { return cx - 0.5 * width; }
  double top() const noexcept { return cy - 0.5 * height; }
  double right() const noexcept { return cx + 0.5 * width; }
  double bottom() const noexcept { return cy + 0.5 * height; }
  double area() const noexcept { return width * height; }
  bool valid() const noexcept;

  static BoundingBox from_corners(double left, double top, double right,
                                  double bottom) noexcept {
    return {0.5 * (left + right), 0.5 * (top + bottom), right - left,
            bottom - top};
  }

  bool operator==(const BoundingBox&) const = default;
};

/// Intersection over union. Throws ShapeError on non-positive dims.
double iou(const BoundingBox& a, const BoundingBox& b);

/// Area of the intersection; zero when disjoint.
double intersection_area(const BoundingBox& a, const BoundingBox& b) noexcept;

}  // namespace longtrack
