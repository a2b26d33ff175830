#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

#include "ssal/types.hpp"

namespace ssal {

struct Vec2 {
  double x = 0, y = 0;
};

/// Box footprint in the ground plane, four vertices counterclockwise.
struct BevPolygon {
  std::array<Vec2, 4> v;
};

BevPolygon bev_footprint(const Box3D& box);

/// Shoelace area of a simple polygon (positive for counterclockwise order).
double polygon_area(std::span<const Vec2> poly);

/// Intersection of two convex counterclockwise polygons by successive
/// half-plane clipping.
std::vector<Vec2> clip_convex(std::span<const Vec2> subject, std::span<const Vec2> clip);

/// Area of the intersection of the two rotated footprints. Symmetric in its
/// arguments bit for bit.
double bev_intersection_area(const Box3D& a, const Box3D& b);

double iou_bev(const Box3D& a, const Box3D& b);
double iou_3d(const Box3D& a, const Box3D& b);

inline constexpr double kDefaultPointMargin = 0.1;

/// True when p lies in the box inflated by `margin` on every side.
bool point_in_box(const Point& p, const Box3D& box, double margin = 0.0);

std::vector<std::size_t> points_in_box(const PointCloud& points, const Box3D& box, double margin = 0.0);

/// Points outside every box (each inflated by margin), in input order.
PointCloud remove_points_in_boxes(const PointCloud& points, std::span<const Box3D> boxes,
                                  double margin = kDefaultPointMargin);

/// Greedy class-agnostic NMS by descending score (ties keep input order).
/// Suppresses candidates with iou_3d >= iou_thresh against a kept box.
std::vector<Detection> nms(const std::vector<Detection>& dets, double iou_thresh);

}  // namespace ssal
