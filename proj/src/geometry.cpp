#include "ssal/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <tuple>

namespace ssal {

namespace {

constexpr double kColinearEps = 1e-9;

double cross(const Vec2& o, const Vec2& a, const Vec2& b) {
  return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
}

// Intersection of segment p->q with the infinite line through a->b.
Vec2 line_intersect(const Vec2& p, const Vec2& q, const Vec2& a, const Vec2& b) {
  const double dp = cross(a, b, p);
  const double dq = cross(a, b, q);
  const double t = dp / (dp - dq);
  return {p.x + t * (q.x - p.x), p.y + t * (q.y - p.y)};
}

auto box_key(const Box3D& b) { return std::tie(b.cx, b.cy, b.cz, b.dx, b.dy, b.dz, b.yaw); }

}  // namespace

BevPolygon bev_footprint(const Box3D& box) {
  const double c = std::cos(box.yaw), s = std::sin(box.yaw);
  const double hx = box.dx / 2, hy = box.dy / 2;
  const std::array<Vec2, 4> local{{{hx, hy}, {-hx, hy}, {-hx, -hy}, {hx, -hy}}};
  BevPolygon poly;
  // local order (+,+) (-,+) (-,-) (+,-) is counterclockwise; rotation keeps it so
  for (std::size_t i = 0; i < 4; ++i)
    poly.v[i] = {box.cx + c * local[i].x - s * local[i].y, box.cy + s * local[i].x + c * local[i].y};
  return poly;
}

double polygon_area(std::span<const Vec2> poly) {
  if (poly.size() < 3) return 0.0;
  double twice = 0;
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const Vec2& a = poly[i];
    const Vec2& b = poly[(i + 1) % poly.size()];
    twice += a.x * b.y - b.x * a.y;
  }
  return twice / 2;
}

std::vector<Vec2> clip_convex(std::span<const Vec2> subject, std::span<const Vec2> clip) {
  std::vector<Vec2> out(subject.begin(), subject.end());
  for (std::size_t e = 0; e < clip.size() && !out.empty(); ++e) {
    const Vec2& a = clip[e];
    const Vec2& b = clip[(e + 1) % clip.size()];
    std::vector<Vec2> in;
    in.swap(out);
    for (std::size_t i = 0; i < in.size(); ++i) {
      const Vec2& p = in[i];
      const Vec2& q = in[(i + 1) % in.size()];
      const double sp = cross(a, b, p);
      const double sq = cross(a, b, q);
      const bool p_in = sp >= -kColinearEps;
      const bool q_in = sq >= -kColinearEps;
      if (p_in) out.push_back(p);
      if (p_in != q_in && std::abs(sp - sq) > kColinearEps) out.push_back(line_intersect(p, q, a, b));
    }
  }
  return out;
}

double bev_intersection_area(const Box3D& a, const Box3D& b) {
  // Fixed argument order makes the result independent of call order.
  const bool swap = box_key(b) < box_key(a);
  const Box3D& first = swap ? b : a;
  const Box3D& second = swap ? a : b;

  // Cheap reject on circumscribed circles.
  const double ra = std::hypot(first.dx, first.dy) / 2, rb = std::hypot(second.dx, second.dy) / 2;
  if (std::hypot(first.cx - second.cx, first.cy - second.cy) > ra + rb) return 0.0;

  const auto pa = bev_footprint(first), pb = bev_footprint(second);
  const auto poly = clip_convex(pa.v, pb.v);
  return std::max(0.0, polygon_area(poly));
}

double iou_bev(const Box3D& a, const Box3D& b) {
  const double inter = bev_intersection_area(a, b);
  if (inter <= 0) return 0.0;
  const double uni = a.dx * a.dy + b.dx * b.dy - inter;
  return std::clamp(inter / uni, 0.0, 1.0);
}

double iou_3d(const Box3D& a, const Box3D& b) {
  const double zo = std::min(a.z_max(), b.z_max()) - std::max(a.z_min(), b.z_min());
  if (zo <= 0) return 0.0;
  const double area = bev_intersection_area(a, b);
  if (area <= 0) return 0.0;
  const double inter = area * zo;
  const double uni = a.volume() + b.volume() - inter;
  return std::clamp(inter / uni, 0.0, 1.0);
}

bool point_in_box(const Point& p, const Box3D& box, double margin) {
  const double c = std::cos(box.yaw), s = std::sin(box.yaw);
  const double rx = p.x - box.cx, ry = p.y - box.cy;
  const double u = c * rx + s * ry;
  const double v = -s * rx + c * ry;
  const double w = p.z - box.cz;
  return std::abs(u) <= box.dx / 2 + margin && std::abs(v) <= box.dy / 2 + margin &&
         std::abs(w) <= box.dz / 2 + margin;
}

std::vector<std::size_t> points_in_box(const PointCloud& points, const Box3D& box, double margin) {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < points.size(); ++i)
    if (point_in_box(points[i], box, margin)) idx.push_back(i);
  return idx;
}

PointCloud remove_points_in_boxes(const PointCloud& points, std::span<const Box3D> boxes, double margin) {
  PointCloud out;
  out.reserve(points.size());
  for (const auto& p : points) {
    const bool inside =
        std::any_of(boxes.begin(), boxes.end(), [&](const Box3D& b) { return point_in_box(p, b, margin); });
    if (!inside) out.push_back(p);
  }
  return out;
}

std::vector<Detection> nms(const std::vector<Detection>& dets, double iou_thresh) {
  std::vector<std::size_t> order(dets.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t i, std::size_t j) { return dets[i].score > dets[j].score; });
  std::vector<Detection> kept;
  for (std::size_t i : order) {
    const bool suppressed = std::any_of(kept.begin(), kept.end(), [&](const Detection& k) {
      return iou_3d(k.box, dets[i].box) >= iou_thresh;
    });
    if (!suppressed) kept.push_back(dets[i]);
  }
  return kept;
}

}  // namespace ssal
