#include "d4lcn/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <optional>
#include <stdexcept>

namespace d4lcn {

namespace {

constexpr double kPi = std::numbers::pi;

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
};

double cross(const Vec2& o, const Vec2& a, const Vec2& b) {
  return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
}

// Sutherland-Hodgman clip of a convex polygon by the half-plane on the left
// of the directed edge a->b.
std::vector<Vec2> clip_by_edge(const std::vector<Vec2>& poly, const Vec2& a,
                               const Vec2& b) {
  std::vector<Vec2> out;
  const std::size_t n = poly.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2& cur = poly[i];
    const Vec2& nxt = poly[(i + 1) % n];
    const double side_cur = cross(a, b, cur);
    const double side_nxt = cross(a, b, nxt);
    if (side_cur >= 0.0) out.push_back(cur);
    if ((side_cur > 0.0 && side_nxt < 0.0) ||
        (side_cur < 0.0 && side_nxt > 0.0)) {
      const double t = side_cur / (side_cur - side_nxt);
      out.push_back({cur.x + t * (nxt.x - cur.x), cur.y + t * (nxt.y - cur.y)});
    }
  }
  return out;
}

double polygon_area(const std::vector<Vec2>& poly) {
  if (poly.size() < 3) return 0.0;
  double acc = 0.0;
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const Vec2& a = poly[i];
    const Vec2& b = poly[(i + 1) % poly.size()];
    acc += a.x * b.y - b.x * a.y;
  }
  return std::abs(acc) / 2.0;
}

// Bird's-eye footprint corners (x, z) in counter-clockwise order, rotated
// the same way corners3d rotates the box.
std::array<Vec2, 4> bev_corners(const Box3D& box) {
  const double c = std::cos(box.ry);
  const double s = std::sin(box.ry);
  const double hw = box.w / 2.0;
  const double hl = box.l / 2.0;
  const std::array<Vec2, 4> local = {
      Vec2{+hw, +hl}, Vec2{-hw, +hl}, Vec2{-hw, -hl}, Vec2{+hw, -hl}};
  std::array<Vec2, 4> out;
  for (std::size_t i = 0; i < 4; ++i) {
    out[i] = {c * local[i].x + s * local[i].y + box.center.x,
              -s * local[i].x + c * local[i].y + box.center.z};
  }
  return out;
}

std::optional<Box2D> try_enclosing_rect(const Calibration& calib,
                                        const Box3D& box) {
  const ProjectedCorners pc = project_corners(calib, corners3d(box));
  double lo_u = pc.pts[0].u, hi_u = pc.pts[0].u;
  double lo_v = pc.pts[0].v, hi_v = pc.pts[0].v;
  for (const Projected& p : pc.pts) {
    if (!p.in_front()) return std::nullopt;
    lo_u = std::min(lo_u, p.u);
    hi_u = std::max(hi_u, p.u);
    lo_v = std::min(lo_v, p.v);
    hi_v = std::max(hi_v, p.v);
  }
  return Box2D::from_corners(lo_u, lo_v, hi_u, hi_v);
}

}  // namespace

Calibration Calibration::from_values(const std::array<double, 12>& values) {
  Calibration c;
  c.k = values;
  const double norm = c.k[10];  // K[2][2]
  if (norm == 0.0) {
    throw std::invalid_argument("calibration has K[2][2] = 0");
  }
  if (norm != 1.0) {
    for (double& v : c.k) v /= norm;
  }
  if (c.fx() <= 0.0 || c.fy() <= 0.0) {
    throw std::invalid_argument("calibration requires positive focal lengths");
  }
  return c;
}

Box2D Box2D::from_corners(double left, double top, double right,
                          double bottom) {
  return {(left + right) / 2.0, (top + bottom) / 2.0, right - left,
          bottom - top};
}

Projected project(const Calibration& calib, const Vec3& p) {
  const auto row = [&](int r) {
    return calib.at(r, 0) * p.x + calib.at(r, 1) * p.y + calib.at(r, 2) * p.z +
           calib.at(r, 3);
  };
  const double depth = row(2);
  return {row(0) / depth, row(1) / depth, depth};
}

Vec3 back_project(const Calibration& calib, double u, double v, double depth) {
  // Right-hand side: [u,v,1]*depth minus the 4th column of K.
  const double b0 = u * depth - calib.at(0, 3);
  const double b1 = v * depth - calib.at(1, 3);
  const double b2 = depth - calib.at(2, 3);
  // Solve the left 3x3 block by Cramer's rule.
  const double a00 = calib.at(0, 0), a01 = calib.at(0, 1), a02 = calib.at(0, 2);
  const double a10 = calib.at(1, 0), a11 = calib.at(1, 1), a12 = calib.at(1, 2);
  const double a20 = calib.at(2, 0), a21 = calib.at(2, 1), a22 = calib.at(2, 2);
  const double det = a00 * (a11 * a22 - a12 * a21) -
                     a01 * (a10 * a22 - a12 * a20) +
                     a02 * (a10 * a21 - a11 * a20);
  if (det == 0.0) {
    throw std::invalid_argument("calibration 3x3 block is singular");
  }
  const double x = (b0 * (a11 * a22 - a12 * a21) -
                    a01 * (b1 * a22 - a12 * b2) +
                    a02 * (b1 * a21 - a11 * b2)) /
                   det;
  const double y = (a00 * (b1 * a22 - a12 * b2) -
                    b0 * (a10 * a22 - a12 * a20) +
                    a02 * (a10 * b2 - b1 * a20)) /
                   det;
  const double z = (a00 * (a11 * b2 - b1 * a21) -
                    a01 * (a10 * b2 - b1 * a20) +
                    b0 * (a10 * a21 - a11 * a20)) /
                   det;
  return {x, y, z};
}

CornerSet corners3d(const Box3D& box) {
  const double c = std::cos(box.ry);
  const double s = std::sin(box.ry);
  CornerSet out;
  for (int m = 0; m < 8; ++m) {
    const double lx = (m & 1 ? +0.5 : -0.5) * box.w;
    const double ly = (m & 2 ? +0.5 : -0.5) * box.h;
    const double lz = (m & 4 ? +0.5 : -0.5) * box.l;
    out.pts[static_cast<std::size_t>(m)] = {
        c * lx + s * lz + box.center.x,
        ly + box.center.y,
        -s * lx + c * lz + box.center.z,
    };
  }
  return out;
}

ProjectedCorners project_corners(const Calibration& calib,
                                 const CornerSet& corners) {
  ProjectedCorners out;
  for (std::size_t m = 0; m < 8; ++m) out.pts[m] = project(calib, corners.pts[m]);
  return out;
}

double wrap_angle(double a) {
  double r = std::fmod(a + kPi, 2.0 * kPi);
  if (r <= 0.0) r += 2.0 * kPi;
  return r - kPi;
}

double viewing_angle(const Vec3& center) {
  if (center.z == 0.0) {
    throw std::invalid_argument("viewing angle undefined on the camera plane");
  }
  return std::atan2(center.x, center.z);
}

double alpha_from_ry(double ry, const Vec3& center) {
  return wrap_angle(ry - viewing_angle(center));
}

double ry_from_alpha(double alpha, const Vec3& center) {
  return wrap_angle(alpha + viewing_angle(center));
}

Box2D enclosing_rect(const Calibration& calib, const Box3D& box) {
  const std::optional<Box2D> rect = try_enclosing_rect(calib, box);
  if (!rect) {
    throw std::invalid_argument(
        "cannot build enclosing rectangle: a corner is behind the camera");
  }
  return *rect;
}

double iou2d(const Box2D& a, const Box2D& b) {
  const double iw = std::min(a.right(), b.right()) - std::max(a.left(), b.left());
  const double ih =
      std::min(a.bottom(), b.bottom()) - std::max(a.top(), b.top());
  if (iw <= 0.0 || ih <= 0.0) return 0.0;
  const double inter = iw * ih;
  const double uni = a.w * a.h + b.w * b.h - inter;
  return uni > 0.0 ? inter / uni : 0.0;
}

double iou3d(const Box3D& a, const Box3D& b) {
  if (a.w * a.l <= 0.0 || b.w * b.l <= 0.0) {
    throw std::invalid_argument("iou3d requires non-degenerate footprints");
  }
  const std::array<Vec2, 4> ca = bev_corners(a);
  const std::array<Vec2, 4> cb = bev_corners(b);
  std::vector<Vec2> poly(ca.begin(), ca.end());
  for (std::size_t i = 0; i < 4 && !poly.empty(); ++i) {
    poly = clip_by_edge(poly, cb[i], cb[(i + 1) % 4]);
  }
  const double bev_inter = polygon_area(poly);
  const double y_overlap =
      std::min(a.center.y, b.center.y) -
      std::max(a.center.y - a.h, b.center.y - b.h);
  const double inter = bev_inter * std::max(0.0, y_overlap);
  const double uni = a.w * a.h * a.l + b.w * b.h * b.l - inter;
  return uni > 0.0 ? std::max(0.0, inter / uni) : 0.0;
}

std::vector<std::size_t> nms(const std::vector<std::pair<Box2D, double>>& dets,
                             double thresh) {
  std::vector<std::size_t> order(dets.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return dets[a].second > dets[b].second;
  });
  std::vector<std::size_t> kept;
  for (std::size_t idx : order) {
    bool suppressed = false;
    for (std::size_t k : kept) {
      if (iou2d(dets[idx].first, dets[k].first) > thresh) {
        suppressed = true;
        break;
      }
    }
    if (!suppressed) kept.push_back(idx);
  }
  return kept;
}

Box3D refine_alpha(const Box3D& box, const Box2D& target,
                   const Calibration& calib, int steps, double span) {
  auto objective = [&](const Box3D& candidate) {
    const std::optional<Box2D> rect = try_enclosing_rect(calib, candidate);
    return rect ? iou2d(*rect, target) : -1.0;
  };

  Box3D best = box;
  double best_obj = objective(box);
  double step = span;
  for (int it = 0; it < steps; ++it) {
    for (const double dir : {+1.0, -1.0}) {
      Box3D candidate = best;
      candidate.alpha = wrap_angle(best.alpha + dir * step);
      candidate.ry = ry_from_alpha(candidate.alpha, candidate.center);
      const double obj = objective(candidate);
      if (obj > best_obj) {
        best = candidate;
        best_obj = obj;
      }
    }
    step /= 2.0;
  }
  return best;
}

}  // namespace d4lcn
