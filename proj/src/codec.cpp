#include "d4lcn/codec.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace d4lcn {

namespace {

void check_anchor(const Anchor& a) {
  if (a.aw <= 0.0 || a.ah <= 0.0) {
    throw std::invalid_argument("anchor needs positive 2D extents");
  }
  if (a.aw3d <= 0.0 || a.ah3d <= 0.0 || a.al3d <= 0.0) {
    throw std::invalid_argument("anchor has no fitted 3D priors");
  }
}

}  // namespace

OutputVector::OutputVector(int n_c, std::vector<double> values)
    : layout{n_c}, v(std::move(values)) {
  if (v.size() != static_cast<std::size_t>(layout.length())) {
    throw std::invalid_argument("output vector needs " +
                                std::to_string(layout.length()) +
                                " values, got " + std::to_string(v.size()));
  }
}

DecodedBox decode(const OutputVector& out, const Anchor& anchor,
                  const Calibration& calib) {
  check_anchor(anchor);
  const std::vector<double>& t = out.v;

  DecodedBox r;
  r.box2d.cx = anchor.ax + t[OutputLayout::t2d + 0] * anchor.aw;
  r.box2d.cy = anchor.ay + t[OutputLayout::t2d + 1] * anchor.ah;
  r.box2d.w = anchor.aw * std::exp(t[OutputLayout::t2d + 2]);
  r.box2d.h = anchor.ah * std::exp(t[OutputLayout::t2d + 3]);

  r.center.u = anchor.ax + t[OutputLayout::tp + 0] * anchor.aw;
  r.center.v = anchor.ay + t[OutputLayout::tp + 1] * anchor.ah;
  r.center.depth = anchor.az + t[OutputLayout::t3d + 0];

  r.box3d.w = anchor.aw3d * std::exp(t[OutputLayout::t3d + 1]);
  r.box3d.h = anchor.ah3d * std::exp(t[OutputLayout::t3d + 2]);
  r.box3d.l = anchor.al3d * std::exp(t[OutputLayout::t3d + 3]);
  r.box3d.alpha = wrap_angle(anchor.aalpha + t[OutputLayout::t3d + 4]);

  for (int m = 0; m < 8; ++m) {
    Projected& p = r.corners[static_cast<std::size_t>(m)];
    p.u = anchor.ax + t[OutputLayout::corner_slot(m, 0)] * anchor.aw;
    p.v = anchor.ay + t[OutputLayout::corner_slot(m, 1)] * anchor.ah;
    p.depth = anchor.az + t[OutputLayout::corner_slot(m, 2)];
  }

  r.box3d.center = back_project(calib, r.center.u, r.center.v, r.center.depth);
  r.box3d.ry = ry_from_alpha(r.box3d.alpha, r.box3d.center);

  int best = 0;
  for (int c = 1; c < out.layout.n_c; ++c) {
    if (out.score(c) > out.score(best)) best = c;
  }
  r.box3d.class_id = best;
  r.box3d.score = out.score(best);
  return r;
}

OutputVector encode(const Box3D& gt, const Box2D& gt2d,
                    const Calibration& calib, const Anchor& anchor, int n_c) {
  check_anchor(anchor);
  if (gt2d.w <= 0.0 || gt2d.h <= 0.0 || gt.w <= 0.0 || gt.h <= 0.0 ||
      gt.l <= 0.0) {
    throw std::invalid_argument("encode requires positive box sizes");
  }

  OutputVector out(n_c);
  std::vector<double>& t = out.v;

  t[OutputLayout::t2d + 0] = (gt2d.cx - anchor.ax) / anchor.aw;
  t[OutputLayout::t2d + 1] = (gt2d.cy - anchor.ay) / anchor.ah;
  t[OutputLayout::t2d + 2] = std::log(gt2d.w / anchor.aw);
  t[OutputLayout::t2d + 3] = std::log(gt2d.h / anchor.ah);

  const Projected center = project(calib, gt.center);
  t[OutputLayout::tp + 0] = (center.u - anchor.ax) / anchor.aw;
  t[OutputLayout::tp + 1] = (center.v - anchor.ay) / anchor.ah;

  t[OutputLayout::t3d + 0] = center.depth - anchor.az;
  t[OutputLayout::t3d + 1] = std::log(gt.w / anchor.aw3d);
  t[OutputLayout::t3d + 2] = std::log(gt.h / anchor.ah3d);
  t[OutputLayout::t3d + 3] = std::log(gt.l / anchor.al3d);
  t[OutputLayout::t3d + 4] = gt.alpha - anchor.aalpha;

  const ProjectedCorners corners = project_corners(calib, corners3d(gt));
  for (int m = 0; m < 8; ++m) {
    const Projected& p = corners.pts[static_cast<std::size_t>(m)];
    t[OutputLayout::corner_slot(m, 0)] = (p.u - anchor.ax) / anchor.aw;
    t[OutputLayout::corner_slot(m, 1)] = (p.v - anchor.ay) / anchor.ah;
    t[OutputLayout::corner_slot(m, 2)] = p.depth - anchor.az;
  }

  if (gt.class_id < 0 || gt.class_id >= n_c) {
    throw std::invalid_argument("class id " + std::to_string(gt.class_id) +
                                " outside [0, " + std::to_string(n_c) + ")");
  }
  out.score(gt.class_id) = 1.0;
  return out;
}

}  // namespace d4lcn
