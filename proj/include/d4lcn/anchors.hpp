#pragma once

#include <string>
#include <vector>

#include "d4lcn/geometry.hpp"

namespace d4lcn {

// Fused 2D-3D anchor: a pixel-space template plus 3D priors fitted from
// ground-truth statistics. Templates carry ax = ay = 0; a placement position
// is assigned per grid cell.
struct Anchor {
  // 2D part (pixels)
  double ax = 0.0;
  double ay = 0.0;
  double aw = 0.0;
  double ah = 0.0;
  // 3D priors: depth, dimensions (meters), allocentric pose (radians)
  double az = 0.0;
  double aw3d = 0.0;
  double ah3d = 0.0;
  double al3d = 0.0;
  double aalpha = 0.0;
  // Number of ground-truth boxes that matched this template; 0 means the
  // priors are the global fallback.
  int match_count = 0;

  Box2D box2d() const { return {ax, ay, aw, ah}; }
  Anchor placed_at(double x, double y) const {
    Anchor a = *this;
    a.ax = x;
    a.ay = y;
    return a;
  }
};

inline constexpr int kAnchorScales = 12;
inline constexpr double kAnchorBaseHeight = 30.0;
inline constexpr double kAnchorHeightRatio = 1.265;
inline constexpr double kAnchorAspectRatios[] = {0.5, 1.0, 1.5};

// The 36 templates: heights 30 * 1.265^e for e in 0..11 crossed with aspect
// ratios (width/height) of 0.5, 1.0, 1.5. Scale-major order.
std::vector<Anchor> generate_templates();

struct GtSample {
  Box3D box;
  Calibration calib;
};

// Fit 3D priors: each ground truth is projected to its enclosing rectangle;
// a template matches a ground truth when some stride-spaced placement
// ((j+0.5)*stride, (i+0.5)*stride) reaches iou2d >= 0.5. Matched priors are
// the arithmetic mean of (z, w, h, l) and the circular mean of alpha.
// Templates with no match fall back to the global mean over all ground
// truths and keep match_count = 0.
std::vector<Anchor> fit_priors(const std::vector<Anchor>& templates,
                               const std::vector<GtSample>& gts, int stride,
                               int image_w, int image_h);

std::string anchors_to_json(const std::vector<Anchor>& anchors);
std::vector<Anchor> anchors_from_json(const std::string& text);

}  // namespace d4lcn
