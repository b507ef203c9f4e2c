#pragma once

#include <array>
#include <cstddef>
#include <utility>
#include <vector>

namespace d4lcn {

struct Vec3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
};

// Camera intrinsics, a 3x4 row-major matrix. Normalized on construction so
// that K[2][2] = 1; requires positive focal lengths.
struct Calibration {
  std::array<double, 12> k{};

  static Calibration from_values(const std::array<double, 12>& values);

  double at(int row, int col) const { return k[static_cast<std::size_t>(row * 4 + col)]; }
  double fx() const { return at(0, 0); }
  double fy() const { return at(1, 1); }
  double cx() const { return at(0, 2); }
  double cy() const { return at(1, 2); }
};

// Axis-aligned pixel rectangle in center/size form.
struct Box2D {
  double cx = 0.0;
  double cy = 0.0;
  double w = 0.0;
  double h = 0.0;

  double left() const { return cx - w / 2.0; }
  double right() const { return cx + w / 2.0; }
  double top() const { return cy - h / 2.0; }
  double bottom() const { return cy + h / 2.0; }

  static Box2D from_corners(double left, double top, double right,
                            double bottom);
};

// 3D detection box in camera coordinates. Dimensions are (w, h, l) along the
// local x/y/z axes. For volume overlap the box occupies the vertical
// interval [y-h, y] (y is the ground-contact level).
struct Box3D {
  Vec3 center;
  double w = 1.0;
  double h = 1.0;
  double l = 1.0;
  double ry = 0.0;     // egocentric yaw, radians in (-pi, pi]
  double alpha = 0.0;  // allocentric pose, radians in (-pi, pi]
  int class_id = 0;
  double score = 0.0;
};

// Eight box corners, corner m offset by
// ((m&1 ? + : -) w/2, (m&2 ? + : -) h/2, (m&4 ? + : -) l/2) in the box frame,
// rotated about the camera y-axis by ry and translated to the center.
struct CornerSet {
  std::array<Vec3, 8> pts;
};

struct Projected {
  double u = 0.0;
  double v = 0.0;
  double depth = 0.0;  // homogeneous scale; <= 0 means behind the camera

  bool in_front() const { return depth > 0.0; }
};

struct ProjectedCorners {
  std::array<Projected, 8> pts;
};

// [u,v,1] * depth = K * [x,y,z,1].
Projected project(const Calibration& calib, const Vec3& p);

// Inverse of project: solves K_left3x3 * p = [u,v,1]*depth - K_col4.
Vec3 back_project(const Calibration& calib, double u, double v, double depth);

CornerSet corners3d(const Box3D& box);
ProjectedCorners project_corners(const Calibration& calib,
                                 const CornerSet& corners);

// Wrap an angle to (-pi, pi].
double wrap_angle(double a);

// Viewing angle of a point: atan2(x, z). Undefined on the camera plane.
double viewing_angle(const Vec3& center);

// alpha = wrap(ry - theta), ry = wrap(alpha + theta).
double alpha_from_ry(double ry, const Vec3& center);
double ry_from_alpha(double alpha, const Vec3& center);

// Axis-aligned bounding rectangle of the eight projected corners. Throws if
// any corner projects behind the camera.
Box2D enclosing_rect(const Calibration& calib, const Box3D& box);

double iou2d(const Box2D& a, const Box2D& b);

// Bird's-eye rotated-rectangle overlap (convex polygon clipping) times the
// vertical interval overlap, over the union of volumes.
double iou3d(const Box3D& a, const Box3D& b);

// Greedy descending-score suppression at the given iou2d threshold. Returns
// kept input indices in descending score order; ties keep the lower index
// first.
std::vector<std::size_t> nms(const std::vector<std::pair<Box2D, double>>& dets,
                             double thresh);

// Local search over alpha with a geometrically shrinking step, keeping a
// perturbation only when iou2d(enclosing_rect(candidate), target) strictly
// improves. ry is kept consistent with alpha through the viewing angle.
Box3D refine_alpha(const Box3D& box, const Box2D& target,
                   const Calibration& calib, int steps = 8,
                   double span = 0.39269908169872414);  // pi/8

}  // namespace d4lcn
