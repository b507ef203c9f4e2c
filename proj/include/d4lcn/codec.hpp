#pragma once

#include <array>
#include <vector>

#include "d4lcn/anchors.hpp"
#include "d4lcn/geometry.hpp"

namespace d4lcn {

// Slot layout of one per-anchor output vector of 35 + n_c values:
//   [0..4)   t2d   (tx, ty, tw, th)
//   [4..6)   tP    projected-center offsets (tx, ty)
//   [6..11)  t3d   (tz, tw, th, tl, talpha)
//   [11..35) tC    8 corners x (tx, ty, tz)
//   [35..)   s     n_c class scores
struct OutputLayout {
  int n_c = 1;

  static constexpr int t2d = 0;
  static constexpr int tp = 4;
  static constexpr int t3d = 6;
  static constexpr int tc = 11;
  static constexpr int scores = 35;

  int length() const { return scores + n_c; }
  static constexpr int corner_slot(int m, int field) { return tc + 3 * m + field; }
};

struct OutputVector {
  OutputLayout layout;
  std::vector<double> v;

  explicit OutputVector(int n_c)
      : layout{n_c}, v(static_cast<std::size_t>(layout.length()), 0.0) {}
  OutputVector(int n_c, std::vector<double> values);

  double score(int cls) const { return v[static_cast<std::size_t>(OutputLayout::scores + cls)]; }
  double& score(int cls) { return v[static_cast<std::size_t>(OutputLayout::scores + cls)]; }
};

struct DecodedBox {
  Box2D box2d;
  Projected center;  // projected 3D center and its depth
  Box3D box3d;
  std::array<Projected, 8> corners;
};

// Residual-to-box transformation: centers are anchor + t * anchor size,
// sizes are anchor * exp(t), depths and pose are anchor + t. The 3D center
// comes from back-projecting the decoded projected center at the decoded
// depth; ry is recovered from alpha through the viewing angle.
DecodedBox decode(const OutputVector& out, const Anchor& anchor,
                  const Calibration& calib);

// Exact algebraic inverse of decode. The projected center and per-corner
// targets are produced from the 3D box via corners3d and project; the score
// block is one-hot at the ground-truth class.
OutputVector encode(const Box3D& gt, const Box2D& gt2d,
                    const Calibration& calib, const Anchor& anchor, int n_c);

}  // namespace d4lcn
