#pragma once

#include "d4lcn/codec.hpp"

namespace d4lcn {

// 0.5*x^2 for |x| < 1, |x| - 0.5 otherwise.
double smooth_l1(double x);

struct LossComponents {
  double class_loss = 0.0;
  double loss_2d = 0.0;
  double loss_3d = 0.0;
  double loss_corner = 0.0;

  double sum() const { return class_loss + loss_2d + loss_3d + loss_corner; }
};

struct LossBreakdown {
  double class_loss = 0.0;
  double loss_2d = 0.0;
  double loss_3d = 0.0;
  double loss_corner = 0.0;
  double focal_weight = 0.0;
  double total = 0.0;
};

// Per-sample losses over the residual (t-value) space:
//   class_loss   cross entropy -log(pred score of the target class)
//   loss_2d      smooth L1 over the four 2D box slots
//   loss_3d      smooth L1 over the five 3D slots (wrapped pose difference)
//                plus the two projected-center slots
//   loss_corner  smooth L1 over the 8 projected corners and their depth
//                slots, averaged over the eight corners
LossComponents component_losses(const OutputVector& pred,
                                const OutputVector& target, int target_class);

// Background sample: cross entropy on the background score only.
LossComponents background_components(double background_score);

// total = (1 - s_t)^gamma * (class + 2d + 3d + corner); the focal factor
// scales the regression terms too.
LossBreakdown total_loss(const LossComponents& components, double s_t,
                         double gamma = 0.5);

}  // namespace d4lcn
