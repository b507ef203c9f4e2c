#include "d4lcn/losses.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace d4lcn {

namespace {

void check_score(double s_t) {
  if (!(s_t > 0.0) || s_t > 1.0) {
    throw std::invalid_argument("target-class score must be in (0, 1], got " +
                                std::to_string(s_t));
  }
}

double slot_diff_sum(const OutputVector& pred, const OutputVector& target,
                     int first, int count) {
  double acc = 0.0;
  for (int i = first; i < first + count; ++i) {
    acc += smooth_l1(pred.v[static_cast<std::size_t>(i)] -
                     target.v[static_cast<std::size_t>(i)]);
  }
  return acc;
}

}  // namespace

double smooth_l1(double x) {
  const double a = std::abs(x);
  return a < 1.0 ? 0.5 * x * x : a - 0.5;
}

LossComponents component_losses(const OutputVector& pred,
                                const OutputVector& target, int target_class) {
  if (pred.layout.n_c != target.layout.n_c) {
    throw std::invalid_argument("prediction/target class counts differ");
  }
  if (target_class < 0 || target_class >= pred.layout.n_c) {
    throw std::invalid_argument("target class out of range");
  }
  const double s_t = pred.score(target_class);
  check_score(s_t);

  LossComponents out;
  out.class_loss = -std::log(s_t);
  out.loss_2d = slot_diff_sum(pred, target, OutputLayout::t2d, 4);

  // 3D slots: depth, three log sizes, wrapped pose difference, plus the
  // projected-center slots.
  out.loss_3d = slot_diff_sum(pred, target, OutputLayout::t3d, 4) +
                smooth_l1(wrap_angle(
                    pred.v[OutputLayout::t3d + 4] - target.v[OutputLayout::t3d + 4])) +
                slot_diff_sum(pred, target, OutputLayout::tp, 2);

  // Corner slots: projected (u, v) and depth residuals per corner, averaged
  // over the eight corners.
  double corner = 0.0;
  for (int m = 0; m < 8; ++m) {
    for (int f = 0; f < 3; ++f) {
      corner += smooth_l1(pred.v[OutputLayout::corner_slot(m, f)] -
                          target.v[OutputLayout::corner_slot(m, f)]);
    }
  }
  out.loss_corner = corner / 8.0;
  return out;
}

LossComponents background_components(double background_score) {
  check_score(background_score);
  LossComponents out;
  out.class_loss = -std::log(background_score);
  return out;
}

LossBreakdown total_loss(const LossComponents& components, double s_t,
                         double gamma) {
  check_score(s_t);
  if (gamma < 0.0) {
    throw std::invalid_argument("gamma must be >= 0");
  }
  LossBreakdown out;
  out.class_loss = components.class_loss;
  out.loss_2d = components.loss_2d;
  out.loss_3d = components.loss_3d;
  out.loss_corner = components.loss_corner;
  out.focal_weight = std::pow(1.0 - s_t, gamma);
  out.total = out.focal_weight * components.sum();
  return out;
}

}  // namespace d4lcn
