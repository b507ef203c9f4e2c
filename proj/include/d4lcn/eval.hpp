#pragma once

#include <vector>

#include "d4lcn/geometry.hpp"
#include "d4lcn/kitti.hpp"

namespace d4lcn {

struct EvalDet {
  Box2D box2d;
  Box3D box3d;
  double score = 0.0;
};

struct EvalGt {
  Box2D box2d;
  Box3D box3d;
  // Ignored ground truths (e.g. outside the difficulty bucket) absorb
  // matching detections without counting them as TP or FP.
  bool ignored = false;
};

// One image worth of detections and ground truths; detections may not match
// across images. DontCare rectangles swallow otherwise-unmatched detections
// that lie mostly inside them.
struct EvalImage {
  std::vector<EvalDet> dets;
  std::vector<EvalGt> gts;
  std::vector<Box2D> dontcare;
};

enum class Matching { iou_2d, iou_3d };

struct PRPoint {
  double threshold = 0.0;  // score of the detection realizing this point
  double precision = 0.0;
  double recall = 0.0;
  std::int64_t tp = 0;
  std::int64_t fp = 0;
  std::int64_t fn = 0;
};

struct PRCurve {
  std::vector<PRPoint> points;  // descending score order
  std::int64_t num_gt = 0;
};

// Greedy matching in descending score order: each ground truth is matched
// at most once; a detection is a TP iff its best unmatched ground truth
// reaches the IoU threshold. Score ties are broken by input order.
PRCurve pr_curve(const std::vector<EvalImage>& images, Matching matching,
                 double iou_thresh);

// Single-image convenience form.
PRCurve pr_curve(const std::vector<EvalDet>& dets,
                 const std::vector<EvalGt>& gts, Matching matching,
                 double iou_thresh);

enum class ApVariant { r11, r40 };

// Mean over the recall sample set of the interpolated precision
// max{precision at recall >= r}. R11 samples {0, 0.1, ..., 1.0}; R40
// samples {1/40, ..., 40/40}.
double ap(const PRCurve& curve, ApVariant variant);

enum class Difficulty { easy, moderate, hard };

// easy: bbox height >= 40 px, occlusion 0, truncation <= 0.15
// moderate: >= 25 px, occlusion <= 1, truncation <= 0.30
// hard: >= 25 px, occlusion <= 2, truncation <= 0.50
bool passes_difficulty(const LabelRecord& rec, Difficulty level);
std::vector<LabelRecord> difficulty_filter(const std::vector<LabelRecord>& gts,
                                           Difficulty level);

}  // namespace d4lcn
