#include "d4lcn/eval.hpp"

#include <algorithm>
#include <numeric>

namespace d4lcn {

namespace {

double match_iou(const EvalDet& det, const EvalGt& gt, Matching matching) {
  return matching == Matching::iou_2d ? iou2d(det.box2d, gt.box2d)
                                      : iou3d(det.box3d, gt.box3d);
}

// Fraction of the detection rectangle covered by the region.
double coverage(const Box2D& det, const Box2D& region) {
  const double iw =
      std::min(det.right(), region.right()) - std::max(det.left(), region.left());
  const double ih =
      std::min(det.bottom(), region.bottom()) - std::max(det.top(), region.top());
  if (iw <= 0.0 || ih <= 0.0) return 0.0;
  const double area = det.w * det.h;
  return area > 0.0 ? iw * ih / area : 0.0;
}

}  // namespace

PRCurve pr_curve(const std::vector<EvalImage>& images, Matching matching,
                 double iou_thresh) {
  struct Ref {
    std::size_t image;
    std::size_t det;
    double score;
  };
  std::vector<Ref> order;
  PRCurve curve;
  for (std::size_t i = 0; i < images.size(); ++i) {
    for (std::size_t d = 0; d < images[i].dets.size(); ++d) {
      order.push_back({i, d, images[i].dets[d].score});
    }
    for (const EvalGt& gt : images[i].gts) {
      if (!gt.ignored) ++curve.num_gt;
    }
  }
  std::stable_sort(order.begin(), order.end(),
                   [](const Ref& a, const Ref& b) { return a.score > b.score; });

  std::vector<std::vector<bool>> gt_used(images.size());
  for (std::size_t i = 0; i < images.size(); ++i) {
    gt_used[i].assign(images[i].gts.size(), false);
  }

  std::int64_t tp = 0, fp = 0;
  for (const Ref& ref : order) {
    const EvalImage& img = images[ref.image];
    const EvalDet& det = img.dets[ref.det];

    // Best unmatched counted ground truth first; ignored ones only absorb
    // the detection when no counted match exists.
    int best_gt = -1;
    double best_iou = 0.0;
    for (std::size_t g = 0; g < img.gts.size(); ++g) {
      if (gt_used[ref.image][g] || img.gts[g].ignored) continue;
      const double v = match_iou(det, img.gts[g], matching);
      if (v > best_iou) {
        best_iou = v;
        best_gt = static_cast<int>(g);
      }
    }
    if (best_gt >= 0 && best_iou >= iou_thresh) {
      gt_used[ref.image][static_cast<std::size_t>(best_gt)] = true;
      ++tp;
    } else {
      bool ignore = false;
      for (std::size_t g = 0; g < img.gts.size() && !ignore; ++g) {
        if (!img.gts[g].ignored || gt_used[ref.image][g]) continue;
        if (match_iou(det, img.gts[g], matching) >= iou_thresh) {
          gt_used[ref.image][g] = true;
          ignore = true;
        }
      }
      for (std::size_t r = 0; r < img.dontcare.size() && !ignore; ++r) {
        ignore = coverage(det.box2d, img.dontcare[r]) >= iou_thresh;
      }
      if (ignore) continue;  // neither TP nor FP
      ++fp;
    }

    PRPoint point;
    point.threshold = det.score;
    point.tp = tp;
    point.fp = fp;
    point.fn = curve.num_gt - tp;
    point.precision = tp + fp > 0 ? static_cast<double>(tp) / (tp + fp) : 0.0;
    point.recall =
        curve.num_gt > 0 ? static_cast<double>(tp) / curve.num_gt : 0.0;
    curve.points.push_back(point);
  }
  return curve;
}

PRCurve pr_curve(const std::vector<EvalDet>& dets,
                 const std::vector<EvalGt>& gts, Matching matching,
                 double iou_thresh) {
  EvalImage img;
  img.dets = dets;
  img.gts = gts;
  return pr_curve(std::vector<EvalImage>{img}, matching, iou_thresh);
}

double ap(const PRCurve& curve, ApVariant variant) {
  const auto interp = [&](double recall) {
    double best = 0.0;
    for (const PRPoint& p : curve.points) {
      if (p.recall >= recall) best = std::max(best, p.precision);
    }
    return best;
  };
  double acc = 0.0;
  int samples = 0;
  if (variant == ApVariant::r11) {
    for (int i = 0; i <= 10; ++i) acc += interp(i / 10.0);
    samples = 11;
  } else {
    for (int i = 1; i <= 40; ++i) acc += interp(i / 40.0);
    samples = 40;
  }
  return acc / samples;
}

bool passes_difficulty(const LabelRecord& rec, Difficulty level) {
  switch (level) {
    case Difficulty::easy:
      return rec.bbox_height() >= 40.0 && rec.occlusion <= 0 &&
             rec.truncation <= 0.15;
    case Difficulty::moderate:
      return rec.bbox_height() >= 25.0 && rec.occlusion <= 1 &&
             rec.truncation <= 0.30;
    case Difficulty::hard:
      return rec.bbox_height() >= 25.0 && rec.occlusion <= 2 &&
             rec.truncation <= 0.50;
  }
  return false;
}

std::vector<LabelRecord> difficulty_filter(const std::vector<LabelRecord>& gts,
                                           Difficulty level) {
  std::vector<LabelRecord> out;
  for (const LabelRecord& rec : gts) {
    if (passes_difficulty(rec, level)) out.push_back(rec);
  }
  return out;
}

}  // namespace d4lcn
