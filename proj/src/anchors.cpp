#include "d4lcn/anchors.hpp"

#include <cmath>
#include <stdexcept>

#include <json.hpp>

namespace d4lcn {

std::vector<Anchor> generate_templates() {
  std::vector<Anchor> out;
  out.reserve(kAnchorScales * 3);
  for (int e = 0; e < kAnchorScales; ++e) {
    const double h = kAnchorBaseHeight * std::pow(kAnchorHeightRatio, e);
    for (const double ratio : kAnchorAspectRatios) {
      Anchor a;
      a.ah = h;
      a.aw = h * ratio;
      out.push_back(a);
    }
  }
  return out;
}

namespace {

struct PriorAccum {
  double z = 0.0;
  double w = 0.0;
  double h = 0.0;
  double l = 0.0;
  double sin_alpha = 0.0;
  double cos_alpha = 0.0;
  int count = 0;

  void add(const Box3D& b) {
    z += b.center.z;
    w += b.w;
    h += b.h;
    l += b.l;
    sin_alpha += std::sin(b.alpha);
    cos_alpha += std::cos(b.alpha);
    ++count;
  }

  void write_to(Anchor& a) const {
    a.az = z / count;
    a.aw3d = w / count;
    a.ah3d = h / count;
    a.al3d = l / count;
    a.aalpha = std::atan2(sin_alpha / count, cos_alpha / count);
  }
};

}  // namespace

std::vector<Anchor> fit_priors(const std::vector<Anchor>& templates,
                               const std::vector<GtSample>& gts, int stride,
                               int image_w, int image_h) {
  if (gts.empty()) {
    throw std::invalid_argument("fit_priors needs at least one ground truth");
  }
  if (stride < 1 || image_w < stride || image_h < stride) {
    throw std::invalid_argument("image extents must cover at least one stride");
  }

  std::vector<Box2D> projected;
  projected.reserve(gts.size());
  PriorAccum global;
  for (const GtSample& gt : gts) {
    projected.push_back(enclosing_rect(gt.calib, gt.box));
    global.add(gt.box);
  }

  const int rows = image_h / stride;
  const int cols = image_w / stride;

  std::vector<Anchor> out = templates;
  for (Anchor& anchor : out) {
    PriorAccum accum;
    for (std::size_t g = 0; g < gts.size(); ++g) {
      // A ground truth matches the template when any grid placement reaches
      // IoU >= 0.5; it then contributes once to the statistics.
      bool matched = false;
      for (int i = 0; i < rows && !matched; ++i) {
        for (int j = 0; j < cols && !matched; ++j) {
          const Box2D placed{(j + 0.5) * stride, (i + 0.5) * stride, anchor.aw,
                             anchor.ah};
          matched = iou2d(placed, projected[g]) >= 0.5;
        }
      }
      if (matched) accum.add(gts[g].box);
    }
    if (accum.count > 0) {
      accum.write_to(anchor);
      anchor.match_count = accum.count;
    } else {
      global.write_to(anchor);
      anchor.match_count = 0;
    }
  }
  return out;
}

std::string anchors_to_json(const std::vector<Anchor>& anchors) {
  nlohmann::json arr = nlohmann::json::array();
  for (const Anchor& a : anchors) {
    arr.push_back({
        {"a2d", {a.ax, a.ay, a.aw, a.ah}},
        {"a3d", {a.az, a.aw3d, a.ah3d, a.al3d, a.aalpha}},
        {"match_count", a.match_count},
    });
  }
  return arr.dump(2);
}

std::vector<Anchor> anchors_from_json(const std::string& text) {
  const nlohmann::json arr = nlohmann::json::parse(text);
  if (!arr.is_array()) {
    throw std::invalid_argument("anchors document must be a JSON array");
  }
  std::vector<Anchor> out;
  out.reserve(arr.size());
  for (const nlohmann::json& rec : arr) {
    const auto& a2d = rec.at("a2d");
    const auto& a3d = rec.at("a3d");
    if (a2d.size() != 4 || a3d.size() != 5) {
      throw std::invalid_argument("anchor record needs 4 a2d and 5 a3d values");
    }
    Anchor a;
    a.ax = a2d[0].get<double>();
    a.ay = a2d[1].get<double>();
    a.aw = a2d[2].get<double>();
    a.ah = a2d[3].get<double>();
    a.az = a3d[0].get<double>();
    a.aw3d = a3d[1].get<double>();
    a.ah3d = a3d[2].get<double>();
    a.al3d = a3d[3].get<double>();
    a.aalpha = a3d[4].get<double>();
    a.match_count = rec.at("match_count").get<int>();
    out.push_back(a);
  }
  return out;
}

}  // namespace d4lcn
