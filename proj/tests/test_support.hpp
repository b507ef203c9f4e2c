#pragma once

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <string>
#include <vector>

#include "d4lcn/anchors.hpp"
#include "d4lcn/eval.hpp"
#include "d4lcn/geometry.hpp"
#include "d4lcn/tensor.hpp"

namespace testsupport {

using namespace d4lcn;

// Scratch directory removed on destruction.
class TempDir {
 public:
  TempDir() {
    std::string tmpl =
        (std::filesystem::temp_directory_path() / "d4lcn_test_XXXXXX").string();
    if (!mkdtemp(tmpl.data())) throw std::runtime_error("mkdtemp failed");
    path_ = tmpl;
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  std::string file(const std::string& name) const {
    return (std::filesystem::path(path_) / name).string();
  }
  std::string subdir(const std::string& name) const {
    const std::filesystem::path p = std::filesystem::path(path_) / name;
    std::filesystem::create_directories(p);
    return p.string();
  }
  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

inline Calibration simple_calib(double f = 700.0, double cx = 600.0,
                                double cy = 180.0) {
  return Calibration::from_values(
      {f, 0, cx, 0, 0, f, cy, 0, 0, 0, 1, 0});
}

// Box with the alpha/ry coupling invariant already satisfied.
inline Box3D random_box3d(SplitMix64& rng, int n_c = 4) {
  Box3D b;
  b.center = {rng.uniform(-8.0, 8.0), rng.uniform(-1.0, 2.5),
              rng.uniform(8.0, 50.0)};
  b.w = rng.uniform(0.5, 2.5);
  b.h = rng.uniform(0.8, 2.2);
  b.l = rng.uniform(1.0, 5.0);
  b.ry = rng.uniform(-3.1, 3.1);
  b.alpha = alpha_from_ry(b.ry, b.center);
  b.class_id = 1 + static_cast<int>(rng.next() % static_cast<std::uint64_t>(n_c - 1));
  b.score = 1.0;
  return b;
}

// Point-in-box test matching the library conventions: vertical interval
// [y-h, y], footprint w along local x and l along local z, local frame
// reached by the inverse of the corners3d rotation.
inline bool point_in_box3d(const Box3D& b, double px, double py, double pz) {
  if (py > b.center.y || py < b.center.y - b.h) return false;
  const double c = std::cos(b.ry);
  const double s = std::sin(b.ry);
  const double dx = px - b.center.x;
  const double dz = pz - b.center.z;
  const double lx = c * dx - s * dz;
  const double lz = s * dx + c * dz;
  return std::abs(lx) <= b.w / 2.0 && std::abs(lz) <= b.l / 2.0;
}

// Monte-Carlo volume oracle for rotated-box overlap.
inline double mc_iou3d(const Box3D& a, const Box3D& b, int samples,
                       std::uint64_t seed) {
  const double r_a = std::hypot(a.w, a.l) / 2.0;
  const double r_b = std::hypot(b.w, b.l) / 2.0;
  const double lo_x = std::min(a.center.x - r_a, b.center.x - r_b);
  const double hi_x = std::max(a.center.x + r_a, b.center.x + r_b);
  const double lo_y = std::min(a.center.y - a.h, b.center.y - b.h);
  const double hi_y = std::max(a.center.y, b.center.y);
  const double lo_z = std::min(a.center.z - r_a, b.center.z - r_b);
  const double hi_z = std::max(a.center.z + r_a, b.center.z + r_b);
  SplitMix64 rng(seed);
  std::int64_t inter = 0, uni = 0;
  for (int i = 0; i < samples; ++i) {
    const double x = rng.uniform(lo_x, hi_x);
    const double y = rng.uniform(lo_y, hi_y);
    const double z = rng.uniform(lo_z, hi_z);
    const bool in_a = point_in_box3d(a, x, y, z);
    const bool in_b = point_in_box3d(b, x, y, z);
    inter += (in_a && in_b) ? 1 : 0;
    uni += (in_a || in_b) ? 1 : 0;
  }
  return uni > 0 ? static_cast<double>(inter) / static_cast<double>(uni) : 0.0;
}

// Independent greedy matcher used against eval::pr_curve.
struct BruteCounts {
  std::int64_t tp = 0;
  std::int64_t fp = 0;
};

inline BruteCounts brute_force_match(const std::vector<EvalDet>& dets,
                                     const std::vector<EvalGt>& gts,
                                     double thresh) {
  std::vector<std::size_t> order(dets.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  for (std::size_t i = 0; i + 1 < order.size(); ++i) {
    for (std::size_t j = i + 1; j < order.size(); ++j) {
      if (dets[order[j]].score > dets[order[i]].score) {
        std::swap(order[i], order[j]);
      }
    }
  }
  std::vector<bool> used(gts.size(), false);
  BruteCounts counts;
  for (std::size_t idx : order) {
    double best = 0.0;
    int best_g = -1;
    for (std::size_t g = 0; g < gts.size(); ++g) {
      if (used[g] || gts[g].ignored) continue;
      const double v = iou2d(dets[idx].box2d, gts[g].box2d);
      if (v > best) {
        best = v;
        best_g = static_cast<int>(g);
      }
    }
    if (best_g >= 0 && best >= thresh) {
      used[static_cast<std::size_t>(best_g)] = true;
      ++counts.tp;
    } else {
      ++counts.fp;
    }
  }
  return counts;
}

// Independent match-then-average oracle for anchor prior fitting.
inline std::vector<Anchor> brute_force_fit(const std::vector<Anchor>& templates,
                                           const std::vector<GtSample>& gts,
                                           int stride, int image_w,
                                           int image_h) {
  std::vector<Anchor> out = templates;
  double gz = 0, gw = 0, gh = 0, gl = 0, gs = 0, gc = 0;
  for (const GtSample& gt : gts) {
    gz += gt.box.center.z;
    gw += gt.box.w;
    gh += gt.box.h;
    gl += gt.box.l;
    gs += std::sin(gt.box.alpha);
    gc += std::cos(gt.box.alpha);
  }
  const double n_all = static_cast<double>(gts.size());
  for (Anchor& anchor : out) {
    double z = 0, w = 0, h = 0, l = 0, sn = 0, cs = 0;
    int count = 0;
    for (const GtSample& gt : gts) {
      const Box2D rect = enclosing_rect(gt.calib, gt.box);
      bool matched = false;
      for (int i = 0; i * stride + stride <= image_h && !matched; ++i) {
        for (int j = 0; j * stride + stride <= image_w && !matched; ++j) {
          Box2D placed;
          placed.cx = (j + 0.5) * stride;
          placed.cy = (i + 0.5) * stride;
          placed.w = anchor.aw;
          placed.h = anchor.ah;
          matched = iou2d(placed, rect) >= 0.5;
        }
      }
      if (matched) {
        z += gt.box.center.z;
        w += gt.box.w;
        h += gt.box.h;
        l += gt.box.l;
        sn += std::sin(gt.box.alpha);
        cs += std::cos(gt.box.alpha);
        ++count;
      }
    }
    anchor.match_count = count;
    if (count > 0) {
      anchor.az = z / count;
      anchor.aw3d = w / count;
      anchor.ah3d = h / count;
      anchor.al3d = l / count;
      anchor.aalpha = std::atan2(sn / count, cs / count);
    } else {
      anchor.az = gz / n_all;
      anchor.aw3d = gw / n_all;
      anchor.ah3d = gh / n_all;
      anchor.al3d = gl / n_all;
      anchor.aalpha = std::atan2(gs / n_all, gc / n_all);
    }
  }
  return out;
}

}  // namespace testsupport
