#include <doctest.h>

#include <cmath>

#include "d4lcn/codec.hpp"
#include "test_support.hpp"

using namespace d4lcn;
using testsupport::random_box3d;
using testsupport::simple_calib;

namespace {

Anchor fitted_anchor(double ax, double ay) {
  Anchor a;
  a.ax = ax;
  a.ay = ay;
  a.aw = 80;
  a.ah = 60;
  a.az = 25;
  a.aw3d = 1.6;
  a.ah3d = 1.5;
  a.al3d = 3.9;
  a.aalpha = 0.2;
  a.match_count = 5;
  return a;
}

}  // namespace

TEST_CASE("output layout arithmetic") {
  const OutputLayout four{4};
  CHECK(four.length() == 39);
  CHECK(OutputLayout{1}.length() == 36);

  // Slots partition [0, 35+n_c) with no gaps.
  CHECK(OutputLayout::t2d == 0);
  CHECK(OutputLayout::tp == OutputLayout::t2d + 4);
  CHECK(OutputLayout::t3d == OutputLayout::tp + 2);
  CHECK(OutputLayout::tc == OutputLayout::t3d + 5);
  CHECK(OutputLayout::scores == OutputLayout::tc + 24);
  for (int m = 0; m < 8; ++m) {
    CHECK(OutputLayout::corner_slot(m, 0) == 11 + 3 * m);
    CHECK(OutputLayout::corner_slot(m, 2) < OutputLayout::scores);
  }

  // Grid arithmetic of the detection-head output volume.
  const std::int64_t total = 32LL * 110 * 36 * four.length();
  CHECK(total == 32LL * 110 * 36 * 39);
}

TEST_CASE("decoding the zero vector returns the anchor") {
  const Anchor anchor = fitted_anchor(640, 200);
  const Calibration calib = simple_calib();
  const OutputVector zeros(4);
  REQUIRE_THROWS_AS(decode(zeros, Anchor{}, calib), std::invalid_argument);

  const DecodedBox box = decode(zeros, anchor, calib);
  CHECK(box.box2d.cx == anchor.ax);
  CHECK(box.box2d.cy == anchor.ay);
  CHECK(box.box2d.w == anchor.aw);
  CHECK(box.box2d.h == anchor.ah);
  CHECK(box.center.u == anchor.ax);
  CHECK(box.center.v == anchor.ay);
  CHECK(box.center.depth == anchor.az);
  CHECK(box.box3d.w == anchor.aw3d);
  CHECK(box.box3d.h == anchor.ah3d);
  CHECK(box.box3d.l == anchor.al3d);
  CHECK(box.box3d.alpha == doctest::Approx(anchor.aalpha));
  for (const Projected& c : box.corners) {
    CHECK(c.u == anchor.ax);
    CHECK(c.depth == anchor.az);
  }
}

TEST_CASE("log-size slots scale multiplicatively") {
  const Anchor anchor = fitted_anchor(640, 200);
  const Calibration calib = simple_calib();
  OutputVector vec(4);
  vec.v[OutputLayout::t2d + 2] = std::log(2.0);
  const DecodedBox box = decode(vec, anchor, calib);
  CHECK(box.box2d.w == doctest::Approx(2.0 * anchor.aw).epsilon(1e-12));
}

TEST_CASE("depth decode is strictly monotone in its slot") {
  const Anchor anchor = fitted_anchor(640, 200);
  const Calibration calib = simple_calib();
  double prev = -1e300;
  for (double tz = -5; tz <= 5; tz += 0.5) {
    OutputVector vec(4);
    vec.v[OutputLayout::t3d + 0] = tz;
    const DecodedBox box = decode(vec, anchor, calib);
    CHECK(box.center.depth > prev);
    prev = box.center.depth;
  }
}

TEST_CASE("decoded sizes stay positive for any finite slot value") {
  const Anchor anchor = fitted_anchor(640, 200);
  const Calibration calib = simple_calib();
  for (double t : {-40.0, -3.0, 0.0, 2.5, 30.0}) {
    OutputVector vec(4);
    for (int i = 0; i < 4; ++i) vec.v[OutputLayout::t2d + i] = t;
    for (int i = 0; i < 5; ++i) vec.v[OutputLayout::t3d + i] = t;
    const DecodedBox box = decode(vec, anchor, calib);
    CHECK(box.box2d.w > 0);
    CHECK(box.box2d.h > 0);
    CHECK(box.box3d.w > 0);
    CHECK(box.box3d.h > 0);
    CHECK(box.box3d.l > 0);
  }
}

TEST_CASE("encoding a ground truth aligned with the anchor zeroes the box slots") {
  const Calibration calib = simple_calib();
  // Build the anchor from the ground truth itself.
  Box3D gt;
  gt.center = {1.5, 0.8, 30};
  gt.w = 1.7;
  gt.h = 1.5;
  gt.l = 4.1;
  gt.ry = 0.6;
  gt.alpha = alpha_from_ry(gt.ry, gt.center);
  gt.class_id = 2;
  const Projected center = project(calib, gt.center);

  Anchor anchor;
  anchor.ax = center.u;
  anchor.ay = center.v;
  anchor.aw = 90;
  anchor.ah = 70;
  anchor.az = center.depth;
  anchor.aw3d = gt.w;
  anchor.ah3d = gt.h;
  anchor.al3d = gt.l;
  anchor.aalpha = gt.alpha;
  anchor.match_count = 1;
  const Box2D gt2d{anchor.ax, anchor.ay, anchor.aw, anchor.ah};

  const OutputVector vec = encode(gt, gt2d, calib, anchor, 4);
  for (int i = 0; i < 4; ++i) CHECK(vec.v[OutputLayout::t2d + i] == 0.0);
  for (int i = 0; i < 2; ++i) CHECK(vec.v[OutputLayout::tp + i] == 0.0);
  for (int i = 0; i < 5; ++i) {
    CHECK(std::abs(vec.v[OutputLayout::t3d + i]) <= 1e-12);
  }
  CHECK(vec.score(2) == 1.0);
  CHECK(vec.score(0) == 0.0);
}

TEST_CASE("a doubled 2D width encodes to log two") {
  const Calibration calib = simple_calib();
  const Anchor anchor = fitted_anchor(640, 200);
  SplitMix64 rng(71);
  const Box3D gt = random_box3d(rng);
  const Box2D gt2d{anchor.ax, anchor.ay, 2.0 * anchor.aw, anchor.ah};
  const OutputVector vec = encode(gt, gt2d, calib, anchor, 4);
  CHECK(vec.v[OutputLayout::t2d + 2] == doctest::Approx(std::log(2.0)).epsilon(1e-15));
}

TEST_CASE("decode inverts encode on random ground truths") {
  const Calibration calib = Calibration::from_values(
      {707.05, 0, 604.08, 45.76, 0, 707.05, 180.51, -0.35, 0, 0, 1, 0.0045});
  SplitMix64 rng(73);
  for (int iter = 0; iter < 100; ++iter) {
    const Box3D gt = random_box3d(rng);
    Anchor anchor = fitted_anchor(rng.uniform(100, 1100), rng.uniform(50, 320));
    anchor.az = rng.uniform(5, 60);
    anchor.aalpha = rng.uniform(-3.1, 3.1);
    const Box2D gt2d{rng.uniform(100, 1100), rng.uniform(50, 320),
                     rng.uniform(20, 300), rng.uniform(20, 300)};

    const OutputVector vec = encode(gt, gt2d, calib, anchor, 4);
    const DecodedBox back = decode(vec, anchor, calib);

    CHECK(back.box2d.cx == doctest::Approx(gt2d.cx).epsilon(1e-9));
    CHECK(back.box2d.cy == doctest::Approx(gt2d.cy).epsilon(1e-9));
    CHECK(back.box2d.w == doctest::Approx(gt2d.w).epsilon(1e-9));
    CHECK(back.box2d.h == doctest::Approx(gt2d.h).epsilon(1e-9));
    CHECK(back.box3d.center.x == doctest::Approx(gt.center.x).epsilon(1e-9));
    CHECK(back.box3d.center.y == doctest::Approx(gt.center.y).epsilon(1e-9));
    CHECK(back.box3d.center.z == doctest::Approx(gt.center.z).epsilon(1e-9));
    CHECK(back.box3d.w == doctest::Approx(gt.w).epsilon(1e-9));
    CHECK(back.box3d.h == doctest::Approx(gt.h).epsilon(1e-9));
    CHECK(back.box3d.l == doctest::Approx(gt.l).epsilon(1e-9));
    CHECK(std::abs(wrap_angle(back.box3d.alpha - gt.alpha)) <= 1e-9);
    CHECK(std::abs(wrap_angle(back.box3d.ry - gt.ry)) <= 1e-9);
    CHECK(back.box3d.class_id == gt.class_id);
    CHECK(back.box3d.score == 1.0);

    // Corners come back as the projected ground-truth corners.
    const ProjectedCorners pc = project_corners(calib, corners3d(gt));
    for (int m = 0; m < 8; ++m) {
      CHECK(back.corners[m].u == doctest::Approx(pc.pts[m].u).epsilon(1e-9));
      CHECK(back.corners[m].v == doctest::Approx(pc.pts[m].v).epsilon(1e-9));
      CHECK(back.corners[m].depth ==
            doctest::Approx(pc.pts[m].depth).epsilon(1e-9));
    }
  }
}

TEST_CASE("encode inverts decode on encoded vectors") {
  // Identity holds on the image of encode: vectors whose corner slots agree
  // with the box slots through the corner construction.
  const Calibration calib = Calibration::from_values(
      {707.05, 0, 604.08, 45.76, 0, 707.05, 180.51, -0.35, 0, 0, 1, 0.0045});
  SplitMix64 rng(79);
  for (int iter = 0; iter < 100; ++iter) {
    const Box3D gt = random_box3d(rng);
    Anchor anchor = fitted_anchor(rng.uniform(200, 1000), rng.uniform(80, 300));
    anchor.az = rng.uniform(8, 50);
    const Box2D gt2d{rng.uniform(200, 1000), rng.uniform(80, 300),
                     rng.uniform(30, 250), rng.uniform(30, 250)};

    const OutputVector vec = encode(gt, gt2d, calib, anchor, 4);
    const DecodedBox box = decode(vec, anchor, calib);
    const OutputVector again = encode(box.box3d, box.box2d, calib, anchor, 4);

    REQUIRE(again.v.size() == vec.v.size());
    for (std::size_t i = 0; i < vec.v.size(); ++i) {
      CHECK(again.v[i] == doctest::Approx(vec.v[i]).epsilon(1e-9));
    }
  }
}

TEST_CASE("encode validates its inputs") {
  const Calibration calib = simple_calib();
  const Anchor anchor = fitted_anchor(640, 200);
  SplitMix64 rng(83);
  Box3D gt = random_box3d(rng);
  CHECK_THROWS_AS(encode(gt, Box2D{10, 10, -5, 5}, calib, anchor, 4),
                  std::invalid_argument);
  gt.w = 0.0;
  CHECK_THROWS_AS(encode(gt, Box2D{10, 10, 5, 5}, calib, anchor, 4),
                  std::invalid_argument);
}
