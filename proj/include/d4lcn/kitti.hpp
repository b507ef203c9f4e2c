#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "d4lcn/geometry.hpp"

namespace d4lcn {

struct ParseError : std::runtime_error {
  ParseError(int line, const std::string& msg)
      : std::runtime_error("line " + std::to_string(line) + ": " + msg),
        line(line) {}
  int line;
};

// One object label line: 15 whitespace-separated fields, optionally a 16th
// detection score. Dimensions are stored in file order (h, w, l); location
// is the bottom-center of the box in camera coordinates.
struct LabelRecord {
  std::string type;
  double truncation = 0.0;
  int occlusion = 0;
  double alpha = 0.0;
  double left = 0.0, top = 0.0, right = 0.0, bottom = 0.0;
  double h = 0.0, w = 0.0, l = 0.0;
  double x = 0.0, y = 0.0, z = 0.0;
  double ry = 0.0;
  std::optional<double> score;
  bool dont_care = false;

  Box2D bbox() const {
    return Box2D::from_corners(left, top, right, bottom);
  }
  double bbox_height() const { return bottom - top; }
};

std::vector<LabelRecord> parse_labels(const std::string& text);

// Two-decimal fixed formatting by default (the common convention); the
// full-precision mode emits shortest round-trippable doubles.
std::string emit_labels(const std::vector<LabelRecord>& records,
                        bool full_precision = false);

// Extracts the P2 projection matrix (12 reals) from a calibration file.
Calibration parse_calib(const std::string& text);
std::string emit_calib(const Calibration& calib);

Box3D label_to_box3d(const LabelRecord& rec, int class_id = 0);
LabelRecord box3d_to_label(const Box3D& box, const Box2D& bbox,
                           const std::string& type);

// Depth map in meters on an h x w grid; 0 marks invalid samples.
struct DepthMap {
  std::int64_t h = 0;
  std::int64_t w = 0;
  std::vector<double> meters;

  double at(std::int64_t y, std::int64_t x) const {
    return meters[static_cast<std::size_t>(y * w + x)];
  }
};

// 16-bit binary PGM ("P5", maxval 65535) with depth = stored / 256.0,
// big-endian samples. Stored 0 means invalid.
DepthMap read_depth_pgm(const std::string& path);
void write_depth_pgm(const std::string& path, const DepthMap& map);

DepthMap decode_depth_pgm(const std::vector<std::uint8_t>& bytes);
std::vector<std::uint8_t> encode_depth_pgm(const DepthMap& map);

}  // namespace d4lcn
