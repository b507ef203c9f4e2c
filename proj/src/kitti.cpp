#include "d4lcn/kitti.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace d4lcn {

namespace {

std::vector<std::string> split_ws(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream ss(line);
  std::string tok;
  while (ss >> tok) out.push_back(tok);
  return out;
}

double parse_real(const std::string& tok, int line, const char* field) {
  try {
    std::size_t used = 0;
    const double v = std::stod(tok, &used);
    if (used != tok.size()) throw std::invalid_argument(tok);
    return v;
  } catch (const std::exception&) {
    throw ParseError(line, std::string("non-numeric ") + field + " value '" +
                               tok + "'");
  }
}

int parse_int(const std::string& tok, int line, const char* field) {
  const double v = parse_real(tok, line, field);
  return static_cast<int>(std::lround(v));
}

std::string format_value(double v, bool full_precision) {
  char buf[64];
  if (full_precision) {
    std::snprintf(buf, sizeof(buf), "%.17g", v);
  } else {
    std::snprintf(buf, sizeof(buf), "%.2f", v);
  }
  return buf;
}

}  // namespace

std::vector<LabelRecord> parse_labels(const std::string& text) {
  std::vector<LabelRecord> out;
  std::istringstream ss(text);
  std::string line;
  int line_no = 0;
  while (std::getline(ss, line)) {
    ++line_no;
    const std::vector<std::string> f = split_ws(line);
    if (f.empty()) continue;
    if (f.size() != 15 && f.size() != 16) {
      throw ParseError(line_no, "expected 15 or 16 fields, got " +
                                    std::to_string(f.size()));
    }
    LabelRecord r;
    r.type = f[0];
    r.dont_care = (r.type == "DontCare");
    r.truncation = parse_real(f[1], line_no, "truncation");
    r.occlusion = parse_int(f[2], line_no, "occlusion");
    r.alpha = parse_real(f[3], line_no, "alpha");
    r.left = parse_real(f[4], line_no, "bbox");
    r.top = parse_real(f[5], line_no, "bbox");
    r.right = parse_real(f[6], line_no, "bbox");
    r.bottom = parse_real(f[7], line_no, "bbox");
    r.h = parse_real(f[8], line_no, "dimensions");
    r.w = parse_real(f[9], line_no, "dimensions");
    r.l = parse_real(f[10], line_no, "dimensions");
    r.x = parse_real(f[11], line_no, "location");
    r.y = parse_real(f[12], line_no, "location");
    r.z = parse_real(f[13], line_no, "location");
    r.ry = parse_real(f[14], line_no, "rotation");
    if (f.size() == 16) r.score = parse_real(f[15], line_no, "score");
    out.push_back(std::move(r));
  }
  return out;
}

std::string emit_labels(const std::vector<LabelRecord>& records,
                        bool full_precision) {
  std::string out;
  for (const LabelRecord& r : records) {
    out += r.type;
    out += ' ' + format_value(r.truncation, full_precision);
    out += ' ' + std::to_string(r.occlusion);
    for (double v : {r.alpha, r.left, r.top, r.right, r.bottom, r.h, r.w, r.l,
                     r.x, r.y, r.z, r.ry}) {
      out += ' ' + format_value(v, full_precision);
    }
    if (r.score) out += ' ' + format_value(*r.score, full_precision);
    out += '\n';
  }
  return out;
}

Calibration parse_calib(const std::string& text) {
  std::istringstream ss(text);
  std::string line;
  int line_no = 0;
  while (std::getline(ss, line)) {
    ++line_no;
    std::vector<std::string> f = split_ws(line);
    if (f.empty() || f[0] != "P2:") continue;
    if (f.size() < 13) {
      throw ParseError(line_no, "P2 line needs 12 values, got " +
                                    std::to_string(f.size() - 1));
    }
    std::array<double, 12> values;
    for (int i = 0; i < 12; ++i) {
      values[static_cast<std::size_t>(i)] =
          parse_real(f[static_cast<std::size_t>(i + 1)], line_no, "P2");
    }
    return Calibration::from_values(values);
  }
  throw ParseError(line_no, "no P2 line found");
}

std::string emit_calib(const Calibration& calib) {
  std::string out = "P2:";
  for (double v : calib.k) {
    out += ' ';
    out += format_value(v, /*full_precision=*/true);
  }
  out += '\n';
  return out;
}

Box3D label_to_box3d(const LabelRecord& rec, int class_id) {
  Box3D b;
  b.center = {rec.x, rec.y, rec.z};
  b.w = rec.w;
  b.h = rec.h;
  b.l = rec.l;
  b.ry = rec.ry;
  b.alpha = rec.alpha;
  b.class_id = class_id;
  b.score = rec.score.value_or(1.0);
  return b;
}

LabelRecord box3d_to_label(const Box3D& box, const Box2D& bbox,
                           const std::string& type) {
  LabelRecord r;
  r.type = type;
  r.alpha = box.alpha;
  r.left = bbox.left();
  r.top = bbox.top();
  r.right = bbox.right();
  r.bottom = bbox.bottom();
  r.h = box.h;
  r.w = box.w;
  r.l = box.l;
  r.x = box.center.x;
  r.y = box.center.y;
  r.z = box.center.z;
  r.ry = box.ry;
  r.score = box.score;
  return r;
}

namespace {

// PGM header tokens separated by whitespace; '#' starts a comment running to
// end of line.
class PgmReader {
 public:
  explicit PgmReader(const std::vector<std::uint8_t>& b) : bytes_(b) {}

  std::string token() {
    skip_ws_and_comments();
    std::string tok;
    while (pos_ < bytes_.size() && !std::isspace(bytes_[pos_])) {
      tok.push_back(static_cast<char>(bytes_[pos_++]));
    }
    if (tok.empty()) throw ParseError(1, "truncated PGM header");
    return tok;
  }

  // Consumes the single whitespace byte that terminates the header.
  void end_header() {
    if (pos_ >= bytes_.size() || !std::isspace(bytes_[pos_])) {
      throw ParseError(1, "missing whitespace after PGM maxval");
    }
    ++pos_;
  }

  std::size_t pos() const { return pos_; }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  void skip_ws_and_comments() {
    while (pos_ < bytes_.size()) {
      if (std::isspace(bytes_[pos_])) {
        ++pos_;
      } else if (bytes_[pos_] == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else {
        break;
      }
    }
  }

  const std::vector<std::uint8_t>& bytes_;
  std::size_t pos_ = 0;
};

std::int64_t parse_pgm_int(const std::string& tok, const char* field) {
  std::int64_t v = 0;
  const auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc{} || p != tok.data() + tok.size()) {
    throw ParseError(1, std::string("bad PGM ") + field + " '" + tok + "'");
  }
  return v;
}

}  // namespace

DepthMap decode_depth_pgm(const std::vector<std::uint8_t>& bytes) {
  PgmReader r(bytes);
  const std::string magic = r.token();
  if (magic != "P5") {
    throw ParseError(1, "not a binary PGM (magic '" + magic + "')");
  }
  const std::int64_t w = parse_pgm_int(r.token(), "width");
  const std::int64_t h = parse_pgm_int(r.token(), "height");
  const std::int64_t maxval = parse_pgm_int(r.token(), "maxval");
  if (w < 1 || h < 1) throw ParseError(1, "bad PGM extents");
  if (maxval != 65535) {
    throw ParseError(1, "depth PGM requires maxval 65535, got " +
                            std::to_string(maxval));
  }
  r.end_header();
  const std::size_t need = static_cast<std::size_t>(w) * static_cast<std::size_t>(h) * 2;
  if (r.remaining() != need) {
    throw ParseError(1, "payload holds " + std::to_string(r.remaining()) +
                            " bytes, expected " + std::to_string(need));
  }
  DepthMap map;
  map.h = h;
  map.w = w;
  map.meters.reserve(static_cast<std::size_t>(h * w));
  std::size_t pos = r.pos();
  for (std::int64_t i = 0; i < h * w; ++i) {
    const std::uint16_t raw = static_cast<std::uint16_t>(
        (static_cast<std::uint16_t>(bytes[pos]) << 8) | bytes[pos + 1]);
    pos += 2;
    map.meters.push_back(raw / 256.0);
  }
  return map;
}

std::vector<std::uint8_t> encode_depth_pgm(const DepthMap& map) {
  std::string header = "P5\n" + std::to_string(map.w) + " " +
                       std::to_string(map.h) + "\n65535\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.reserve(out.size() + map.meters.size() * 2);
  for (double m : map.meters) {
    if (m < 0.0 || !std::isfinite(m)) {
      throw std::invalid_argument("depth values must be finite and >= 0");
    }
    const double scaled = std::min(std::round(m * 256.0), 65535.0);
    const std::uint16_t raw = static_cast<std::uint16_t>(scaled);
    out.push_back(static_cast<std::uint8_t>(raw >> 8));
    out.push_back(static_cast<std::uint8_t>(raw & 0xff));
  }
  return out;
}

DepthMap read_depth_pgm(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open for reading: " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)),
                                  std::istreambuf_iterator<char>());
  return decode_depth_pgm(bytes);
}

void write_depth_pgm(const std::string& path, const DepthMap& map) {
  const std::vector<std::uint8_t> bytes = encode_depth_pgm(map);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot open for writing: " + path);
  f.write(reinterpret_cast<const char*>(bytes.data()),
          static_cast<std::streamsize>(bytes.size()));
  if (!f) throw std::runtime_error("write failed: " + path);
}

}  // namespace d4lcn
