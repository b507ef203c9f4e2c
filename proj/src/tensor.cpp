#include "d4lcn/tensor.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>

namespace d4lcn {

namespace {

void check_dims(const Dims4& d) {
  if (d.n < 1 || d.c < 1 || d.h < 1 || d.w < 1) {
    throw std::invalid_argument("tensor extents must all be >= 1, got " +
                                d.str());
  }
}

std::int64_t wrap_channel(std::int64_t c, std::int64_t count) {
  std::int64_t r = c % count;
  return r < 0 ? r + count : r;
}

}  // namespace

std::string Dims4::str() const {
  return "(" + std::to_string(n) + ", " + std::to_string(c) + ", " +
         std::to_string(h) + ", " + std::to_string(w) + ")";
}

Tensor::Tensor(Dims4 dims, double fill) : dims_(dims) {
  check_dims(dims);
  data_.assign(static_cast<std::size_t>(dims.count()), fill);
}

Tensor::Tensor(Dims4 dims, std::vector<double> data)
    : dims_(dims), data_(std::move(data)) {
  check_dims(dims);
  if (static_cast<std::int64_t>(data_.size()) != dims.count()) {
    throw std::invalid_argument(
        "data length " + std::to_string(data_.size()) +
        " does not match extents " + dims.str());
  }
}

Tensor Tensor::random_uniform(Dims4 dims, std::uint64_t seed, double lo,
                              double hi) {
  Tensor t(dims);
  SplitMix64 rng(seed);
  for (double& v : t.data_) v = rng.uniform(lo, hi);
  return t;
}

Tensor shift2d(const Tensor& t, ShiftVector v) {
  const Dims4& d = t.dims();
  Tensor out(d);
  const std::int64_t gi = v.gi, gj = v.gj;
  // Row [y] of the output copies row [y-gi] of the source over the column
  // range that stays in bounds; everything else is already zero.
  const std::int64_t x0 = std::max<std::int64_t>(0, gj);
  const std::int64_t x1 = std::min<std::int64_t>(d.w, d.w + gj);
  if (x0 >= x1) return out;
  for (std::int64_t n = 0; n < d.n; ++n) {
    for (std::int64_t c = 0; c < d.c; ++c) {
      const std::int64_t y0 = std::max<std::int64_t>(0, gi);
      const std::int64_t y1 = std::min<std::int64_t>(d.h, d.h + gi);
      for (std::int64_t y = y0; y < y1; ++y) {
        const double* src = t.data().data() + t.index(n, c, y - gi, x0 - gj);
        double* dst = out.data().data() + out.index(n, c, y, x0);
        std::copy(src, src + (x1 - x0), dst);
      }
    }
  }
  return out;
}

Tensor channel_rotate(const Tensor& t, std::int64_t s) {
  const Dims4& d = t.dims();
  Tensor out(d);
  const std::int64_t plane = d.h * d.w;
  for (std::int64_t n = 0; n < d.n; ++n) {
    for (std::int64_t c = 0; c < d.c; ++c) {
      const std::int64_t src_c = wrap_channel(c + s, d.c);
      const double* src = t.data().data() + t.index(n, src_c, 0, 0);
      double* dst = out.data().data() + out.index(n, c, 0, 0);
      std::copy(src, src + plane, dst);
    }
  }
  return out;
}

namespace {

void check_same_dims(const Tensor& a, const Tensor& b, const char* op) {
  if (!(a.dims() == b.dims())) {
    throw std::invalid_argument(std::string(op) + ": dims mismatch " +
                                a.dims().str() + " vs " + b.dims().str());
  }
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  check_same_dims(a, b, "add");
  Tensor out = a;
  const std::vector<double>& bd = b.data();
  std::vector<double>& od = out.data();
  for (std::size_t i = 0; i < od.size(); ++i) od[i] += bd[i];
  return out;
}

Tensor mul(const Tensor& a, const Tensor& b) {
  check_same_dims(a, b, "mul");
  Tensor out = a;
  const std::vector<double>& bd = b.data();
  std::vector<double>& od = out.data();
  for (std::size_t i = 0; i < od.size(); ++i) od[i] *= bd[i];
  return out;
}

Tensor scale(const Tensor& a, double s) {
  Tensor out = a;
  for (double& v : out.data()) v *= s;
  return out;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  check_same_dims(a, b, "max_abs_diff");
  double m = 0.0;
  for (std::size_t i = 0; i < a.data().size(); ++i) {
    m = std::max(m, std::abs(a.data()[i] - b.data()[i]));
  }
  return m;
}

namespace {

constexpr char kMagic[4] = {'D', 'T', 'E', 'N'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

class ByteReader {
 public:
  explicit ByteReader(const std::vector<std::uint8_t>& b) : bytes_(b) {}

  void take(void* dst, std::size_t count, const char* what) {
    if (pos_ + count > bytes_.size()) {
      throw TensorIoError(TensorIoError::Kind::truncated,
                          std::string("tensor file truncated while reading ") +
                              what);
    }
    std::memcpy(dst, bytes_.data() + pos_, count);
    pos_ += count;
  }

  std::uint8_t u8(const char* what) {
    std::uint8_t v = 0;
    take(&v, 1, what);
    return v;
  }

  std::uint32_t u32(const char* what) {
    std::uint8_t raw[4];
    take(raw, 4, what);
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i) v = (v << 8) | raw[i];
    return v;
  }

  std::uint64_t u64(const char* what) {
    std::uint8_t raw[8];
    take(raw, 8, what);
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | raw[i];
    return v;
  }

  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  const std::vector<std::uint8_t>& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> encode_tensor(const Tensor& t, DType dtype) {
  std::vector<std::uint8_t> out;
  const Dims4& d = t.dims();
  const std::size_t elem = dtype == DType::f32 ? 4 : 8;
  out.reserve(14 + 32 + elem * t.data().size());
  out.insert(out.end(), kMagic, kMagic + 4);
  put_u32(out, kVersion);
  out.push_back(static_cast<std::uint8_t>(dtype));
  out.push_back(4);  // ndim
  put_u64(out, static_cast<std::uint64_t>(d.n));
  put_u64(out, static_cast<std::uint64_t>(d.c));
  put_u64(out, static_cast<std::uint64_t>(d.h));
  put_u64(out, static_cast<std::uint64_t>(d.w));
  for (double v : t.data()) {
    if (dtype == DType::f32) {
      float f = static_cast<float>(v);
      std::uint32_t bits;
      std::memcpy(&bits, &f, 4);
      put_u32(out, bits);
    } else {
      std::uint64_t bits;
      std::memcpy(&bits, &v, 8);
      put_u64(out, bits);
    }
  }
  return out;
}

Tensor decode_tensor(const std::vector<std::uint8_t>& bytes) {
  ByteReader r(bytes);
  char magic[4];
  r.take(magic, 4, "magic");
  if (std::memcmp(magic, kMagic, 4) != 0) {
    throw TensorIoError(TensorIoError::Kind::bad_magic,
                        "not a DTEN tensor file (bad magic)");
  }
  const std::uint32_t version = r.u32("version");
  if (version != kVersion) {
    throw TensorIoError(TensorIoError::Kind::bad_version,
                        "unsupported DTEN version " + std::to_string(version));
  }
  const std::uint8_t dtype = r.u8("dtype");
  if (dtype != 0 && dtype != 1) {
    throw TensorIoError(TensorIoError::Kind::bad_dtype,
                        "unsupported dtype tag " + std::to_string(dtype));
  }
  const std::uint8_t ndim = r.u8("ndim");
  if (ndim != 4) {
    throw TensorIoError(TensorIoError::Kind::bad_shape,
                        "DTEN requires ndim=4, got " + std::to_string(ndim));
  }
  Dims4 d;
  d.n = static_cast<std::int64_t>(r.u64("dims"));
  d.c = static_cast<std::int64_t>(r.u64("dims"));
  d.h = static_cast<std::int64_t>(r.u64("dims"));
  d.w = static_cast<std::int64_t>(r.u64("dims"));
  if (d.n < 1 || d.c < 1 || d.h < 1 || d.w < 1) {
    throw TensorIoError(TensorIoError::Kind::bad_shape,
                        "invalid extents " + d.str());
  }
  std::vector<double> data;
  data.reserve(static_cast<std::size_t>(d.count()));
  for (std::int64_t i = 0; i < d.count(); ++i) {
    if (dtype == 0) {
      std::uint32_t bits = r.u32("payload");
      float f;
      std::memcpy(&f, &bits, 4);
      data.push_back(static_cast<double>(f));
    } else {
      std::uint64_t bits = r.u64("payload");
      double v;
      std::memcpy(&v, &bits, 8);
      data.push_back(v);
    }
  }
  if (r.remaining() != 0) {
    throw TensorIoError(TensorIoError::Kind::trailing_data,
                        std::to_string(r.remaining()) +
                            " trailing bytes after declared payload");
  }
  return Tensor(d, std::move(data));
}

void write_tensor(const std::string& path, const Tensor& t, DType dtype) {
  const std::vector<std::uint8_t> bytes = encode_tensor(t, dtype);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) {
    throw TensorIoError(TensorIoError::Kind::io_failure,
                        "cannot open for writing: " + path);
  }
  f.write(reinterpret_cast<const char*>(bytes.data()),
          static_cast<std::streamsize>(bytes.size()));
  if (!f) {
    throw TensorIoError(TensorIoError::Kind::io_failure,
                        "write failed: " + path);
  }
}

Tensor read_tensor(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) {
    throw TensorIoError(TensorIoError::Kind::io_failure,
                        "cannot open for reading: " + path);
  }
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)),
                                  std::istreambuf_iterator<char>());
  return decode_tensor(bytes);
}

}  // namespace d4lcn
