#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace d4lcn {

// Seeded splitmix64 generator; the only randomness source in the library,
// so every seeded run is reproducible across platforms.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // uniform in [0, 1)
  double next_double() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  // uniform in [lo, hi)
  double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

 private:
  std::uint64_t state_;
};

struct Dims4 {
  std::int64_t n = 1;  // batch
  std::int64_t c = 1;  // channels
  std::int64_t h = 1;  // rows
  std::int64_t w = 1;  // cols

  std::int64_t count() const { return n * c * h * w; }
  bool operator==(const Dims4&) const = default;
  std::string str() const;
};

// Integer 2D offset on the shifting grid. For kernel size k (odd) the grid
// spans {-(k-1)/2, ..., (k-1)/2} in both axes.
struct ShiftVector {
  int gi = 0;  // row offset; positive moves content down
  int gj = 0;  // col offset; positive moves content right
};

// Dense 4-axis (n, c, h, w) double tensor, row-major with w fastest.
// Immutable after construction: all operations return fresh tensors.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Dims4 dims, double fill = 0.0);
  Tensor(Dims4 dims, std::vector<double> data);

  static Tensor random_uniform(Dims4 dims, std::uint64_t seed, double lo = 0.0,
                               double hi = 1.0);

  const Dims4& dims() const { return dims_; }
  std::int64_t size() const { return static_cast<std::int64_t>(data_.size()); }

  std::int64_t index(std::int64_t n, std::int64_t c, std::int64_t y,
                     std::int64_t x) const {
    return ((n * dims_.c + c) * dims_.h + y) * dims_.w + x;
  }
  double at(std::int64_t n, std::int64_t c, std::int64_t y,
            std::int64_t x) const {
    return data_[index(n, c, y, x)];
  }
  double& at(std::int64_t n, std::int64_t c, std::int64_t y, std::int64_t x) {
    return data_[index(n, c, y, x)];
  }

  const std::vector<double>& data() const { return data_; }
  std::vector<double>& data() { return data_; }

  bool operator==(const Tensor&) const = default;

 private:
  Dims4 dims_{};
  std::vector<double> data_;
};

// output[n,c,y,x] = t[n,c,y-gi,x-gj] when in bounds, else 0 (zero padding).
Tensor shift2d(const Tensor& t, ShiftVector v);

// output[n,c,y,x] = t[n,(c+s) mod C,y,x]; cyclic, any integer s.
Tensor channel_rotate(const Tensor& t, std::int64_t s);

// Element-wise arithmetic; dims must match for the binary forms.
Tensor add(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);

double max_abs_diff(const Tensor& a, const Tensor& b);

enum class DType : std::uint8_t { f32 = 0, f64 = 1 };

struct TensorIoError : std::runtime_error {
  enum class Kind {
    io_failure,
    bad_magic,
    bad_version,
    bad_dtype,
    bad_shape,
    truncated,
    trailing_data,
  };
  TensorIoError(Kind k, const std::string& msg)
      : std::runtime_error(msg), kind(k) {}
  Kind kind;
};

// Binary tensor file: magic "DTEN", u32 LE version=1, u8 dtype (0=f32,
// 1=f64), u8 ndim=4, 4 x u64 LE dims, row-major payload little-endian.
// f32 payloads are widened to double on load.
void write_tensor(const std::string& path, const Tensor& t,
                  DType dtype = DType::f64);
Tensor read_tensor(const std::string& path);

// In-memory codec backing the file format; used by the file functions.
std::vector<std::uint8_t> encode_tensor(const Tensor& t, DType dtype);
Tensor decode_tensor(const std::vector<std::uint8_t>& bytes);

}  // namespace d4lcn
