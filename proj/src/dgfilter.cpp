#include "d4lcn/dgfilter.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace d4lcn {

namespace {

void check_odd_kernel(int k) {
  if (k < 1 || k % 2 == 0) {
    throw std::invalid_argument("kernel size must be odd and >= 1, got " +
                                std::to_string(k));
  }
}

void check_same_dims(const Tensor& a, const Tensor& b, const char* op) {
  if (!(a.dims() == b.dims())) {
    throw std::invalid_argument(std::string(op) + ": dims mismatch " +
                                a.dims().str() + " vs " + b.dims().str());
  }
}

// Everything the backward pass needs from one forward evaluation.
struct ForwardTrace {
  Tensor pooled;                     // shift_pool(I, n_f)
  std::vector<double> pool_max;      // (n, c, d, d) adaptive max pool values
  std::vector<std::int64_t> argmax;  // flat (y, x) index per pooled cell
  std::vector<double> logits;        // (n, d*c)
  DilationWeights weights;
  std::vector<Tensor> shift_sums;    // per rate w: sum_g D^{(gi*w, gj*w)}
  Tensor mixed;                      // sum_w A^w (*) shift_sums[w]
  Tensor output;
};

// Bucket [floor(i*extent/d), floor((i+1)*extent/d)) of the adaptive pool.
std::int64_t bucket_lo(std::int64_t i, std::int64_t extent, std::int64_t d) {
  return i * extent / d;
}

void adaptive_pipeline(const Tensor& pooled, const DGFilterParams& p,
                       ForwardTrace& tr) {
  const Dims4& dm = pooled.dims();
  const std::int64_t d = p.d;
  if (dm.h < d || dm.w < d) {
    throw std::invalid_argument("spatial extents " + dm.str() +
                                " smaller than dilation rate " +
                                std::to_string(p.d));
  }

  // Stage 1: adaptive max pool to (c, d, d), recording argmax positions.
  tr.pool_max.assign(static_cast<std::size_t>(dm.n * dm.c * d * d), 0.0);
  tr.argmax.assign(tr.pool_max.size(), 0);
  for (std::int64_t n = 0; n < dm.n; ++n) {
    for (std::int64_t c = 0; c < dm.c; ++c) {
      for (std::int64_t i = 0; i < d; ++i) {
        for (std::int64_t j = 0; j < d; ++j) {
          double best = -std::numeric_limits<double>::infinity();
          std::int64_t best_idx = 0;
          for (std::int64_t y = bucket_lo(i, dm.h, d);
               y < bucket_lo(i + 1, dm.h, d); ++y) {
            for (std::int64_t x = bucket_lo(j, dm.w, d);
                 x < bucket_lo(j + 1, dm.w, d); ++x) {
              const double v = pooled.at(n, c, y, x);
              if (v > best) {
                best = v;
                best_idx = y * dm.w + x;
              }
            }
          }
          const std::size_t cell =
              static_cast<std::size_t>(((n * dm.c + c) * d + i) * d + j);
          tr.pool_max[cell] = best;
          tr.argmax[cell] = best_idx;
        }
      }
    }
  }

  // Stage 2: d x d convolution, no padding, producing d*c logits per item.
  const std::int64_t n_out = d * dm.c;
  tr.logits.assign(static_cast<std::size_t>(dm.n * n_out), 0.0);
  for (std::int64_t n = 0; n < dm.n; ++n) {
    for (std::int64_t o = 0; o < n_out; ++o) {
      double acc = p.conv_bias[static_cast<std::size_t>(o)];
      for (std::int64_t cin = 0; cin < dm.c; ++cin) {
        for (std::int64_t u = 0; u < d; ++u) {
          for (std::int64_t v = 0; v < d; ++v) {
            acc += p.conv_weights.at(o, cin, u, v) *
                   tr.pool_max[static_cast<std::size_t>(
                       ((n * dm.c + cin) * d + u) * d + v)];
          }
        }
      }
      tr.logits[static_cast<std::size_t>(n * n_out + o)] = acc;
    }
  }

  // Stage 3: reshape to (c, d) and softmax over the d axis; logit o maps to
  // channel o/d, dilation rate o%d.
  tr.weights.n = dm.n;
  tr.weights.c = dm.c;
  tr.weights.d = d;
  tr.weights.values.assign(tr.logits.size(), 0.0);
  for (std::int64_t n = 0; n < dm.n; ++n) {
    for (std::int64_t c = 0; c < dm.c; ++c) {
      const double* row = tr.logits.data() + n * n_out + c * d;
      double hi = row[0];
      for (std::int64_t w = 1; w < d; ++w) hi = std::max(hi, row[w]);
      double denom = 0.0;
      for (std::int64_t w = 0; w < d; ++w) denom += std::exp(row[w] - hi);
      for (std::int64_t w = 0; w < d; ++w) {
        tr.weights.at(n, c, w) = std::exp(row[w] - hi) / denom;
      }
    }
  }
}

// acc += src shifted by (gi, gj) with zero padding; the shift and the
// element-wise add are fused so no temporary tensor is materialized.
void accumulate_shifted(Tensor& acc, const Tensor& src, std::int64_t gi,
                        std::int64_t gj) {
  const Dims4& d = src.dims();
  const std::int64_t x0 = std::max<std::int64_t>(0, gj);
  const std::int64_t x1 = std::min<std::int64_t>(d.w, d.w + gj);
  const std::int64_t y0 = std::max<std::int64_t>(0, gi);
  const std::int64_t y1 = std::min<std::int64_t>(d.h, d.h + gi);
  if (x0 >= x1 || y0 >= y1) return;
  const std::int64_t len = x1 - x0;
  for (std::int64_t n = 0; n < d.n; ++n) {
    for (std::int64_t c = 0; c < d.c; ++c) {
      for (std::int64_t y = y0; y < y1; ++y) {
        double* out = acc.data().data() + acc.index(n, c, y, x0);
        const double* in = src.data().data() + src.index(n, c, y - gi, x0 - gj);
        for (std::int64_t i = 0; i < len; ++i) out[i] += in[i];
      }
    }
  }
}

// sum over the k*k grid of D shifted by (gi*rate, gj*rate). The grid sum is
// separable under zero padding: row-direction shifts first, then column
// shifts of that partial sum, 2k passes instead of k*k. The partial sums
// live in one per-plane scratch buffer so the intermediate stays in cache.
Tensor shifted_window_sum(const Tensor& depth, int k, int rate) {
  const int r = (k - 1) / 2;
  if (r == 0) return depth;
  const Dims4& d = depth.dims();
  Tensor out(d);
  std::vector<double> rows(static_cast<std::size_t>(d.h * d.w));
  for (std::int64_t n = 0; n < d.n; ++n) {
    for (std::int64_t c = 0; c < d.c; ++c) {
      const double* src = depth.data().data() + depth.index(n, c, 0, 0);
      double* dst = out.data().data() + out.index(n, c, 0, 0);
      std::fill(rows.begin(), rows.end(), 0.0);
      for (int gj = -r; gj <= r; ++gj) {
        const std::int64_t s = static_cast<std::int64_t>(gj) * rate;
        const std::int64_t x0 = std::max<std::int64_t>(0, s);
        const std::int64_t x1 = std::min<std::int64_t>(d.w, d.w + s);
        for (std::int64_t y = 0; y < d.h; ++y) {
          double* acc = rows.data() + y * d.w;
          const double* in = src + y * d.w - s;
          for (std::int64_t x = x0; x < x1; ++x) acc[x] += in[x];
        }
      }
      for (int gi = -r; gi <= r; ++gi) {
        const std::int64_t s = static_cast<std::int64_t>(gi) * rate;
        const std::int64_t y0 = std::max<std::int64_t>(0, s);
        const std::int64_t y1 = std::min<std::int64_t>(d.h, d.h + s);
        for (std::int64_t y = y0; y < y1; ++y) {
          double* acc = dst + y * d.w;
          const double* in = rows.data() + (y - s) * d.w;
          for (std::int64_t x = 0; x < d.w; ++x) acc[x] += in[x];
        }
      }
    }
  }
  return out;
}

// out[n,c,y,x] = t[n,c,y,x] * s[n,c]
Tensor mul_channel_scalar(const Tensor& t, const DilationWeights& a,
                          std::int64_t w) {
  const Dims4& dm = t.dims();
  Tensor out = t;
  for (std::int64_t n = 0; n < dm.n; ++n) {
    for (std::int64_t c = 0; c < dm.c; ++c) {
      const double s = a.at(n, c, w);
      double* base = out.data().data() + out.index(n, c, 0, 0);
      for (std::int64_t i = 0; i < dm.h * dm.w; ++i) base[i] *= s;
    }
  }
  return out;
}

ForwardTrace run_forward(const Tensor& input, const Tensor& depth,
                         const DGFilterParams& p) {
  p.validate();
  check_same_dims(input, depth, "d4lcn_forward");
  if (input.dims().c != p.c) {
    throw std::invalid_argument(
        "channel mismatch: tensors have " + std::to_string(input.dims().c) +
        " channels, params expect " + std::to_string(p.c));
  }

  ForwardTrace tr;
  tr.pooled = shift_pool(input, p.n_f);
  adaptive_pipeline(tr.pooled, p, tr);

  tr.shift_sums.reserve(static_cast<std::size_t>(p.d));
  tr.mixed = Tensor(input.dims());
  const Dims4& dm = input.dims();
  for (int w = 1; w <= p.d; ++w) {
    tr.shift_sums.push_back(shifted_window_sum(depth, p.k, w));
    const Tensor& sw = tr.shift_sums.back();
    for (std::int64_t n = 0; n < dm.n; ++n) {
      for (std::int64_t c = 0; c < dm.c; ++c) {
        const double a = tr.weights.at(n, c, w - 1);
        double* out = tr.mixed.data().data() + tr.mixed.index(n, c, 0, 0);
        const double* in = sw.data().data() + sw.index(n, c, 0, 0);
        for (std::int64_t i = 0; i < dm.h * dm.w; ++i) out[i] += a * in[i];
      }
    }
  }
  const double norm = 1.0 / (p.d * p.k * p.k);
  tr.output = Tensor(dm);
  for (std::size_t i = 0; i < tr.output.data().size(); ++i) {
    tr.output.data()[i] = tr.pooled.data()[i] * tr.mixed.data()[i] * norm;
  }
  return tr;
}

}  // namespace

DGFilterParams DGFilterParams::initialized(int k, int d, int n_f, int c,
                                           std::uint64_t seed) {
  DGFilterParams p;
  p.k = k;
  p.d = d;
  p.n_f = n_f;
  p.c = c;
  const double bound = 1.0 / (d * std::sqrt(static_cast<double>(c)));
  p.conv_weights = Tensor::random_uniform(
      {static_cast<std::int64_t>(d) * c, c, d, d}, seed, -bound, bound);
  p.conv_bias.assign(static_cast<std::size_t>(d) * c, 0.0);
  p.validate();
  return p;
}

void DGFilterParams::validate() const {
  check_odd_kernel(k);
  if (d < 1) throw std::invalid_argument("maximum dilation rate must be >= 1");
  if (c < 1) throw std::invalid_argument("channel count must be >= 1");
  if (n_f < 1 || n_f > c) {
    throw std::invalid_argument("n_f must be in [1, c], got " +
                                std::to_string(n_f) + " with c = " +
                                std::to_string(c));
  }
  const Dims4 want{static_cast<std::int64_t>(d) * c, c, d, d};
  if (!(conv_weights.dims() == want)) {
    throw std::invalid_argument("conv_weights extents " +
                                conv_weights.dims().str() + " != " +
                                want.str());
  }
  if (conv_bias.size() != static_cast<std::size_t>(d) * c) {
    throw std::invalid_argument("conv_bias length must be d*c");
  }
}

Tensor DilationWeights::to_tensor() const {
  return Tensor({n, c, d, 1}, values);
}

DilationWeights DilationWeights::from_tensor(const Tensor& t) {
  if (t.dims().w != 1) {
    throw std::invalid_argument(
        "dilation weights tensor must have extents (n, c, d, 1), got " +
        t.dims().str());
  }
  DilationWeights w;
  w.n = t.dims().n;
  w.c = t.dims().c;
  w.d = t.dims().h;
  w.values = t.data();
  return w;
}

Tensor dlcn_forward(const Tensor& input, const Tensor& depth, int k,
                    FilterMode mode) {
  check_same_dims(input, depth, "dlcn_forward");
  check_odd_kernel(k);
  if (mode == FilterMode::fast) {
    const Tensor sum = shifted_window_sum(depth, k, 1);
    const double norm = 1.0 / (k * k);
    Tensor out(input.dims());
    for (std::size_t i = 0; i < out.data().size(); ++i) {
      out.data()[i] = input.data()[i] * sum.data()[i] * norm;
    }
    return out;
  }
  // Naive route: per-pixel zero-padded window sum, no shift composition.
  const Dims4& dm = input.dims();
  const int r = (k - 1) / 2;
  Tensor out(dm);
  for (std::int64_t n = 0; n < dm.n; ++n) {
    for (std::int64_t c = 0; c < dm.c; ++c) {
      for (std::int64_t y = 0; y < dm.h; ++y) {
        for (std::int64_t x = 0; x < dm.w; ++x) {
          double acc = 0.0;
          for (int gi = -r; gi <= r; ++gi) {
            for (int gj = -r; gj <= r; ++gj) {
              const std::int64_t sy = y - gi;
              const std::int64_t sx = x - gj;
              if (sy >= 0 && sy < dm.h && sx >= 0 && sx < dm.w) {
                acc += depth.at(n, c, sy, sx);
              }
            }
          }
          out.at(n, c, y, x) = input.at(n, c, y, x) * acc / (k * k);
        }
      }
    }
  }
  return out;
}

Tensor shift_pool(const Tensor& input, int n_f) {
  const Dims4& dm = input.dims();
  if (n_f < 1 || n_f > dm.c) {
    throw std::invalid_argument("n_f must be in [1, C], got " +
                                std::to_string(n_f) + " with C = " +
                                std::to_string(dm.c));
  }
  if (n_f == 1) return input;
  Tensor out = input;
  const std::int64_t plane = dm.h * dm.w;
  for (std::int64_t n = 0; n < dm.n; ++n) {
    for (std::int64_t c = 0; c < dm.c; ++c) {
      double* acc = out.data().data() + out.index(n, c, 0, 0);
      for (int s = 1; s < n_f; ++s) {
        const double* src =
            input.data().data() + input.index(n, (c + s) % dm.c, 0, 0);
        for (std::int64_t i = 0; i < plane; ++i) acc[i] += src[i];
      }
      for (std::int64_t i = 0; i < plane; ++i) acc[i] /= n_f;
    }
  }
  return out;
}

DilationWeights adaptive_weights(const Tensor& input, const DGFilterParams& p) {
  p.validate();
  if (input.dims().c != p.c) {
    throw std::invalid_argument(
        "channel mismatch: tensor has " + std::to_string(input.dims().c) +
        " channels, params expect " + std::to_string(p.c));
  }
  ForwardTrace tr;
  adaptive_pipeline(input, p, tr);
  return tr.weights;
}

D4lcnResult d4lcn_forward(const Tensor& input, const Tensor& depth,
                          const DGFilterParams& p) {
  ForwardTrace tr = run_forward(input, depth, p);
  return {std::move(tr.output), std::move(tr.weights)};
}

D4lcnGradients d4lcn_backward(const Tensor& input, const Tensor& depth,
                              const DGFilterParams& p, const Tensor& upstream) {
  check_same_dims(input, upstream, "d4lcn_backward upstream");
  ForwardTrace tr = run_forward(input, depth, p);

  const Dims4& dm = input.dims();
  const std::int64_t d = p.d;
  const double norm = 1.0 / (p.d * p.k * p.k);
  const int r = (p.k - 1) / 2;

  // d(sum(upstream (*) out)) through out = norm * pooled (*) mixed.
  Tensor grad_pooled = scale(mul(upstream, tr.mixed), norm);

  // Gradient w.r.t. the dilation weights: dA[n,c,w] = norm * sum_{y,x}
  // upstream * pooled * shift_sums[w].
  const Tensor up_pooled = mul(upstream, tr.pooled);
  DilationWeights grad_a;
  grad_a.n = dm.n;
  grad_a.c = dm.c;
  grad_a.d = d;
  grad_a.values.assign(static_cast<std::size_t>(dm.n * dm.c * d), 0.0);
  for (std::int64_t w = 0; w < d; ++w) {
    const Tensor& sw = tr.shift_sums[static_cast<std::size_t>(w)];
    for (std::int64_t n = 0; n < dm.n; ++n) {
      for (std::int64_t c = 0; c < dm.c; ++c) {
        double acc = 0.0;
        const double* a = up_pooled.data().data() + up_pooled.index(n, c, 0, 0);
        const double* b = sw.data().data() + sw.index(n, c, 0, 0);
        for (std::int64_t i = 0; i < dm.h * dm.w; ++i) acc += a[i] * b[i];
        grad_a.at(n, c, w) = norm * acc;
      }
    }
  }

  // Softmax backward per (n, c) row.
  const std::int64_t n_out = d * dm.c;
  std::vector<double> grad_logits(static_cast<std::size_t>(dm.n * n_out), 0.0);
  for (std::int64_t n = 0; n < dm.n; ++n) {
    for (std::int64_t c = 0; c < dm.c; ++c) {
      double dot = 0.0;
      for (std::int64_t w = 0; w < d; ++w) {
        dot += tr.weights.at(n, c, w) * grad_a.at(n, c, w);
      }
      for (std::int64_t w = 0; w < d; ++w) {
        grad_logits[static_cast<std::size_t>(n * n_out + c * d + w)] =
            tr.weights.at(n, c, w) * (grad_a.at(n, c, w) - dot);
      }
    }
  }

  // Convolution backward.
  D4lcnGradients g;
  g.grad_conv_weights = Tensor(p.conv_weights.dims());
  g.grad_conv_bias.assign(p.conv_bias.size(), 0.0);
  std::vector<double> grad_pool_max(tr.pool_max.size(), 0.0);
  for (std::int64_t n = 0; n < dm.n; ++n) {
    for (std::int64_t o = 0; o < n_out; ++o) {
      const double gz = grad_logits[static_cast<std::size_t>(n * n_out + o)];
      g.grad_conv_bias[static_cast<std::size_t>(o)] += gz;
      for (std::int64_t cin = 0; cin < dm.c; ++cin) {
        for (std::int64_t u = 0; u < d; ++u) {
          for (std::int64_t v = 0; v < d; ++v) {
            const std::size_t cell = static_cast<std::size_t>(
                ((n * dm.c + cin) * d + u) * d + v);
            g.grad_conv_weights.at(o, cin, u, v) += gz * tr.pool_max[cell];
            grad_pool_max[cell] += gz * p.conv_weights.at(o, cin, u, v);
          }
        }
      }
    }
  }

  // Max-pool backward: route each cell's gradient to its argmax element.
  for (std::int64_t n = 0; n < dm.n; ++n) {
    for (std::int64_t c = 0; c < dm.c; ++c) {
      for (std::int64_t i = 0; i < d; ++i) {
        for (std::int64_t j = 0; j < d; ++j) {
          const std::size_t cell =
              static_cast<std::size_t>(((n * dm.c + c) * d + i) * d + j);
          const std::int64_t flat = tr.argmax[cell];
          grad_pooled.at(n, c, flat / dm.w, flat % dm.w) +=
              grad_pool_max[cell];
        }
      }
    }
  }

  // shift_pool backward: pooled[c] = (1/n_f) * sum_s input[(c+s) mod C].
  if (p.n_f == 1) {
    g.grad_input = grad_pooled;
  } else {
    Tensor acc = grad_pooled;
    for (int s = 1; s < p.n_f; ++s) acc = add(acc, channel_rotate(grad_pooled, -s));
    g.grad_input = scale(acc, 1.0 / p.n_f);
  }

  // Depth backward: adjoint of the dilated window sums.
  g.grad_depth = Tensor(dm);
  const Tensor scaled_up_pooled = scale(up_pooled, norm);
  for (std::int64_t w = 0; w < d; ++w) {
    const Tensor q = mul_channel_scalar(scaled_up_pooled, tr.weights, w);
    const int rate = static_cast<int>(w) + 1;
    for (int gi = -r; gi <= r; ++gi) {
      for (int gj = -r; gj <= r; ++gj) {
        accumulate_shifted(g.grad_depth, q, -gi * rate, -gj * rate);
      }
    }
  }
  return g;
}

std::vector<double> dilation_histogram(const DilationWeights& weights) {
  std::vector<double> ratios(static_cast<std::size_t>(weights.d), 0.0);
  for (std::int64_t n = 0; n < weights.n; ++n) {
    for (std::int64_t c = 0; c < weights.c; ++c) {
      for (std::int64_t w = 0; w < weights.d; ++w) {
        ratios[static_cast<std::size_t>(w)] += weights.at(n, c, w);
      }
    }
  }
  const double denom = static_cast<double>(weights.n * weights.c);
  for (double& v : ratios) v /= denom;
  return ratios;
}

}  // namespace d4lcn
