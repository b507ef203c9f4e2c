#include "d4lcn/reference.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace d4lcn::reference {

namespace {

double pooled_at(const Tensor& input, int n_f, std::int64_t n, std::int64_t c,
                 std::int64_t y, std::int64_t x) {
  const std::int64_t channels = input.dims().c;
  double acc = 0.0;
  for (int s = 0; s < n_f; ++s) {
    acc += input.at(n, (c + s) % channels, y, x);
  }
  return acc / n_f;
}

double objective(const Tensor& input, const Tensor& depth,
                 const DGFilterParams& p, const Tensor& upstream) {
  const Tensor out = d4lcn_forward(input, depth, p).output;
  double acc = 0.0;
  for (std::size_t i = 0; i < out.data().size(); ++i) {
    acc += out.data()[i] * upstream.data()[i];
  }
  return acc;
}

double rel_error(double analytic, double fd) {
  return std::abs(analytic - fd) /
         std::max({std::abs(analytic), std::abs(fd), 1.0});
}

}  // namespace

Tensor d4lcn_forward_loops(const Tensor& input, const Tensor& depth,
                           const DGFilterParams& p) {
  const Dims4& dm = input.dims();
  const std::int64_t d = p.d;
  const int r = (p.k - 1) / 2;

  // Channel-pooled input.
  Tensor pooled(dm);
  for (std::int64_t n = 0; n < dm.n; ++n) {
    for (std::int64_t c = 0; c < dm.c; ++c) {
      for (std::int64_t y = 0; y < dm.h; ++y) {
        for (std::int64_t x = 0; x < dm.w; ++x) {
          pooled.at(n, c, y, x) = pooled_at(input, p.n_f, n, c, y, x);
        }
      }
    }
  }

  // Bucketed max pool to (c, d, d): bucket i spans rows
  // [floor(i*h/d), floor((i+1)*h/d)), columns likewise.
  std::vector<double> pool_max(static_cast<std::size_t>(dm.n * dm.c * d * d),
                               -std::numeric_limits<double>::infinity());
  for (std::int64_t n = 0; n < dm.n; ++n) {
    for (std::int64_t c = 0; c < dm.c; ++c) {
      for (std::int64_t i = 0; i < d; ++i) {
        for (std::int64_t j = 0; j < d; ++j) {
          double& slot = pool_max[static_cast<std::size_t>(
              ((n * dm.c + c) * d + i) * d + j)];
          for (std::int64_t y = i * dm.h / d; y < (i + 1) * dm.h / d; ++y) {
            for (std::int64_t x = j * dm.w / d; x < (j + 1) * dm.w / d; ++x) {
              slot = std::max(slot, pooled.at(n, c, y, x));
            }
          }
        }
      }
    }
  }

  // d x d convolution then softmax over rates.
  const std::int64_t n_out = d * dm.c;
  std::vector<double> weights(static_cast<std::size_t>(dm.n * n_out), 0.0);
  for (std::int64_t n = 0; n < dm.n; ++n) {
    std::vector<double> logits(static_cast<std::size_t>(n_out), 0.0);
    for (std::int64_t o = 0; o < n_out; ++o) {
      double acc = p.conv_bias[static_cast<std::size_t>(o)];
      for (std::int64_t cin = 0; cin < dm.c; ++cin) {
        for (std::int64_t u = 0; u < d; ++u) {
          for (std::int64_t v = 0; v < d; ++v) {
            acc += p.conv_weights.at(o, cin, u, v) *
                   pool_max[static_cast<std::size_t>(
                       ((n * dm.c + cin) * d + u) * d + v)];
          }
        }
      }
      logits[static_cast<std::size_t>(o)] = acc;
    }
    for (std::int64_t c = 0; c < dm.c; ++c) {
      double hi = logits[static_cast<std::size_t>(c * d)];
      for (std::int64_t w = 1; w < d; ++w) {
        hi = std::max(hi, logits[static_cast<std::size_t>(c * d + w)]);
      }
      double denom = 0.0;
      for (std::int64_t w = 0; w < d; ++w) {
        denom += std::exp(logits[static_cast<std::size_t>(c * d + w)] - hi);
      }
      for (std::int64_t w = 0; w < d; ++w) {
        weights[static_cast<std::size_t>(n * n_out + c * d + w)] =
            std::exp(logits[static_cast<std::size_t>(c * d + w)] - hi) / denom;
      }
    }
  }

  // Triple loop over (rate, gi, gj) with explicit zero padding.
  Tensor out(dm);
  for (std::int64_t n = 0; n < dm.n; ++n) {
    for (std::int64_t c = 0; c < dm.c; ++c) {
      for (std::int64_t y = 0; y < dm.h; ++y) {
        for (std::int64_t x = 0; x < dm.w; ++x) {
          double mixed = 0.0;
          for (std::int64_t w = 1; w <= d; ++w) {
            double window = 0.0;
            for (int gi = -r; gi <= r; ++gi) {
              for (int gj = -r; gj <= r; ++gj) {
                const std::int64_t sy = y - gi * w;
                const std::int64_t sx = x - gj * w;
                if (sy >= 0 && sy < dm.h && sx >= 0 && sx < dm.w) {
                  window += depth.at(n, c, sy, sx);
                }
              }
            }
            mixed +=
                weights[static_cast<std::size_t>(n * n_out + c * d + (w - 1))] *
                window;
          }
          out.at(n, c, y, x) =
              pooled.at(n, c, y, x) * mixed / (d * p.k * p.k);
        }
      }
    }
  }
  return out;
}

Tensor dilated_filter_loops(const Tensor& input, const Tensor& depth, int k,
                            int rate) {
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
              const std::int64_t sy = y - gi * rate;
              const std::int64_t sx = x - gj * rate;
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

GradCheckReport gradient_check(const Tensor& input, const Tensor& depth,
                               const DGFilterParams& p, const Tensor& upstream,
                               double step) {
  const D4lcnGradients analytic = d4lcn_backward(input, depth, p, upstream);

  GradCheckReport report;
  auto probe = [&](Tensor& storage, std::size_t i, const Tensor& in,
                   const Tensor& dep, const DGFilterParams& params) {
    double& slot = storage.data()[i];
    const double saved = slot;
    slot = saved + step;
    const double hi = objective(in, dep, params, upstream);
    slot = saved - step;
    const double lo = objective(in, dep, params, upstream);
    slot = saved;
    return (hi - lo) / (2.0 * step);
  };

  Tensor in = input;
  for (std::size_t i = 0; i < in.data().size(); ++i) {
    const double fd = probe(in, i, in, depth, p);
    report.max_rel_error_input = std::max(
        report.max_rel_error_input, rel_error(analytic.grad_input.data()[i], fd));
  }

  Tensor dep = depth;
  for (std::size_t i = 0; i < dep.data().size(); ++i) {
    const double fd = probe(dep, i, input, dep, p);
    report.max_rel_error_depth = std::max(
        report.max_rel_error_depth, rel_error(analytic.grad_depth.data()[i], fd));
  }

  DGFilterParams params = p;
  for (std::size_t i = 0; i < params.conv_weights.data().size(); ++i) {
    const double fd = probe(params.conv_weights, i, input, depth, params);
    report.max_rel_error_conv_weights =
        std::max(report.max_rel_error_conv_weights,
                 rel_error(analytic.grad_conv_weights.data()[i], fd));
  }

  for (std::size_t i = 0; i < params.conv_bias.size(); ++i) {
    double& slot = params.conv_bias[i];
    const double saved = slot;
    slot = saved + step;
    const double hi = objective(input, depth, params, upstream);
    slot = saved - step;
    const double lo = objective(input, depth, params, upstream);
    slot = saved;
    const double fd = (hi - lo) / (2.0 * step);
    report.max_rel_error_conv_bias = std::max(
        report.max_rel_error_conv_bias, rel_error(analytic.grad_conv_bias[i], fd));
  }

  report.max_rel_error = std::max(
      {report.max_rel_error_input, report.max_rel_error_depth,
       report.max_rel_error_conv_weights, report.max_rel_error_conv_bias});
  return report;
}

}  // namespace d4lcn::reference
