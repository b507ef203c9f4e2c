#pragma once

#include <cstdint>
#include <vector>

#include "d4lcn/tensor.hpp"

namespace d4lcn {

// Parameters of the depth-guided filtering operator: kernel size k, maximum
// dilation rate d, shift-pooling channel count n_f, and the learnable
// dilation-selection function (adaptive max pool -> d x d conv -> softmax).
struct DGFilterParams {
  int k = 3;    // odd kernel size
  int d = 3;    // maximum dilation rate
  int n_f = 2;  // channels participating in shift-pooling
  int c = 1;    // channel count of the feature maps

  Tensor conv_weights;            // extents (d*c, c, d, d)
  std::vector<double> conv_bias;  // d*c entries

  // Weights uniform in +-1/(d*sqrt(c)) from the seeded generator, bias zero.
  static DGFilterParams initialized(int k, int d, int n_f, int c,
                                    std::uint64_t seed);

  void validate() const;
};

// Per-(batch, channel) mixture over dilation rates 1..d. Each row is a
// softmax output: values in [0,1] summing to 1.
struct DilationWeights {
  std::int64_t n = 0;
  std::int64_t c = 0;
  std::int64_t d = 0;
  std::vector<double> values;  // layout (n, c, d), d fastest

  double at(std::int64_t bn, std::int64_t ch, std::int64_t w) const {
    return values[(bn * c + ch) * d + w];
  }
  double& at(std::int64_t bn, std::int64_t ch, std::int64_t w) {
    return values[(bn * c + ch) * d + w];
  }

  // Serialized as a (n, c, d, 1)-extent tensor.
  Tensor to_tensor() const;
  static DilationWeights from_tensor(const Tensor& t);
};

enum class FilterMode { naive, fast };

// I' = I (*) (1/k^2) * sum_{(gi,gj)} D^{(gi,gj)} over the k*k shifting grid
// with zero padding. Naive mode loops per pixel over the window of D; fast
// mode composes shift2d and element-wise ops. Both agree to <= 1e-12.
Tensor dlcn_forward(const Tensor& input, const Tensor& depth, int k,
                    FilterMode mode = FilterMode::fast);

// Element-wise mean of I and its channel rotations by 1..n_f-1.
Tensor shift_pool(const Tensor& input, int n_f);

// The dilation-selection function: adaptive max pool to (c, d, d), a d x d
// convolution producing d logits per channel, then softmax over the d axis.
DilationWeights adaptive_weights(const Tensor& input, const DGFilterParams& p);

struct D4lcnResult {
  Tensor output;
  DilationWeights weights;
};

// Full operator: shift_pool(I), then per-channel dilation weights from the
// pooled map, then
//   I' = (1/(d*k*k)) * I (*) sum_w A^w(I) sum_{(gi,gj)} D^{(gi*w, gj*w)}.
D4lcnResult d4lcn_forward(const Tensor& input, const Tensor& depth,
                          const DGFilterParams& p);

struct D4lcnGradients {
  Tensor grad_input;
  Tensor grad_depth;
  Tensor grad_conv_weights;
  std::vector<double> grad_conv_bias;
};

// Analytic partials of sum(upstream (*) I') w.r.t. I, D and the
// dilation-selection parameters. Max-pool routes gradient to the argmax
// element, ties broken by first index in scan order.
D4lcnGradients d4lcn_backward(const Tensor& input, const Tensor& depth,
                              const DGFilterParams& p, const Tensor& upstream);

// ratio[w] = mean over (n, c) of weights[n,c,w]; the ratios sum to 1.
std::vector<double> dilation_histogram(const DilationWeights& weights);

}  // namespace d4lcn
