#pragma once

#include "d4lcn/dgfilter.hpp"
#include "d4lcn/tensor.hpp"

// Independent reference implementations used to verify the production
// paths. Everything here is written as direct per-pixel loops and shares no
// code with the fast implementations it checks.
namespace d4lcn::reference {

// Full operator evaluated as straight loops: cyclic channel pooling by
// index arithmetic, bucketed max pool, dense convolution, softmax, then a
// triple loop over (rate, gi, gj) with explicit bounds checks.
Tensor d4lcn_forward_loops(const Tensor& input, const Tensor& depth,
                           const DGFilterParams& p);

// Eq.-1-style filtering at a fixed dilation rate, per-pixel loops.
Tensor dilated_filter_loops(const Tensor& input, const Tensor& depth, int k,
                            int rate);

struct GradCheckReport {
  double max_rel_error = 0.0;
  double max_rel_error_input = 0.0;
  double max_rel_error_depth = 0.0;
  double max_rel_error_conv_weights = 0.0;
  double max_rel_error_conv_bias = 0.0;
};

// Central finite differences of sum(upstream (*) forward(...)) against the
// analytic backward pass. Per-component relative error is
// |analytic - fd| / max(|analytic|, |fd|, 1).
GradCheckReport gradient_check(const Tensor& input, const Tensor& depth,
                               const DGFilterParams& p, const Tensor& upstream,
                               double step = 1e-6);

}  // namespace d4lcn::reference
