#include <doctest.h>

#include <cmath>

#include "d4lcn/dgfilter.hpp"
#include "d4lcn/reference.hpp"
#include "d4lcn/tensor.hpp"

using namespace d4lcn;

namespace {

DGFilterParams zeroed_params(int k, int d, int n_f, int c) {
  DGFilterParams p;
  p.k = k;
  p.d = d;
  p.n_f = n_f;
  p.c = c;
  p.conv_weights = Tensor({static_cast<std::int64_t>(d) * c, c, d, d});
  p.conv_bias.assign(static_cast<std::size_t>(d) * c, 0.0);
  return p;
}

}  // namespace

TEST_CASE("dlcn with k=1 is the element-wise product") {
  const Tensor input = Tensor::random_uniform({1, 3, 4, 4}, 1);
  const Tensor depth = Tensor::random_uniform({1, 3, 4, 4}, 2);
  const Tensor expect = mul(input, depth);
  CHECK(max_abs_diff(dlcn_forward(input, depth, 1, FilterMode::naive), expect) == 0.0);
  CHECK(max_abs_diff(dlcn_forward(input, depth, 1, FilterMode::fast), expect) == 0.0);
}

TEST_CASE("dlcn window sums on an all-ones 3x3 map") {
  const Tensor ones({1, 1, 3, 3}, 1.0);
  for (const FilterMode mode : {FilterMode::naive, FilterMode::fast}) {
    const Tensor out = dlcn_forward(ones, ones, 3, mode);
    CHECK(out.at(0, 0, 1, 1) == doctest::Approx(1.0).epsilon(1e-15));
    for (const auto& [y, x] : {std::pair{0, 0}, {0, 2}, {2, 0}, {2, 2}}) {
      CHECK(out.at(0, 0, y, x) == doctest::Approx(4.0 / 9.0).epsilon(1e-15));
    }
    for (const auto& [y, x] : {std::pair{0, 1}, {1, 0}, {1, 2}, {2, 1}}) {
      CHECK(out.at(0, 0, y, x) == doctest::Approx(6.0 / 9.0).epsilon(1e-15));
    }
  }
}

TEST_CASE("dlcn annihilates on zero depth") {
  const Tensor input = Tensor::random_uniform({1, 2, 5, 5}, 9);
  const Tensor zeros({1, 2, 5, 5});
  const Tensor out = dlcn_forward(input, zeros, 3);
  for (double v : out.data()) CHECK(v == 0.0);
}

TEST_CASE("dlcn rejects bad arguments") {
  const Tensor a({1, 1, 2, 2});
  const Tensor b({1, 1, 2, 3});
  CHECK_THROWS_AS(dlcn_forward(a, b, 3), std::invalid_argument);
  CHECK_THROWS_AS(dlcn_forward(a, a, 2), std::invalid_argument);
  CHECK_THROWS_AS(dlcn_forward(a, a, 0), std::invalid_argument);
}

TEST_CASE("naive and fast dlcn agree on seeded random cases") {
  SplitMix64 rng(101);
  const int ks[] = {1, 3, 5};
  double worst = 0.0;
  for (int iter = 0; iter < 50; ++iter) {
    Dims4 dims;
    dims.n = 1 + static_cast<std::int64_t>(rng.next() % 2);
    dims.c = 1 + static_cast<std::int64_t>(rng.next() % 8);
    dims.h = 1 + static_cast<std::int64_t>(rng.next() % 16);
    dims.w = 1 + static_cast<std::int64_t>(rng.next() % 16);
    const int k = ks[rng.next() % 3];
    const Tensor input = Tensor::random_uniform(dims, rng.next(), -1, 1);
    const Tensor depth = Tensor::random_uniform(dims, rng.next(), -1, 1);
    worst = std::max(worst,
                     max_abs_diff(dlcn_forward(input, depth, k, FilterMode::naive),
                                  dlcn_forward(input, depth, k, FilterMode::fast)));
  }
  CHECK(worst <= 1e-12);
}

TEST_CASE("dlcn is homogeneous in the input map") {
  const Tensor input = Tensor::random_uniform({1, 2, 6, 6}, 5, -1, 1);
  const Tensor depth = Tensor::random_uniform({1, 2, 6, 6}, 6, -1, 1);
  const Tensor lhs = dlcn_forward(scale(input, 3.5), depth, 3);
  const Tensor rhs = scale(dlcn_forward(input, depth, 3), 3.5);
  CHECK(max_abs_diff(lhs, rhs) <= 1e-12);
}

TEST_CASE("shift_pool basics") {
  const Tensor input = Tensor::random_uniform({1, 4, 3, 3}, 8);
  CHECK(shift_pool(input, 1) == input);
  CHECK_THROWS_AS(shift_pool(input, 0), std::invalid_argument);
  CHECK_THROWS_AS(shift_pool(input, 5), std::invalid_argument);

  const Tensor pair({1, 2, 1, 2}, {1, 2, 3, 4});
  const Tensor pooled = shift_pool(pair, 2);
  CHECK(pooled.data() == std::vector<double>{2, 3, 2, 3});

  const Tensor constant({1, 3, 2, 2}, 0.7);
  for (int n_f = 1; n_f <= 3; ++n_f) {
    CHECK(max_abs_diff(shift_pool(constant, n_f), constant) <= 1e-15);
  }
}

TEST_CASE("shift_pool commutes with scaling") {
  const Tensor input = Tensor::random_uniform({2, 5, 4, 4}, 17, -1, 1);
  const Tensor lhs = shift_pool(scale(input, 2.0), 3);
  const Tensor rhs = scale(shift_pool(input, 3), 2.0);
  CHECK(max_abs_diff(lhs, rhs) <= 1e-15);
}

TEST_CASE("adaptive weights of zero parameters are uniform") {
  const DGFilterParams p = zeroed_params(3, 3, 1, 2);
  const Tensor input = Tensor::random_uniform({2, 2, 7, 9}, 4);
  const DilationWeights w = adaptive_weights(input, p);
  for (std::int64_t n = 0; n < w.n; ++n) {
    for (std::int64_t c = 0; c < w.c; ++c) {
      for (std::int64_t r = 0; r < w.d; ++r) {
        CHECK(w.at(n, c, r) == 1.0 / 3.0);
      }
    }
  }
}

TEST_CASE("adaptive weights with d=1 are exactly one") {
  const DGFilterParams p = DGFilterParams::initialized(3, 1, 1, 3, 42);
  const Tensor input = Tensor::random_uniform({1, 3, 4, 4}, 5);
  const DilationWeights w = adaptive_weights(input, p);
  for (double v : w.values) CHECK(v == 1.0);
}

TEST_CASE("adaptive weights softmax of a (10, 0, 0) logit row") {
  DGFilterParams p = zeroed_params(3, 3, 1, 1);
  p.conv_bias = {10.0, 0.0, 0.0};
  const Tensor input = Tensor::random_uniform({1, 1, 5, 5}, 6);
  const DilationWeights w = adaptive_weights(input, p);
  // softmax(10, 0, 0) computed independently
  CHECK(w.at(0, 0, 0) == doctest::Approx(0.9999092083843409).epsilon(1e-12));
  CHECK(w.at(0, 0, 1) == doctest::Approx(4.539580782951091e-05).epsilon(1e-9));
  CHECK(w.at(0, 0, 2) == doctest::Approx(4.539580782951091e-05).epsilon(1e-9));
}

TEST_CASE("adaptive weights validate shapes") {
  const DGFilterParams p = DGFilterParams::initialized(3, 3, 1, 2, 1);
  CHECK_THROWS_AS(adaptive_weights(Tensor({1, 3, 5, 5}), p),
                  std::invalid_argument);
  CHECK_THROWS_AS(adaptive_weights(Tensor({1, 2, 2, 5}), p),
                  std::invalid_argument);
}

TEST_CASE("dilation weight rows sum to one on random inputs") {
  SplitMix64 rng(55);
  for (int iter = 0; iter < 10; ++iter) {
    const int d = 1 + static_cast<int>(rng.next() % 4);
    const int c = 1 + static_cast<int>(rng.next() % 4);
    const DGFilterParams p = DGFilterParams::initialized(3, d, 1, c, rng.next());
    const Tensor input = Tensor::random_uniform(
        {2, c, d + static_cast<std::int64_t>(rng.next() % 5),
         d + static_cast<std::int64_t>(rng.next() % 5)},
        rng.next(), -3, 3);
    const DilationWeights w = adaptive_weights(input, p);
    for (std::int64_t n = 0; n < w.n; ++n) {
      for (std::int64_t ch = 0; ch < w.c; ++ch) {
        double sum = 0.0;
        for (std::int64_t r = 0; r < w.d; ++r) {
          const double v = w.at(n, ch, r);
          CHECK(v >= 0.0);
          CHECK(v <= 1.0);
          sum += v;
        }
        CHECK(std::abs(sum - 1.0) <= 1e-12);
      }
    }
  }
}

TEST_CASE("d4lcn with d=1 reduces to dlcn") {
  const DGFilterParams p = DGFilterParams::initialized(3, 1, 1, 3, 7);
  const Tensor input = Tensor::random_uniform({2, 3, 6, 6}, 8, -1, 1);
  const Tensor depth = Tensor::random_uniform({2, 3, 6, 6}, 9, -1, 1);
  const Tensor expect = dlcn_forward(input, depth, 3);
  CHECK(max_abs_diff(d4lcn_forward(input, depth, p).output, expect) <= 1e-15);
}

TEST_CASE("one-hot dilation weights reduce to a scaled dilated filter") {
  const int d = 3;
  for (int rate = 1; rate <= d; ++rate) {
    DGFilterParams p = zeroed_params(3, d, 1, 2);
    for (int c = 0; c < 2; ++c) {
      p.conv_bias[static_cast<std::size_t>(c * d + (rate - 1))] = 50.0;
    }
    const Tensor input = Tensor::random_uniform({1, 2, 8, 8}, 10, -1, 1);
    const Tensor depth = Tensor::random_uniform({1, 2, 8, 8}, 11, -1, 1);
    const Tensor out = d4lcn_forward(input, depth, p).output;
    const Tensor expect =
        scale(reference::dilated_filter_loops(input, depth, 3, rate), 1.0 / d);
    CHECK(max_abs_diff(out, expect) <= 1e-12);
  }
}

TEST_CASE("d4lcn matches the triple-loop reference on a seeded instance") {
  const DGFilterParams p = DGFilterParams::initialized(3, 3, 2, 4, 42);
  const Tensor input = Tensor::random_uniform({1, 4, 8, 8}, 42, -1, 1);
  const Tensor depth = Tensor::random_uniform({1, 4, 8, 8}, 4242, -1, 1);
  const Tensor fast = d4lcn_forward(input, depth, p).output;
  const Tensor loops = reference::d4lcn_forward_loops(input, depth, p);
  CHECK(max_abs_diff(fast, loops) <= 1e-12);
}

TEST_CASE("d4lcn is linear in the depth features for fixed weights") {
  const DGFilterParams p = DGFilterParams::initialized(3, 2, 2, 3, 3);
  const Tensor input = Tensor::random_uniform({1, 3, 6, 6}, 12, -1, 1);
  const Tensor d1 = Tensor::random_uniform({1, 3, 6, 6}, 13, -1, 1);
  const Tensor d2 = Tensor::random_uniform({1, 3, 6, 6}, 14, -1, 1);
  const double a = 1.7, b = -0.6;
  const Tensor mixed = add(scale(d1, a), scale(d2, b));
  const Tensor lhs = d4lcn_forward(input, mixed, p).output;
  const Tensor rhs = add(scale(d4lcn_forward(input, d1, p).output, a),
                         scale(d4lcn_forward(input, d2, p).output, b));
  CHECK(max_abs_diff(lhs, rhs) <= 1e-12);
}

TEST_CASE("d4lcn validates arguments") {
  const DGFilterParams p = DGFilterParams::initialized(3, 2, 1, 2, 5);
  CHECK_THROWS_AS(
      d4lcn_forward(Tensor({1, 2, 4, 4}), Tensor({1, 2, 4, 5}), p),
      std::invalid_argument);
  CHECK_THROWS_AS(
      d4lcn_forward(Tensor({1, 3, 4, 4}), Tensor({1, 3, 4, 4}), p),
      std::invalid_argument);
  CHECK_THROWS_AS(
      d4lcn_forward(Tensor({1, 2, 1, 4}), Tensor({1, 2, 1, 4}), p),
      std::invalid_argument);
}

TEST_CASE("backward of zero upstream is zero") {
  const DGFilterParams p = DGFilterParams::initialized(3, 2, 2, 2, 20);
  const Tensor input = Tensor::random_uniform({1, 2, 5, 5}, 21);
  const Tensor depth = Tensor::random_uniform({1, 2, 5, 5}, 22);
  const D4lcnGradients g = d4lcn_backward(input, depth, p, Tensor({1, 2, 5, 5}));
  for (double v : g.grad_input.data()) CHECK(v == 0.0);
  for (double v : g.grad_depth.data()) CHECK(v == 0.0);
  for (double v : g.grad_conv_weights.data()) CHECK(v == 0.0);
  for (double v : g.grad_conv_bias) CHECK(v == 0.0);
}

TEST_CASE("backward with k=1, d=1 is the product rule") {
  const DGFilterParams p = DGFilterParams::initialized(1, 1, 1, 2, 30);
  const Tensor input = Tensor::random_uniform({1, 2, 3, 3}, 31, -1, 1);
  const Tensor depth = Tensor::random_uniform({1, 2, 3, 3}, 32, -1, 1);
  const Tensor upstream = Tensor::random_uniform({1, 2, 3, 3}, 33, -1, 1);
  const D4lcnGradients g = d4lcn_backward(input, depth, p, upstream);
  CHECK(max_abs_diff(g.grad_input, mul(upstream, depth)) == 0.0);
  CHECK(max_abs_diff(g.grad_depth, mul(upstream, input)) == 0.0);
  for (double v : g.grad_conv_weights.data()) CHECK(v == 0.0);
  for (double v : g.grad_conv_bias) CHECK(v == 0.0);
}

TEST_CASE("analytic gradients match central finite differences") {
  // The pinned instance from the operator contract plus two more shapes.
  {
    const DGFilterParams p = DGFilterParams::initialized(3, 2, 1, 2, 7);
    const Tensor input = Tensor::random_uniform({1, 2, 6, 6}, 7, 0.5, 1.5);
    const Tensor depth = Tensor::random_uniform({1, 2, 6, 6}, 77, 0.5, 1.5);
    const Tensor upstream = Tensor::random_uniform({1, 2, 6, 6}, 777, 0.5, 1.5);
    const reference::GradCheckReport rep =
        reference::gradient_check(input, depth, p, upstream, 1e-6);
    CHECK(rep.max_rel_error <= 1e-5);
  }
  {
    const DGFilterParams p = DGFilterParams::initialized(3, 3, 3, 3, 8);
    const Tensor input = Tensor::random_uniform({2, 3, 5, 5}, 8, 0.5, 1.5);
    const Tensor depth = Tensor::random_uniform({2, 3, 5, 5}, 88, 0.5, 1.5);
    const Tensor upstream = Tensor::random_uniform({2, 3, 5, 5}, 888, 0.5, 1.5);
    CHECK(reference::gradient_check(input, depth, p, upstream).max_rel_error <=
          1e-5);
  }
  {
    const DGFilterParams p = DGFilterParams::initialized(5, 2, 2, 2, 9);
    const Tensor input = Tensor::random_uniform({1, 2, 7, 4}, 9, 0.5, 1.5);
    const Tensor depth = Tensor::random_uniform({1, 2, 7, 4}, 99, 0.5, 1.5);
    const Tensor upstream = Tensor::random_uniform({1, 2, 7, 4}, 999, 0.5, 1.5);
    CHECK(reference::gradient_check(input, depth, p, upstream).max_rel_error <=
          1e-5);
  }
}

TEST_CASE("backward rejects mismatched upstream shape") {
  const DGFilterParams p = DGFilterParams::initialized(3, 2, 1, 2, 40);
  CHECK_THROWS_AS(d4lcn_backward(Tensor({1, 2, 5, 5}), Tensor({1, 2, 5, 5}), p,
                                 Tensor({1, 2, 5, 4})),
                  std::invalid_argument);
}

TEST_CASE("dilation histogram basics") {
  SUBCASE("uniform weights, dyadic d is exact") {
    DilationWeights w;
    w.n = 1;
    w.c = 5;
    w.d = 4;
    w.values.assign(20, 0.25);
    const std::vector<double> ratios = dilation_histogram(w);
    for (double r : ratios) CHECK(r == 0.25);
  }
  SUBCASE("uniform weights, d=3") {
    DilationWeights w;
    w.n = 2;
    w.c = 3;
    w.d = 3;
    w.values.assign(18, 1.0 / 3.0);
    for (double r : dilation_histogram(w)) {
      CHECK(r == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
    }
  }
  SUBCASE("all mass on the first rate") {
    DilationWeights w;
    w.n = 1;
    w.c = 3;
    w.d = 2;
    w.values = {1, 0, 1, 0, 1, 0};
    const std::vector<double> ratios = dilation_histogram(w);
    CHECK(ratios[0] == 1.0);
    CHECK(ratios[1] == 0.0);
  }
  SUBCASE("two channels with opposite one-hot weights") {
    DilationWeights w;
    w.n = 1;
    w.c = 2;
    w.d = 2;
    w.values = {1, 0, 0, 1};
    const std::vector<double> ratios = dilation_histogram(w);
    CHECK(ratios[0] == 0.5);
    CHECK(ratios[1] == 0.5);
  }
}

TEST_CASE("dilation weights serialize as (n, c, d, 1) tensors") {
  const DGFilterParams p = DGFilterParams::initialized(3, 3, 1, 2, 60);
  const Tensor input = Tensor::random_uniform({2, 2, 5, 5}, 61);
  const DilationWeights w = adaptive_weights(input, p);
  const Tensor t = w.to_tensor();
  CHECK(t.dims() == Dims4{2, 2, 3, 1});
  const DilationWeights back = DilationWeights::from_tensor(t);
  CHECK(back.values == w.values);
  CHECK(back.d == w.d);
}
