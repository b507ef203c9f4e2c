#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace d4lcn::cli {

// Operator hyperparameter defaults shared by the subcommands.
struct RunConfig {
  int k = 3;
  int d = 3;
  int n_f = 2;
  double tol_eq1 = 1e-12;
  double tol_eq2 = 1e-12;
  double tol_grad = 1e-5;
  double fd_step = 1e-6;
};

RunConfig defaults();

struct BenchResult {
  double naive_ms = 0.0;
  double fast_ms = 0.0;
  double speedup = 0.0;
};

// Median-of-iterations timing of the per-pixel reference against the
// shift-based path on one random instance.
BenchResult bench_dgf(int n, int c, int hw, int k, int d, int n_f, int iters,
                      int warmup, std::uint64_t seed);

// In-process check routines backing the `check` subcommands; each returns
// the worst observed deviation.
double check_eq1(std::uint64_t seed, int cases, int fixed_k, std::ostream& out);
double check_eq2(std::uint64_t seed, int cases, const RunConfig& cfg,
                 std::ostream& out);
double check_grad(std::uint64_t seed, int cases, double step,
                  std::ostream& out);

int run(const std::vector<std::string>& args, std::ostream& out,
        std::ostream& err);
int run(int argc, char** argv);

}  // namespace d4lcn::cli
