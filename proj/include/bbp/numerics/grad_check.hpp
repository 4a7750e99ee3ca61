#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "bbp/numerics/diff_array.hpp"
#include "bbp/numerics/ops.hpp"

namespace bbp {

// Scalar loss of one array. Called with a tape-recorded alias of x for the
// analytic gradient and with x itself (untracked) for finite differences.
using ScalarFn = std::function<DiffArray<double>(const DiffArray<double>&)>;

// Scalar loss of several parameters; `tape` is null for finite-difference
// evaluations, otherwise the loss must watch every checked parameter on it.
using ParamLossFn = std::function<DiffArray<double>(Tape<double>* tape)>;

// Central-difference check. Returns max over coordinates of
// |g_fd − g_tape| / max(1, |g_fd|, |g_tape|).
// Throws NonFiniteGradient if either gradient holds NaN/Inf.
double grad_check(const ScalarFn& f, const DiffArray<double>& x, double eps = 1e-6);

struct GradCheckOptions {
  double eps = 1e-6;
  // Coordinates probed per parameter; nullopt checks all of them.
  std::optional<std::size_t> coords_per_param;
  std::uint64_t seed = 0;
};

// Multi-parameter variant. The parameters are perturbed in place and restored.
double grad_check(const ParamLossFn& loss, std::vector<DiffArray<double>> params, const GradCheckOptions& options);

}  // namespace bbp
