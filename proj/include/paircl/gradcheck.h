// SPDX-License-Identifier: Apache-2.0
//
// Central finite-difference verification of analytic gradients.

#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "paircl/tensor.h"

namespace paircl {

inline constexpr double kFiniteDiffStep = 1e-5;
// Denominator floor for the relative error. Below this magnitude the
// comparison is effectively absolute, since central differences carry
// roughly eps * |f| / h of round-off noise (~1e-9 for batch losses near 10).
inline constexpr double kRelErrorFloor = 1e-3;

double relative_error(double analytic, double numeric);

struct GradCheckReport {
  double max_rel_error = 0.0;
  double max_abs_error = 0.0;
  std::size_t worst_index = 0;
  std::size_t checked = 0;
  // A +-h step changed the piecewise branch (ReLU side, max-pool winner).
  bool at_kink = false;
  bool passed = false;
  std::string advice;
};

using ScalarFn = std::function<double(std::span<const double>)>;
// Identifies the active branch of every non-smooth op at a point.
using BranchFn = std::function<std::vector<std::int64_t>(std::span<const double>)>;

// Compares `analytic` (df/dx at `point`) with central differences of f.
// Passes iff no kink was crossed and max relative error < tol.
GradCheckReport backward_check(const ScalarFn& f, std::span<const double> point,
                               std::span<const double> analytic, double tol,
                               const BranchFn& branches = {});

using VecFn = std::function<Vec(const Vec&)>;
// Vector-Jacobian product: (x, dL/dy) -> dL/dx.
using VjpFn = std::function<Vec(const Vec& x, const Vec& dy)>;

// Checks a vector op through a random linear probe L = r . op(x), with r drawn
// from `probe_seed`.
GradCheckReport backward_check(const VecFn& op, const VjpFn& vjp, const Vec& point,
                               double tol, std::uint64_t probe_seed = 0,
                               const BranchFn& branches = {});

}  // namespace paircl
