// SPDX-License-Identifier: Apache-2.0

#include "paircl/gradcheck.h"

#include <algorithm>
#include <cmath>

#include "paircl/errors.h"
#include "paircl/rng.h"

namespace paircl {

double relative_error(double analytic, double numeric) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), kRelErrorFloor});
  return std::abs(analytic - numeric) / denom;
}

GradCheckReport backward_check(const ScalarFn& f, std::span<const double> point,
                               std::span<const double> analytic, double tol,
                               const BranchFn& branches) {
  if (point.size() != analytic.size()) {
    throw ShapeError("backward_check: point has " + std::to_string(point.size()) +
                     " entries, gradient has " + std::to_string(analytic.size()));
  }
  GradCheckReport report;
  std::vector<double> x(point.begin(), point.end());
  std::vector<std::int64_t> base;
  if (branches) base = branches(x);

  for (std::size_t i = 0; i < x.size(); ++i) {
    const double orig = x[i];
    x[i] = orig + kFiniteDiffStep;
    const double fp = f(x);
    const bool kink_plus = branches && branches(x) != base;
    x[i] = orig - kFiniteDiffStep;
    const double fm = f(x);
    const bool kink_minus = branches && branches(x) != base;
    x[i] = orig;
    if (kink_plus || kink_minus) {
      report.at_kink = true;
      continue;
    }
    const double numeric = (fp - fm) / (2.0 * kFiniteDiffStep);
    const double rel = relative_error(analytic[i], numeric);
    report.max_abs_error = std::max(report.max_abs_error, std::abs(analytic[i] - numeric));
    if (rel > report.max_rel_error) {
      report.max_rel_error = rel;
      report.worst_index = i;
    }
    ++report.checked;
  }
  report.passed = !report.at_kink && report.max_rel_error < tol;
  if (report.at_kink) {
    report.advice = "finite-difference step crossed a non-differentiable point; resample";
  }
  return report;
}

GradCheckReport backward_check(const VecFn& op, const VjpFn& vjp, const Vec& point,
                               double tol, std::uint64_t probe_seed,
                               const BranchFn& branches) {
  const Vec y = op(point);
  Rng rng(probe_seed);
  Vec probe(y.size());
  for (double& r : probe) r = rng.uniform(-1.0, 1.0);
  const Vec analytic = vjp(point, probe);
  auto scalar = [&](std::span<const double> x) {
    return dot(probe.span(), op(Vec(x)).span());
  };
  return backward_check(scalar, point.span(), analytic.span(), tol, branches);
}

}  // namespace paircl
