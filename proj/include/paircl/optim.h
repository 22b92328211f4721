// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>
#include <vector>

#include "paircl/tensor.h"

namespace paircl {

// Desk-scale default; see README for how it was chosen.
inline constexpr double kDefaultLearningRate = 3e-2;

struct AdamConfig {
  double lr = kDefaultLearningRate;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  // Global-norm gradient clipping; <= 0 disables it.
  double max_grad_norm = 0.0;
};

// Moment estimates m, v per parameter, in the order of the param list given
// to adam_step.
struct AdamState {
  AdamConfig config;
  std::vector<Mat> m;
  std::vector<Mat> v;
  long t = 0;
};

AdamState init_adam(std::span<Param* const> params, const AdamConfig& config);

// One bias-corrected Adam update. Frozen rows are left untouched.
void adam_step(std::span<Param* const> params, AdamState& state);

}  // namespace paircl
