// SPDX-License-Identifier: Apache-2.0
//
// End-to-end finite-difference suite: the full training objective on a small
// random batch, differentiated with respect to every parameter group.

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "paircl/model.h"
#include "paircl/objectives.h"

namespace paircl {

struct GradSuiteConfig {
  std::uint64_t seed = 3;
  int points = 20;
  double tol = 1e-5;
  std::size_t batch_size = 6;
  ModelConfig model{.vocab_size = 16, .k = 4, .d = 3, .max_len = 6};
  ObjectiveConfig objective;
  // Also check the concatenation wiring used by the cross-attention ablation.
  bool include_concat_wiring = true;
  int max_resamples = 50;
};

struct GroupResult {
  std::string group;
  double worst_rel_error = 0.0;
  std::string worst_param;
  std::size_t checked = 0;
  int points = 0;
  // Points redrawn because a step crossed a kink or a layer-norm row was
  // near-constant.
  int resampled = 0;
  bool passed = false;
};

std::vector<GroupResult> run_gradient_suite(const GradSuiteConfig& config);

}  // namespace paircl
