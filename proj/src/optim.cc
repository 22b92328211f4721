// SPDX-License-Identifier: Apache-2.0

#include "paircl/optim.h"

#include <algorithm>
#include <cmath>

#include "paircl/errors.h"

namespace paircl {

AdamState init_adam(std::span<Param* const> params, const AdamConfig& config) {
  AdamState state;
  state.config = config;
  for (const Param* p : params) {
    state.m.emplace_back(p->value.rows(), p->value.cols());
    state.v.emplace_back(p->value.rows(), p->value.cols());
  }
  return state;
}

void adam_step(std::span<Param* const> params, AdamState& state) {
  if (params.size() != state.m.size()) {
    throw ShapeError("adam_step: " + std::to_string(params.size()) + " params vs " +
                     std::to_string(state.m.size()) + " moment slots");
  }
  const AdamConfig& c = state.config;
  double clip = 1.0;
  if (c.max_grad_norm > 0.0) {
    double sq = 0.0;
    for (const Param* p : params) {
      for (double g : p->grad.data()) sq += g * g;
    }
    const double norm = std::sqrt(sq);
    if (norm > c.max_grad_norm) clip = c.max_grad_norm / norm;
  }

  ++state.t;
  const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(state.t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Param& p = *params[i];
    if (!state.m[i].same_shape(p.value)) {
      throw ShapeError("adam_step: moment " + state.m[i].shape_str() + " vs " + p.name + " " +
                       p.value.shape_str());
    }
    const std::size_t cols = p.value.cols();
    auto value = p.value.data();
    auto grad = p.grad.data();
    auto m = state.m[i].data();
    auto v = state.v[i].data();
    for (std::size_t j = 0; j < value.size(); ++j) {
      if (!p.frozen_rows.empty() &&
          std::find(p.frozen_rows.begin(), p.frozen_rows.end(), j / cols) !=
              p.frozen_rows.end()) {
        continue;
      }
      const double g = grad[j] * clip;
      m[j] = c.beta1 * m[j] + (1.0 - c.beta1) * g;
      v[j] = c.beta2 * v[j] + (1.0 - c.beta2) * g * g;
      const double mhat = m[j] / bc1;
      const double vhat = v[j] / bc2;
      value[j] -= c.lr * mhat / (std::sqrt(vhat) + c.eps);
    }
  }
}

}  // namespace paircl
