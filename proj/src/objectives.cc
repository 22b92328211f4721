// SPDX-License-Identifier: Apache-2.0

#include "paircl/objectives.h"

#include <cmath>

#include "paircl/errors.h"
#include "paircl/rng.h"

namespace paircl {

namespace {

void check_labels(std::span<const int> labels, std::size_t num_classes) {
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= num_classes) {
      throw ParamError("label " + std::to_string(labels[i]) + " at batch index " +
                       std::to_string(i) + " outside [0, " + std::to_string(num_classes) +
                       ")");
    }
  }
}

}  // namespace

SclResult scl_loss(const Batch& batch, double tau, SclForm form) {
  std::vector<Vec> reps;
  reps.reserve(batch.size());
  for (const auto& r : batch.reps) reps.push_back(r.z_norm);
  return scl_loss(reps, batch.labels, tau, form);
}

SclResult scl_loss(std::span<const Vec> reps, std::span<const int> labels, double tau,
                   SclForm form) {
  if (!(tau > 0.0)) throw ParamError("scl_loss: tau must be > 0, got " + std::to_string(tau));
  const std::size_t K = reps.size();
  if (K < 2) throw DegenerateInputError("scl_loss: batch of " + std::to_string(K) + " < 2");
  if (labels.size() != K) {
    throw ShapeError("scl_loss: " + std::to_string(K) + " reps vs " +
                     std::to_string(labels.size()) + " labels");
  }
  const std::size_t width = reps[0].size();

  SclResult out;
  out.grad.assign(K, Vec(width));
  std::vector<double> logits(K);
  std::vector<double> all_logits;
  std::vector<double> pos_logits;
  std::vector<std::size_t> pos_idx;
  all_logits.reserve(K);
  for (std::size_t i = 0; i < K; ++i) {
    all_logits.clear();
    pos_logits.clear();
    pos_idx.clear();
    for (std::size_t k = 0; k < K; ++k) {
      if (k == i) continue;
      logits[k] = dot(reps[i].span(), reps[k].span()) / tau;
      all_logits.push_back(logits[k]);
      if (labels[k] == labels[i]) {
        pos_logits.push_back(logits[k]);
        pos_idx.push_back(k);
      }
    }
    if (pos_idx.empty()) {
      ++out.skipped_anchors;
      continue;
    }
    const double npos = static_cast<double>(pos_idx.size());
    const double lse_all = log_sum_exp(all_logits);
    const double lse_pos = log_sum_exp(pos_logits);

    double mean_pos = 0.0;
    for (double s : pos_logits) mean_pos += s;
    mean_pos /= npos;
    out.loss += form == SclForm::kLogOfMean ? lse_all - lse_pos + std::log(npos)
                                            : lse_all - mean_pos;

    // dL_i/ds_ik = softmax over all k != i, minus the positive weighting.
    std::vector<double> g(K, 0.0);
    for (std::size_t k = 0; k < K; ++k) {
      if (k != i) g[k] = std::exp(logits[k] - lse_all);
    }
    for (std::size_t p : pos_idx) {
      g[p] -= form == SclForm::kLogOfMean ? std::exp(logits[p] - lse_pos) : 1.0 / npos;
    }
    for (std::size_t k = 0; k < K; ++k) {
      if (k == i || g[k] == 0.0) continue;
      axpy(g[k] / tau, reps[k].span(), out.grad[i].span());
      axpy(g[k] / tau, reps[i].span(), out.grad[k].span());
    }
  }
  return out;
}

ClassifierParams init_classifier(std::size_t num_classes, std::size_t input_dim,
                                 std::uint64_t seed) {
  if (num_classes < 1 || input_dim < 1) {
    throw ConfigError("init_classifier: sizes must be >= 1");
  }
  Rng rng(seed);
  const double bound = 1.0 / std::sqrt(static_cast<double>(input_dim));
  Mat w(num_classes, input_dim);
  for (double& x : w.data()) x = rng.uniform(-bound, bound);
  return {Param("classifier.W", std::move(w)), Param("classifier.b", Mat(1, num_classes))};
}

Vec classifier_logits(const ClassifierParams& params, const Vec& z) {
  return affine(params.W_cls.value, z.span(), params.b_cls.vec());
}

CeResult ce_loss(const Batch& batch, ClassifierParams& params, double grad_weight) {
  const std::size_t K = batch.size();
  if (K == 0) throw DegenerateInputError("ce_loss: empty batch");
  if (batch.labels.size() != K) {
    throw ShapeError("ce_loss: " + std::to_string(K) + " reps vs " +
                     std::to_string(batch.labels.size()) + " labels");
  }
  check_labels(batch.labels, params.num_classes());
  CeResult out;
  out.grad.reserve(K);
  const double scale = 1.0 / static_cast<double>(K);
  const double grad_scale = grad_weight * scale;
  for (std::size_t i = 0; i < K; ++i) {
    const Vec& z = batch.reps[i].z;
    const Vec logits = classifier_logits(params, z);
    const auto y = static_cast<std::size_t>(batch.labels[i]);
    out.loss += log_sum_exp(logits.span()) - logits[y];
    Vec dlogits = softmax(logits);
    dlogits[y] -= 1.0;
    for (double& g : dlogits) g *= grad_scale;
    out.grad.push_back(affine_backward(params.W_cls.value, z.span(), dlogits.span(),
                                       params.W_cls.grad, params.b_cls.grad_vec()));
  }
  out.loss *= scale;
  return out;
}

Objectives total_loss(const Batch& batch, const ObjectiveConfig& config,
                      ClassifierParams& params) {
  if (!config.use_scl && !config.use_ce) {
    throw ConfigError("total_loss: both SCL and CE disabled");
  }
  Objectives out;
  out.alpha = config.alpha;
  out.tau = config.tau;
  const std::size_t K = batch.size();
  if (config.use_scl) {
    SclResult scl = scl_loss(batch, config.tau, config.scl_form);
    out.l_scl = scl.loss;
    out.skipped_anchors = scl.skipped_anchors;
    out.grad_z_norm = std::move(scl.grad);
  }
  if (config.use_ce) {
    CeResult ce = ce_loss(batch, params, config.alpha);
    out.l_ce = ce.loss;
    out.grad_z = std::move(ce.grad);
  }
  out.l_total = out.l_scl + config.alpha * out.l_ce;
  if (out.grad_z.empty()) out.grad_z.assign(K, Vec());
  if (out.grad_z_norm.empty()) out.grad_z_norm.assign(K, Vec());
  return out;
}

}  // namespace paircl
