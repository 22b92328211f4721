// SPDX-License-Identifier: Apache-2.0
//
// Batch objectives over pair representations.
//
// Supervised contrastive loss, with s_ik = z_i . z_k / tau over unit-norm
// representations and P_i the other batch members sharing i's label:
//
//   l_ip  = exp(s_ip) / sum_{k != i} exp(s_ik)
//   L_SCL = sum_i -log( (1/|P_i|) sum_{p in P_i} l_ip )
//
// i.e. the log of the mean over positives ("log-of-mean"). The more common
// mean-of-log form, sum_i -(1/|P_i|) sum_p log l_ip, is available through
// SclForm::kMeanOfLog. Anchors with no positive are skipped and counted.
//
// Cross entropy is averaged over the batch and reads the raw z; the total is
// L = L_SCL + alpha * L_CE.

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "paircl/crossattn.h"
#include "paircl/tensor.h"

namespace paircl {

inline constexpr double kDefaultTau = 0.05;
inline constexpr double kDefaultAlpha = 1.0;

enum class SclForm { kLogOfMean, kMeanOfLog };

struct Batch {
  std::vector<PairRep> reps;
  std::vector<int> labels;
  std::size_t size() const { return reps.size(); }
};

struct SclResult {
  double loss = 0.0;
  std::vector<Vec> grad;  // dL/dz_norm per batch member
  std::size_t skipped_anchors = 0;
};

// Reads z_norm from each rep.
SclResult scl_loss(const Batch& batch, double tau, SclForm form = SclForm::kLogOfMean);
SclResult scl_loss(std::span<const Vec> reps, std::span<const int> labels, double tau,
                   SclForm form = SclForm::kLogOfMean);

struct ClassifierParams {
  Param W_cls;  // C x input_dim
  Param b_cls;  // 1 x C

  std::size_t num_classes() const { return W_cls.value.rows(); }
  std::size_t input_dim() const { return W_cls.value.cols(); }
  std::vector<Param*> params() { return {&W_cls, &b_cls}; }
};

ClassifierParams init_classifier(std::size_t num_classes, std::size_t input_dim,
                                 std::uint64_t seed);

Vec classifier_logits(const ClassifierParams& params, const Vec& z);

struct CeResult {
  double loss = 0.0;
  std::vector<Vec> grad;  // dL/dz per batch member
};

// Mean over the batch of -log softmax(W z + b)[y]. Accumulates classifier
// parameter gradients; every gradient (including `grad`) is scaled by
// grad_weight, the loss is not.
CeResult ce_loss(const Batch& batch, ClassifierParams& params, double grad_weight = 1.0);

struct ObjectiveConfig {
  double tau = kDefaultTau;
  double alpha = kDefaultAlpha;
  bool use_scl = true;
  bool use_ce = true;
  SclForm scl_form = SclForm::kLogOfMean;
};

struct Objectives {
  double l_scl = 0.0;
  double l_ce = 0.0;
  double l_total = 0.0;
  double alpha = kDefaultAlpha;
  double tau = kDefaultTau;
  std::size_t skipped_anchors = 0;
  std::vector<Vec> grad_z;       // from the CE term (already scaled by alpha)
  std::vector<Vec> grad_z_norm;  // from the SCL term
};

// Disabled terms report 0 and contribute no gradient.
Objectives total_loss(const Batch& batch, const ObjectiveConfig& config,
                      ClassifierParams& params);

}  // namespace paircl
