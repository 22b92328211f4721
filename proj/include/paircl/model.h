// SPDX-License-Identifier: Apache-2.0
//
// Model wiring: encoder -> pair representation -> classifier, with the
// cross attention module optionally replaced by plain concatenation of the
// two independently pooled sentence encodings (z = [a_p; a_h], width 4k).

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "paircl/crossattn.h"
#include "paircl/data.h"
#include "paircl/encoder.h"
#include "paircl/objectives.h"

namespace paircl {

struct ModelConfig {
  std::size_t vocab_size = 200;
  std::size_t k = 16;
  std::size_t d = 16;
  std::size_t max_len = 24;
  std::size_t num_classes = kNumClasses;
  bool cross_attention = true;

  std::size_t rep_dim() const { return cross_attention ? 8 * k : 4 * k; }
};

struct Model {
  ModelConfig config;
  EncoderParams enc;
  CrossAttnParams ca;  // unused (and not trained) without cross attention
  ClassifierParams cls;

  // Trainable parameters in a fixed order.
  std::vector<Param*> params();
  std::vector<const Param*> params() const;
};

Model init_model(const ModelConfig& config, std::uint64_t seed);

struct PairPass {
  PairForward cross;    // cross attention wiring
  HiddenSeq sp, sh;     // concat wiring
  Pooled pp, ph;        // concat wiring
  PairRep rep;
  bool cross_attention = true;
};

PairPass forward(const Model& model, const TokenSeq& premise, const TokenSeq& hypothesis);
void backward(Model& model, const TokenSeq& premise, const TokenSeq& hypothesis,
              const PairPass& pass, const Vec& dz, const Vec& dz_norm);

PairRep represent(const Model& model, const Example& ex);
int predict(const Model& model, const PairRep& rep);

struct BatchStep {
  Objectives objectives;
  std::vector<PairRep> reps;
};

// Forward all pairs, evaluate the objective, and accumulate every parameter
// gradient. The caller zeroes gradients beforehand.
BatchStep accumulate_batch(Model& model, const Split& split, std::span<const std::size_t> batch,
                           const ObjectiveConfig& objective);

// Loss only; no gradient side effects on the model.
Objectives batch_loss(const Model& model, const Split& split, std::span<const std::size_t> batch,
                      const ObjectiveConfig& objective);

std::vector<std::int64_t> branch_signature(const Model& model, const Split& split,
                                           std::span<const std::size_t> batch);

}  // namespace paircl
