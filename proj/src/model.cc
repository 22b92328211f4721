// SPDX-License-Identifier: Apache-2.0

#include "paircl/model.h"

#include <algorithm>

#include "paircl/errors.h"
#include "paircl/rng.h"

namespace paircl {

std::vector<Param*> Model::params() {
  std::vector<Param*> out = enc.params();
  if (config.cross_attention) {
    for (Param* p : ca.params()) out.push_back(p);
  }
  for (Param* p : cls.params()) out.push_back(p);
  return out;
}

std::vector<const Param*> Model::params() const {
  std::vector<const Param*> out{&enc.token_table, &enc.pos_table, &enc.mix_w, &enc.mix_b};
  if (config.cross_attention) {
    out.insert(out.end(), {&ca.W, &ca.P, &ca.W_enh, &ca.b_enh, &ca.ln_gamma, &ca.ln_beta});
  }
  out.insert(out.end(), {&cls.W_cls, &cls.b_cls});
  return out;
}

Model init_model(const ModelConfig& config, std::uint64_t seed) {
  if (config.num_classes < 2) throw ConfigError("model needs at least 2 classes");
  Model m;
  m.config = config;
  m.enc = init_encoder(config.vocab_size, config.k, config.max_len, derive_seed(seed, 1));
  m.ca = init_crossattn(config.k, config.d, derive_seed(seed, 2));
  m.cls = init_classifier(config.num_classes, config.rep_dim(), derive_seed(seed, 3));
  return m;
}

PairPass forward(const Model& model, const TokenSeq& premise, const TokenSeq& hypothesis) {
  PairPass pass;
  pass.cross_attention = model.config.cross_attention;
  if (pass.cross_attention) {
    pass.cross = forward_pair(premise, hypothesis, model.enc, model.ca);
    pass.rep = pass.cross.rep();
    return pass;
  }
  pass.sp = encode(premise, model.enc);
  pass.sh = encode(hypothesis, model.enc);
  pass.pp = pool(pass.sp.states);
  pass.ph = pool(pass.sh.states);
  pass.rep = make_pair_rep(concat({pass.pp.a.span(), pass.ph.a.span()}));
  return pass;
}

void backward(Model& model, const TokenSeq& premise, const TokenSeq& hypothesis,
              const PairPass& pass, const Vec& dz, const Vec& dz_norm) {
  if (pass.cross_attention) {
    backward_pair(premise, hypothesis, pass.cross, dz, dz_norm, model.enc, model.ca);
    return;
  }
  Vec g = normalize_backward(pass.rep, dz_norm);
  if (!dz.empty()) g = add(g, dz);
  const std::size_t w = pass.pp.a.size();
  const Vec dap(std::span<const double>(g.span().subspan(0, w)));
  const Vec dah(std::span<const double>(g.span().subspan(w, w)));
  encode_backward(premise, pass.sp, pool_backward(pass.pp, dap), model.enc);
  encode_backward(hypothesis, pass.sh, pool_backward(pass.ph, dah), model.enc);
}

PairRep represent(const Model& model, const Example& ex) {
  return forward(model, ex.premise, ex.hypothesis).rep;
}

int predict(const Model& model, const PairRep& rep) {
  const Vec logits = classifier_logits(model.cls, rep.z);
  return static_cast<int>(std::max_element(logits.begin(), logits.end()) - logits.begin());
}

BatchStep accumulate_batch(Model& model, const Split& split, std::span<const std::size_t> batch,
                           const ObjectiveConfig& objective) {
  std::vector<PairPass> passes;
  passes.reserve(batch.size());
  Batch b;
  for (std::size_t idx : batch) {
    const Example& ex = split.at(idx);
    passes.push_back(forward(model, ex.premise, ex.hypothesis));
    b.reps.push_back(passes.back().rep);
    b.labels.push_back(ex.label);
  }
  BatchStep step;
  step.objectives = total_loss(b, objective, model.cls);
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const Example& ex = split[batch[i]];
    backward(model, ex.premise, ex.hypothesis, passes[i], step.objectives.grad_z[i],
             step.objectives.grad_z_norm[i]);
  }
  step.reps = std::move(b.reps);
  return step;
}

Objectives batch_loss(const Model& model, const Split& split, std::span<const std::size_t> batch,
                      const ObjectiveConfig& objective) {
  Batch b;
  for (std::size_t idx : batch) {
    b.reps.push_back(represent(model, split.at(idx)));
    b.labels.push_back(split[idx].label);
  }
  // total_loss accumulates classifier gradients; give it a scratch copy.
  ClassifierParams scratch = model.cls;
  return total_loss(b, objective, scratch);
}

std::vector<std::int64_t> branch_signature(const Model& model, const Split& split,
                                           std::span<const std::size_t> batch) {
  std::vector<std::int64_t> sig;
  for (std::size_t idx : batch) {
    const PairPass pass = forward(model, split.at(idx).premise, split[idx].hypothesis);
    if (pass.cross_attention) {
      auto s = branch_signature(pass.cross);
      sig.insert(sig.end(), s.begin(), s.end());
    } else {
      for (const Pooled* p : {&pass.pp, &pass.ph}) {
        for (std::size_t a : p->max.argmax) sig.push_back(static_cast<std::int64_t>(a));
      }
    }
  }
  return sig;
}

}  // namespace paircl
