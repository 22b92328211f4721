// SPDX-License-Identifier: Apache-2.0

#include "paircl/encoder.h"

#include <cmath>

#include "paircl/errors.h"
#include "paircl/rng.h"

namespace paircl {

TokenSeq::TokenSeq(std::vector<int> tokens, std::size_t max_len) : len_(tokens.size()) {
  if (tokens.size() > max_len) {
    throw ShapeError("TokenSeq: " + std::to_string(tokens.size()) +
                     " tokens exceed max_len " + std::to_string(max_len));
  }
  tokens.resize(max_len, kPadId);
  ids_ = std::move(tokens);
}

void TokenSeq::validate(std::size_t vocab_size) const {
  for (std::size_t i = 0; i < ids_.size(); ++i) {
    const int id = ids_[i];
    if (id < 0 || static_cast<std::size_t>(id) >= vocab_size) {
      throw VocabularyError("token id " + std::to_string(id) + " at position " +
                            std::to_string(i) + " outside vocabulary of size " +
                            std::to_string(vocab_size));
    }
    if (i >= len_ && id != kPadId) {
      throw VocabularyError("non-PAD id " + std::to_string(id) + " in padding position " +
                            std::to_string(i));
    }
  }
}

EncoderParams init_encoder(std::size_t vocab_size, std::size_t k, std::size_t max_len,
                           std::uint64_t seed) {
  if (vocab_size < 1 || k < 1 || max_len < 1) {
    throw ConfigError("init_encoder: sizes must be >= 1");
  }
  Rng rng(seed);
  const double bound = 1.0 / std::sqrt(static_cast<double>(k));
  auto draw = [&](std::size_t rows, std::size_t cols) {
    Mat m(rows, cols);
    for (double& x : m.data()) x = rng.uniform(-bound, bound);
    return m;
  };
  EncoderParams p;
  p.token_table = Param("encoder.token_table", draw(vocab_size, k));
  p.pos_table = Param("encoder.pos_table", draw(max_len, k));
  p.mix_w = Param("encoder.mix_w", draw(k, k));
  p.mix_b = Param("encoder.mix_b", draw(1, k));
  for (double& x : p.token_table.value.row(kPadId)) x = 0.0;
  p.token_table.frozen_rows = {static_cast<std::size_t>(kPadId)};
  return p;
}

HiddenSeq encode(const TokenSeq& seq, const EncoderParams& params) {
  seq.validate(params.vocab_size());
  if (seq.max_len() > params.max_len()) {
    throw ShapeError("encode: sequence max_len " + std::to_string(seq.max_len()) +
                     " exceeds position table " + params.pos_table.value.shape_str());
  }
  const std::size_t k = params.k();
  HiddenSeq out{Mat(seq.len(), k)};
  Vec e(k);
  for (std::size_t i = 0; i < seq.len(); ++i) {
    auto tok = params.token_table.value.row(static_cast<std::size_t>(seq[i]));
    auto pos = params.pos_table.value.row(i);
    for (std::size_t c = 0; c < k; ++c) e[c] = tok[c] + pos[c];
    const Vec u = affine(params.mix_w.value, e.span(), params.mix_b.vec());
    auto row = out.states.row(i);
    for (std::size_t c = 0; c < k; ++c) row[c] = std::tanh(u[c]);
  }
  return out;
}

void encode_backward(const TokenSeq& seq, const HiddenSeq& out, const Mat& dstates,
                     EncoderParams& params) {
  if (!dstates.same_shape(out.states)) {
    throw ShapeError("encode_backward: shape mismatch " + dstates.shape_str() + " vs " +
                     out.states.shape_str());
  }
  const std::size_t k = params.k();
  Vec e(k);
  for (std::size_t i = 0; i < seq.len(); ++i) {
    const auto id = static_cast<std::size_t>(seq[i]);
    auto tok = params.token_table.value.row(id);
    auto pos = params.pos_table.value.row(i);
    for (std::size_t c = 0; c < k; ++c) e[c] = tok[c] + pos[c];
    const Vec du = tanh_backward(out.states.row_vec(i), dstates.row_vec(i));
    const Vec de = affine_backward(params.mix_w.value, e.span(), du.span(),
                                   params.mix_w.grad, params.mix_b.grad_vec());
    if (id != static_cast<std::size_t>(kPadId)) axpy(1.0, de.span(), params.token_table.grad.row(id));
    axpy(1.0, de.span(), params.pos_table.grad.row(i));
  }
}

}  // namespace paircl
