// SPDX-License-Identifier: Apache-2.0
//
// Small trainable token encoder: token sequence -> per-token hidden states of
// width k. states[i] = tanh(mix_w (token_table[id_i] + pos_table[i]) + mix_b).
// Premise and hypothesis share one set of encoder weights.

#pragma once

#include <cstdint>
#include <vector>

#include "paircl/tensor.h"

namespace paircl {

inline constexpr int kPadId = 0;

// Token ids padded with kPadId out to max_len; the first `len` are real.
class TokenSeq {
 public:
  TokenSeq() = default;
  // Pads `tokens` to max_len. Throws if tokens.size() > max_len.
  TokenSeq(std::vector<int> tokens, std::size_t max_len);

  std::size_t len() const { return len_; }
  std::size_t max_len() const { return ids_.size(); }
  const std::vector<int>& ids() const { return ids_; }
  int operator[](std::size_t i) const { return ids_[i]; }
  std::vector<int> tokens() const {
    return {ids_.begin(), ids_.begin() + static_cast<std::ptrdiff_t>(len_)};
  }
  // Throws VocabularyError for ids outside [0, vocab_size) or non-PAD padding.
  void validate(std::size_t vocab_size) const;

  bool operator==(const TokenSeq&) const = default;

 private:
  std::vector<int> ids_;
  std::size_t len_ = 0;
};

struct EncoderParams {
  Param token_table;  // vocab_size x k, row kPadId frozen at zero
  Param pos_table;    // max_len x k
  Param mix_w;        // k x k
  Param mix_b;        // 1 x k

  std::size_t vocab_size() const { return token_table.value.rows(); }
  std::size_t k() const { return token_table.value.cols(); }
  std::size_t max_len() const { return pos_table.value.rows(); }
  std::vector<Param*> params() { return {&token_table, &pos_table, &mix_w, &mix_b}; }
};

// Unpadded view: one row per real token.
struct HiddenSeq {
  Mat states;
  std::size_t len() const { return states.rows(); }
};

EncoderParams init_encoder(std::size_t vocab_size, std::size_t k, std::size_t max_len,
                           std::uint64_t seed);

HiddenSeq encode(const TokenSeq& seq, const EncoderParams& params);

// Accumulates parameter gradients given dL/dstates. The PAD row never
// receives gradient.
void encode_backward(const TokenSeq& seq, const HiddenSeq& out, const Mat& dstates,
                     EncoderParams& params);

}  // namespace paircl
