// SPDX-License-Identifier: Apache-2.0
//
// Cross attention between a premise and a hypothesis, producing a fixed-width
// pair-level representation:
//
//   C[i][j]   = P . tanh(W (sp_i * sh_j))              co-attention, m x n
//   sp'_i     = sum_j softmax(C[i,:])_j sh_j            row-wise alignment
//   sh'_j     = sum_i softmax(C[:,j])_i sp_i            column-wise alignment
//   s~        = ReLU(W_enh [s; s'; s - s'; s * s'] + b_enh)
//   s^        = LayerNorm(s~)                           per token
//   a         = [mean_tokens(s^); max_tokens(s^)]       per side, 2k
//   z         = [a_p; a_h; a_p - a_h; a_p * a_h]        8k
//
// One enhancement projection (W_enh, b_enh) is shared by every token of both
// sentences. Sequences are unpadded views, so padded positions never enter a
// softmax or a pool.

#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "paircl/encoder.h"
#include "paircl/tensor.h"

namespace paircl {

struct CrossAttnParams {
  Param W;         // d x k
  Param P;         // 1 x d
  Param W_enh;     // k x 4k
  Param b_enh;     // 1 x k
  Param ln_gamma;  // 1 x k
  Param ln_beta;   // 1 x k

  std::size_t k() const { return W.value.cols(); }
  std::size_t d() const { return W.value.rows(); }
  std::vector<Param*> params() { return {&W, &P, &W_enh, &b_enh, &ln_gamma, &ln_beta}; }
};

CrossAttnParams init_crossattn(std::size_t k, std::size_t d, std::uint64_t seed);

struct PairRep {
  Vec z;
  Vec z_norm;  // z / |z|, or all-zero when |z| == 0
  double norm = 0.0;
  bool zero_norm() const { return norm == 0.0; }
};

PairRep make_pair_rep(Vec z);
// dL/dz contribution of a gradient on z_norm.
Vec normalize_backward(const PairRep& rep, const Vec& dz_norm);

// ---- co-attention ---------------------------------------------------------

Mat coattention(const HiddenSeq& sp, const HiddenSeq& sh, const CrossAttnParams& params);
void coattention_backward(const HiddenSeq& sp, const HiddenSeq& sh, const Mat& dC,
                          Mat& dsp, Mat& dsh, CrossAttnParams& params);

// ---- alignment ------------------------------------------------------------

struct Alignment {
  Mat premise_weights;     // m x n, each row sums to 1
  Mat hypothesis_weights;  // m x n, each column sums to 1
  Mat premise_aligned;     // m x k
  Mat hypothesis_aligned;  // n x k
};

Alignment align(const Mat& C, const HiddenSeq& sp, const HiddenSeq& sh);
// Accumulates into dC, dsp, dsh.
void align_backward(const Alignment& al, const HiddenSeq& sp, const HiddenSeq& sh,
                    const Mat& d_premise_aligned, const Mat& d_hypothesis_aligned, Mat& dC,
                    Mat& dsp, Mat& dsh);

// ---- local inference enhancement -----------------------------------------

struct Enhanced {
  Mat features;  // len x 4k: [s; s'; s - s'; s * s']
  Mat pre;       // len x k, before ReLU
  HiddenSeq out;
};

Enhanced enhance(const HiddenSeq& s, const Mat& s_attn, const CrossAttnParams& params);
// Accumulates into ds, ds_attn.
void enhance_backward(const HiddenSeq& s, const Mat& s_attn, const Enhanced& fwd,
                      const Mat& dout, Mat& ds, Mat& ds_attn, CrossAttnParams& params);

// ---- per-token layer norm -------------------------------------------------

struct Normalized {
  HiddenSeq out;
  std::vector<LayerNormResult> rows;
};

Normalized normalize_seq(const HiddenSeq& s, const CrossAttnParams& params);
Mat normalize_seq_backward(const Normalized& fwd, const Mat& dout, CrossAttnParams& params);

// ---- pooling and aggregation ---------------------------------------------

struct Pooled {
  Vec a;  // [mean; max], 2k
  MaxOverRows max;
  std::size_t rows = 0;
};

Pooled pool(const Mat& s);
Mat pool_backward(const Pooled& fwd, const Vec& da);

struct Aggregated {
  PairRep rep;
  Pooled premise;
  Pooled hypothesis;
};

Aggregated aggregate(const HiddenSeq& sp, const HiddenSeq& sh);
// Gradients w.r.t. both inputs given gradients on z and on z_norm.
std::pair<Mat, Mat> aggregate_backward(const Aggregated& fwd, const Vec& dz,
                                       const Vec& dz_norm);

// ---- full pair forward ----------------------------------------------------

struct PairForward {
  HiddenSeq sp, sh;
  Mat C;
  Alignment al;
  Enhanced ep, eh;
  Normalized np, nh;
  Aggregated agg;

  const PairRep& rep() const { return agg.rep; }
};

PairForward forward_pair(const TokenSeq& xp, const TokenSeq& xh,
                         const EncoderParams& enc, const CrossAttnParams& ca);

// Accumulates gradients for all encoder and cross attention parameters.
// Either of dz / dz_norm may be empty.
void backward_pair(const TokenSeq& xp, const TokenSeq& xh, const PairForward& fwd,
                   const Vec& dz, const Vec& dz_norm, EncoderParams& enc,
                   CrossAttnParams& ca);

// Branch of every ReLU and max-pool in the pass; changes only at kinks.
std::vector<std::int64_t> branch_signature(const PairForward& fwd);

}  // namespace paircl
