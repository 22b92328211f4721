// SPDX-License-Identifier: Apache-2.0

#include "paircl/crossattn.h"

#include <cmath>

#include "paircl/errors.h"
#include "paircl/rng.h"

namespace paircl {

namespace {

Mat uniform_mat(Rng& rng, std::size_t rows, std::size_t cols, double bound) {
  Mat m(rows, cols);
  for (double& x : m.data()) x = rng.uniform(-bound, bound);
  return m;
}

void require_rows(const Mat& m, std::size_t rows, std::size_t cols, const char* what) {
  if (m.rows() != rows || m.cols() != cols) {
    throw ShapeError(std::string(what) + ": shape mismatch " + m.shape_str() + " vs " +
                     Mat(rows, cols).shape_str());
  }
}

}  // namespace

CrossAttnParams init_crossattn(std::size_t k, std::size_t d, std::uint64_t seed) {
  if (k < 1 || d < 1) throw ConfigError("init_crossattn: k and d must be >= 1");
  Rng rng(seed);
  CrossAttnParams p;
  p.W = Param("crossattn.W", uniform_mat(rng, d, k, 1.0 / std::sqrt(double(k))));
  p.P = Param("crossattn.P", uniform_mat(rng, 1, d, 1.0 / std::sqrt(double(d))));
  p.W_enh = Param("crossattn.W_enh", uniform_mat(rng, k, 4 * k, 1.0 / std::sqrt(4.0 * k)));
  p.b_enh = Param("crossattn.b_enh", Mat(1, k));
  p.ln_gamma = Param("crossattn.ln_gamma", Mat(1, k, 1.0));
  p.ln_beta = Param("crossattn.ln_beta", Mat(1, k));
  return p;
}

PairRep make_pair_rep(Vec z) {
  PairRep rep;
  rep.norm = norm2(z.span());
  rep.z_norm = Vec(z.size());
  if (rep.norm > 0.0) {
    for (std::size_t i = 0; i < z.size(); ++i) rep.z_norm[i] = z[i] / rep.norm;
  }
  rep.z = std::move(z);
  return rep;
}

Vec normalize_backward(const PairRep& rep, const Vec& dz_norm) {
  Vec dz(rep.z.size());
  if (rep.zero_norm() || dz_norm.empty()) return dz;
  const double proj = dot(rep.z_norm.span(), dz_norm.span());
  for (std::size_t i = 0; i < dz.size(); ++i) {
    dz[i] = (dz_norm[i] - rep.z_norm[i] * proj) / rep.norm;
  }
  return dz;
}

Mat coattention(const HiddenSeq& sp, const HiddenSeq& sh, const CrossAttnParams& params) {
  if (sp.len() == 0 || sh.len() == 0) {
    throw DegenerateInputError("coattention: empty sequence (m=" + std::to_string(sp.len()) +
                               ", n=" + std::to_string(sh.len()) + ")");
  }
  const std::size_t k = params.k();
  if (sp.states.cols() != k || sh.states.cols() != k) {
    throw ShapeError("coattention: hidden width " + sp.states.shape_str() + " / " +
                     sh.states.shape_str() + " vs W " + params.W.value.shape_str());
  }
  Mat C(sp.len(), sh.len());
  Vec q(k);
  for (std::size_t i = 0; i < sp.len(); ++i) {
    auto a = sp.states.row(i);
    for (std::size_t j = 0; j < sh.len(); ++j) {
      auto b = sh.states.row(j);
      for (std::size_t c = 0; c < k; ++c) q[c] = a[c] * b[c];
      const Vec t = tanh(affine(params.W.value, q.span()));
      C(i, j) = dot(params.P.vec(), t.span());
    }
  }
  return C;
}

void coattention_backward(const HiddenSeq& sp, const HiddenSeq& sh, const Mat& dC,
                          Mat& dsp, Mat& dsh, CrossAttnParams& params) {
  require_rows(dC, sp.len(), sh.len(), "coattention_backward");
  const std::size_t k = params.k();
  const std::size_t d = params.d();
  auto P = params.P.vec();
  auto dP = params.P.grad_vec();
  Vec q(k);
  Vec dr(d);
  for (std::size_t i = 0; i < sp.len(); ++i) {
    auto a = sp.states.row(i);
    for (std::size_t j = 0; j < sh.len(); ++j) {
      const double g = dC(i, j);
      if (g == 0.0) continue;
      auto b = sh.states.row(j);
      for (std::size_t c = 0; c < k; ++c) q[c] = a[c] * b[c];
      const Vec t = tanh(affine(params.W.value, q.span()));
      for (std::size_t r = 0; r < d; ++r) {
        dP[r] += g * t[r];
        dr[r] = g * P[r] * (1.0 - t[r] * t[r]);
      }
      const Vec dq = affine_backward(params.W.value, q.span(), dr.span(), params.W.grad);
      auto dai = dsp.row(i);
      auto dbj = dsh.row(j);
      for (std::size_t c = 0; c < k; ++c) {
        dai[c] += dq[c] * b[c];
        dbj[c] += dq[c] * a[c];
      }
    }
  }
}

Alignment align(const Mat& C, const HiddenSeq& sp, const HiddenSeq& sh) {
  require_rows(C, sp.len(), sh.len(), "align");
  const std::size_t m = sp.len();
  const std::size_t n = sh.len();
  Alignment al;
  al.premise_weights = Mat(m, n);
  al.hypothesis_weights = Mat(m, n);
  for (std::size_t i = 0; i < m; ++i) {
    const Vec w = softmax(C.row_vec(i));
    std::copy(w.begin(), w.end(), al.premise_weights.row(i).begin());
  }
  for (std::size_t j = 0; j < n; ++j) {
    const Vec w = softmax(C.col_vec(j));
    for (std::size_t i = 0; i < m; ++i) al.hypothesis_weights(i, j) = w[i];
  }
  al.premise_aligned = matmul(al.premise_weights, sh.states);
  al.hypothesis_aligned = matmul_tn(al.hypothesis_weights, sp.states);
  return al;
}

void align_backward(const Alignment& al, const HiddenSeq& sp, const HiddenSeq& sh,
                    const Mat& d_premise_aligned, const Mat& d_hypothesis_aligned, Mat& dC,
                    Mat& dsp, Mat& dsh) {
  const std::size_t m = sp.len();
  const std::size_t n = sh.len();
  const Mat dWp = matmul_nt(d_premise_aligned, sh.states);
  const Mat dWh = matmul_nt(sp.states, d_hypothesis_aligned);
  axpy(1.0, matmul_tn(al.premise_weights, d_premise_aligned).data(), dsh.data());
  axpy(1.0, matmul(al.hypothesis_weights, d_hypothesis_aligned).data(), dsp.data());
  for (std::size_t i = 0; i < m; ++i) {
    const Vec g = softmax_backward(al.premise_weights.row_vec(i), dWp.row_vec(i));
    axpy(1.0, g.span(), dC.row(i));
  }
  for (std::size_t j = 0; j < n; ++j) {
    const Vec g = softmax_backward(al.hypothesis_weights.col_vec(j), dWh.col_vec(j));
    for (std::size_t i = 0; i < m; ++i) dC(i, j) += g[i];
  }
}

Enhanced enhance(const HiddenSeq& s, const Mat& s_attn, const CrossAttnParams& params) {
  const std::size_t k = params.k();
  require_rows(s_attn, s.len(), k, "enhance");
  if (s.states.cols() != k) {
    throw ShapeError("enhance: hidden width " + s.states.shape_str() + " vs W_enh " +
                     params.W_enh.value.shape_str());
  }
  Enhanced e;
  e.features = Mat(s.len(), 4 * k);
  e.pre = Mat(s.len(), k);
  e.out.states = Mat(s.len(), k);
  for (std::size_t i = 0; i < s.len(); ++i) {
    auto x = s.states.row(i);
    auto y = s_attn.row(i);
    auto f = e.features.row(i);
    for (std::size_t c = 0; c < k; ++c) {
      f[c] = x[c];
      f[k + c] = y[c];
      f[2 * k + c] = x[c] - y[c];
      f[3 * k + c] = x[c] * y[c];
    }
    const Vec pre = affine(params.W_enh.value, f, params.b_enh.vec());
    std::copy(pre.begin(), pre.end(), e.pre.row(i).begin());
    for (std::size_t c = 0; c < k; ++c) e.out.states(i, c) = pre[c] > 0.0 ? pre[c] : 0.0;
  }
  return e;
}

void enhance_backward(const HiddenSeq& s, const Mat& s_attn, const Enhanced& fwd,
                      const Mat& dout, Mat& ds, Mat& ds_attn, CrossAttnParams& params) {
  const std::size_t k = params.k();
  require_rows(dout, s.len(), k, "enhance_backward");
  for (std::size_t i = 0; i < s.len(); ++i) {
    const Vec dpre = relu_backward(fwd.pre.row_vec(i), dout.row_vec(i));
    const Vec df = affine_backward(params.W_enh.value, fwd.features.row(i), dpre.span(),
                                   params.W_enh.grad, params.b_enh.grad_vec());
    auto x = s.states.row(i);
    auto y = s_attn.row(i);
    auto dx = ds.row(i);
    auto dy = ds_attn.row(i);
    for (std::size_t c = 0; c < k; ++c) {
      dx[c] += df[c] + df[2 * k + c] + df[3 * k + c] * y[c];
      dy[c] += df[k + c] - df[2 * k + c] + df[3 * k + c] * x[c];
    }
  }
}

Normalized normalize_seq(const HiddenSeq& s, const CrossAttnParams& params) {
  Normalized out;
  out.out.states = Mat(s.len(), s.states.cols());
  out.rows.reserve(s.len());
  for (std::size_t i = 0; i < s.len(); ++i) {
    out.rows.push_back(layer_norm(s.states.row(i), params.ln_gamma.vec(), params.ln_beta.vec()));
    const Vec& y = out.rows.back().y;
    std::copy(y.begin(), y.end(), out.out.states.row(i).begin());
  }
  return out;
}

Mat normalize_seq_backward(const Normalized& fwd, const Mat& dout, CrossAttnParams& params) {
  require_rows(dout, fwd.out.len(), fwd.out.states.cols(), "normalize_seq_backward");
  Mat dx(dout.rows(), dout.cols());
  for (std::size_t i = 0; i < fwd.rows.size(); ++i) {
    const Vec g = layer_norm_backward(fwd.rows[i], params.ln_gamma.vec(), dout.row(i),
                                      params.ln_gamma.grad_vec(), params.ln_beta.grad_vec());
    std::copy(g.begin(), g.end(), dx.row(i).begin());
  }
  return dx;
}

Pooled pool(const Mat& s) {
  if (s.rows() == 0) throw DegenerateInputError("pool: empty sequence");
  Pooled p;
  p.rows = s.rows();
  p.max = max_over_rows(s);
  const Vec mean = mean_over_rows(s);
  p.a = concat({mean.span(), p.max.values.span()});
  return p;
}

Mat pool_backward(const Pooled& fwd, const Vec& da) {
  const std::size_t k = fwd.max.values.size();
  if (da.size() != 2 * k) {
    throw ShapeError("pool_backward: gradient length " + std::to_string(da.size()) +
                     " vs pooled " + std::to_string(2 * k));
  }
  const Vec dmean(std::span<const double>(da.span().subspan(0, k)));
  const Vec dmax(std::span<const double>(da.span().subspan(k, k)));
  return add(mean_over_rows_backward(dmean, fwd.rows),
             max_over_rows_backward(fwd.max, dmax, fwd.rows));
}

Aggregated aggregate(const HiddenSeq& sp, const HiddenSeq& sh) {
  if (sp.len() == 0 || sh.len() == 0) {
    throw DegenerateInputError("aggregate: empty sequence");
  }
  Aggregated agg;
  agg.premise = pool(sp.states);
  agg.hypothesis = pool(sh.states);
  const Vec& ap = agg.premise.a;
  const Vec& ah = agg.hypothesis.a;
  const Vec diff = sub(ap, ah);
  const Vec prod = elem_mul(ap, ah);
  agg.rep = make_pair_rep(concat({ap.span(), ah.span(), diff.span(), prod.span()}));
  return agg;
}

std::pair<Mat, Mat> aggregate_backward(const Aggregated& fwd, const Vec& dz,
                                       const Vec& dz_norm) {
  const Vec& ap = fwd.premise.a;
  const Vec& ah = fwd.hypothesis.a;
  const std::size_t w = ap.size();
  Vec g = normalize_backward(fwd.rep, dz_norm);
  if (!dz.empty()) g = add(g, dz);
  Vec dap(w);
  Vec dah(w);
  for (std::size_t c = 0; c < w; ++c) {
    dap[c] = g[c] + g[2 * w + c] + g[3 * w + c] * ah[c];
    dah[c] = g[w + c] - g[2 * w + c] + g[3 * w + c] * ap[c];
  }
  return {pool_backward(fwd.premise, dap), pool_backward(fwd.hypothesis, dah)};
}

PairForward forward_pair(const TokenSeq& xp, const TokenSeq& xh,
                         const EncoderParams& enc, const CrossAttnParams& ca) {
  PairForward f;
  f.sp = encode(xp, enc);
  f.sh = encode(xh, enc);
  f.C = coattention(f.sp, f.sh, ca);
  f.al = align(f.C, f.sp, f.sh);
  f.ep = enhance(f.sp, f.al.premise_aligned, ca);
  f.eh = enhance(f.sh, f.al.hypothesis_aligned, ca);
  f.np = normalize_seq(f.ep.out, ca);
  f.nh = normalize_seq(f.eh.out, ca);
  f.agg = aggregate(f.np.out, f.nh.out);
  return f;
}

void backward_pair(const TokenSeq& xp, const TokenSeq& xh, const PairForward& f,
                   const Vec& dz, const Vec& dz_norm, EncoderParams& enc,
                   CrossAttnParams& ca) {
  const std::size_t k = ca.k();
  const std::size_t m = f.sp.len();
  const std::size_t n = f.sh.len();
  auto [dnp, dnh] = aggregate_backward(f.agg, dz, dz_norm);
  const Mat dep = normalize_seq_backward(f.np, dnp, ca);
  const Mat deh = normalize_seq_backward(f.nh, dnh, ca);

  Mat dsp(m, k), dsh(n, k);
  Mat dpa(m, k), dha(n, k);
  enhance_backward(f.sp, f.al.premise_aligned, f.ep, dep, dsp, dpa, ca);
  enhance_backward(f.sh, f.al.hypothesis_aligned, f.eh, deh, dsh, dha, ca);

  Mat dC(m, n);
  align_backward(f.al, f.sp, f.sh, dpa, dha, dC, dsp, dsh);
  coattention_backward(f.sp, f.sh, dC, dsp, dsh, ca);

  encode_backward(xp, f.sp, dsp, enc);
  encode_backward(xh, f.sh, dsh, enc);
}

std::vector<std::int64_t> branch_signature(const PairForward& f) {
  std::vector<std::int64_t> sig;
  for (const Mat* pre : {&f.ep.pre, &f.eh.pre}) {
    for (double x : pre->data()) sig.push_back(x > 0.0 ? 1 : 0);
  }
  for (const Pooled* p : {&f.agg.premise, &f.agg.hypothesis}) {
    for (std::size_t idx : p->max.argmax) sig.push_back(static_cast<std::int64_t>(idx));
  }
  return sig;
}

}  // namespace paircl
