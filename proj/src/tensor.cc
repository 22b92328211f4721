// SPDX-License-Identifier: Apache-2.0

#include "paircl/tensor.h"

#include <algorithm>
#include <cmath>
#include <limits>

#include "paircl/errors.h"

namespace paircl {

namespace {

std::string shape_of(std::size_t n) { return "(" + std::to_string(n) + ")"; }

void require_same(const Mat& a, const Mat& b, const char* op) {
  if (!a.same_shape(b)) {
    throw ShapeError(std::string(op) + ": shape mismatch " + a.shape_str() + " vs " +
                     b.shape_str());
  }
}

void require_same(std::size_t a, std::size_t b, const char* op) {
  if (a != b) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_of(a) + " vs " +
                     shape_of(b));
  }
}

template <typename F>
Mat map(const Mat& a, F f) {
  Mat out(a.rows(), a.cols());
  auto src = a.data();
  auto dst = out.data();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = f(src[i]);
  return out;
}

template <typename F>
Vec map(const Vec& a, F f) {
  Vec out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = f(a[i]);
  return out;
}

template <typename F>
Mat zip(const Mat& a, const Mat& b, const char* op, F f) {
  require_same(a, b, op);
  Mat out(a.rows(), a.cols());
  auto x = a.data();
  auto y = b.data();
  auto dst = out.data();
  for (std::size_t i = 0; i < x.size(); ++i) dst[i] = f(x[i], y[i]);
  return out;
}

template <typename F>
Vec zip(const Vec& a, const Vec& b, const char* op, F f) {
  require_same(a.size(), b.size(), op);
  Vec out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = f(a[i], b[i]);
  return out;
}

}  // namespace

Mat::Mat(std::initializer_list<std::initializer_list<double>> rows) {
  rows_ = rows.size();
  cols_ = rows_ ? rows.begin()->size() : 0;
  data_.reserve(rows_ * cols_);
  for (const auto& r : rows) {
    if (r.size() != cols_) throw ShapeError("Mat: ragged initializer list");
    data_.insert(data_.end(), r.begin(), r.end());
  }
}

Mat::Mat(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows_ * cols_) {
    throw ShapeError("Mat: data length " + std::to_string(data_.size()) +
                     " does not match " + shape_str());
  }
}

Mat Mat::identity(std::size_t n) {
  Mat m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Mat Mat::from_row(std::span<const double> row) {
  return Mat(1, row.size(), std::vector<double>(row.begin(), row.end()));
}

std::string Mat::shape_str() const {
  return "(" + std::to_string(rows_) + "x" + std::to_string(cols_) + ")";
}

Vec Mat::col_vec(std::size_t c) const {
  Vec out(rows_);
  for (std::size_t r = 0; r < rows_; ++r) out[r] = (*this)(r, c);
  return out;
}

void Mat::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

void zero_grads(std::span<Param* const> params) {
  for (Param* p : params) p->zero_grad();
}

double dot(std::span<const double> a, std::span<const double> b) {
  require_same(a.size(), b.size(), "dot");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

void axpy(double scale, std::span<const double> a, std::span<double> out) {
  require_same(a.size(), out.size(), "axpy");
  for (std::size_t i = 0; i < a.size(); ++i) out[i] += scale * a[i];
}

Vec softmax(const Vec& v, const std::optional<std::vector<bool>>& mask) {
  if (mask) require_same(v.size(), mask->size(), "softmax");
  auto keep = [&](std::size_t i) { return !mask || (*mask)[i]; };
  double mx = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (keep(i)) mx = std::max(mx, v[i]);
  }
  if (mx == -std::numeric_limits<double>::infinity()) {
    throw DegenerateInputError("softmax: no unmasked entries");
  }
  Vec out(v.size());
  double total = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (keep(i)) {
      out[i] = std::exp(v[i] - mx);
      total += out[i];
    }
  }
  for (double& x : out) x /= total;
  return out;
}

Vec softmax_backward(const Vec& y, const Vec& dy) {
  require_same(y.size(), dy.size(), "softmax_backward");
  const double s = dot(y.span(), dy.span());
  Vec dx(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) dx[i] = y[i] * (dy[i] - s);
  return dx;
}

double log_sum_exp(std::span<const double> v) {
  if (v.empty()) return -std::numeric_limits<double>::infinity();
  const double mx = *std::max_element(v.begin(), v.end());
  double s = 0.0;
  for (double x : v) s += std::exp(x - mx);
  return mx + std::log(s);
}

LayerNormResult layer_norm(std::span<const double> v, std::span<const double> gamma,
                           std::span<const double> beta, double eps) {
  require_same(v.size(), gamma.size(), "layer_norm");
  require_same(v.size(), beta.size(), "layer_norm");
  if (v.empty()) throw DegenerateInputError("layer_norm: empty input");
  const double n = static_cast<double>(v.size());
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= n;
  double var = 0.0;
  for (double x : v) var += (x - mean) * (x - mean);
  var /= n;
  LayerNormResult r;
  r.inv_std = 1.0 / std::sqrt(var + eps);
  r.xhat = Vec(v.size());
  r.y = Vec(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    r.xhat[i] = (v[i] - mean) * r.inv_std;
    r.y[i] = gamma[i] * r.xhat[i] + beta[i];
  }
  return r;
}

Vec layer_norm_backward(const LayerNormResult& fwd, std::span<const double> gamma,
                        std::span<const double> dy, std::span<double> dgamma,
                        std::span<double> dbeta) {
  const std::size_t n = fwd.xhat.size();
  require_same(n, dy.size(), "layer_norm_backward");
  Vec dxhat(n);
  double mean_dxhat = 0.0;
  double mean_dxhat_xhat = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!dgamma.empty()) dgamma[i] += dy[i] * fwd.xhat[i];
    if (!dbeta.empty()) dbeta[i] += dy[i];
    dxhat[i] = dy[i] * gamma[i];
    mean_dxhat += dxhat[i];
    mean_dxhat_xhat += dxhat[i] * fwd.xhat[i];
  }
  mean_dxhat /= static_cast<double>(n);
  mean_dxhat_xhat /= static_cast<double>(n);
  Vec dx(n);
  for (std::size_t i = 0; i < n; ++i) {
    dx[i] = fwd.inv_std * (dxhat[i] - mean_dxhat - fwd.xhat[i] * mean_dxhat_xhat);
  }
  return dx;
}

Mat matmul(const Mat& a, const Mat& b) {
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul: shape mismatch " + a.shape_str() + " vs " + b.shape_str());
  }
  Mat out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto orow = out.row(i);
    for (std::size_t p = 0; p < a.cols(); ++p) {
      const double aip = a(i, p);
      auto brow = b.row(p);
      for (std::size_t j = 0; j < b.cols(); ++j) orow[j] += aip * brow[j];
    }
  }
  return out;
}

Mat matmul_nt(const Mat& a, const Mat& b) {
  if (a.cols() != b.cols()) {
    throw ShapeError("matmul_nt: shape mismatch " + a.shape_str() + " vs " +
                     b.shape_str());
  }
  Mat out(a.rows(), b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < b.rows(); ++j) out(i, j) = dot(a.row(i), b.row(j));
  }
  return out;
}

Mat matmul_tn(const Mat& a, const Mat& b) {
  if (a.rows() != b.rows()) {
    throw ShapeError("matmul_tn: shape mismatch " + a.shape_str() + " vs " +
                     b.shape_str());
  }
  Mat out(a.cols(), b.cols());
  for (std::size_t p = 0; p < a.rows(); ++p) {
    auto brow = b.row(p);
    for (std::size_t i = 0; i < a.cols(); ++i) {
      const double api = a(p, i);
      auto orow = out.row(i);
      for (std::size_t j = 0; j < b.cols(); ++j) orow[j] += api * brow[j];
    }
  }
  return out;
}

Mat transpose(const Mat& a) {
  Mat out(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < a.cols(); ++j) out(j, i) = a(i, j);
  }
  return out;
}

Vec affine(const Mat& w, std::span<const double> x, std::span<const double> b) {
  if (w.cols() != x.size()) {
    throw ShapeError("affine: shape mismatch " + w.shape_str() + " vs " + shape_of(x.size()));
  }
  if (!b.empty()) require_same(w.rows(), b.size(), "affine");
  Vec y(w.rows());
  for (std::size_t i = 0; i < w.rows(); ++i) {
    y[i] = dot(w.row(i), x) + (b.empty() ? 0.0 : b[i]);
  }
  return y;
}

Vec affine_backward(const Mat& w, std::span<const double> x, std::span<const double> dy,
                    Mat& dw, std::span<double> db) {
  require_same(w.rows(), dy.size(), "affine_backward");
  require_same(w, dw, "affine_backward");
  Vec dx(w.cols());
  for (std::size_t i = 0; i < w.rows(); ++i) {
    const double g = dy[i];
    if (g == 0.0) continue;
    axpy(g, w.row(i), dx.span());
    axpy(g, x, dw.row(i));
    if (!db.empty()) db[i] += g;
  }
  return dx;
}

MatmulGrads matmul_backward(const Mat& a, const Mat& b, const Mat& dc) {
  if (dc.rows() != a.rows() || dc.cols() != b.cols()) {
    throw ShapeError("matmul_backward: shape mismatch " + dc.shape_str() + " vs " +
                     Mat(a.rows(), b.cols()).shape_str());
  }
  return {matmul_nt(dc, b), matmul_tn(a, dc)};
}

Mat add(const Mat& a, const Mat& b) {
  return zip(a, b, "add", [](double x, double y) { return x + y; });
}
Mat sub(const Mat& a, const Mat& b) {
  return zip(a, b, "sub", [](double x, double y) { return x - y; });
}
Mat elem_mul(const Mat& a, const Mat& b) {
  return zip(a, b, "elem_mul", [](double x, double y) { return x * y; });
}
Vec add(const Vec& a, const Vec& b) {
  return zip(a, b, "add", [](double x, double y) { return x + y; });
}
Vec sub(const Vec& a, const Vec& b) {
  return zip(a, b, "sub", [](double x, double y) { return x - y; });
}
Vec elem_mul(const Vec& a, const Vec& b) {
  return zip(a, b, "elem_mul", [](double x, double y) { return x * y; });
}

Mat tanh(const Mat& a) {
  return map(a, [](double x) { return std::tanh(x); });
}
Vec tanh(const Vec& a) {
  return map(a, [](double x) { return std::tanh(x); });
}
Mat tanh_backward(const Mat& y, const Mat& dy) {
  return zip(y, dy, "tanh_backward", [](double t, double g) { return g * (1.0 - t * t); });
}
Vec tanh_backward(const Vec& y, const Vec& dy) {
  return zip(y, dy, "tanh_backward", [](double t, double g) { return g * (1.0 - t * t); });
}

Mat relu(const Mat& a) {
  return map(a, [](double x) { return x > 0.0 ? x : 0.0; });
}
Vec relu(const Vec& a) {
  return map(a, [](double x) { return x > 0.0 ? x : 0.0; });
}
Mat relu_backward(const Mat& x, const Mat& dy) {
  return zip(x, dy, "relu_backward", [](double v, double g) { return v > 0.0 ? g : 0.0; });
}
Vec relu_backward(const Vec& x, const Vec& dy) {
  return zip(x, dy, "relu_backward", [](double v, double g) { return v > 0.0 ? g : 0.0; });
}

Mat concat_rows(const Mat& a, const Mat& b) {
  if (a.cols() != b.cols()) {
    throw ShapeError("concat_rows: shape mismatch " + a.shape_str() + " vs " +
                     b.shape_str());
  }
  std::vector<double> data(a.data().begin(), a.data().end());
  data.insert(data.end(), b.data().begin(), b.data().end());
  return Mat(a.rows() + b.rows(), a.cols(), std::move(data));
}

Mat concat_cols(const Mat& a, const Mat& b) {
  if (a.rows() != b.rows()) {
    throw ShapeError("concat_cols: shape mismatch " + a.shape_str() + " vs " +
                     b.shape_str());
  }
  Mat out(a.rows(), a.cols() + b.cols());
  for (std::size_t r = 0; r < a.rows(); ++r) {
    auto dst = out.row(r);
    std::copy(a.row(r).begin(), a.row(r).end(), dst.begin());
    std::copy(b.row(r).begin(), b.row(r).end(), dst.begin() + a.cols());
  }
  return out;
}

std::pair<Mat, Mat> split_rows(const Mat& m, std::size_t first_rows) {
  if (first_rows > m.rows()) {
    throw ShapeError("split_rows: " + std::to_string(first_rows) + " rows requested from " +
                     m.shape_str());
  }
  auto d = m.data();
  const auto cut = d.begin() + static_cast<std::ptrdiff_t>(first_rows * m.cols());
  return {Mat(first_rows, m.cols(), std::vector<double>(d.begin(), cut)),
          Mat(m.rows() - first_rows, m.cols(), std::vector<double>(cut, d.end()))};
}

std::pair<Mat, Mat> split_cols(const Mat& m, std::size_t first_cols) {
  if (first_cols > m.cols()) {
    throw ShapeError("split_cols: " + std::to_string(first_cols) + " cols requested from " +
                     m.shape_str());
  }
  Mat a(m.rows(), first_cols);
  Mat b(m.rows(), m.cols() - first_cols);
  for (std::size_t r = 0; r < m.rows(); ++r) {
    auto src = m.row(r);
    std::copy(src.begin(), src.begin() + static_cast<std::ptrdiff_t>(first_cols),
              a.row(r).begin());
    std::copy(src.begin() + static_cast<std::ptrdiff_t>(first_cols), src.end(),
              b.row(r).begin());
  }
  return {std::move(a), std::move(b)};
}

Vec concat(std::initializer_list<std::span<const double>> parts) {
  std::vector<double> out;
  for (auto p : parts) out.insert(out.end(), p.begin(), p.end());
  return Vec(std::move(out));
}

Vec mean_over_rows(const Mat& m) {
  if (m.rows() == 0) throw DegenerateInputError("mean_over_rows: no rows");
  Vec out(m.cols());
  for (std::size_t r = 0; r < m.rows(); ++r) axpy(1.0, m.row(r), out.span());
  for (double& x : out) x /= static_cast<double>(m.rows());
  return out;
}

Mat mean_over_rows_backward(const Vec& dy, std::size_t rows) {
  Mat dm(rows, dy.size());
  const double scale = 1.0 / static_cast<double>(rows);
  for (std::size_t r = 0; r < rows; ++r) axpy(scale, dy.span(), dm.row(r));
  return dm;
}

MaxOverRows max_over_rows(const Mat& m) {
  if (m.rows() == 0) throw DegenerateInputError("max_over_rows: no rows");
  MaxOverRows out{m.row_vec(0), std::vector<std::size_t>(m.cols(), 0)};
  for (std::size_t r = 1; r < m.rows(); ++r) {
    for (std::size_t c = 0; c < m.cols(); ++c) {
      if (m(r, c) > out.values[c]) {
        out.values[c] = m(r, c);
        out.argmax[c] = r;
      }
    }
  }
  return out;
}

Mat max_over_rows_backward(const MaxOverRows& fwd, const Vec& dy, std::size_t rows) {
  require_same(fwd.argmax.size(), dy.size(), "max_over_rows_backward");
  Mat dm(rows, dy.size());
  for (std::size_t c = 0; c < dy.size(); ++c) dm(fwd.argmax[c], c) += dy[c];
  return dm;
}

}  // namespace paircl
