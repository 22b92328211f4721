// SPDX-License-Identifier: Apache-2.0
//
// Dense 64-bit matrices and vectors with forward ops and their analytic
// backward rules. There is no autodiff graph: every composite layer calls the
// `*_backward` functions here in reverse order of its forward pass.

#pragma once

#include <cstddef>
#include <initializer_list>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace paircl {

class Vec {
 public:
  Vec() = default;
  explicit Vec(std::size_t n, double fill = 0.0) : data_(n, fill) {}
  Vec(std::initializer_list<double> values) : data_(values) {}
  explicit Vec(std::vector<double> values) : data_(std::move(values)) {}
  explicit Vec(std::span<const double> values)
      : data_(values.begin(), values.end()) {}

  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  std::span<double> span() { return data_; }
  std::span<const double> span() const { return data_; }
  const std::vector<double>& values() const { return data_; }
  auto begin() { return data_.begin(); }
  auto end() { return data_.end(); }
  auto begin() const { return data_.begin(); }
  auto end() const { return data_.end(); }

  bool operator==(const Vec&) const = default;

 private:
  std::vector<double> data_;
};

// Row-major rows x cols matrix.
class Mat {
 public:
  Mat() = default;
  Mat(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Mat(std::initializer_list<std::initializer_list<double>> rows);
  Mat(std::size_t rows, std::size_t cols, std::vector<double> data);

  static Mat identity(std::size_t n);
  static Mat from_row(std::span<const double> row);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  std::string shape_str() const;

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const {
    return data_[r * cols_ + c];
  }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const {
    return {data_.data() + r * cols_, cols_};
  }
  Vec row_vec(std::size_t r) const { return Vec(row(r)); }
  Vec col_vec(std::size_t c) const;

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }

  void fill(double v);
  bool same_shape(const Mat& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }
  bool operator==(const Mat&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// Trainable tensor. Vector-valued parameters are stored as 1 x n.
struct Param {
  std::string name;
  Mat value;
  Mat grad;
  // Rows pinned at their current value (e.g. the PAD embedding).
  std::vector<std::size_t> frozen_rows;

  Param() = default;
  Param(std::string n, Mat v) : name(std::move(n)), value(std::move(v)) {
    grad = Mat(value.rows(), value.cols());
  }
  void zero_grad() { grad.fill(0.0); }
  std::span<const double> vec() const { return value.data(); }
  std::span<double> grad_vec() { return grad.data(); }
};

void zero_grads(std::span<Param* const> params);

// ---- vector ops -----------------------------------------------------------

double dot(std::span<const double> a, std::span<const double> b);
double norm2(std::span<const double> a);
// out += scale * a
void axpy(double scale, std::span<const double> a, std::span<double> out);

// Numerically stable (max-subtracted) softmax. Masked-out entries are exactly
// zero. Throws DegenerateInputError if the mask selects nothing.
Vec softmax(const Vec& v, const std::optional<std::vector<bool>>& mask = std::nullopt);
// Given y = softmax(x) and dL/dy, returns dL/dx.
Vec softmax_backward(const Vec& y, const Vec& dy);

double log_sum_exp(std::span<const double> v);

inline constexpr double kLayerNormEps = 1e-5;

struct LayerNormResult {
  Vec y;
  Vec xhat;
  double inv_std = 0.0;
};

// Population-variance layer norm: gamma * (v - mean) / sqrt(var + eps) + beta.
LayerNormResult layer_norm(std::span<const double> v, std::span<const double> gamma,
                           std::span<const double> beta, double eps = kLayerNormEps);
// Accumulates into dgamma/dbeta; returns dL/dv.
Vec layer_norm_backward(const LayerNormResult& fwd, std::span<const double> gamma,
                        std::span<const double> dy, std::span<double> dgamma,
                        std::span<double> dbeta);

// ---- matrix ops -----------------------------------------------------------

Mat matmul(const Mat& a, const Mat& b);
// a * b^T without materializing the transpose.
Mat matmul_nt(const Mat& a, const Mat& b);
// a^T * b
Mat matmul_tn(const Mat& a, const Mat& b);
Mat transpose(const Mat& a);
// y = W x + b (b may be empty).
Vec affine(const Mat& w, std::span<const double> x, std::span<const double> b = {});
// dx = W^T dy; dW += dy x^T; db += dy (when db non-empty).
Vec affine_backward(const Mat& w, std::span<const double> x, std::span<const double> dy,
                    Mat& dw, std::span<double> db = {});

struct MatmulGrads {
  Mat da;
  Mat db;
};
MatmulGrads matmul_backward(const Mat& a, const Mat& b, const Mat& dc);

Mat add(const Mat& a, const Mat& b);
Mat sub(const Mat& a, const Mat& b);
Mat elem_mul(const Mat& a, const Mat& b);
Vec add(const Vec& a, const Vec& b);
Vec sub(const Vec& a, const Vec& b);
Vec elem_mul(const Vec& a, const Vec& b);

Mat tanh(const Mat& a);
Vec tanh(const Vec& a);
// Given y = tanh(x) and dy.
Mat tanh_backward(const Mat& y, const Mat& dy);
Vec tanh_backward(const Vec& y, const Vec& dy);

Mat relu(const Mat& a);
Vec relu(const Vec& a);
// Given the pre-activation x and dy. The gradient at exactly 0 is 0.
Mat relu_backward(const Mat& x, const Mat& dy);
Vec relu_backward(const Vec& x, const Vec& dy);

// Stack rows of a on top of rows of b.
Mat concat_rows(const Mat& a, const Mat& b);
// Place columns of b to the right of columns of a.
Mat concat_cols(const Mat& a, const Mat& b);
std::pair<Mat, Mat> split_rows(const Mat& m, std::size_t first_rows);
std::pair<Mat, Mat> split_cols(const Mat& m, std::size_t first_cols);
Vec concat(std::initializer_list<std::span<const double>> parts);

Vec mean_over_rows(const Mat& m);
Mat mean_over_rows_backward(const Vec& dy, std::size_t rows);

struct MaxOverRows {
  Vec values;
  // Per column, the lowest row index attaining the maximum.
  std::vector<std::size_t> argmax;
};
MaxOverRows max_over_rows(const Mat& m);
Mat max_over_rows_backward(const MaxOverRows& fwd, const Vec& dy, std::size_t rows);

}  // namespace paircl
