// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <limits>

#include "paircl/errors.h"
#include "paircl/gradcheck.h"
#include "paircl/rng.h"
#include "paircl/tensor.h"

using namespace paircl;

namespace {

Vec random_vec(Rng& rng, std::size_t n, double scale = 1.0) {
  Vec v(n);
  for (double& x : v) x = rng.uniform(-scale, scale);
  return v;
}

Mat as_mat(const Vec& v, std::size_t rows, std::size_t cols, std::size_t offset = 0) {
  return Mat(rows, cols,
             std::vector<double>(v.begin() + static_cast<std::ptrdiff_t>(offset),
                                 v.begin() + static_cast<std::ptrdiff_t>(offset + rows * cols)));
}

Vec as_vec(const Mat& m) { return Vec(m.data()); }

std::vector<std::int64_t> sign_pattern(std::span<const double> x) {
  std::vector<std::int64_t> s;
  for (double v : x) s.push_back(v > 0.0);
  return s;
}

constexpr int kPoints = 100;
constexpr double kOpTol = 1e-5;

}  // namespace

TEST_CASE("softmax examples") {
  const Vec u = softmax(Vec{0, 0, 0});
  for (double x : u) CHECK(x == doctest::Approx(1.0 / 3).epsilon(1e-15));

  const Vec two = softmax(Vec{std::log(2.0), 0.0});
  CHECK(two[0] == doctest::Approx(2.0 / 3).epsilon(1e-14));
  CHECK(two[1] == doctest::Approx(1.0 / 3).epsilon(1e-14));

  const Vec masked = softmax(Vec{5, 5, 5}, std::vector<bool>{true, true, false});
  CHECK(masked[0] == 0.5);
  CHECK(masked[1] == 0.5);
  CHECK(masked[2] == 0.0);

  CHECK_THROWS_AS(softmax(Vec{1, 2}, std::vector<bool>{false, false}), DegenerateInputError);
}

TEST_CASE("softmax sums to one under masking and large magnitudes") {
  Rng rng(101);
  for (int t = 0; t < kPoints; ++t) {
    const std::size_t n = 1 + rng.below(12);
    const Vec v = random_vec(rng, n, 1e4);
    std::vector<bool> mask(n);
    for (std::size_t i = 0; i < n; ++i) mask[i] = rng.coin(0.7);
    mask[rng.below(n)] = true;
    const Vec y = softmax(v, mask);
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      CHECK(std::isfinite(y[i]));
      if (!mask[i]) CHECK(y[i] == 0.0);
      sum += y[i];
    }
    CHECK(std::abs(sum - 1.0) < 1e-12);
  }
}

TEST_CASE("layer_norm examples") {
  const Vec ones{1, 1, 1};
  const Vec zeros{0, 0, 0};
  const auto c = layer_norm(Vec{4.2, 4.2, 4.2}.span(), ones.span(), zeros.span());
  for (double x : c.y) CHECK(x == 0.0);

  const Vec one2{1, 1}, zero2{0, 0};
  const auto s = layer_norm(Vec{1, -1}.span(), one2.span(), zero2.span(), 1e-14);
  CHECK(s.y[0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(s.y[1] == doctest::Approx(-1.0).epsilon(1e-12));

  // (v - 3) / 1 * 3 + 1
  const Vec g{3, 3}, b{1, 1};
  const auto h = layer_norm(Vec{2, 4}.span(), g.span(), b.span(), 1e-14);
  CHECK(h.y[0] == doctest::Approx(-2.0).epsilon(1e-12));
  CHECK(h.y[1] == doctest::Approx(4.0).epsilon(1e-12));
}

TEST_CASE("layer_norm output statistics") {
  Rng rng(5);
  for (int t = 0; t < kPoints; ++t) {
    const std::size_t n = 2 + rng.below(15);
    const Vec v = random_vec(rng, n, 3.0);
    const Vec one(n, 1.0), zero(n, 0.0);
    const auto r = layer_norm(v.span(), one.span(), zero.span());
    double mean = 0.0, var = 0.0;
    for (double x : r.y) mean += x;
    mean /= double(n);
    for (double x : r.y) var += (x - mean) * (x - mean);
    var /= double(n);
    double raw_var = 0.0, raw_mean = 0.0;
    for (double x : v) raw_mean += x;
    raw_mean /= double(n);
    for (double x : v) raw_var += (x - raw_mean) * (x - raw_mean);
    raw_var /= double(n);
    CHECK(std::abs(mean) < 1e-12);
    // Exact variance is var / (var + eps).
    CHECK(var == doctest::Approx(raw_var / (raw_var + kLayerNormEps)).epsilon(1e-10));
  }
}

TEST_CASE("elementwise and matrix examples") {
  CHECK(elem_mul(Vec{1, 2}, Vec{3, 4}) == Vec{3, 8});
  CHECK(relu(Vec{-1, 0, 2}) == Vec{0, 0, 2});
  const Mat a{{1, 0, 0}, {0, 1, 0}};
  const Mat x{{1}, {2}, {3}};
  CHECK(matmul(a, x) == Mat{{1}, {2}});
}

TEST_CASE("shape errors name both shapes") {
  try {
    matmul(Mat(2, 3), Mat(2, 3));
    FAIL("expected ShapeError");
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("(2x3)") != std::string::npos);
    CHECK(msg.find("vs") != std::string::npos);
  }
  CHECK_THROWS_AS(add(Mat(1, 2), Mat(2, 1)), ShapeError);
  CHECK_THROWS_AS(concat_rows(Mat(1, 2), Mat(1, 3)), ShapeError);
  CHECK_THROWS_AS(elem_mul(Vec{1}, Vec{1, 2}), ShapeError);
}

TEST_CASE("max_over_rows ties route to the lowest row") {
  const Mat m{{1, 5}, {3, 5}, {3, 2}};
  const auto r = max_over_rows(m);
  CHECK(r.values == Vec{3, 5});
  CHECK(r.argmax == std::vector<std::size_t>{1, 0});
  const Mat g = max_over_rows_backward(r, Vec{1, 1}, 3);
  CHECK(g == Mat{{0, 1}, {1, 0}, {0, 0}});
}

TEST_CASE("concat and split are mutually inverse") {
  Rng rng(9);
  for (int t = 0; t < kPoints; ++t) {
    const std::size_t r1 = 1 + rng.below(4), r2 = rng.below(4), c = 1 + rng.below(5);
    const Mat a = as_mat(random_vec(rng, r1 * c), r1, c);
    const Mat b = as_mat(random_vec(rng, r2 * c), r2, c);
    const auto [a2, b2] = split_rows(concat_rows(a, b), r1);
    CHECK(a2 == a);
    CHECK(b2 == b);
    const Mat at = transpose(a), bt = r2 ? transpose(b) : Mat(c, 0);
    const auto [a3, b3] = split_cols(concat_cols(at, bt), r1);
    CHECK(a3 == at);
    CHECK(b3 == bt);
  }
}

TEST_CASE("ops are deterministic") {
  Rng rng(77);
  const Mat a = as_mat(random_vec(rng, 12), 3, 4);
  const Mat b = as_mat(random_vec(rng, 20), 4, 5);
  CHECK(matmul(a, b) == matmul(a, b));
  const Vec v = random_vec(rng, 9, 50.0);
  CHECK(softmax(v) == softmax(v));
  const Vec one(9, 1.0), zero(9, 0.0);
  CHECK(layer_norm(v.span(), one.span(), zero.span()).y ==
        layer_norm(v.span(), one.span(), zero.span()).y);
}

// ---- gradient checks ------------------------------------------------------

TEST_CASE("backward_check examples") {
  const auto tanh_report = backward_check([](const Vec& x) { return tanh(x); },
                                          [](const Vec& x, const Vec& dy) {
                                            return tanh_backward(tanh(x), dy);
                                          },
                                          Vec{0.3}, 1e-6);
  CHECK(tanh_report.passed);

  const auto sm_report = backward_check([](const Vec& x) { return softmax(x); },
                                        [](const Vec& x, const Vec& dy) {
                                          return softmax_backward(softmax(x), dy);
                                        },
                                        Vec{0.1, -0.2, 0.5}, 1e-6);
  CHECK(sm_report.passed);

  Rng rng(7);
  const Vec v = random_vec(rng, 8);
  const Vec gamma = random_vec(rng, 8), beta = random_vec(rng, 8);
  const auto ln_report = backward_check(
      [&](const Vec& x) { return layer_norm(x.span(), gamma.span(), beta.span()).y; },
      [&](const Vec& x, const Vec& dy) {
        Vec dg(8), db(8);
        return layer_norm_backward(layer_norm(x.span(), gamma.span(), beta.span()),
                                   gamma.span(), dy.span(), dg.span(), db.span());
      },
      v, 1e-5);
  CHECK(ln_report.passed);
}

TEST_CASE("backward_check flags kinks") {
  auto relu_op = [](const Vec& x) { return relu(x); };
  auto relu_vjp = [](const Vec& x, const Vec& dy) { return relu_backward(x, dy); };
  const auto r = backward_check(relu_op, relu_vjp, Vec{1e-7, 0.5}, 1e-5, 0,
                                [&](std::span<const double> x) { return sign_pattern(x); });
  CHECK(r.at_kink);
  CHECK_FALSE(r.passed);
  CHECK(!r.advice.empty());
}

TEST_CASE("every op matches finite differences at random points") {
  Rng rng(2024);
  auto check = [](const GradCheckReport& r) {
    CHECK(r.passed);
    CHECK(r.max_rel_error < kOpTol);
  };
  for (int t = 0; t < kPoints; ++t) {
    const auto seed = rng.next();
    const std::size_t m = 1 + rng.below(4), k = 1 + rng.below(4), n = 1 + rng.below(4);

    // matmul w.r.t. both operands, packed [a; b].
    const Vec ab = random_vec(rng, m * k + k * n);
    check(backward_check(
        [&](const Vec& x) { return as_vec(matmul(as_mat(x, m, k), as_mat(x, k, n, m * k))); },
        [&](const Vec& x, const Vec& dy) {
          const auto g = matmul_backward(as_mat(x, m, k), as_mat(x, k, n, m * k),
                                         as_mat(dy, m, n));
          return concat({g.da.data(), g.db.data()});
        },
        ab, kOpTol, seed));

    // affine w.r.t. [W; x; b]
    const Vec wxb = random_vec(rng, m * k + k + m);
    check(backward_check(
        [&](const Vec& p) {
          return affine(as_mat(p, m, k), p.span().subspan(m * k, k),
                        p.span().subspan(m * k + k, m));
        },
        [&](const Vec& p, const Vec& dy) {
          Mat dw(m, k);
          Vec db(m);
          const Vec dx = affine_backward(as_mat(p, m, k), p.span().subspan(m * k, k),
                                         dy.span(), dw, db.span());
          return concat({dw.data(), dx.span(), db.span()});
        },
        wxb, kOpTol, seed));

    // elementwise binary ops, packed [a; b]
    const std::size_t len = m * k;
    const Vec pair = random_vec(rng, 2 * len);
    auto left = [&](const Vec& x) { return Vec(x.span().subspan(0, len)); };
    auto right = [&](const Vec& x) { return Vec(x.span().subspan(len, len)); };
    check(backward_check([&](const Vec& x) { return elem_mul(left(x), right(x)); },
                         [&](const Vec& x, const Vec& dy) {
                           return concat({elem_mul(dy, right(x)).span(),
                                          elem_mul(dy, left(x)).span()});
                         },
                         pair, kOpTol, seed));
    check(backward_check([&](const Vec& x) { return add(left(x), right(x)); },
                         [&](const Vec&, const Vec& dy) { return concat({dy.span(), dy.span()}); },
                         pair, kOpTol, seed));
    check(backward_check([&](const Vec& x) { return sub(left(x), right(x)); },
                         [&](const Vec&, const Vec& dy) {
                           Vec neg = dy;
                           for (double& g : neg) g = -g;
                           return concat({dy.span(), neg.span()});
                         },
                         pair, kOpTol, seed));

    const Vec single = random_vec(rng, len, 2.0);
    check(backward_check([](const Vec& x) { return tanh(x); },
                         [](const Vec& x, const Vec& dy) { return tanh_backward(tanh(x), dy); },
                         single, kOpTol, seed));
    check(backward_check([](const Vec& x) { return relu(x); },
                         [](const Vec& x, const Vec& dy) { return relu_backward(x, dy); },
                         single, kOpTol, seed,
                         [](std::span<const double> x) { return sign_pattern(x); }));

    std::vector<bool> mask(len);
    for (std::size_t i = 0; i < len; ++i) mask[i] = rng.coin(0.75);
    mask[0] = true;
    check(backward_check([&](const Vec& x) { return softmax(x, mask); },
                         [&](const Vec& x, const Vec& dy) {
                           return softmax_backward(softmax(x, mask), dy);
                         },
                         single, kOpTol, seed));

    // layer norm w.r.t. [v; gamma; beta]
    const Vec ln_in = random_vec(rng, 3 * len);
    auto part = [&](const Vec& x, std::size_t i) { return x.span().subspan(i * len, len); };
    check(backward_check(
        [&](const Vec& x) { return layer_norm(part(x, 0), part(x, 1), part(x, 2)).y; },
        [&](const Vec& x, const Vec& dy) {
          Vec dg(len), db(len);
          const Vec dx = layer_norm_backward(layer_norm(part(x, 0), part(x, 1), part(x, 2)),
                                             part(x, 1), dy.span(), dg.span(), db.span());
          return concat({dx.span(), dg.span(), db.span()});
        },
        ln_in, kOpTol, seed));

    check(backward_check([&](const Vec& x) { return mean_over_rows(as_mat(x, m, k)); },
                         [&](const Vec&, const Vec& dy) { return as_vec(mean_over_rows_backward(dy, m)); },
                         single, kOpTol, seed));
    check(backward_check(
        [&](const Vec& x) { return max_over_rows(as_mat(x, m, k)).values; },
        [&](const Vec& x, const Vec& dy) {
          return as_vec(max_over_rows_backward(max_over_rows(as_mat(x, m, k)), dy, m));
        },
        single, kOpTol, seed, [&](std::span<const double> x) {
          const auto r = max_over_rows(as_mat(Vec(x), m, k));
          return std::vector<std::int64_t>(r.argmax.begin(), r.argmax.end());
        }));

    // concat_rows w.r.t. both inputs is the identity on the packed vector.
    check(backward_check(
        [&](const Vec& x) {
          return as_vec(concat_rows(as_mat(x, m, k), as_mat(x, m, k, len)));
        },
        [](const Vec&, const Vec& dy) { return dy; }, pair, kOpTol, seed));
  }
}
