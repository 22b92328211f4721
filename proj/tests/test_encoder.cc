// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>

#include "paircl/encoder.h"
#include "paircl/errors.h"
#include "paircl/gradcheck.h"
#include "paircl/rng.h"

using namespace paircl;

TEST_CASE("init_encoder shapes, range, and determinism") {
  const auto a = init_encoder(50, 16, 24, 1);
  CHECK(a.token_table.value.rows() == 50);
  CHECK(a.token_table.value.cols() == 16);
  CHECK(a.pos_table.value.rows() == 24);
  CHECK(a.mix_w.value.rows() == 16);
  CHECK(a.mix_b.value.cols() == 16);
  for (double x : a.token_table.value.row(kPadId)) CHECK(x == 0.0);
  for (double x : a.mix_w.value.data()) CHECK(std::abs(x) <= 0.25);

  const auto b = init_encoder(50, 16, 24, 1);
  CHECK(a.token_table.value == b.token_table.value);
  CHECK(a.mix_w.value == b.mix_w.value);
  const auto c = init_encoder(50, 16, 24, 2);
  CHECK_FALSE(a.token_table.value == c.token_table.value);
}

TEST_CASE("TokenSeq validation") {
  const TokenSeq s({4, 5}, 4);
  CHECK(s.len() == 2);
  CHECK(s.ids() == std::vector<int>{4, 5, 0, 0});
  CHECK_THROWS_AS(TokenSeq({1, 2, 3}, 2), ShapeError);
  CHECK_THROWS_AS(s.validate(5), VocabularyError);
  CHECK_NOTHROW(s.validate(6));
}

TEST_CASE("encode rejects out-of-vocabulary ids") {
  const auto p = init_encoder(10, 4, 8, 3);
  CHECK_THROWS_AS(encode(TokenSeq({3, 10}, 8), p), VocabularyError);
}

TEST_CASE("identity mixing reduces to tanh of the token row") {
  auto p = init_encoder(10, 4, 8, 5);
  p.mix_w.value = Mat::identity(4);
  p.mix_b.value.fill(0.0);
  p.pos_table.value.fill(0.0);
  const TokenSeq seq({3, 7, 2}, 8);
  const HiddenSeq h = encode(seq, p);
  REQUIRE(h.len() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t c = 0; c < 4; ++c) {
      CHECK(h.states(i, c) == std::tanh(p.token_table.value(std::size_t(seq[i]), c)));
    }
  }
}

TEST_CASE("padding never changes the encoding") {
  const auto p = init_encoder(20, 4, 12, 8);
  const HiddenSeq a = encode(TokenSeq({3, 7, 3}, 4), p);
  const HiddenSeq b = encode(TokenSeq({3, 7, 3}, 12), p);
  CHECK(a.states == b.states);
}

TEST_CASE("repeated tokens differ only through the position table") {
  auto p = init_encoder(20, 4, 8, 11);
  const TokenSeq seq({3, 7, 3}, 8);
  HiddenSeq h = encode(seq, p);
  CHECK_FALSE(h.states.row_vec(0) == h.states.row_vec(2));
  for (std::size_t c = 0; c < 4; ++c) p.pos_table.value(2, c) = p.pos_table.value(0, c);
  h = encode(seq, p);
  CHECK(h.states.row_vec(0) == h.states.row_vec(2));
}

TEST_CASE("encoding is independent of batch order") {
  const auto p = init_encoder(30, 4, 8, 13);
  std::vector<TokenSeq> seqs{TokenSeq({4, 5}, 8), TokenSeq({9, 9, 1}, 8), TokenSeq({29}, 8)};
  std::vector<Mat> forward_order, reverse_order;
  for (const auto& s : seqs) forward_order.push_back(encode(s, p).states);
  for (auto it = seqs.rbegin(); it != seqs.rend(); ++it) reverse_order.push_back(encode(*it, p).states);
  for (std::size_t i = 0; i < seqs.size(); ++i) CHECK(forward_order[i] == reverse_order[2 - i]);
}

TEST_CASE("encoder gradients match finite differences; PAD row gets none") {
  Rng rng(17);
  for (int point = 0; point < 20; ++point) {
    EncoderParams p = init_encoder(12, 4, 6, rng.next());
    // PAD (id 0) inside the real span still must not receive gradient.
    std::vector<int> ids{int(rng.between(1, 11)), 0, int(rng.between(1, 11)), int(rng.between(1, 11))};
    const TokenSeq seq(ids, 6);
    Mat probe(4, 4);
    for (double& x : probe.data()) x = rng.uniform(-1, 1);

    for (Param* prm : p.params()) prm->zero_grad();
    const HiddenSeq h = encode(seq, p);
    encode_backward(seq, h, probe, p);
    for (double g : p.token_table.grad.row(kPadId)) CHECK(g == 0.0);

    for (Param* prm : p.params()) {
      if (prm == &p.token_table) {
        // Skip the frozen PAD row: it is excluded from training by contract.
        for (std::size_t c = 0; c < 4; ++c) prm->grad(kPadId, c) = 0.0;
      }
      const std::vector<double> start(prm->value.data().begin(), prm->value.data().end());
      auto f = [&](std::span<const double> x) {
        std::copy(x.begin(), x.end(), prm->value.data().begin());
        if (prm == &p.token_table) {
          for (std::size_t c = 0; c < 4; ++c) prm->value(kPadId, c) = start[c];
        }
        return dot(probe.data(), encode(seq, p).states.data());
      };
      const auto r = backward_check(f, start, prm->grad.data(), 1e-5);
      std::copy(start.begin(), start.end(), prm->value.data().begin());
      CHECK_MESSAGE(r.passed, prm->name << " rel err " << r.max_rel_error);
    }
  }
}
