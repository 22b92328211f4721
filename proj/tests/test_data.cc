// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>

#include "paircl/data.h"
#include "paircl/errors.h"

using namespace paircl;
namespace fs = std::filesystem;

namespace {

SynthConfig small_config(std::uint64_t seed = 42) {
  SynthConfig c;
  c.n_train = 600;
  c.n_dev = 120;
  c.n_test = 120;
  c.seed = seed;
  return c;
}

struct TempFile {
  fs::path path;
  explicit TempFile(const std::string& name, const std::string& body = {})
      : path(fs::temp_directory_path() / ("paircl_" + name)) {
    std::ofstream(path) << body;
  }
  ~TempFile() { fs::remove(path); }
};

std::multiset<int> multiset_of(const TokenSeq& s) {
  const auto t = s.tokens();
  return {t.begin(), t.end()};
}

double overlap(const Example& ex) {
  const auto prem = multiset_of(ex.premise);
  std::size_t hits = 0, n = 0;
  for (int id : ex.hypothesis.tokens()) {
    if (id == kFillerId) continue;
    ++n;
    hits += prem.count(id) > 0;
  }
  return n ? static_cast<double>(hits) / static_cast<double>(n) : 0.0;
}

}  // namespace

TEST_CASE("generation is deterministic") {
  const Splits a = generate(small_config(5));
  const Splits b = generate(small_config(5));
  CHECK(a.train == b.train);
  CHECK(a.dev == b.dev);
  CHECK(a.test == b.test);
  const Splits c = generate(small_config(6));
  CHECK_FALSE(a.train == c.train);
}

TEST_CASE("generated splits respect construction rules") {
  const SynthConfig cfg = small_config();
  const Splits s = generate(cfg);
  const int half = (static_cast<int>(cfg.vocab_size) - kFirstContentId) / 2;
  std::set<std::pair<std::vector<int>, std::vector<int>>> seen;
  for (const Split* split : {&s.train, &s.dev, &s.test}) {
    std::array<std::size_t, kNumClasses> counts{};
    for (const Example& ex : *split) {
      ++counts[static_cast<std::size_t>(ex.label)];
      CHECK(ex.premise.len() >= cfg.premise_min_len);
      CHECK(ex.premise.len() <= cfg.premise_max_len);
      CHECK(ex.hypothesis.len() >= 1);
      CHECK_NOTHROW(ex.premise.validate(cfg.vocab_size));
      CHECK_NOTHROW(ex.hypothesis.validate(cfg.vocab_size));
      CHECK(seen.insert({ex.premise.tokens(), ex.hypothesis.tokens()}).second);
      for (int id : ex.premise.tokens()) {
        CHECK(id >= kFirstContentId);
        CHECK(id < kFirstContentId + half);
      }
      const auto hyp = ex.hypothesis.tokens();
      if (ex.label == kEntailment) {
        std::multiset<int> prem = multiset_of(ex.premise);
        for (int id : hyp) {
          if (id == kFillerId) continue;
          auto it = prem.find(id);
          REQUIRE(it != prem.end());
          prem.erase(it);
        }
      } else if (ex.label == kContradiction) {
        auto neg = std::find(hyp.begin(), hyp.end(), kNegationId);
        REQUIRE(neg != hyp.end());
        REQUIRE(neg + 1 != hyp.end());
        CHECK(multiset_of(ex.premise).count(*(neg + 1)) >= 1);
      } else {
        CHECK(overlap(ex) <= cfg.neutral_max_overlap + 1e-12);
      }
    }
    const auto expect = class_counts(split->size(), cfg.class_balance);
    CHECK(counts == expect);
  }
}

TEST_CASE("class counts follow the balance exactly") {
  CHECK(class_counts(3000, {1.0 / 3, 1.0 / 3, 1.0 / 3}) == std::array<std::size_t, 3>{1000, 1000, 1000});
  const auto c = class_counts(10, {0.5, 0.25, 0.25});
  CHECK(c[0] + c[1] + c[2] == 10);
  CHECK(c[0] == 5);
}

TEST_CASE("infeasible configurations are rejected") {
  SynthConfig c = small_config();
  c.vocab_size = 20;
  CHECK_THROWS_AS(validate(c), ConfigError);
  CHECK_THROWS_AS(generate(c), ConfigError);
  c = small_config();
  c.n_dev = 0;
  CHECK_THROWS_AS(validate(c), ConfigError);
  c = small_config();
  c.negation_token_id = 7;
  CHECK_THROWS_AS(validate(c), ConfigError);
}

TEST_CASE("entailment vs contradiction is linearly separable from overlap") {
  // Logistic regression on [overlap fraction, hypothesis length, bias].
  SynthConfig cfg;
  cfg.seed = 7;
  cfg.n_train = 3000;
  const Splits s = generate(cfg);
  auto features = [](const Example& ex) {
    return std::array<double, 3>{overlap(ex), static_cast<double>(ex.hypothesis.len()) / 8.0, 1.0};
  };
  std::array<double, 3> w{};
  for (int epoch = 0; epoch < 200; ++epoch) {
    std::array<double, 3> g{};
    std::size_t n = 0;
    for (const Example& ex : s.train) {
      if (ex.label == kNeutral) continue;
      const auto f = features(ex);
      const double y = ex.label == kEntailment ? 1.0 : 0.0;
      const double p = 1.0 / (1.0 + std::exp(-(w[0] * f[0] + w[1] * f[1] + w[2] * f[2])));
      for (int j = 0; j < 3; ++j) g[j] += (p - y) * f[j];
      ++n;
    }
    for (int j = 0; j < 3; ++j) w[j] -= 1.0 * g[j] / static_cast<double>(n);
  }
  std::size_t correct = 0, total = 0;
  for (const Example& ex : s.dev) {
    if (ex.label == kNeutral) continue;
    const auto f = features(ex);
    const bool entail = w[0] * f[0] + w[1] * f[1] + w[2] * f[2] > 0;
    correct += entail == (ex.label == kEntailment);
    ++total;
  }
  const double acc = static_cast<double>(correct) / static_cast<double>(total);
  MESSAGE("overlap probe dev accuracy " << acc);
  CHECK(acc > 0.9);
}

TEST_CASE("tokenizer and vocabulary") {
  const std::vector<std::string> corpus{"b a c a", "d b e f a"};
  const Vocab v = Vocab::build(corpus, 5);
  CHECK(v.tokens() == std::vector<std::string>{"<pad>", "<unk>", "a", "b", "c", "d", "e"});
  const TokenSeq t = tokenize("A a  a", v, 8);
  REQUIRE(t.len() == 3);
  CHECK(t[0] == t[1]);
  CHECK(t[1] == t[2]);
  CHECK(tokenize("zebra", v, 4)[0] == v.unk_id());
  CHECK(tokenize("a b c d e", v, 3).len() == 3);
  CHECK(detokenize(tokenize("B  c", v, 4), v) == "b c");

  const Vocab syn = Vocab::synthetic(10);
  CHECK(syn.size() == 10);
  CHECK(syn.token(kNegationId) == "not");
  CHECK(syn.id("w7") == 7);
}

TEST_CASE("labels") {
  CHECK(parse_label("entailment") == kEntailment);
  CHECK(parse_label("contradiction") == kContradiction);
  CHECK(parse_label("neutral") == kNeutral);
  CHECK_FALSE(parse_label("-").has_value());
  CHECK_THROWS_AS(parse_label("maybe"), ParseError);
  CHECK(label_name(kNeutral) == "neutral");
}

TEST_CASE("load_file") {
  SUBCASE("empty file") {
    TempFile f("empty.jsonl");
    const RawSplit r = load_file(f.path, FileFormat::kJsonl);
    CHECK(r.examples.empty());
    CHECK(r.skipped == 0);
  }
  SUBCASE("unannotated records are skipped") {
    TempFile f("dash.jsonl",
               "{\"sentence1\": \"a b\", \"sentence2\": \"a\", \"gold_label\": \"-\"}\n"
               "{\"premise\": \"a b\", \"hypothesis\": \"b\", \"label\": \"entailment\"}\n");
    const RawSplit r = load_file(f.path, FileFormat::kJsonl);
    CHECK(r.skipped == 1);
    REQUIRE(r.examples.size() == 1);
    CHECK(r.examples[0] == RawExample{"a b", "b", kEntailment});
  }
  SUBCASE("unknown label reports the line") {
    TempFile f("bad.jsonl",
               "{\"premise\": \"a\", \"hypothesis\": \"a\", \"label\": \"neutral\"}\n"
               "{\"premise\": \"a\", \"hypothesis\": \"a\", \"label\": \"unsure\"}\n");
    try {
      load_file(f.path, FileFormat::kJsonl);
      FAIL("expected ParseError");
    } catch (const ParseError& e) {
      CHECK(e.line() == 2);
    }
  }
  SUBCASE("malformed line") {
    TempFile f("broken.jsonl", "{\"premise\": \n");
    CHECK_THROWS_AS(load_file(f.path, FileFormat::kJsonl), ParseError);
    TempFile t("broken.tsv", "only one field\n");
    CHECK_THROWS_AS(load_file(t.path, FileFormat::kTsv), ParseError);
  }
  SUBCASE("missing file") {
    CHECK_THROWS_AS(load_file("/nonexistent/x.jsonl", FileFormat::kJsonl), ConfigError);
  }
  SUBCASE("round trip") {
    const std::vector<RawExample> rows{{"a man sleeps", "a man rests", kEntailment},
                                       {"a dog runs", "not a dog", kContradiction}};
    for (FileFormat fmt : {FileFormat::kJsonl, FileFormat::kTsv}) {
      TempFile f("roundtrip");
      save_file(rows, f.path, fmt);
      const RawSplit r = load_file(f.path, fmt);
      CHECK(r.examples == rows);
      CHECK(r.skipped == 0);
    }
  }
  SUBCASE("synthetic split round trip") {
    const SynthConfig cfg = small_config();
    const Splits s = generate(cfg);
    const Vocab v = Vocab::synthetic(cfg.vocab_size);
    TempFile f("synthetic.jsonl");
    const auto raw = to_raw(s.dev, v);
    save_file(raw, f.path, FileFormat::kJsonl);
    CHECK(to_examples(load_file(f.path, FileFormat::kJsonl).examples, v, cfg.max_len) == s.dev);
  }
}

TEST_CASE("make_batches") {
  const std::vector<int> labels{0, 1, 2, 0, 1, 2, 0, 1, 2, 0, 1, 2};
  SUBCASE("one batch is a permutation") {
    const auto b = make_batches(labels, labels.size(), 1, false);
    REQUIRE(b.size() == 1);
    std::vector<std::size_t> sorted = b[0];
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t i = 0; i < sorted.size(); ++i) CHECK(sorted[i] == i);
  }
  SUBCASE("stratified batches hold two of every class") {
    const Splits s = generate(small_config());
    const auto y = labels_of(s.train);
    for (std::uint64_t seed : {1u, 2u, 3u}) {
      const auto batches = make_batches(y, 12, seed, true);
      CHECK(batches.size() == y.size() / 12);
      std::set<std::size_t> used;
      for (const auto& b : batches) {
        CHECK(b.size() == 12);
        std::array<int, 3> per{};
        for (std::size_t i : b) {
          ++per[static_cast<std::size_t>(y[i])];
          CHECK(used.insert(i).second);
        }
        for (int c : per) CHECK(c >= 2);
      }
    }
  }
  SUBCASE("incomplete batches are dropped") {
    CHECK(make_batches(labels, 5, 1, false).size() == 2);
  }
  SUBCASE("deterministic per seed") {
    CHECK(make_batches(labels, 6, 9, true) == make_batches(labels, 6, 9, true));
    CHECK_FALSE(make_batches(labels, 6, 9, false) == make_batches(labels, 6, 10, false));
  }
  SUBCASE("errors") {
    CHECK_THROWS_AS(make_batches(labels, 5, 1, true), ConfigError);
    CHECK_THROWS_AS(make_batches(labels, 1, 1, false), ConfigError);
  }
}
