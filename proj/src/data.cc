// SPDX-License-Identifier: Apache-2.0

#include "paircl/data.h"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

#include "paircl/errors.h"
#include "paircl/rng.h"

namespace paircl {

namespace {

constexpr std::array<std::string_view, kNumClasses> kLabelNames{"entailment", "contradiction",
                                                                "neutral"};

}  // namespace

std::string_view label_name(int label) {
  if (label < 0 || static_cast<std::size_t>(label) >= kNumClasses) {
    throw ParamError("label id " + std::to_string(label) + " out of range");
  }
  return kLabelNames[static_cast<std::size_t>(label)];
}

std::optional<int> parse_label(std::string_view name) {
  if (name == "-") return std::nullopt;
  for (std::size_t i = 0; i < kNumClasses; ++i) {
    if (name == kLabelNames[i]) return static_cast<int>(i);
  }
  throw ParseError("unknown label \"" + std::string(name) + "\"");
}

// ---- vocabulary -----------------------------------------------------------

Vocab::Vocab(std::vector<std::string> tokens, int unk_id)
    : tokens_(std::move(tokens)), unk_id_(unk_id) {
  if (unk_id_ < 0 || static_cast<std::size_t>(unk_id_) >= tokens_.size()) {
    throw VocabularyError("unk id " + std::to_string(unk_id_) + " outside vocabulary");
  }
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    if (!index_.emplace(tokens_[i], static_cast<int>(i)).second) {
      throw VocabularyError("duplicate vocabulary entry \"" + tokens_[i] + "\"");
    }
  }
}

Vocab Vocab::build(std::span<const std::string> corpus, std::size_t max_tokens) {
  std::map<std::string, std::size_t> counts;
  for (const auto& doc : corpus) {
    for (auto& w : split_words(doc)) ++counts[w];
  }
  std::vector<std::pair<std::string, std::size_t>> ranked(counts.begin(), counts.end());
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  std::vector<std::string> tokens{"<pad>", "<unk>"};
  for (const auto& [w, n] : ranked) {
    if (tokens.size() - 2 >= max_tokens) break;
    if (w == "<pad>" || w == "<unk>") continue;
    tokens.push_back(w);
  }
  return Vocab(std::move(tokens), 1);
}

Vocab Vocab::synthetic(std::size_t vocab_size) {
  if (vocab_size <= static_cast<std::size_t>(kFirstContentId)) {
    throw ConfigError("synthetic vocabulary needs more than " +
                      std::to_string(kFirstContentId) + " ids");
  }
  std::vector<std::string> tokens{"<pad>", "not", "the", "<unk>"};
  for (std::size_t i = kFirstContentId; i < vocab_size; ++i) tokens.push_back("w" + std::to_string(i));
  return Vocab(std::move(tokens), kSyntheticUnkId);
}

int Vocab::id(const std::string& token) const {
  auto it = index_.find(token);
  return it == index_.end() ? unk_id_ : it->second;
}

std::vector<std::string> split_words(std::string_view text) {
  std::vector<std::string> words;
  std::string cur;
  for (char ch : text) {
    if (std::isspace(static_cast<unsigned char>(ch))) {
      if (!cur.empty()) words.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
    }
  }
  if (!cur.empty()) words.push_back(std::move(cur));
  return words;
}

TokenSeq tokenize(std::string_view text, const Vocab& vocab, std::size_t max_len) {
  std::vector<int> ids;
  for (const auto& w : split_words(text)) {
    if (ids.size() == max_len) break;
    ids.push_back(vocab.id(w));
  }
  return TokenSeq(std::move(ids), max_len);
}

std::string detokenize(const TokenSeq& seq, const Vocab& vocab) {
  std::string out;
  for (std::size_t i = 0; i < seq.len(); ++i) {
    if (i) out.push_back(' ');
    out += vocab.token(seq[i]);
  }
  return out;
}

// ---- synthetic generation -------------------------------------------------

namespace {

struct Layout {
  int a_begin, a_end;  // premise half [a_begin, a_end)
  int b_begin, b_end;  // disjoint half
};

Layout layout_for(const SynthConfig& c) {
  const int content = static_cast<int>(c.vocab_size) - kFirstContentId;
  const int half = content / 2;
  return {kFirstContentId, kFirstContentId + half, kFirstContentId + half,
          kFirstContentId + 2 * half};
}

class Generator {
 public:
  Generator(const SynthConfig& c) : c_(c), lay_(layout_for(c)), rng_(c.seed) {}

  Example make(int label) {
    for (;;) {
      std::vector<int> premise = draw_premise();
      std::vector<int> hyp;
      switch (label) {
        case kEntailment: hyp = entailment(premise); break;
        case kContradiction: hyp = contradiction(premise); break;
        default: hyp = neutral(premise); break;
      }
      maybe_add_filler(hyp);
      if (!seen_.insert({premise, hyp}).second) continue;
      return {TokenSeq(std::move(premise), c_.max_len), TokenSeq(std::move(hyp), c_.max_len),
              label};
    }
  }

  Rng& rng() { return rng_; }

 private:
  int from_a() { return rng_.between(lay_.a_begin, lay_.a_end - 1); }
  int from_b() { return rng_.between(lay_.b_begin, lay_.b_end - 1); }

  std::vector<int> draw_premise() {
    const int m = rng_.between(static_cast<int>(c_.premise_min_len),
                               static_cast<int>(c_.premise_max_len));
    std::vector<int> p(static_cast<std::size_t>(m));
    for (int& t : p) t = from_a();
    return p;
  }

  // Length of the hypothesis before the optional filler.
  int core_len(int hi) {
    return rng_.between(static_cast<int>(c_.hypothesis_min_len), hi);
  }

  std::vector<int> entailment(const std::vector<int>& premise) {
    const int hi = std::min<int>(static_cast<int>(c_.hypothesis_max_len),
                                 static_cast<int>(premise.size()));
    const int s = core_len(hi);
    std::vector<std::size_t> pos(premise.size());
    for (std::size_t i = 0; i < pos.size(); ++i) pos[i] = i;
    rng_.shuffle(pos);
    pos.resize(static_cast<std::size_t>(s));
    std::sort(pos.begin(), pos.end());
    std::vector<int> h;
    for (std::size_t p : pos) h.push_back(premise[p]);
    return h;
  }

  std::vector<int> contradiction(const std::vector<int>& premise) {
    const int L = core_len(static_cast<int>(c_.hypothesis_max_len));
    std::vector<int> h;
    for (int i = 0; i < L - 2; ++i) h.push_back(from_b());
    const auto at = static_cast<std::ptrdiff_t>(rng_.below(h.size() + 1));
    const int echoed = premise[rng_.below(premise.size())];
    h.insert(h.begin() + at, {c_.negation_token_id, echoed});
    return h;
  }

  std::vector<int> neutral(const std::vector<int>& premise) {
    const int L = core_len(static_cast<int>(c_.hypothesis_max_len));
    const auto budget =
        static_cast<int>(std::floor(c_.neutral_max_overlap * static_cast<double>(L)));
    const std::set<int> in_premise(premise.begin(), premise.end());
    std::vector<int> h;
    int overlap = 0;
    while (static_cast<int>(h.size()) < L) {
      const int t = from_a();
      if (in_premise.count(t)) {
        if (overlap == budget) continue;
        ++overlap;
      }
      h.push_back(t);
    }
    return h;
  }

  void maybe_add_filler(std::vector<int>& h) {
    if (h.size() >= c_.hypothesis_max_len || !rng_.coin()) return;
    auto at = static_cast<std::ptrdiff_t>(rng_.below(h.size() + 1));
    // Keep NEG adjacent to the token it negates.
    if (at > 0 && h[static_cast<std::size_t>(at - 1)] == c_.negation_token_id) --at;
    h.insert(h.begin() + at, kFillerId);
  }

  const SynthConfig& c_;
  Layout lay_;
  Rng rng_;
  std::set<std::pair<std::vector<int>, std::vector<int>>> seen_;
};

}  // namespace

void validate(const SynthConfig& c) {
  auto fail = [](const std::string& msg) { throw ConfigError("synthetic config: " + msg); };
  if (c.n_train < 1 || c.n_dev < 1 || c.n_test < 1) fail("split sizes must be >= 1");
  if (c.premise_min_len < 1 || c.hypothesis_min_len < 1) fail("lengths must be >= 1");
  if (c.premise_min_len > c.premise_max_len || c.hypothesis_min_len > c.hypothesis_max_len) {
    fail("min length exceeds max length");
  }
  if (c.hypothesis_min_len < 2) fail("contradictions need hypothesis_min_len >= 2");
  if (c.premise_min_len < c.hypothesis_min_len) {
    fail("entailment needs premise_min_len >= hypothesis_min_len");
  }
  if (c.premise_max_len > c.max_len || c.hypothesis_max_len > c.max_len) {
    fail("sentence lengths exceed max_len " + std::to_string(c.max_len));
  }
  if (c.negation_token_id != kNegationId) {
    fail("negation_token_id must be the reserved id " + std::to_string(kNegationId));
  }
  if (c.vocab_size <= static_cast<std::size_t>(kFirstContentId)) {
    fail("vocab_size must exceed the reserved ids (PAD, NEG, filler, UNK)");
  }
  const Layout lay = layout_for(c);
  const auto half = static_cast<std::size_t>(lay.a_end - lay.a_begin);
  if (half < c.premise_max_len + c.hypothesis_max_len) {
    fail("vocab_size " + std::to_string(c.vocab_size) +
         " too small: each content half needs >= premise_max_len + hypothesis_max_len = " +
         std::to_string(c.premise_max_len + c.hypothesis_max_len) + " ids, has " +
         std::to_string(half));
  }
  if (c.neutral_max_overlap < 0.0 || c.neutral_max_overlap > 1.0) {
    fail("neutral_max_overlap must lie in [0, 1]");
  }
  double total = 0.0;
  for (double b : c.class_balance) {
    if (b < 0.0) fail("class balance entries must be >= 0");
    total += b;
  }
  if (std::abs(total - 1.0) > 1e-9) fail("class balance must sum to 1");
}

std::array<std::size_t, kNumClasses> class_counts(std::size_t n,
                                                  const std::array<double, kNumClasses>& balance) {
  std::array<std::size_t, kNumClasses> counts{};
  std::array<double, kNumClasses> frac{};
  std::size_t assigned = 0;
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    const double exact = balance[c] * static_cast<double>(n);
    counts[c] = static_cast<std::size_t>(std::floor(exact + 1e-9));
    frac[c] = exact - static_cast<double>(counts[c]);
    assigned += counts[c];
  }
  while (assigned < n) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < kNumClasses; ++c) {
      if (frac[c] > frac[best]) best = c;
    }
    ++counts[best];
    frac[best] = -1.0;
    ++assigned;
  }
  return counts;
}

Splits generate(const SynthConfig& config) {
  validate(config);
  Generator gen(config);
  auto make_split = [&](std::size_t n) {
    const auto counts = class_counts(n, config.class_balance);
    std::vector<int> labels;
    for (std::size_t c = 0; c < kNumClasses; ++c) labels.insert(labels.end(), counts[c], int(c));
    gen.rng().shuffle(labels);
    Split split;
    split.reserve(n);
    for (int y : labels) split.push_back(gen.make(y));
    return split;
  };
  Splits s;
  s.train = make_split(config.n_train);
  s.dev = make_split(config.n_dev);
  s.test = make_split(config.n_test);
  return s;
}

// ---- files ----------------------------------------------------------------

FileFormat parse_format(std::string_view name) {
  if (name == "jsonl") return FileFormat::kJsonl;
  if (name == "tsv") return FileFormat::kTsv;
  throw ConfigError("unknown format \"" + std::string(name) + "\" (expected jsonl or tsv)");
}

namespace {

std::string field(const nlohmann::json& rec, std::initializer_list<const char*> names,
                  std::size_t line) {
  for (const char* n : names) {
    auto it = rec.find(n);
    if (it == rec.end()) continue;
    if (!it->is_string()) throw ParseError(std::string("field \"") + n + "\" is not a string", line);
    return it->get<std::string>();
  }
  throw ParseError(std::string("missing field \"") + *names.begin() + "\"", line);
}

std::optional<int> record_label(const std::string& s, std::size_t line) {
  try {
    return parse_label(s);
  } catch (const ParseError& e) {
    throw ParseError(e.what(), line);
  }
}

}  // namespace

RawSplit load_file(const std::filesystem::path& path, FileFormat format) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open data file " + path.string());
  RawSplit out;
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (!text.empty() && text.back() == '\r') text.pop_back();
    if (text.find_first_not_of(" \t") == std::string::npos) continue;
    RawExample ex;
    std::string label;
    if (format == FileFormat::kJsonl) {
      nlohmann::json rec;
      try {
        rec = nlohmann::json::parse(text);
      } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(std::string("malformed JSON: ") + e.what(), line);
      }
      if (!rec.is_object()) throw ParseError("record is not a JSON object", line);
      ex.premise = field(rec, {"premise", "sentence1"}, line);
      ex.hypothesis = field(rec, {"hypothesis", "sentence2"}, line);
      label = field(rec, {"label", "gold_label"}, line);
    } else {
      std::vector<std::string> cols;
      std::stringstream ss(text);
      std::string col;
      while (std::getline(ss, col, '\t')) cols.push_back(col);
      if (cols.size() != 3) {
        throw ParseError("expected 3 tab-separated columns, found " + std::to_string(cols.size()),
                         line);
      }
      ex.premise = cols[0];
      ex.hypothesis = cols[1];
      label = cols[2];
    }
    const auto y = record_label(label, line);
    if (!y) {
      ++out.skipped;
      continue;
    }
    ex.label = *y;
    out.examples.push_back(std::move(ex));
  }
  return out;
}

void save_file(std::span<const RawExample> examples, const std::filesystem::path& path,
               FileFormat format) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write data file " + path.string());
  for (const auto& ex : examples) {
    if (format == FileFormat::kJsonl) {
      nlohmann::ordered_json rec;
      rec["premise"] = ex.premise;
      rec["hypothesis"] = ex.hypothesis;
      rec["label"] = std::string(label_name(ex.label));
      out << rec.dump() << '\n';
    } else {
      for (const auto* s : {&ex.premise, &ex.hypothesis}) {
        if (s->find_first_of("\t\n") != std::string::npos) {
          throw ConfigError("TSV fields cannot contain tabs or newlines");
        }
      }
      out << ex.premise << '\t' << ex.hypothesis << '\t' << label_name(ex.label) << '\n';
    }
  }
}

std::vector<RawExample> to_raw(const Split& split, const Vocab& vocab) {
  std::vector<RawExample> out;
  out.reserve(split.size());
  for (const auto& ex : split) {
    out.push_back({detokenize(ex.premise, vocab), detokenize(ex.hypothesis, vocab), ex.label});
  }
  return out;
}

Split to_examples(std::span<const RawExample> raw, const Vocab& vocab, std::size_t max_len) {
  Split out;
  out.reserve(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    Example ex{tokenize(raw[i].premise, vocab, max_len),
               tokenize(raw[i].hypothesis, vocab, max_len), raw[i].label};
    if (ex.premise.len() == 0 || ex.hypothesis.len() == 0) {
      throw ParseError("record " + std::to_string(i + 1) + " has an empty sentence");
    }
    out.push_back(std::move(ex));
  }
  return out;
}

// ---- batching -------------------------------------------------------------

std::vector<int> labels_of(const Split& split) {
  std::vector<int> y;
  y.reserve(split.size());
  for (const auto& ex : split) y.push_back(ex.label);
  return y;
}

std::vector<std::vector<std::size_t>> make_batches(std::span<const int> labels, std::size_t K,
                                                   std::uint64_t seed, bool stratify) {
  if (K < 2) throw ConfigError("batch size must be >= 2, got " + std::to_string(K));
  Rng rng(seed);
  std::vector<std::vector<std::size_t>> batches;
  if (!stratify) {
    std::vector<std::size_t> order(labels.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    rng.shuffle(order);
    for (std::size_t b = 0; b + K <= order.size(); b += K) {
      batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(b),
                           order.begin() + static_cast<std::ptrdiff_t>(b + K));
    }
    return batches;
  }

  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(i);
  const std::size_t C = by_class.size();
  if (K < 2 * C) {
    throw ConfigError("stratified batching needs K >= 2 * classes = " + std::to_string(2 * C) +
                      ", got K = " + std::to_string(K));
  }
  std::size_t n_batches = labels.size() / K;
  for (auto& [y, idx] : by_class) {
    rng.shuffle(idx);
    n_batches = std::min(n_batches, idx.size() / 2);
  }
  batches.assign(n_batches, {});
  std::vector<std::size_t> rest;
  for (auto& [y, idx] : by_class) {
    for (std::size_t b = 0; b < n_batches; ++b) {
      batches[b].push_back(idx[2 * b]);
      batches[b].push_back(idx[2 * b + 1]);
    }
    rest.insert(rest.end(), idx.begin() + static_cast<std::ptrdiff_t>(2 * n_batches), idx.end());
  }
  rng.shuffle(rest);
  std::size_t next = 0;
  for (auto& batch : batches) {
    while (batch.size() < K) batch.push_back(rest[next++]);
    rng.shuffle(batch);
  }
  return batches;
}

std::vector<std::vector<std::size_t>> make_batches(const Split& split, std::size_t K,
                                                   std::uint64_t seed, bool stratify) {
  return make_batches(labels_of(split), K, seed, stratify);
}

}  // namespace paircl
