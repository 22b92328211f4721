// SPDX-License-Identifier: Apache-2.0
//
// NLI-style datasets: a deterministic synthetic generator whose labels hold
// by construction, NLI file ingestion (JSONL / TSV), tokenization, and
// label-stratified batching.

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "paircl/encoder.h"

namespace paircl {

inline constexpr int kEntailment = 0;
inline constexpr int kContradiction = 1;
inline constexpr int kNeutral = 2;
inline constexpr std::size_t kNumClasses = 3;

std::string_view label_name(int label);
// nullopt for the unannotated marker "-"; throws ParseError otherwise.
std::optional<int> parse_label(std::string_view name);

struct Example {
  TokenSeq premise;
  TokenSeq hypothesis;
  int label = 0;
  bool operator==(const Example&) const = default;
};

using Split = std::vector<Example>;

struct Splits {
  Split train;
  Split dev;
  Split test;
};

// ---- vocabulary -----------------------------------------------------------

class Vocab {
 public:
  Vocab() = default;
  Vocab(std::vector<std::string> tokens, int unk_id);

  // Reserved <pad>=0, <unk>=1, then the most frequent corpus tokens (ties
  // broken lexicographically), at most max_tokens of them.
  static Vocab build(std::span<const std::string> corpus, std::size_t max_tokens);
  // Names for the synthetic generator's ids: <pad>, not, the, <unk>, w4...
  static Vocab synthetic(std::size_t vocab_size);

  int id(const std::string& token) const;
  const std::string& token(int id) const { return tokens_.at(static_cast<std::size_t>(id)); }
  std::size_t size() const { return tokens_.size(); }
  int unk_id() const { return unk_id_; }
  const std::vector<std::string>& tokens() const { return tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
  int unk_id_ = 1;
};

// Lowercased whitespace-separated words.
std::vector<std::string> split_words(std::string_view text);
// Unknown words map to the UNK id; sequences are truncated to max_len.
TokenSeq tokenize(std::string_view text, const Vocab& vocab, std::size_t max_len);
std::string detokenize(const TokenSeq& seq, const Vocab& vocab);

// ---- synthetic generation -------------------------------------------------

// Reserved synthetic ids. Content ids start at kFirstContentId and are split
// into two equal halves; premises use the first half only.
inline constexpr int kNegationId = 1;
inline constexpr int kFillerId = 2;
inline constexpr int kSyntheticUnkId = 3;
inline constexpr int kFirstContentId = 4;

struct SynthConfig {
  std::size_t vocab_size = 200;
  std::size_t n_train = 3000;
  std::size_t n_dev = 600;
  std::size_t n_test = 600;
  std::size_t premise_min_len = 4;
  std::size_t premise_max_len = 12;
  std::size_t hypothesis_min_len = 3;
  std::size_t hypothesis_max_len = 8;
  std::size_t max_len = 24;
  std::uint64_t seed = 42;
  int negation_token_id = kNegationId;
  std::array<double, kNumClasses> class_balance{1.0 / 3, 1.0 / 3, 1.0 / 3};
  double neutral_max_overlap = 0.3;
};

// Throws ConfigError when infeasible.
void validate(const SynthConfig& config);

// entailment:    hypothesis is an order-preserving subset of the premise
// contradiction: NEG followed by a premise token, the rest drawn from the
//                second (premise-disjoint) vocabulary half
// neutral:       drawn independently from the premise vocabulary half, with
//                at most neutral_max_overlap of its tokens in the premise
// Any hypothesis may also carry one filler token. No pair repeats across or
// within splits.
Splits generate(const SynthConfig& config);

// Per-class counts for n examples under the given balance.
std::array<std::size_t, kNumClasses> class_counts(std::size_t n,
                                                  const std::array<double, kNumClasses>& balance);

// ---- files ----------------------------------------------------------------

enum class FileFormat { kJsonl, kTsv };
FileFormat parse_format(std::string_view name);

struct RawExample {
  std::string premise;
  std::string hypothesis;
  int label = 0;
  bool operator==(const RawExample&) const = default;
};

struct RawSplit {
  std::vector<RawExample> examples;
  std::size_t skipped = 0;  // unannotated ("-") records
};

// JSONL accepts premise|sentence1, hypothesis|sentence2, label|gold_label.
// TSV is premise<TAB>hypothesis<TAB>label with no header.
RawSplit load_file(const std::filesystem::path& path, FileFormat format);
void save_file(std::span<const RawExample> examples, const std::filesystem::path& path,
               FileFormat format);

std::vector<RawExample> to_raw(const Split& split, const Vocab& vocab);
Split to_examples(std::span<const RawExample> raw, const Vocab& vocab, std::size_t max_len);

// ---- batching -------------------------------------------------------------

// Index batches for one epoch. Incomplete trailing batches are dropped. With
// stratify, every batch holds at least two examples of each class present.
std::vector<std::vector<std::size_t>> make_batches(std::span<const int> labels, std::size_t K,
                                                   std::uint64_t seed, bool stratify);
std::vector<std::vector<std::size_t>> make_batches(const Split& split, std::size_t K,
                                                   std::uint64_t seed, bool stratify);

std::vector<int> labels_of(const Split& split);

}  // namespace paircl
