// SPDX-License-Identifier: Apache-2.0
//
// Evaluation reports, class-separation diagnostics, and ablation sweeps.

#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "paircl/data.h"
#include "paircl/model.h"
#include "paircl/train.h"

namespace paircl {

// Mean pairwise cosine of unit representations within and across classes.
struct Separation {
  double intra = 0.0;
  double inter = 0.0;
  double gap() const { return intra - inter; }
};

struct EvalReport {
  std::size_t n = 0;
  double accuracy = 0.0;
  std::array<double, kNumClasses> precision{};
  std::array<double, kNumClasses> recall{};
  // confusion[true][predicted]
  std::array<std::array<std::size_t, kNumClasses>, kNumClasses> confusion{};
  // Absent when some class has fewer than two examples.
  std::optional<Separation> separation;
};

// Precision/recall of a class with no predicted (or no true) members is 0.
EvalReport report_from_predictions(std::span<const int> labels, std::span<const int> predictions);

// Throws DegenerateInputError when fewer than two classes are present or a
// present class has fewer than two members.
Separation separation_metrics(std::span<const Vec> unit_reps, std::span<const int> labels);
Separation separation_metrics(const Model& model, const Split& split);

// Forward-only; the model is not modified.
EvalReport evaluate(const Model& model, const Split& split);

std::string format_report(const EvalReport& report);
std::string report_to_json(const EvalReport& report);

enum class Variant { kFull, kNoCe, kNoScl, kNoCrossattn };
inline constexpr std::array<Variant, 4> kAllVariants{Variant::kFull, Variant::kNoCe,
                                                     Variant::kNoScl, Variant::kNoCrossattn};

std::string variant_name(Variant v);
// The base config with exactly this variant's flags set.
TrainConfig variant_config(TrainConfig base, Variant v);

struct AblationRun {
  Variant variant = Variant::kFull;
  std::uint64_t seed = 0;
  double dev_acc = 0.0;  // best-dev checkpoint
  double test_acc = 0.0;
  std::size_t rep_dim = 0;
  Model best;
};

struct AblationRow {
  Variant variant = Variant::kFull;
  std::size_t rep_dim = 0;
  std::vector<double> dev_acc;  // per seed
  std::vector<double> test_acc;
  double dev_mean = 0.0, dev_stdev = 0.0;
  double test_mean = 0.0, test_stdev = 0.0;
};

struct AblationTable {
  std::vector<std::uint64_t> seeds;
  std::vector<AblationRow> rows;  // in kAllVariants order
  std::vector<AblationRun> runs;  // seed-major
};

using AblationProgress = std::function<void(const AblationRun&)>;

AblationTable ablation_sweep(const TrainConfig& base, const Splits& data,
                             std::span<const std::uint64_t> seeds,
                             const AblationProgress& progress = {});

// Accuracy table, three decimals, mean +- sample stdev over seeds.
std::string format_table(const AblationTable& table);
std::string table_to_json(const AblationTable& table);
std::string table_to_csv(const AblationTable& table);

}  // namespace paircl
