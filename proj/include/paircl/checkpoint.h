// SPDX-License-Identifier: Apache-2.0
//
// Checkpoint container, version 1 (all integers little-endian):
//
//   magic    8 bytes  "PAIRCL\0\0"
//   version  u32
//   hlen     u64      length of the JSON header
//   header   hlen bytes of UTF-8 JSON
//   payload  float64 tensors, in header order, row-major
//
// The header holds "kind" ("best" or "last"), "config" (every run setting as
// key -> string), "vocab" (token list), "unk_id", "completed_epochs",
// "adam_t", "report" and "tensors" ([{name, rows, cols}]). Model tensors use
// their parameter names; a "last" checkpoint adds "adam.m.<name>",
// "adam.v.<name>" and "best.<name>", enough to resume bit-identically.

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "paircl/config.h"
#include "paircl/train.h"

namespace paircl {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct CheckpointInfo {
  std::uint32_t version = kCheckpointVersion;
  std::string kind;
  Settings settings;
  Vocab vocab;
  int completed_epochs = 0;
  long adam_t = 0;
  int best_epoch = 0;
  double best_dev_acc = 0.0;
  double test_acc = 0.0;
  struct Tensor {
    std::string name;
    std::size_t rows = 0;
    std::size_t cols = 0;
  };
  std::vector<Tensor> tensors;
};

// The best-dev model only.
void save_best(const std::filesystem::path& path, const TrainState& state,
               const Settings& settings, const Vocab& vocab);
// Current model, Adam moments, best model, and the report so far.
void save_last(const std::filesystem::path& path, const TrainState& state,
               const Settings& settings, const Vocab& vocab);

// Header only. Throws CheckpointError on a bad container.
CheckpointInfo read_info(const std::filesystem::path& path);

// Loads the model stored in a checkpoint into the shape given by the
// checkpoint's own config, or by `expected` when provided. A tensor whose
// shape disagrees raises CheckpointError naming it.
Model load_model(const std::filesystem::path& path);
Model load_model(const std::filesystem::path& path, const ModelConfig& expected);

// Restores a "last" checkpoint for resumption.
TrainState load_state(const std::filesystem::path& path);

// JSON form of a report without wall time, shared by checkpoints and run
// outputs.
std::string report_json(const RunReport& report, const Settings& settings);

}  // namespace paircl
