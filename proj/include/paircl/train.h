// SPDX-License-Identifier: Apache-2.0
//
// Training loop: stratified batches, L = L_SCL + alpha * L_CE, Adam, dev
// accuracy per epoch, best-dev model retained.

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "paircl/data.h"
#include "paircl/model.h"
#include "paircl/optim.h"

namespace paircl {

struct TrainConfig {
  int epochs = 10;
  std::size_t batch_size = 64;
  double tau = kDefaultTau;
  double alpha = kDefaultAlpha;
  double lr = kDefaultLearningRate;
  std::uint64_t seed = 42;
  bool no_scl = false;
  bool no_ce = false;
  bool no_crossattn = false;
  std::size_t k = 16;
  std::size_t d = 16;
  std::size_t vocab_size = 200;
  std::size_t max_len = 24;
  bool stratify = true;
  SclForm scl_form = SclForm::kLogOfMean;
  double max_grad_norm = 0.0;
  // Linear probe fitted on frozen representations when CE is off.
  int probe_steps = 300;
  double probe_lr = 0.05;

  // Throws ConfigError.
  void validate() const;
  ModelConfig model_config() const;
  ObjectiveConfig objective() const;
  AdamConfig adam() const;
};

struct EpochRecord {
  int epoch = 0;  // 0 is the untrained model
  double l_scl = 0.0;
  double l_ce = 0.0;
  double l_total = 0.0;
  std::size_t skipped_anchors = 0;
  std::size_t batches = 0;
  double dev_acc = 0.0;
};

struct BatchRecord {
  int epoch = 0;
  std::size_t batch = 0;
  double l_scl = 0.0;
  double l_ce = 0.0;
  double l_total = 0.0;
  std::size_t skipped_anchors = 0;
};

struct RunReport {
  TrainConfig config;
  std::vector<EpochRecord> epochs;
  std::vector<BatchRecord> batches;
  int best_epoch = 0;
  double best_dev_acc = 0.0;
  double test_acc = 0.0;
  double wall_seconds = 0.0;  // never written to the deterministic outputs
};

// Everything needed to continue a run exactly where it stopped.
struct TrainState {
  Model model;
  AdamState adam;
  Model best;
  RunReport report;
  int completed_epochs = 0;
};

using EpochCallback = std::function<void(const EpochRecord&, const TrainState&)>;

struct TrainOptions {
  // Called after every epoch record (including epoch 0).
  EpochCallback on_epoch;
  // Where to write a failing batch before aborting on a non-finite loss.
  std::optional<std::filesystem::path> dump_dir;
  // Stop after this many total epochs (for interruption tests).
  std::optional<int> stop_after;
};

TrainState init_training(const TrainConfig& config);

// Runs the remaining epochs of `state` and finalizes the report with the
// best-dev model's test accuracy.
void train(TrainState& state, const Splits& data, const TrainOptions& options = {});

// Fresh run.
TrainState train(const TrainConfig& config, const Splits& data, const TrainOptions& options = {});

double accuracy(const Model& model, const Split& split);

// Fits model.cls as a linear probe on frozen representations of `split`.
void fit_probe(Model& model, const Split& split, int steps, double lr);

}  // namespace paircl
