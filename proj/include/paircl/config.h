// SPDX-License-Identifier: Apache-2.0
//
// Flat key=value run configuration. Resolution order, later wins:
// defaults, PAIRCL_SEED, config file, command-line flags.

#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "paircl/data.h"
#include "paircl/train.h"

namespace paircl {

struct Settings {
  TrainConfig train;
  // Synthetic data (used when data_dir is empty).
  std::uint64_t data_seed = 42;
  std::size_t n_train = 3000;
  std::size_t n_dev = 600;
  std::size_t n_test = 600;
  std::string data_dir;
  std::string out_dir = "run";
  FileFormat format = FileFormat::kJsonl;
  std::vector<std::uint64_t> ablation_seeds{1, 2, 3};
};

using Entries = std::vector<std::pair<std::string, std::string>>;

// Throws ConfigError on an unknown key or a malformed value.
void set_key(Settings& settings, std::string_view key, std::string_view value);

// Applies every key=value line of `path` on top of `settings`. Blank lines
// and lines starting with '#' are ignored.
void apply_config_file(Settings& settings, const std::filesystem::path& path);

// Seeds the run from PAIRCL_SEED when it is set.
void apply_environment(Settings& settings);

// Every key with its resolved value, in a fixed order. out_dir is left out
// of the reproducibility-relevant set unless asked for.
Entries entries(const Settings& settings, bool include_out_dir = true);
Entries train_entries(const TrainConfig& config);
// Inverse of train_entries; unknown keys throw ConfigError.
void set_train_key(TrainConfig& config, std::string_view key, std::string_view value);

SynthConfig synth_config(const Settings& settings);

std::string format_double(double x);
std::string format_format(FileFormat f);

}  // namespace paircl
