// SPDX-License-Identifier: Apache-2.0
//
// Command-line front end. Exit codes: 0 success, 1 validation error (bad
// flags, config, data files or checkpoints), 2 runtime error.

#pragma once

#include <filesystem>
#include <optional>
#include <ostream>

#include "paircl/config.h"
#include "paircl/data.h"

namespace paircl {

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;
inline constexpr int kExitRuntime = 2;

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

struct LoadedData {
  Splits splits;
  Vocab vocab;
};

// Synthetic splits when data_dir is empty, otherwise <data_dir>/{train,dev,test}.<format>.
// File data uses `vocab` when given, else <data_dir>/vocab.txt, else a
// vocabulary built from the training split; settings.train.vocab_size is
// updated to match.
LoadedData load_data(Settings& settings, const std::optional<Vocab>& vocab = std::nullopt);

// One token per line, in id order.
void save_vocab(const Vocab& vocab, const std::filesystem::path& path);
Vocab load_vocab(const std::filesystem::path& path);

}  // namespace paircl
