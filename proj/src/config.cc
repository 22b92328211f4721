// SPDX-License-Identifier: Apache-2.0

#include "paircl/config.h"

#include <charconv>
#include <cstdlib>
#include <fstream>

#include "paircl/errors.h"

namespace paircl {

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void bad_value(std::string_view key, std::string_view value, const char* expect) {
  throw ConfigError("invalid value \"" + std::string(value) + "\" for " + std::string(key) +
                    " (expected " + expect + ")");
}

template <typename T>
T parse_uint(std::string_view key, std::string_view v) {
  T out{};
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) bad_value(key, v, "a non-negative integer");
  return out;
}

int parse_int(std::string_view key, std::string_view v) {
  int out = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) bad_value(key, v, "an integer");
  return out;
}

double parse_double(std::string_view key, std::string_view v) {
  double out = 0.0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) bad_value(key, v, "a number");
  return out;
}

bool parse_bool(std::string_view key, std::string_view v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  bad_value(key, v, "true or false");
}

std::string format_bool(bool b) { return b ? "true" : "false"; }

std::string format_seeds(const std::vector<std::uint64_t>& seeds) {
  std::string out;
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(seeds[i]);
  }
  return out;
}

std::vector<std::uint64_t> parse_seeds(std::string_view key, std::string_view v) {
  std::vector<std::uint64_t> out;
  while (!v.empty()) {
    const auto comma = v.find(',');
    out.push_back(parse_uint<std::uint64_t>(key, trim(v.substr(0, comma))));
    if (comma == std::string_view::npos) break;
    v.remove_prefix(comma + 1);
  }
  if (out.empty()) bad_value(key, v, "a comma-separated seed list");
  return out;
}

}  // namespace

std::string format_double(double x) {
  char buf[64];
  const auto [p, ec] = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, p);
}

std::string format_format(FileFormat f) { return f == FileFormat::kJsonl ? "jsonl" : "tsv"; }

Entries train_entries(const TrainConfig& c) {
  return {
      {"epochs", std::to_string(c.epochs)},
      {"batch_size", std::to_string(c.batch_size)},
      {"tau", format_double(c.tau)},
      {"alpha", format_double(c.alpha)},
      {"lr", format_double(c.lr)},
      {"seed", std::to_string(c.seed)},
      {"no_scl", format_bool(c.no_scl)},
      {"no_ce", format_bool(c.no_ce)},
      {"no_crossattn", format_bool(c.no_crossattn)},
      {"k", std::to_string(c.k)},
      {"d", std::to_string(c.d)},
      {"vocab_size", std::to_string(c.vocab_size)},
      {"max_len", std::to_string(c.max_len)},
      {"stratify", format_bool(c.stratify)},
      {"scl_form", c.scl_form == SclForm::kLogOfMean ? "log_of_mean" : "mean_of_log"},
      {"max_grad_norm", format_double(c.max_grad_norm)},
      {"probe_steps", std::to_string(c.probe_steps)},
      {"probe_lr", format_double(c.probe_lr)},
  };
}

void set_train_key(TrainConfig& c, std::string_view key, std::string_view v) {
  if (key == "epochs") c.epochs = parse_int(key, v);
  else if (key == "batch_size") c.batch_size = parse_uint<std::size_t>(key, v);
  else if (key == "tau") c.tau = parse_double(key, v);
  else if (key == "alpha") c.alpha = parse_double(key, v);
  else if (key == "lr") c.lr = parse_double(key, v);
  else if (key == "seed") c.seed = parse_uint<std::uint64_t>(key, v);
  else if (key == "no_scl") c.no_scl = parse_bool(key, v);
  else if (key == "no_ce") c.no_ce = parse_bool(key, v);
  else if (key == "no_crossattn") c.no_crossattn = parse_bool(key, v);
  else if (key == "k") c.k = parse_uint<std::size_t>(key, v);
  else if (key == "d") c.d = parse_uint<std::size_t>(key, v);
  else if (key == "vocab_size") c.vocab_size = parse_uint<std::size_t>(key, v);
  else if (key == "max_len") c.max_len = parse_uint<std::size_t>(key, v);
  else if (key == "stratify") c.stratify = parse_bool(key, v);
  else if (key == "scl_form") {
    if (v == "log_of_mean") c.scl_form = SclForm::kLogOfMean;
    else if (v == "mean_of_log") c.scl_form = SclForm::kMeanOfLog;
    else bad_value(key, v, "log_of_mean or mean_of_log");
  } else if (key == "max_grad_norm") c.max_grad_norm = parse_double(key, v);
  else if (key == "probe_steps") c.probe_steps = parse_int(key, v);
  else if (key == "probe_lr") c.probe_lr = parse_double(key, v);
  else throw ConfigError("unknown config key \"" + std::string(key) + "\"");
}

void set_key(Settings& s, std::string_view key, std::string_view v) {
  if (key == "data_seed") s.data_seed = parse_uint<std::uint64_t>(key, v);
  else if (key == "n_train") s.n_train = parse_uint<std::size_t>(key, v);
  else if (key == "n_dev") s.n_dev = parse_uint<std::size_t>(key, v);
  else if (key == "n_test") s.n_test = parse_uint<std::size_t>(key, v);
  else if (key == "data_dir") s.data_dir = std::string(v);
  else if (key == "out_dir") s.out_dir = std::string(v);
  else if (key == "format") s.format = parse_format(v);
  else if (key == "ablation_seeds") s.ablation_seeds = parse_seeds(key, v);
  else set_train_key(s.train, key, v);
}

Entries entries(const Settings& s, bool include_out_dir) {
  Entries out = train_entries(s.train);
  out.insert(out.end(), {
                            {"data_seed", std::to_string(s.data_seed)},
                            {"n_train", std::to_string(s.n_train)},
                            {"n_dev", std::to_string(s.n_dev)},
                            {"n_test", std::to_string(s.n_test)},
                            {"data_dir", s.data_dir},
                            {"format", format_format(s.format)},
                            {"ablation_seeds", format_seeds(s.ablation_seeds)},
                        });
  if (include_out_dir) out.emplace_back("out_dir", s.out_dir);
  return out;
}

void apply_config_file(Settings& s, const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::string raw;
  std::size_t line = 0;
  while (std::getline(in, raw)) {
    ++line;
    const std::string_view l = trim(raw);
    if (l.empty() || l.front() == '#') continue;
    const auto eq = l.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError(path.string() + ":" + std::to_string(line) + ": expected key=value");
    }
    try {
      set_key(s, trim(l.substr(0, eq)), trim(l.substr(eq + 1)));
    } catch (const ConfigError& e) {
      throw ConfigError(path.string() + ":" + std::to_string(line) + ": " + e.what());
    }
  }
}

void apply_environment(Settings& s) {
  if (const char* v = std::getenv("PAIRCL_SEED")) {
    try {
      s.train.seed = parse_uint<std::uint64_t>("PAIRCL_SEED", trim(v));
    } catch (const ConfigError& e) {
      throw ConfigError(std::string("environment: ") + e.what());
    }
  }
}

SynthConfig synth_config(const Settings& s) {
  SynthConfig c;
  c.vocab_size = s.train.vocab_size;
  c.max_len = s.train.max_len;
  c.n_train = s.n_train;
  c.n_dev = s.n_dev;
  c.n_test = s.n_test;
  c.seed = s.data_seed;
  return c;
}

}  // namespace paircl
