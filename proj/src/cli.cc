// SPDX-License-Identifier: Apache-2.0

#include "paircl/cli.h"

#include <CLI11.hpp>
#include <algorithm>
#include <cstdio>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "paircl/checkpoint.h"
#include "paircl/errors.h"
#include "paircl/evalab.h"
#include "paircl/gradsuite.h"

namespace paircl {

namespace fs = std::filesystem;

namespace {

std::string extension(FileFormat f) { return f == FileFormat::kJsonl ? ".jsonl" : ".tsv"; }

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw ConfigError("cannot write " + path.string());
  f << text;
  if (!f) throw TrainingError("failed writing " + path.string());
}

// Overrides shared by the commands that resolve a run configuration.
struct SettingFlags {
  std::string config;
  std::vector<std::string> sets;
  std::optional<std::uint64_t> seed;
  std::optional<int> epochs;
  std::optional<std::size_t> batch_size;
  std::optional<double> tau, alpha, lr;
  std::optional<std::size_t> k, d;
  bool no_scl = false, no_ce = false, no_crossattn = false;
  std::optional<std::string> data_dir, out_dir, format;

  void add_to(CLI::App& app) {
    app.add_option("--config", config, "key=value config file");
    app.add_option("--set", sets, "extra key=value override (repeatable)");
    app.add_option("--data-dir", data_dir, "read splits from this directory");
    app.add_option("--out-dir", out_dir, "output directory");
    app.add_option("--format", format, "data file format")->check(CLI::IsMember({"jsonl", "tsv"}));
    app.add_option("--seed", seed, "model and batching seed");
    app.add_option("--epochs", epochs);
    app.add_option("--batch-size", batch_size, "batch size K");
    app.add_option("--tau", tau, "temperature");
    app.add_option("--alpha", alpha, "cross-entropy weight");
    app.add_option("--lr", lr, "learning rate");
    app.add_option("--k", k, "hidden width");
    app.add_option("--d", d, "embedding width");
    app.add_flag("--no-scl", no_scl, "drop the contrastive term");
    app.add_flag("--no-ce", no_ce, "drop the cross-entropy term (linear probe head)");
    app.add_flag("--no-crossattn", no_crossattn, "replace cross attention by concatenation");
  }

  void apply(Settings& s) const {
    if (!config.empty()) apply_config_file(s, config);
    for (const std::string& kv : sets) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw ConfigError("--set expects key=value, got \"" + kv + "\"");
      set_key(s, kv.substr(0, eq), kv.substr(eq + 1));
    }
    TrainConfig& t = s.train;
    if (seed) t.seed = *seed;
    if (epochs) t.epochs = *epochs;
    if (batch_size) t.batch_size = *batch_size;
    if (tau) t.tau = *tau;
    if (alpha) t.alpha = *alpha;
    if (lr) t.lr = *lr;
    if (k) t.k = *k;
    if (d) t.d = *d;
    if (no_scl) t.no_scl = true;
    if (no_ce) t.no_ce = true;
    if (no_crossattn) t.no_crossattn = true;
    if (data_dir) s.data_dir = *data_dir;
    if (out_dir) s.out_dir = *out_dir;
    if (format) s.format = parse_format(*format);
  }

  // defaults < PAIRCL_SEED < config file < flags
  Settings resolve() const {
    Settings s;
    apply_environment(s);
    apply(s);
    return s;
  }
};

void print_header(std::ostream& out, const Settings& s) {
  out << "# resolved config\n";
  for (const auto& [k, v] : entries(s)) out << "# " << k << " = " << v << "\n";
}

std::string config_text(const Settings& s) {
  std::string out;
  for (const auto& [k, v] : entries(s, false)) out += k + " = " + v + "\n";
  return out;
}

std::string epoch_line(const EpochRecord& e) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "epoch %3d  l_scl %.6f  l_ce %.6f  l_total %.6f  dev_acc %.4f",
                e.epoch, e.l_scl, e.l_ce, e.l_total, e.dev_acc);
  return buf;
}

std::string metrics_jsonl(const RunReport& r) {
  std::string out;
  for (const EpochRecord& e : r.epochs) {
    nlohmann::ordered_json j{{"epoch", e.epoch},           {"l_scl", e.l_scl},
                             {"l_ce", e.l_ce},             {"l_total", e.l_total},
                             {"skipped_anchors", e.skipped_anchors},
                             {"batches", e.batches},       {"dev_acc", e.dev_acc}};
    out += j.dump() + "\n";
  }
  return out;
}

std::string summary_csv(const RunReport& r) {
  std::ostringstream out;
  out << "epoch,l_scl,l_ce,l_total,skipped_anchors,dev_acc\n";
  for (const EpochRecord& e : r.epochs) {
    out << e.epoch << "," << format_double(e.l_scl) << "," << format_double(e.l_ce) << ","
        << format_double(e.l_total) << "," << e.skipped_anchors << ","
        << format_double(e.dev_acc) << "\n";
  }
  return out.str();
}

const Split& pick_split(const Splits& s, const std::string& name) {
  if (name == "train") return s.train;
  if (name == "dev") return s.dev;
  return s.test;
}

// ---- commands -------------------------------------------------------------

int cmd_gen_data(const SettingFlags& flags, std::ostream& out) {
  Settings s = flags.resolve();
  const fs::path dir = s.out_dir;
  const Splits data = generate(synth_config(s));
  const Vocab vocab = Vocab::synthetic(s.train.vocab_size);
  print_header(out, s);
  for (const auto& [name, split] : {std::pair<const char*, const Split*>{"train", &data.train},
                                    {"dev", &data.dev},
                                    {"test", &data.test}}) {
    const fs::path path = dir / (std::string(name) + extension(s.format));
    fs::create_directories(dir);
    save_file(to_raw(*split, vocab), path, s.format);
    out << "wrote " << path.string() << " (" << split->size() << " pairs)\n";
  }
  save_vocab(vocab, dir / "vocab.txt");
  out << "wrote " << (dir / "vocab.txt").string() << " (" << vocab.size() << " tokens)\n";
  return kExitOk;
}

int cmd_train(const SettingFlags& flags, bool resume, std::ostream& out, std::ostream& err) {
  Settings s;
  TrainState state;
  std::optional<Vocab> vocab;
  if (resume) {
    // The checkpoint's settings win; flags may extend the run or relocate it.
    const fs::path dir = flags.resolve().out_dir;
    const CheckpointInfo info = read_info(dir / "last.ckpt");
    s = info.settings;
    flags.apply(s);
    s.out_dir = dir.string();
    vocab = info.vocab;
    state = load_state(dir / "last.ckpt");
    state.report.config.epochs = s.train.epochs;
  } else {
    s = flags.resolve();
  }
  LoadedData data = load_data(s, vocab);
  s.train.validate();
  if (!resume) state = init_training(s.train);
  print_header(out, s);

  const fs::path dir = s.out_dir;
  fs::create_directories(dir);
  write_text(dir / "config.txt", config_text(s));

  TrainOptions opts;
  opts.dump_dir = dir;
  opts.on_epoch = [&](const EpochRecord& e, const TrainState& st) {
    out << epoch_line(e) << "\n" << std::flush;
    if (e.epoch > 0) save_last(dir / "last.ckpt", st, s, data.vocab);
    write_text(dir / "metrics.jsonl", metrics_jsonl(st.report));
  };
  train(state, data.splits, opts);

  save_last(dir / "last.ckpt", state, s, data.vocab);
  save_best(dir / "best.ckpt", state, s, data.vocab);
  write_text(dir / "summary.csv", summary_csv(state.report));
  write_text(dir / "report.json", report_json(state.report, s));
  write_text(dir / "timing.json",
             nlohmann::ordered_json{{"wall_seconds", state.report.wall_seconds}}.dump() + "\n");

  char buf[128];
  std::snprintf(buf, sizeof buf, "best epoch %d  dev_acc %.4f  test_acc %.4f\n",
                state.report.best_epoch, state.report.best_dev_acc, state.report.test_acc);
  out << buf;
  err << "wall time " << state.report.wall_seconds << " s\n";
  return kExitOk;
}

int cmd_eval(const SettingFlags& flags, const std::string& checkpoint, const std::string& split,
             const std::string& csv, std::ostream& out) {
  const CheckpointInfo info = read_info(checkpoint);
  Settings s = info.settings;
  flags.apply(s);
  LoadedData data = load_data(s, info.vocab);
  const Model model = load_model(checkpoint, s.train.model_config());
  const EvalReport report = evaluate(model, pick_split(data.splits, split));
  out << "checkpoint " << checkpoint << "  split " << split << "\n";
  out << format_report(report);
  out << report_to_json(report);
  if (!csv.empty()) {
    std::ostringstream c;
    c << "class,precision,recall,support\n";
    for (std::size_t i = 0; i < kNumClasses; ++i) {
      std::size_t support = 0;
      for (std::size_t x : report.confusion[i]) support += x;
      c << label_name(static_cast<int>(i)) << "," << format_double(report.precision[i]) << ","
        << format_double(report.recall[i]) << "," << support << "\n";
    }
    c << "accuracy,," << "," << format_double(report.accuracy) << "\n";
    write_text(csv, c.str());
  }
  return kExitOk;
}

int cmd_ablate(const SettingFlags& flags, const std::string& seeds, std::ostream& out,
               std::ostream& err) {
  Settings s = flags.resolve();
  if (!seeds.empty()) set_key(s, "ablation_seeds", seeds);
  LoadedData data = load_data(s);
  s.train.validate();
  print_header(out, s);
  const AblationTable table =
      ablation_sweep(s.train, data.splits, s.ablation_seeds, [&](const AblationRun& r) {
        char buf[128];
        std::snprintf(buf, sizeof buf, "%-11s seed %llu  dev %.4f  test %.4f\n",
                      variant_name(r.variant).c_str(), static_cast<unsigned long long>(r.seed),
                      r.dev_acc, r.test_acc);
        err << buf << std::flush;
      });
  out << format_table(table);
  const std::string json = table_to_json(table);
  out << json;
  const fs::path dir = s.out_dir;
  write_text(dir / "ablation.json", json);
  write_text(dir / "ablation.csv", table_to_csv(table));
  return kExitOk;
}

int cmd_gradcheck(std::uint64_t seed, std::ostream& out) {
  GradSuiteConfig cfg;
  cfg.seed = seed;
  const auto groups = run_gradient_suite(cfg);
  bool ok = true;
  for (const GroupResult& g : groups) {
    char buf[200];
    std::snprintf(buf, sizeof buf, "%-22s worst rel err %.3e  (%s, %zu entries, %d resampled)  %s\n",
                  g.group.c_str(), g.worst_rel_error, g.worst_param.c_str(), g.checked,
                  g.resampled, g.passed ? "ok" : "FAIL");
    out << buf;
    ok = ok && g.passed;
  }
  if (!ok) throw TrainingError("gradient check failed");
  return kExitOk;
}

int cmd_inspect(const std::string& checkpoint, std::ostream& out) {
  const CheckpointInfo info = read_info(checkpoint);
  out << "checkpoint " << checkpoint << "\n";
  out << "version " << info.version << "  kind " << info.kind << "\n";
  out << "completed epochs " << info.completed_epochs << "  adam steps " << info.adam_t << "\n";
  out << "best epoch " << info.best_epoch << "  best dev acc " << format_double(info.best_dev_acc)
      << "  test acc " << format_double(info.test_acc) << "\n";
  out << "vocab " << info.vocab.size() << " tokens\n";
  for (const auto& [k, v] : entries(info.settings, false)) out << "  " << k << " = " << v << "\n";
  std::size_t total = 0;
  out << "tensors\n";
  for (const auto& t : info.tensors) {
    out << "  " << t.name << " (" << t.rows << "x" << t.cols << ")\n";
    total += t.rows * t.cols;
  }
  out << total << " values\n";
  return kExitOk;
}

}  // namespace

void save_vocab(const Vocab& vocab, const fs::path& path) {
  std::string text;
  for (const std::string& t : vocab.tokens()) text += t + "\n";
  write_text(path, text);
}

Vocab load_vocab(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open vocabulary " + path.string());
  std::vector<std::string> tokens;
  for (std::string line; std::getline(in, line);) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    tokens.push_back(line);
  }
  const auto unk = std::find(tokens.begin(), tokens.end(), "<unk>");
  if (unk == tokens.end()) throw ConfigError(path.string() + ": no <unk> entry");
  return Vocab(std::move(tokens), static_cast<int>(unk - tokens.begin()));
}

LoadedData load_data(Settings& s, const std::optional<Vocab>& vocab) {
  LoadedData out;
  if (s.data_dir.empty()) {
    out.splits = generate(synth_config(s));
    out.vocab = vocab ? *vocab : Vocab::synthetic(s.train.vocab_size);
    return out;
  }
  const fs::path dir = s.data_dir;
  auto read = [&](const char* name) { return load_file(dir / (name + extension(s.format)), s.format); };
  const RawSplit train = read("train"), dev = read("dev"), test = read("test");
  if (vocab) {
    out.vocab = *vocab;
  } else if (fs::exists(dir / "vocab.txt")) {
    out.vocab = load_vocab(dir / "vocab.txt");
  } else {
    std::vector<std::string> corpus;
    for (const RawExample& ex : train.examples) {
      corpus.push_back(ex.premise);
      corpus.push_back(ex.hypothesis);
    }
    out.vocab = Vocab::build(corpus, s.train.vocab_size > 2 ? s.train.vocab_size - 2 : 0);
  }
  s.train.vocab_size = out.vocab.size();
  const std::size_t L = s.train.max_len;
  out.splits = {to_examples(train.examples, out.vocab, L), to_examples(dev.examples, out.vocab, L),
                to_examples(test.examples, out.vocab, L)};
  return out;
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Pair-level contrastive NLI trainer", "paircl"};
  app.require_subcommand(1, 1);

  SettingFlags gen_flags, train_flags, eval_flags, ablate_flags;
  bool resume = false;
  std::string checkpoint, split = "test", csv, seeds;
  std::uint64_t grad_seed = 3;

  CLI::App* gen = app.add_subcommand("gen-data", "write synthetic train/dev/test splits");
  gen_flags.add_to(*gen);

  CLI::App* tr = app.add_subcommand("train", "train a model and write checkpoints and reports");
  train_flags.add_to(*tr);
  tr->add_flag("--resume", resume, "continue from <out-dir>/last.ckpt");

  CLI::App* ev = app.add_subcommand("eval", "evaluate a checkpoint on a split");
  eval_flags.add_to(*ev);
  ev->add_option("--checkpoint", checkpoint, "checkpoint file")->required();
  ev->add_option("--split", split)->check(CLI::IsMember({"train", "dev", "test"}));
  ev->add_option("--csv", csv, "also write per-class metrics here");

  CLI::App* ab = app.add_subcommand("ablate", "train every ablation variant over seeds");
  ablate_flags.add_to(*ab);
  ab->add_option("--seeds", seeds, "comma-separated seed list");

  CLI::App* gc = app.add_subcommand("gradcheck", "finite-difference check of every parameter group");
  gc->add_option("--seed", grad_seed);

  CLI::App* in = app.add_subcommand("inspect", "print checkpoint metadata");
  in->add_option("--checkpoint", checkpoint, "checkpoint file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    app.exit(e, out, err);
    return kExitOk;
  } catch (const CLI::CallForAllHelp& e) {
    app.exit(e, out, err);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n";
    const CLI::App* sub = app.get_subcommands().empty() ? &app : app.get_subcommands().front();
    err << sub->help();
    return kExitValidation;
  }

  try {
    if (gen->parsed()) return cmd_gen_data(gen_flags, out);
    if (tr->parsed()) return cmd_train(train_flags, resume, out, err);
    if (ev->parsed()) return cmd_eval(eval_flags, checkpoint, split, csv, out);
    if (ab->parsed()) return cmd_ablate(ablate_flags, seeds, out, err);
    if (gc->parsed()) return cmd_gradcheck(grad_seed, out);
    if (in->parsed()) return cmd_inspect(checkpoint, out);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const CheckpointError& e) {
    err << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const VocabularyError& e) {
    err << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    err << "runtime error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitRuntime;
}

}  // namespace paircl
