// SPDX-License-Identifier: Apache-2.0

#include "paircl/train.h"

#include <chrono>
#include <cmath>
#include <fstream>
#include <json.hpp>

#include "paircl/errors.h"
#include "paircl/rng.h"

namespace paircl {

namespace {

// derive_seed tags; fixed so that runs stay comparable across versions.
constexpr std::uint64_t kInitTag = 100;
constexpr std::uint64_t kBatchTag = 1000;

void require(bool ok, const std::string& what) {
  if (!ok) throw ConfigError(what);
}

[[noreturn]] void abort_batch(const Split& split, std::span<const std::size_t> batch, int epoch,
                              std::size_t index, const Objectives& obj,
                              const std::optional<std::filesystem::path>& dump_dir) {
  std::string where;
  if (dump_dir) {
    nlohmann::ordered_json dump;
    dump["epoch"] = epoch;
    dump["batch"] = index;
    dump["l_scl"] = std::isfinite(obj.l_scl) ? nlohmann::json(obj.l_scl) : nlohmann::json("nan");
    dump["l_ce"] = std::isfinite(obj.l_ce) ? nlohmann::json(obj.l_ce) : nlohmann::json("nan");
    auto& rows = dump["examples"] = nlohmann::ordered_json::array();
    for (std::size_t i : batch) {
      rows.push_back({{"index", i},
                      {"premise", split[i].premise.tokens()},
                      {"hypothesis", split[i].hypothesis.tokens()},
                      {"label", split[i].label}});
    }
    std::filesystem::create_directories(*dump_dir);
    const auto path = *dump_dir / "nonfinite_batch.json";
    std::ofstream(path) << dump.dump(2) << '\n';
    where = "; batch written to " + path.string();
  }
  throw TrainingError("non-finite loss at epoch " + std::to_string(epoch) + " batch " +
                      std::to_string(index) + " (l_scl=" + std::to_string(obj.l_scl) +
                      ", l_ce=" + std::to_string(obj.l_ce) + ")" + where);
}

}  // namespace

void TrainConfig::validate() const {
  require(epochs >= 0, "epochs must be >= 0");
  require(batch_size >= 2, "batch_size must be >= 2");
  require(tau > 0.0, "tau must be > 0");
  require(alpha >= 0.0, "alpha must be >= 0");
  require(lr > 0.0, "lr must be > 0");
  require(!(no_scl && no_ce), "no_scl and no_ce together leave no objective");
  require(k >= 1 && d >= 1, "k and d must be >= 1");
  require(vocab_size >= 2, "vocab_size must be >= 2");
  require(max_len >= 1, "max_len must be >= 1");
  require(probe_steps >= 1 && probe_lr > 0.0, "probe_steps and probe_lr must be positive");
  if (stratify) {
    require(batch_size >= 2 * kNumClasses, "stratified batches need batch_size >= " +
                                               std::to_string(2 * kNumClasses));
  }
}

ModelConfig TrainConfig::model_config() const {
  ModelConfig m;
  m.vocab_size = vocab_size;
  m.k = k;
  m.d = d;
  m.max_len = max_len;
  m.cross_attention = !no_crossattn;
  return m;
}

ObjectiveConfig TrainConfig::objective() const {
  ObjectiveConfig o;
  o.tau = tau;
  o.alpha = alpha;
  o.use_scl = !no_scl;
  o.use_ce = !no_ce;
  o.scl_form = scl_form;
  return o;
}

AdamConfig TrainConfig::adam() const {
  AdamConfig a;
  a.lr = lr;
  a.max_grad_norm = max_grad_norm;
  return a;
}

double accuracy(const Model& model, const Split& split) {
  if (split.empty()) return 0.0;
  std::size_t correct = 0;
  for (const Example& ex : split) correct += predict(model, represent(model, ex)) == ex.label;
  return static_cast<double>(correct) / static_cast<double>(split.size());
}

void fit_probe(Model& model, const Split& split, int steps, double lr) {
  Batch b;
  for (const Example& ex : split) {
    b.reps.push_back(represent(model, ex));
    b.labels.push_back(ex.label);
  }
  model.cls.W_cls.value.fill(0.0);
  model.cls.b_cls.value.fill(0.0);
  if (b.size() == 0) return;
  std::vector<Param*> ps = model.cls.params();
  AdamConfig cfg;
  cfg.lr = lr;
  AdamState st = init_adam(ps, cfg);
  for (int s = 0; s < steps; ++s) {
    zero_grads(ps);
    ce_loss(b, model.cls);
    adam_step(ps, st);
  }
  zero_grads(ps);
}

TrainState init_training(const TrainConfig& config) {
  config.validate();
  TrainState st;
  st.model = init_model(config.model_config(), derive_seed(config.seed, kInitTag));
  st.adam = init_adam(st.model.params(), config.adam());
  st.best = st.model;
  st.report.config = config;
  return st;
}

void train(TrainState& state, const Splits& data, const TrainOptions& options) {
  const auto start = std::chrono::steady_clock::now();
  const TrainConfig& cfg = state.report.config;
  cfg.validate();
  const ObjectiveConfig objective = cfg.objective();
  RunReport& report = state.report;

  auto finish_epoch = [&](EpochRecord rec) {
    if (cfg.no_ce) fit_probe(state.model, data.train, cfg.probe_steps, cfg.probe_lr);
    rec.dev_acc = accuracy(state.model, data.dev);
    if (report.epochs.empty() || rec.dev_acc > report.best_dev_acc) {
      report.best_dev_acc = rec.dev_acc;
      report.best_epoch = rec.epoch;
      state.best = state.model;
    }
    report.epochs.push_back(rec);
    if (options.on_epoch) options.on_epoch(rec, state);
  };

  if (report.epochs.empty()) finish_epoch(EpochRecord{});

  for (int epoch = state.completed_epochs + 1; epoch <= cfg.epochs; ++epoch) {
    if (options.stop_after && state.completed_epochs >= *options.stop_after) break;
    const auto batches = make_batches(data.train, cfg.batch_size,
                                      derive_seed(cfg.seed, kBatchTag + static_cast<std::uint64_t>(epoch)),
                                      cfg.stratify);
    EpochRecord rec;
    rec.epoch = epoch;
    for (std::size_t bi = 0; bi < batches.size(); ++bi) {
      const auto params = state.model.params();
      zero_grads(params);
      const BatchStep step = accumulate_batch(state.model, data.train, batches[bi], objective);
      const Objectives& o = step.objectives;
      if (!std::isfinite(o.l_total)) {
        abort_batch(data.train, batches[bi], epoch, bi, o, options.dump_dir);
      }
      adam_step(params, state.adam);
      report.batches.push_back({epoch, bi, o.l_scl, o.l_ce, o.l_total, o.skipped_anchors});
      rec.l_scl += o.l_scl;
      rec.l_ce += o.l_ce;
      rec.l_total += o.l_total;
      rec.skipped_anchors += o.skipped_anchors;
    }
    rec.batches = batches.size();
    if (rec.batches > 0) {
      const auto n = static_cast<double>(rec.batches);
      rec.l_scl /= n;
      rec.l_ce /= n;
      rec.l_total /= n;
    }
    state.completed_epochs = epoch;
    finish_epoch(rec);
  }

  report.test_acc = accuracy(state.best, data.test);
  report.wall_seconds +=
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

TrainState train(const TrainConfig& config, const Splits& data, const TrainOptions& options) {
  TrainState st = init_training(config);
  train(st, data, options);
  return st;
}

}  // namespace paircl
