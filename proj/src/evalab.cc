// SPDX-License-Identifier: Apache-2.0

#include "paircl/evalab.h"

#include <cmath>
#include <cstdio>
#include <json.hpp>
#include <numeric>
#include <sstream>

#include "paircl/errors.h"

namespace paircl {

namespace {

std::string fixed3(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", x);
  return buf;
}

void mean_stdev(const std::vector<double>& xs, double& mean, double& stdev) {
  mean = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  stdev = xs.size() > 1 ? std::sqrt(ss / static_cast<double>(xs.size() - 1)) : 0.0;
}

}  // namespace

EvalReport report_from_predictions(std::span<const int> labels, std::span<const int> predictions) {
  if (labels.size() != predictions.size()) {
    throw ShapeError("report_from_predictions: " + std::to_string(labels.size()) + " labels vs " +
                     std::to_string(predictions.size()) + " predictions");
  }
  EvalReport r;
  r.n = labels.size();
  std::size_t correct = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    for (int v : {labels[i], predictions[i]}) {
      if (v < 0 || static_cast<std::size_t>(v) >= kNumClasses) {
        throw ParamError("class id " + std::to_string(v) + " out of range");
      }
    }
    ++r.confusion[static_cast<std::size_t>(labels[i])][static_cast<std::size_t>(predictions[i])];
    correct += labels[i] == predictions[i];
  }
  r.accuracy = r.n ? static_cast<double>(correct) / static_cast<double>(r.n) : 0.0;
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    std::size_t predicted = 0, actual = 0;
    for (std::size_t o = 0; o < kNumClasses; ++o) {
      predicted += r.confusion[o][c];
      actual += r.confusion[c][o];
    }
    const auto tp = static_cast<double>(r.confusion[c][c]);
    r.precision[c] = predicted ? tp / static_cast<double>(predicted) : 0.0;
    r.recall[c] = actual ? tp / static_cast<double>(actual) : 0.0;
  }
  return r;
}

Separation separation_metrics(std::span<const Vec> reps, std::span<const int> labels) {
  if (reps.size() != labels.size()) throw ShapeError("separation_metrics: reps vs labels");
  std::array<std::size_t, kNumClasses> count{};
  for (int y : labels) ++count.at(static_cast<std::size_t>(y));
  std::size_t present = 0;
  for (std::size_t c : count) {
    if (c == 1) throw DegenerateInputError("separation_metrics: a class has a single example");
    present += c > 0;
  }
  if (present < 2) throw DegenerateInputError("separation_metrics: needs two classes present");

  double intra = 0.0, inter = 0.0;
  std::size_t n_intra = 0, n_inter = 0;
  for (std::size_t i = 0; i < reps.size(); ++i) {
    for (std::size_t j = i + 1; j < reps.size(); ++j) {
      const double c = dot(reps[i].span(), reps[j].span());
      if (labels[i] == labels[j]) {
        intra += c;
        ++n_intra;
      } else {
        inter += c;
        ++n_inter;
      }
    }
  }
  return {intra / static_cast<double>(n_intra), inter / static_cast<double>(n_inter)};
}

Separation separation_metrics(const Model& model, const Split& split) {
  std::vector<Vec> reps;
  for (const Example& ex : split) reps.push_back(represent(model, ex).z_norm);
  const auto labels = labels_of(split);
  return separation_metrics(reps, labels);
}

EvalReport evaluate(const Model& model, const Split& split) {
  std::vector<Vec> reps;
  std::vector<int> predictions;
  for (const Example& ex : split) {
    const PairRep rep = represent(model, ex);
    predictions.push_back(predict(model, rep));
    reps.push_back(rep.z_norm);
  }
  const auto labels = labels_of(split);
  EvalReport r = report_from_predictions(labels, predictions);
  try {
    r.separation = separation_metrics(reps, labels);
  } catch (const DegenerateInputError&) {
    r.separation.reset();
  }
  return r;
}

std::string format_report(const EvalReport& r) {
  std::ostringstream out;
  out << "n = " << r.n << "  accuracy = " << fixed3(r.accuracy) << "\n";
  out << "class           precision  recall\n";
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    char line[96];
    std::snprintf(line, sizeof line, "%-15s %9s  %6s\n",
                  std::string(label_name(static_cast<int>(c))).c_str(),
                  fixed3(r.precision[c]).c_str(), fixed3(r.recall[c]).c_str());
    out << line;
  }
  out << "confusion (rows true, columns predicted)\n";
  for (const auto& row : r.confusion) {
    for (std::size_t x : row) {
      char cell[16];
      std::snprintf(cell, sizeof cell, "%7zu", x);
      out << cell;
    }
    out << "\n";
  }
  if (r.separation) {
    out << "cosine intra = " << fixed3(r.separation->intra)
        << "  inter = " << fixed3(r.separation->inter) << "\n";
  }
  return out.str();
}

std::string report_to_json(const EvalReport& r) {
  nlohmann::ordered_json j;
  j["n"] = r.n;
  j["accuracy"] = r.accuracy;
  j["precision"] = r.precision;
  j["recall"] = r.recall;
  j["confusion"] = r.confusion;
  if (r.separation) {
    j["intra_cosine"] = r.separation->intra;
    j["inter_cosine"] = r.separation->inter;
  } else {
    j["intra_cosine"] = nullptr;
    j["inter_cosine"] = nullptr;
  }
  return j.dump(2) + "\n";
}

std::string variant_name(Variant v) {
  switch (v) {
    case Variant::kFull: return "full";
    case Variant::kNoCe: return "-CE";
    case Variant::kNoScl: return "-SCL";
    case Variant::kNoCrossattn: return "-crossattn";
  }
  return "?";
}

TrainConfig variant_config(TrainConfig base, Variant v) {
  base.no_ce = v == Variant::kNoCe;
  base.no_scl = v == Variant::kNoScl;
  base.no_crossattn = v == Variant::kNoCrossattn;
  return base;
}

AblationTable ablation_sweep(const TrainConfig& base, const Splits& data,
                             std::span<const std::uint64_t> seeds,
                             const AblationProgress& progress) {
  if (seeds.empty()) throw ConfigError("ablation sweep needs at least one seed");
  AblationTable table;
  table.seeds.assign(seeds.begin(), seeds.end());
  for (Variant v : kAllVariants) {
    AblationRow row;
    row.variant = v;
    table.rows.push_back(std::move(row));
  }
  for (std::uint64_t seed : seeds) {
    for (std::size_t vi = 0; vi < kAllVariants.size(); ++vi) {
      TrainConfig cfg = variant_config(base, kAllVariants[vi]);
      cfg.seed = seed;
      TrainState st = train(cfg, data);
      AblationRun run{kAllVariants[vi], seed, st.report.best_dev_acc, st.report.test_acc,
                      cfg.model_config().rep_dim(), std::move(st.best)};
      AblationRow& row = table.rows[vi];
      row.rep_dim = run.rep_dim;
      row.dev_acc.push_back(run.dev_acc);
      row.test_acc.push_back(run.test_acc);
      if (progress) progress(run);
      table.runs.push_back(std::move(run));
    }
  }
  for (AblationRow& row : table.rows) {
    mean_stdev(row.dev_acc, row.dev_mean, row.dev_stdev);
    mean_stdev(row.test_acc, row.test_mean, row.test_stdev);
  }
  return table;
}

std::string format_table(const AblationTable& t) {
  std::ostringstream out;
  out << "seeds:";
  for (auto s : t.seeds) out << " " << s;
  out << "\n";
  char line[128];
  std::snprintf(line, sizeof line, "%-12s %5s  %-15s %-15s\n", "variant", "|z|", "dev acc",
                "test acc");
  out << line;
  for (const AblationRow& r : t.rows) {
    const std::string dev = fixed3(r.dev_mean) + " +- " + fixed3(r.dev_stdev);
    const std::string test = fixed3(r.test_mean) + " +- " + fixed3(r.test_stdev);
    std::snprintf(line, sizeof line, "%-12s %5zu  %-15s %-15s\n", variant_name(r.variant).c_str(),
                  r.rep_dim, dev.c_str(), test.c_str());
    out << line;
  }
  out << "-crossattn uses z = [a_p; a_h] (width 4k) in place of the cross attention block\n";
  return out.str();
}

std::string table_to_json(const AblationTable& t) {
  nlohmann::ordered_json j;
  j["seeds"] = t.seeds;
  auto& rows = j["rows"] = nlohmann::ordered_json::array();
  for (const AblationRow& r : t.rows) {
    rows.push_back({{"variant", variant_name(r.variant)},
                    {"rep_dim", r.rep_dim},
                    {"dev_acc", r.dev_acc},
                    {"test_acc", r.test_acc},
                    {"dev_mean", r.dev_mean},
                    {"dev_stdev", r.dev_stdev},
                    {"test_mean", r.test_mean},
                    {"test_stdev", r.test_stdev}});
  }
  return j.dump(2) + "\n";
}

std::string table_to_csv(const AblationTable& t) {
  std::ostringstream out;
  out << "variant,seed,rep_dim,dev_acc,test_acc\n";
  for (const AblationRun& r : t.runs) {
    out << variant_name(r.variant) << "," << r.seed << "," << r.rep_dim << ","
        << fixed3(r.dev_acc) << "," << fixed3(r.test_acc) << "\n";
  }
  return out.str();
}

}  // namespace paircl
