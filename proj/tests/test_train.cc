// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>

#include "paircl/errors.h"
#include "paircl/rng.h"
#include "paircl/train.h"

using namespace paircl;
namespace fs = std::filesystem;

namespace {

const Splits& small_data() {
  static const Splits data = [] {
    SynthConfig c;
    c.n_train = 300;
    c.n_dev = 90;
    c.n_test = 90;
    c.seed = 42;
    return generate(c);
  }();
  return data;
}

TrainConfig small_config() {
  TrainConfig c;
  c.epochs = 2;
  c.batch_size = 30;
  c.k = 6;
  c.d = 5;
  c.seed = 7;
  return c;
}

bool same_params(const Model& a, const Model& b) {
  const auto pa = a.params();
  const auto pb = b.params();
  for (std::size_t i = 0; i < pa.size(); ++i) {
    if (!std::ranges::equal(pa[i]->value.data(), pb[i]->value.data())) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("config validation rejects contradictory or out-of-range settings") {
  TrainConfig c;
  CHECK_NOTHROW(c.validate());
  c.no_scl = c.no_ce = true;
  CHECK_THROWS_AS(c.validate(), ConfigError);

  auto bad = [](auto mutate) {
    TrainConfig t;
    mutate(t);
    CHECK_THROWS_AS(t.validate(), ConfigError);
  };
  bad([](TrainConfig& t) { t.epochs = -1; });
  bad([](TrainConfig& t) { t.batch_size = 1; });
  bad([](TrainConfig& t) { t.tau = 0.0; });
  bad([](TrainConfig& t) { t.alpha = -0.5; });
  bad([](TrainConfig& t) { t.lr = 0.0; });
  bad([](TrainConfig& t) { t.batch_size = 5; });  // stratified needs two per class
}

TEST_CASE("zero epochs evaluates the untrained model at chance") {
  SynthConfig sc;  // default desk sizes, 600 balanced test pairs
  const Splits data = generate(sc);
  TrainConfig c;
  c.epochs = 0;
  const TrainState st = train(c, data);
  REQUIRE(st.report.epochs.size() == 1);
  CHECK(st.report.epochs[0].epoch == 0);
  CHECK(st.report.batches.empty());
  CHECK(st.report.best_epoch == 0);
  CHECK(std::abs(st.report.test_acc - 1.0 / 3.0) <= 0.06);
  CHECK(same_params(st.best, init_model(c.model_config(), derive_seed(c.seed, 100))));
}

TEST_CASE("per-batch records obey the objective's bookkeeping") {
  const TrainConfig c = small_config();
  const TrainState st = train(c, small_data());
  REQUIRE(st.report.batches.size() == 2 * 10);
  for (const BatchRecord& b : st.report.batches) {
    CHECK(b.l_total == doctest::Approx(b.l_scl + c.alpha * b.l_ce).epsilon(1e-12));
    CHECK(b.skipped_anchors == 0);  // stratified batches always hold positives
    CHECK(std::isfinite(b.l_total));
  }
  REQUIRE(st.report.epochs.size() == 3);
  for (int e = 1; e <= 2; ++e) {
    double mean = 0.0;
    for (const BatchRecord& b : st.report.batches) {
      if (b.epoch == e) mean += b.l_total / 10.0;
    }
    CHECK(st.report.epochs[static_cast<std::size_t>(e)].l_total == doctest::Approx(mean));
  }
}

TEST_CASE("best model is the first epoch with the highest dev accuracy") {
  const TrainState st = train(small_config(), small_data());
  const auto& ep = st.report.epochs;
  const auto best = std::max_element(ep.begin(), ep.end(), [](const auto& a, const auto& b) {
    return a.dev_acc < b.dev_acc;
  });
  CHECK(st.report.best_epoch == best->epoch);
  CHECK(st.report.best_dev_acc == best->dev_acc);
  CHECK(accuracy(st.best, small_data().dev) == st.report.best_dev_acc);
  CHECK(accuracy(st.best, small_data().test) == st.report.test_acc);
}

TEST_CASE("training is deterministic") {
  const TrainState a = train(small_config(), small_data());
  const TrainState b = train(small_config(), small_data());
  CHECK(same_params(a.model, b.model));
  CHECK(same_params(a.best, b.best));
  REQUIRE(a.report.batches.size() == b.report.batches.size());
  for (std::size_t i = 0; i < a.report.batches.size(); ++i) {
    CHECK(a.report.batches[i].l_total == b.report.batches[i].l_total);
  }
  TrainConfig other = small_config();
  other.seed = 8;
  CHECK_FALSE(same_params(a.model, train(other, small_data()).model));
}

TEST_CASE("stopping and continuing matches an uninterrupted run") {
  TrainConfig c = small_config();
  c.epochs = 3;
  const TrainState whole = train(c, small_data());
  TrainState st = init_training(c);
  train(st, small_data(), TrainOptions{.stop_after = 1});
  CHECK(st.completed_epochs == 1);
  train(st, small_data());
  CHECK(st.completed_epochs == 3);
  CHECK(same_params(st.model, whole.model));
  CHECK(same_params(st.best, whole.best));
  CHECK(st.report.test_acc == whole.report.test_acc);
}

TEST_CASE("without SCL only cross-entropy drives training") {
  TrainConfig full = small_config();
  TrainConfig ce_only = small_config();
  ce_only.no_scl = true;
  const TrainState a = train(full, small_data());
  const TrainState b = train(ce_only, small_data());
  for (const BatchRecord& r : b.report.batches) {
    CHECK(r.l_scl == 0.0);
    CHECK(r.l_total == doctest::Approx(ce_only.alpha * r.l_ce));
  }
  // Same init and batches, so the first step sees the same CE; the update differs.
  CHECK(a.report.batches[0].l_ce == b.report.batches[0].l_ce);
  CHECK(a.report.batches[1].l_ce != b.report.batches[1].l_ce);
}

TEST_CASE("without CE a linear probe supplies the head") {
  TrainConfig c = small_config();
  c.no_ce = true;
  const TrainState st = train(c, small_data());
  for (const BatchRecord& r : st.report.batches) {
    CHECK(r.l_ce >= 0.0);
    CHECK(r.l_total == doctest::Approx(r.l_scl));
  }
  CHECK(st.report.best_dev_acc > 0.5);
}

TEST_CASE("the concatenation ablation uses half-width representations") {
  TrainConfig c = small_config();
  c.no_crossattn = true;
  const TrainState st = train(c, small_data());
  CHECK(st.model.config.rep_dim() == 4 * c.k);
  const PairRep rep = represent(st.model, small_data().test[0]);
  CHECK(rep.z.size() == 4 * c.k);
  CHECK(represent(train(small_config(), small_data()).model, small_data().test[0]).z.size() ==
        8 * c.k);
}

TEST_CASE("a non-finite loss aborts with a dump of the batch") {
  TrainConfig c = small_config();
  c.tau = 1e-310;  // similarity logits overflow
  const fs::path dir = fs::temp_directory_path() / "paircl_test_nonfinite";
  fs::remove_all(dir);
  CHECK_THROWS_AS(train(c, small_data(), TrainOptions{.dump_dir = dir}), TrainingError);
  CHECK(fs::exists(dir / "nonfinite_batch.json"));
  fs::remove_all(dir);
}

TEST_CASE("probe fitting separates linearly separable representations") {
  TrainConfig c = small_config();
  Model m = init_model(c.model_config(), 5);
  const double before = accuracy(m, small_data().train);
  fit_probe(m, small_data().train, 300, 0.05);
  const double after = accuracy(m, small_data().train);
  CHECK(after >= before);
  CHECK(after > 0.4);
}
