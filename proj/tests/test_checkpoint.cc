// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iterator>

#include "paircl/checkpoint.h"
#include "paircl/errors.h"

using namespace paircl;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const char* name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

Settings small_settings() {
  Settings s;
  s.n_train = 300;
  s.n_dev = 90;
  s.n_test = 90;
  s.train.epochs = 4;
  s.train.batch_size = 30;
  s.train.k = 6;
  s.train.d = 5;
  return s;
}

bool same_params(const Model& a, const Model& b) {
  const auto pa = a.params();
  const auto pb = b.params();
  if (pa.size() != pb.size()) return false;
  for (std::size_t i = 0; i < pa.size(); ++i) {
    if (!std::ranges::equal(pa[i]->value.data(), pb[i]->value.data())) return false;
  }
  return true;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

void spit(const fs::path& p, const std::string& bytes) {
  std::ofstream f(p, std::ios::binary | std::ios::trunc);
  f << bytes;
}

}  // namespace

TEST_CASE("best checkpoint round-trips the model bit for bit") {
  TempDir tmp("paircl_ckpt_roundtrip");
  const Settings s = small_settings();
  const Splits data = generate(synth_config(s));
  const Vocab vocab = Vocab::synthetic(s.train.vocab_size);
  const TrainState st = train(s.train, data);
  save_best(tmp.path / "best.ckpt", st, s, vocab);

  const Model back = load_model(tmp.path / "best.ckpt");
  CHECK(same_params(back, st.best));
  CHECK(accuracy(back, data.test) == st.report.test_acc);

  const CheckpointInfo info = read_info(tmp.path / "best.ckpt");
  CHECK(info.kind == "best");
  CHECK(info.version == kCheckpointVersion);
  CHECK(info.completed_epochs == 4);
  CHECK(info.best_epoch == st.report.best_epoch);
  CHECK(info.test_acc == st.report.test_acc);
  CHECK(info.vocab.tokens() == vocab.tokens());
  CHECK(entries(info.settings, false) == entries(s, false));

  // Same state, same bytes.
  save_best(tmp.path / "again.ckpt", st, s, vocab);
  CHECK(slurp(tmp.path / "best.ckpt") == slurp(tmp.path / "again.ckpt"));
}

TEST_CASE("resuming from a last checkpoint equals an uninterrupted run") {
  TempDir tmp("paircl_ckpt_resume");
  Settings s = small_settings();
  s.train.epochs = 6;
  const Splits data = generate(synth_config(s));
  const Vocab vocab = Vocab::synthetic(s.train.vocab_size);
  const TrainState whole = train(s.train, data);

  TrainState first = init_training(s.train);
  train(first, data, TrainOptions{.stop_after = 3});
  save_last(tmp.path / "last.ckpt", first, s, vocab);

  TrainState resumed = load_state(tmp.path / "last.ckpt");
  CHECK(resumed.completed_epochs == 3);
  CHECK(resumed.adam.t == first.adam.t);
  train(resumed, data);
  CHECK(same_params(resumed.model, whole.model));
  CHECK(same_params(resumed.best, whole.best));
  CHECK(resumed.report.best_epoch == whole.report.best_epoch);
  CHECK(resumed.report.test_acc == whole.report.test_acc);
  REQUIRE(resumed.report.batches.size() == whole.report.batches.size());
  CHECK(resumed.report.batches.back().l_total == whole.report.batches.back().l_total);

  save_last(tmp.path / "a.ckpt", resumed, s, vocab);
  save_last(tmp.path / "b.ckpt", whole, s, vocab);
  CHECK(slurp(tmp.path / "a.ckpt") == slurp(tmp.path / "b.ckpt"));
}

TEST_CASE("a best checkpoint cannot be resumed") {
  TempDir tmp("paircl_ckpt_kind");
  const Settings s = small_settings();
  const TrainState st = init_training(s.train);
  save_best(tmp.path / "best.ckpt", st, s, Vocab::synthetic(s.train.vocab_size));
  CHECK_THROWS_AS(load_state(tmp.path / "best.ckpt"), CheckpointError);
}

TEST_CASE("shape mismatches name the offending tensor") {
  TempDir tmp("paircl_ckpt_shape");
  const Settings s = small_settings();
  const TrainState st = init_training(s.train);
  save_best(tmp.path / "best.ckpt", st, s, Vocab::synthetic(s.train.vocab_size));
  ModelConfig wrong = s.train.model_config();
  wrong.k = 7;
  try {
    (void)load_model(tmp.path / "best.ckpt", wrong);
    FAIL("expected CheckpointError");
  } catch (const CheckpointError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("tensor") != std::string::npos);
    CHECK(msg.find("(200x6)") != std::string::npos);
    CHECK(msg.find("(200x7)") != std::string::npos);
  }
}

TEST_CASE("corrupt containers are rejected") {
  TempDir tmp("paircl_ckpt_corrupt");
  const Settings s = small_settings();
  const TrainState st = init_training(s.train);
  const fs::path good = tmp.path / "good.ckpt";
  save_best(good, st, s, Vocab::synthetic(s.train.vocab_size));
  const std::string bytes = slurp(good);

  CHECK_THROWS_AS(read_info(tmp.path / "missing.ckpt"), CheckpointError);

  std::string bad = bytes;
  bad[0] = 'X';
  spit(tmp.path / "magic.ckpt", bad);
  CHECK_THROWS_WITH_AS(read_info(tmp.path / "magic.ckpt"), doctest::Contains("magic"),
                       CheckpointError);

  bad = bytes;
  bad[8] = 9;
  spit(tmp.path / "version.ckpt", bad);
  CHECK_THROWS_WITH_AS(read_info(tmp.path / "version.ckpt"), doctest::Contains("version 9"),
                       CheckpointError);

  spit(tmp.path / "short.ckpt", bytes.substr(0, bytes.size() - 8));
  CHECK_THROWS_WITH_AS(read_info(tmp.path / "short.ckpt"), doctest::Contains("payload"),
                       CheckpointError);

  spit(tmp.path / "tiny.ckpt", bytes.substr(0, 10));
  CHECK_THROWS_AS(read_info(tmp.path / "tiny.ckpt"), CheckpointError);
}

TEST_CASE("report json leaves out wall time") {
  const Settings s = small_settings();
  TrainState st = init_training(s.train);
  st.report.wall_seconds = 12.5;
  const std::string a = report_json(st.report, s);
  st.report.wall_seconds = 99.0;
  CHECK(report_json(st.report, s) == a);
  CHECK(a.find("wall") == std::string::npos);
}
