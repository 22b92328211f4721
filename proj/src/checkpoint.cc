// SPDX-License-Identifier: Apache-2.0

#include "paircl/checkpoint.h"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <json.hpp>
#include <map>

#include "paircl/errors.h"

namespace paircl {

namespace {

using nlohmann::ordered_json;

constexpr char kMagic[8] = {'P', 'A', 'I', 'R', 'C', 'L', '\0', '\0'};

struct NamedMat {
  std::string name;
  const Mat* mat;
};

void put_u64(std::string& out, std::uint64_t x) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((x >> (8 * i)) & 0xff));
}

void put_u32(std::string& out, std::uint32_t x) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((x >> (8 * i)) & 0xff));
}

std::uint32_t get_u32(const std::string& in, std::size_t at) {
  std::uint32_t x = 0;
  for (int i = 0; i < 4; ++i) {
    x |= static_cast<std::uint32_t>(static_cast<unsigned char>(in[at + i])) << (8 * i);
  }
  return x;
}

std::uint64_t get_u64(const std::string& in, std::size_t at) {
  std::uint64_t x = 0;
  for (int i = 0; i < 8; ++i) {
    x |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[at + i])) << (8 * i);
  }
  return x;
}

ordered_json epochs_json(const RunReport& r) {
  ordered_json out = ordered_json::array();
  for (const EpochRecord& e : r.epochs) {
    out.push_back({{"epoch", e.epoch},
                   {"l_scl", e.l_scl},
                   {"l_ce", e.l_ce},
                   {"l_total", e.l_total},
                   {"skipped_anchors", e.skipped_anchors},
                   {"batches", e.batches},
                   {"dev_acc", e.dev_acc}});
  }
  return out;
}

ordered_json batches_json(const RunReport& r) {
  ordered_json out = ordered_json::array();
  for (const BatchRecord& b : r.batches) {
    out.push_back({b.epoch, b.batch, b.l_scl, b.l_ce, b.l_total, b.skipped_anchors});
  }
  return out;
}

ordered_json config_json(const Settings& s) {
  ordered_json out = ordered_json::object();
  for (const auto& [k, v] : entries(s, false)) out[k] = v;
  return out;
}

ordered_json report_object(const RunReport& r, bool with_batches) {
  ordered_json out;
  out["best_epoch"] = r.best_epoch;
  out["best_dev_acc"] = r.best_dev_acc;
  out["test_acc"] = r.test_acc;
  out["epochs"] = epochs_json(r);
  if (with_batches) out["batches"] = batches_json(r);
  return out;
}

void write_container(const std::filesystem::path& path, ordered_json header,
                     const std::vector<NamedMat>& tensors) {
  ordered_json list = ordered_json::array();
  for (const auto& t : tensors) {
    list.push_back({{"name", t.name}, {"rows", t.mat->rows()}, {"cols", t.mat->cols()}});
  }
  header["tensors"] = std::move(list);
  const std::string text = header.dump();

  std::string out(kMagic, sizeof kMagic);
  put_u32(out, kCheckpointVersion);
  put_u64(out, text.size());
  out += text;
  for (const auto& t : tensors) {
    for (double x : t.mat->data()) put_u64(out, std::bit_cast<std::uint64_t>(x));
  }
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw CheckpointError("cannot write checkpoint " + path.string());
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw CheckpointError("failed writing checkpoint " + path.string());
}

ordered_json base_header(const char* kind, const TrainState& st, const Settings& settings,
                         const Vocab& vocab) {
  ordered_json h;
  h["kind"] = kind;
  h["config"] = config_json(settings);
  h["vocab"] = vocab.tokens();
  h["unk_id"] = vocab.unk_id();
  h["completed_epochs"] = st.completed_epochs;
  h["adam_t"] = st.adam.t;
  return h;
}

std::vector<NamedMat> model_tensors(const Model& m, const std::string& prefix = "") {
  std::vector<NamedMat> out;
  for (const Param* p : m.params()) out.push_back({prefix + p->name, &p->value});
  return out;
}

struct Loaded {
  CheckpointInfo info;
  ordered_json header;
  std::map<std::string, Mat> tensors;
};

Loaded read_container(const std::filesystem::path& path, bool with_payload) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw CheckpointError("cannot open checkpoint " + path.string());
  const std::string in((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  const std::string where = "checkpoint " + path.string() + ": ";
  if (in.size() < 20 || std::memcmp(in.data(), kMagic, sizeof kMagic) != 0) {
    throw CheckpointError(where + "not a checkpoint (bad magic)");
  }
  Loaded out;
  out.info.version = get_u32(in, 8);
  if (out.info.version != kCheckpointVersion) {
    throw CheckpointError(where + "unsupported version " + std::to_string(out.info.version) +
                          " (expected " + std::to_string(kCheckpointVersion) + ")");
  }
  const std::uint64_t hlen = get_u64(in, 12);
  if (hlen > in.size() - 20) throw CheckpointError(where + "truncated header");
  try {
    out.header = ordered_json::parse(in.substr(20, hlen));
    const ordered_json& h = out.header;
    CheckpointInfo& info = out.info;
    info.kind = h.at("kind").get<std::string>();
    for (const auto& [k, v] : h.at("config").items()) set_key(info.settings, k, v.get<std::string>());
    info.vocab = Vocab(h.at("vocab").get<std::vector<std::string>>(), h.at("unk_id").get<int>());
    info.completed_epochs = h.at("completed_epochs").get<int>();
    info.adam_t = h.at("adam_t").get<long>();
    const auto& rep = h.at("report");
    info.best_epoch = rep.at("best_epoch").get<int>();
    info.best_dev_acc = rep.at("best_dev_acc").get<double>();
    info.test_acc = rep.at("test_acc").get<double>();
    for (const auto& t : h.at("tensors")) {
      info.tensors.push_back({t.at("name").get<std::string>(), t.at("rows").get<std::size_t>(),
                              t.at("cols").get<std::size_t>()});
    }
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(where + "bad header: " + e.what());
  } catch (const ConfigError& e) {
    throw CheckpointError(where + "bad config: " + e.what());
  }

  std::size_t at = 20 + hlen;
  std::size_t need = 0;
  for (const auto& t : out.info.tensors) need += t.rows * t.cols * 8;
  if (in.size() - at != need) {
    throw CheckpointError(where + "payload is " + std::to_string(in.size() - at) +
                          " bytes, header describes " + std::to_string(need));
  }
  if (!with_payload) return out;
  for (const auto& t : out.info.tensors) {
    Mat m(t.rows, t.cols);
    for (double& x : m.data()) {
      x = std::bit_cast<double>(get_u64(in, at));
      at += 8;
    }
    out.tensors.emplace(t.name, std::move(m));
  }
  return out;
}

void fill(Param& p, const std::map<std::string, Mat>& tensors, const std::string& name,
          const std::filesystem::path& path) {
  auto it = tensors.find(name);
  if (it == tensors.end()) {
    throw CheckpointError("checkpoint " + path.string() + ": missing tensor " + name);
  }
  if (it->second.rows() != p.value.rows() || it->second.cols() != p.value.cols()) {
    throw CheckpointError("checkpoint " + path.string() + ": tensor " + name + " has shape " +
                          it->second.shape_str() + ", model expects " + p.value.shape_str());
  }
  p.value = it->second;
}

Model model_from(const Loaded& l, const ModelConfig& cfg, const std::filesystem::path& path,
                 const std::string& prefix) {
  Model m = init_model(cfg, 0);
  for (Param* p : m.params()) fill(*p, l.tensors, prefix + p->name, path);
  return m;
}

ModelConfig stored_model_config(const CheckpointInfo& info) {
  return info.settings.train.model_config();
}

}  // namespace

std::string report_json(const RunReport& report, const Settings& settings) {
  ordered_json out;
  out["config"] = config_json(settings);
  const ordered_json r = report_object(report, true);
  for (const auto& [k, v] : r.items()) out[k] = v;
  return out.dump(2) + "\n";
}

void save_best(const std::filesystem::path& path, const TrainState& state,
               const Settings& settings, const Vocab& vocab) {
  ordered_json h = base_header("best", state, settings, vocab);
  h["report"] = report_object(state.report, false);
  write_container(path, std::move(h), model_tensors(state.best));
}

void save_last(const std::filesystem::path& path, const TrainState& state,
               const Settings& settings, const Vocab& vocab) {
  ordered_json h = base_header("last", state, settings, vocab);
  h["report"] = report_object(state.report, true);
  std::vector<NamedMat> tensors = model_tensors(state.model);
  const auto params = state.model.params();
  for (std::size_t i = 0; i < params.size(); ++i) {
    tensors.push_back({"adam.m." + params[i]->name, &state.adam.m[i]});
    tensors.push_back({"adam.v." + params[i]->name, &state.adam.v[i]});
  }
  for (const NamedMat& t : model_tensors(state.best, "best.")) tensors.push_back(t);
  write_container(path, std::move(h), tensors);
}

CheckpointInfo read_info(const std::filesystem::path& path) {
  return read_container(path, false).info;
}

Model load_model(const std::filesystem::path& path) {
  const Loaded l = read_container(path, true);
  return model_from(l, stored_model_config(l.info), path, "");
}

Model load_model(const std::filesystem::path& path, const ModelConfig& expected) {
  const Loaded l = read_container(path, true);
  return model_from(l, expected, path, "");
}

TrainState load_state(const std::filesystem::path& path) {
  const Loaded l = read_container(path, true);
  if (l.info.kind != "last") {
    throw CheckpointError("checkpoint " + path.string() + ": kind \"" + l.info.kind +
                          "\" cannot be resumed (need \"last\")");
  }
  const TrainConfig& cfg = l.info.settings.train;
  TrainState st;
  st.model = model_from(l, cfg.model_config(), path, "");
  st.best = model_from(l, cfg.model_config(), path, "best.");
  st.adam = init_adam(st.model.params(), cfg.adam());
  st.adam.t = l.info.adam_t;
  const auto params = st.model.params();
  for (std::size_t i = 0; i < params.size(); ++i) {
    Param m = *params[i], v = *params[i];
    fill(m, l.tensors, "adam.m." + params[i]->name, path);
    fill(v, l.tensors, "adam.v." + params[i]->name, path);
    st.adam.m[i] = m.value;
    st.adam.v[i] = v.value;
  }
  st.completed_epochs = l.info.completed_epochs;

  RunReport& r = st.report;
  r.config = cfg;
  r.best_epoch = l.info.best_epoch;
  r.best_dev_acc = l.info.best_dev_acc;
  r.test_acc = l.info.test_acc;
  const auto& rep = l.header.at("report");
  for (const auto& e : rep.at("epochs")) {
    r.epochs.push_back({e.at("epoch").get<int>(), e.at("l_scl").get<double>(),
                        e.at("l_ce").get<double>(), e.at("l_total").get<double>(),
                        e.at("skipped_anchors").get<std::size_t>(),
                        e.at("batches").get<std::size_t>(), e.at("dev_acc").get<double>()});
  }
  for (const auto& b : rep.at("batches")) {
    r.batches.push_back({b[0].get<int>(), b[1].get<std::size_t>(), b[2].get<double>(),
                         b[3].get<double>(), b[4].get<double>(), b[5].get<std::size_t>()});
  }
  return st;
}

}  // namespace paircl
