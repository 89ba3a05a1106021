#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "synco/augment/augment.hpp"
#include "synco/chem/smiles_parser.hpp"
#include "synco/chem/smiles_writer.hpp"
#include "synco/metrics/metrics.hpp"
#include "synco/mdp/environment.hpp"
#include "synco/qfunc/trainer.hpp"
#include "synco/search/policy.hpp"
#include "synco/util/error.hpp"

namespace synco {

using json = nlohmann::json;

inline constexpr int kEpisodeFormatVersion = 1;
inline constexpr int kPredictionFormatVersion = 1;
inline constexpr int kAugmentFormatVersion = 1;
inline constexpr std::uint32_t kCheckpointVersion = 1;
inline constexpr char kCheckpointMagic[8] = {'S', 'Y', 'N', 'C', 'O', 'Q', '0', '1'};

namespace detail {

/// SMILES with atom maps plus the permutation old index -> written index.
inline std::string write_indexed(const MolGraph &g, std::vector<int> &new_index) {
  std::vector<int> order;
  const std::string smi = write_smiles(g, {true, true}, &order);
  new_index.assign(g.num_atoms(), -1);
  for (int k = 0; k < static_cast<int>(order.size()); ++k) new_index[order[k]] = k;
  return smi;
}

inline json action_to_json(const Action &a, const std::vector<int> &new_index) {
  if (a.is_noop()) return nullptr;
  const int attach = a.attach < static_cast<int>(new_index.size()) ? new_index[a.attach] : a.attach;
  return json::array({std::string(symbol(a.element)), static_cast<int>(a.order), attach});
}

inline Action action_from_json(const json &j) {
  if (j.is_null()) return Action::noop();
  if (!j.is_array() || j.size() != 3) throw FormatError("malformed action record");
  const auto e = element_from_symbol(j[0].get<std::string>());
  if (!e) throw FormatError("unknown element in action record");
  const int o = j[1].get<int>();
  if (o < 1 || o > 3) throw FormatError("bad bond order in action record");
  return Action::add(*e, static_cast<BondOrder>(o), j[2].get<int>());
}

inline std::ifstream open_in(const std::string &path, std::ios::openmode mode = std::ios::in) {
  std::ifstream in(path, mode);
  if (!in) throw FormatError("cannot read '" + path + "'");
  return in;
}

inline std::ofstream open_out(const std::string &path, std::ios::openmode mode = std::ios::out) {
  std::ofstream out(path, mode | std::ios::trunc);
  if (!out) throw FormatError("cannot write '" + path + "'");
  return out;
}

inline json parse_json_line(const std::string &line, const std::string &path, int lineno) {
  try {
    return json::parse(line);
  } catch (const json::exception &e) {
    throw FormatError(path + ":" + std::to_string(lineno) + ": corrupt record (" + e.what() + ")");
  }
}

/// Reads a JSONL file whose first line is a header naming `format`; checks
/// the version and that exactly header.count records follow.
inline std::vector<json> read_jsonl(const std::string &path, const std::string &format, int version,
                                    json *header_out = nullptr) {
  auto in = open_in(path);
  std::string line;
  if (!std::getline(in, line)) throw FormatError("'" + path + "' is empty");
  const json header = parse_json_line(line, path, 1);
  if (!header.is_object() || header.value("format", "") != format) {
    throw FormatError("'" + path + "' is not a " + format + " file");
  }
  if (header.value("version", -1) != version) {
    throw FormatError("'" + path + "' has version " + header.value("version", json(-1)).dump() +
                      ", expected " + std::to_string(version));
  }
  const auto count = header.value("count", std::int64_t{-1});
  std::vector<json> records;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    records.push_back(parse_json_line(line, path, lineno));
  }
  if (count < 0 || static_cast<std::int64_t>(records.size()) != count) {
    throw FormatError("'" + path + "' is truncated or corrupt: header announces " +
                      std::to_string(count) + " records, found " + std::to_string(records.size()));
  }
  if (header_out) *header_out = header;
  return records;
}

inline void write_jsonl(const std::string &path, json header, const std::vector<json> &records) {
  header["count"] = records.size();
  auto out = open_out(path);
  out << header.dump() << '\n';
  for (const auto &r : records) out << r.dump() << '\n';
  if (!out) throw FormatError("write to '" + path + "' failed");
}

}  // namespace detail

// ---------------------------------------------------------------- episodes

inline json episode_to_json(const Episode &ep) {
  const State &s0 = ep.initial();
  json j;
  std::vector<int> product_index;
  j["product"] = detail::write_indexed(s0.product->graph, product_index);
  j["step_limit"] = s0.step_limit;
  j["steps_left"] = s0.steps_left;
  std::vector<int> index[2];
  json synthons = json::array();
  for (int i = 0; i < 2; ++i) {
    const MolGraph &g = s0.synthons[i]->graph;
    json sj;
    sj["smiles"] = detail::write_indexed(g, index[i]);
    std::vector<int> marks;
    for (int m : g.marks()) marks.push_back(index[i][m]);
    std::sort(marks.begin(), marks.end());
    sj["marks"] = marks;
    synthons.push_back(sj);
  }
  j["synthons"] = synthons;
  json actions = json::array();
  for (const auto &ja : ep.actions) {
    actions.push_back(json::array({detail::action_to_json(ja.first, index[0]),
                                   detail::action_to_json(ja.second, index[1])}));
  }
  j["actions"] = actions;
  j["reward"] = ep.reward;
  return j;
}

inline Episode episode_from_json(const json &j) {
  try {
    const int limit = j.at("step_limit").get<int>();
    const int left = j.at("steps_left").get<int>();
    if (limit < 1 || left < 0 || left > limit) throw FormatError("bad step counters in episode record");
    MolGraph synthons[2];
    for (int i = 0; i < 2; ++i) {
      const json &sj = j.at("synthons").at(i);
      synthons[i] = parse_smiles(sj.at("smiles").get<std::string>());
      for (int m : sj.at("marks").get<std::vector<int>>()) {
        if (m < 0 || m >= synthons[i].num_atoms()) throw FormatError("mark out of range in episode record");
        synthons[i].mark(m);
      }
    }
    const Environment env(std::nullopt, limit);
    State s0 = env.init_state(std::move(synthons[0]), std::move(synthons[1]),
                              parse_smiles(j.at("product").get<std::string>()), limit);
    s0.steps_left = left;
    std::vector<JointAction> actions;
    for (const auto &aj : j.at("actions")) {
      if (!aj.is_array() || aj.size() != 2) throw FormatError("malformed joint action record");
      actions.push_back({detail::action_from_json(aj[0]), detail::action_from_json(aj[1])});
    }
    if (static_cast<int>(actions.size()) != left) throw FormatError("episode record length mismatch");
    return env.replay(s0, std::move(actions), j.at("reward").get<int>());
  } catch (const json::exception &e) {
    throw FormatError(std::string("malformed episode record: ") + e.what());
  } catch (const ParseError &e) {
    throw FormatError(std::string("episode record holds bad SMILES: ") + e.what());
  } catch (const InvalidOperation &e) {
    throw FormatError(std::string("episode record does not replay: ") + e.what());
  }
}

inline void save_episodes(const std::string &path, std::span<const Episode> eps) {
  std::vector<json> records;
  records.reserve(eps.size());
  for (const auto &ep : eps) records.push_back(episode_to_json(ep));
  detail::write_jsonl(path, {{"format", "synco-episodes"}, {"version", kEpisodeFormatVersion}}, records);
}

inline std::vector<Episode> load_episodes(const std::string &path) {
  std::vector<Episode> out;
  for (const auto &r : detail::read_jsonl(path, "synco-episodes", kEpisodeFormatVersion)) {
    out.push_back(episode_from_json(r));
  }
  return out;
}

// ------------------------------------------------------------- checkpoints

namespace detail {
inline std::uint64_t fnv1a(const char *data, std::size_t n, std::uint64_t h = 0xcbf29ce484222325ULL) {
  for (std::size_t i = 0; i < n; ++i) {
    h ^= static_cast<unsigned char>(data[i]);
    h *= 0x100000001b3ULL;
  }
  return h;
}

class BinWriter {
 public:
  template <typename T>
  void put(const T &v) {
    raw(reinterpret_cast<const char *>(&v), sizeof(T));
  }
  void raw(const char *p, std::size_t n) { buf_.append(p, n); }
  const std::string &bytes() const { return buf_; }

 private:
  std::string buf_;
};

class BinReader {
 public:
  BinReader(const std::string &buf, std::string path) : buf_(buf), path_(std::move(path)) {}
  template <typename T>
  T get() {
    T v;
    raw(reinterpret_cast<char *>(&v), sizeof(T));
    return v;
  }
  void raw(char *p, std::size_t n) {
    if (pos_ + n > buf_.size()) throw FormatError("checkpoint '" + path_ + "' is truncated");
    std::memcpy(p, buf_.data() + pos_, n);
    pos_ += n;
  }
  std::size_t pos() const { return pos_; }

 private:
  const std::string &buf_;
  std::string path_;
  std::size_t pos_ = 0;
};
}  // namespace detail

/// Binary checkpoint: magic, version, layer sizes, hyperparameters, seed,
/// raw float parameters and a trailing FNV-1a checksum of everything before.
inline void save_checkpoint(const std::string &path, const QParams &p) {
  detail::BinWriter w;
  w.raw(kCheckpointMagic, sizeof kCheckpointMagic);
  w.put(kCheckpointVersion);
  const auto &sizes = p.network.sizes();
  w.put(static_cast<std::uint32_t>(sizes.size()));
  for (int s : sizes) w.put(static_cast<std::int32_t>(s));
  w.put(p.gamma);
  w.put(p.alpha);
  w.put(p.learning_rate);
  w.put(p.dropout);
  w.put(p.seed);
  for (const auto &l : p.network.layers()) {
    w.raw(reinterpret_cast<const char *>(l.weight.data()), sizeof(float) * l.weight.size());
    w.raw(reinterpret_cast<const char *>(l.bias.data()), sizeof(float) * l.bias.size());
  }
  const std::uint64_t sum = detail::fnv1a(w.bytes().data(), w.bytes().size());
  auto out = detail::open_out(path, std::ios::binary);
  out.write(w.bytes().data(), static_cast<std::streamsize>(w.bytes().size()));
  out.write(reinterpret_cast<const char *>(&sum), sizeof sum);
  if (!out) throw FormatError("write to '" + path + "' failed");
}

inline QParams load_checkpoint(const std::string &path) {
  auto in = detail::open_in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  const std::string buf = ss.str();
  detail::BinReader r(buf, path);
  char magic[8];
  r.raw(magic, sizeof magic);
  if (std::memcmp(magic, kCheckpointMagic, sizeof magic) != 0) {
    throw FormatError("'" + path + "' is not a synco checkpoint");
  }
  const auto version = r.get<std::uint32_t>();
  if (version != kCheckpointVersion) {
    throw FormatError("checkpoint '" + path + "' has version " + std::to_string(version) +
                      ", expected " + std::to_string(kCheckpointVersion));
  }
  const auto nsizes = r.get<std::uint32_t>();
  if (nsizes < 2 || nsizes > 64) throw FormatError("checkpoint '" + path + "' is corrupt");
  std::vector<int> sizes(nsizes);
  for (auto &s : sizes) {
    s = r.get<std::int32_t>();
    if (s < 1) throw FormatError("checkpoint '" + path + "' is corrupt");
  }
  std::size_t expected = 0;
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
    expected += static_cast<std::size_t>(sizes[l]) * sizes[l + 1] + sizes[l + 1];
  }
  QParams p;
  p.gamma = r.get<double>();
  p.alpha = r.get<double>();
  p.learning_rate = r.get<double>();
  p.dropout = r.get<double>();
  p.seed = r.get<std::uint64_t>();
  if (buf.size() != r.pos() + expected * sizeof(float) + sizeof(std::uint64_t)) {
    throw FormatError("checkpoint '" + path + "' is truncated or corrupt");
  }
  p.network = QNet::zeros(sizes);
  for (auto &l : p.network.layers()) {
    r.raw(reinterpret_cast<char *>(l.weight.data()), sizeof(float) * l.weight.size());
    r.raw(reinterpret_cast<char *>(l.bias.data()), sizeof(float) * l.bias.size());
  }
  const std::size_t body = r.pos();
  const auto sum = r.get<std::uint64_t>();
  if (sum != detail::fnv1a(buf.data(), body)) {
    throw FormatError("checkpoint '" + path + "' fails its checksum");
  }
  return p;
}

// ------------------------------------------------------------- predictions

/// Ranked predictions of one product, ready to be written.
struct PredictionRecord {
  std::string id;
  std::string product;
  std::vector<EvalRow> rows;
  bool has_rewards = false;
};

inline PredictionRecord to_record(const std::string &id, const Mol &product,
                                  const std::vector<RankedPrediction> &preds) {
  PredictionRecord rec;
  rec.id = id;
  rec.product = product.canonical;
  for (const auto &p : preds) {
    rec.rows.push_back({{p.reactants.mols[0]->canonical, p.reactants.mols[1]->canonical}, p.score, 0});
  }
  return rec;
}

inline void save_predictions(const std::string &path, const std::vector<PredictionRecord> &recs, int n_max) {
  std::vector<json> records;
  for (const auto &rec : recs) {
    json rows = json::array();
    for (const auto &row : rec.rows) {
      json rj{{"reactants", row.reactants}, {"score", row.score}};
      rj["reward"] = rec.has_rewards ? json(row.reward) : json(nullptr);
      rows.push_back(rj);
    }
    records.push_back({{"id", rec.id}, {"product", rec.product}, {"predictions", rows}});
  }
  detail::write_jsonl(path,
                      {{"format", "synco-predictions"}, {"version", kPredictionFormatVersion}, {"n_max", n_max}},
                      records);
}

/// Loads a prediction file; `n_max` receives the header's list length.
inline std::vector<PredictionRecord> load_predictions(const std::string &path, int *n_max = nullptr) {
  json header;
  const auto records = detail::read_jsonl(path, "synco-predictions", kPredictionFormatVersion, &header);
  std::vector<PredictionRecord> out;
  try {
    for (const auto &r : records) {
      PredictionRecord rec;
      rec.id = r.at("id").get<std::string>();
      rec.product = r.at("product").get<std::string>();
      rec.has_rewards = true;
      for (const auto &row : r.at("predictions")) {
        EvalRow er;
        er.reactants = row.at("reactants").get<std::vector<std::string>>();
        er.score = row.at("score").get<double>();
        if (row.contains("reward") && !row["reward"].is_null()) {
          er.reward = row["reward"].get<int>();
        } else {
          rec.has_rewards = false;
        }
        rec.rows.push_back(std::move(er));
      }
      out.push_back(std::move(rec));
    }
    if (n_max) *n_max = header.at("n_max").get<int>();
  } catch (const json::exception &e) {
    throw FormatError("malformed prediction file '" + path + "': " + e.what());
  }
  return out;
}

// ------------------------------------------------------------ bond table

inline void save_bond_table(const std::string &path, const BondTypeTable &t) {
  json entries = json::array();
  for (const auto &[a, b, o] : t.entries()) {
    entries.push_back(json::array({std::string(symbol(a)), std::string(symbol(b)), static_cast<int>(o)}));
  }
  auto out = detail::open_out(path);
  out << json{{"format", "synco-bond-table"}, {"version", 1}, {"entries", entries}}.dump() << '\n';
  if (!out) throw FormatError("write to '" + path + "' failed");
}

inline BondTypeTable load_bond_table(const std::string &path) {
  auto in = detail::open_in(path);
  BondTypeTable t;
  try {
    const json j = json::parse(in);
    if (j.value("format", "") != "synco-bond-table") throw FormatError("'" + path + "' is not a bond table");
    if (j.value("version", -1) != 1) throw FormatError("bond table '" + path + "' has an unsupported version");
    for (const auto &e : j.at("entries")) {
      const auto a = element_from_symbol(e.at(0).get<std::string>());
      const auto b = element_from_symbol(e.at(1).get<std::string>());
      const int o = e.at(2).get<int>();
      if (!a || !b || o < 1 || o > 4) throw FormatError("bad entry in bond table '" + path + "'");
      t.insert(*a, *b, static_cast<BondOrder>(o));
    }
  } catch (const json::exception &e) {
    throw FormatError("corrupt bond table '" + path + "': " + e.what());
  }
  return t;
}

// --------------------------------------------------------- augment state

/// Writes the loop state into `dir`: manifest.json, the current and best
/// checkpoints, the two episode sets and a per-iteration episode snapshot.
inline void save_augment_state(const std::string &dir, const AugmentState &st) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  const fs::path d(dir);
  save_checkpoint((d / "params.bin").string(), st.params);
  save_checkpoint((d / "best_params.bin").string(), st.best_params);
  save_episodes((d / "aug.jsonl").string(), st.aug.episodes());
  save_episodes((d / "aug_star.jsonl").string(), st.aug_star.episodes());
  const std::string snapshot = "episodes-iter-" + std::to_string(st.iteration) + ".jsonl";
  save_episodes((d / snapshot).string(), st.aug_star.episodes());
  json m{{"format", "synco-augment"},
         {"version", kAugmentFormatVersion},
         {"iteration", st.iteration},
         {"top_n_phase", st.top_n_phase},
         {"map", st.map},
         {"best_map", st.best_map},
         {"map_history", st.map_history},
         {"done", st.done},
         {"snapshot", snapshot}};
  auto out = detail::open_out((d / "manifest.json").string());
  out << m.dump(2) << '\n';
  if (!out) throw FormatError("write to manifest in '" + dir + "' failed");
}

inline AugmentState load_augment_state(const std::string &dir) {
  namespace fs = std::filesystem;
  const fs::path d(dir);
  auto in = detail::open_in((d / "manifest.json").string());
  json m;
  try {
    m = json::parse(in);
  } catch (const json::exception &e) {
    throw FormatError("corrupt augmentation manifest in '" + dir + "': " + e.what());
  }
  if (m.value("format", "") != "synco-augment") throw FormatError("'" + dir + "' holds no augmentation manifest");
  if (m.value("version", -1) != kAugmentFormatVersion) {
    throw FormatError("augmentation manifest in '" + dir + "' has an unsupported version");
  }
  AugmentState st;
  try {
    st.iteration = m.at("iteration").get<int>();
    st.top_n_phase = m.at("top_n_phase").get<bool>();
    st.map = m.at("map").get<double>();
    st.best_map = m.at("best_map").get<double>();
    st.map_history = m.at("map_history").get<std::vector<double>>();
    st.done = m.at("done").get<bool>();
  } catch (const json::exception &e) {
    throw FormatError("corrupt augmentation manifest in '" + dir + "': " + e.what());
  }
  st.params = load_checkpoint((d / "params.bin").string());
  st.best_params = load_checkpoint((d / "best_params.bin").string());
  const auto aug = load_episodes((d / "aug.jsonl").string());
  const auto aug_star = load_episodes((d / "aug_star.jsonl").string());
  st.aug.insert(aug);
  st.aug_star.insert(aug_star);
  return st;
}

}  // namespace synco
